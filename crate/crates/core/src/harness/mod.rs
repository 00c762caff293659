//! Scenario registry, run configuration and artifact writing.

pub mod bench;
pub mod config;
pub mod output;
pub mod pipeline;
mod scenarios;

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use bench::{bench_eigensolvers, low_rank_plus_identity, BenchResult, TimingRecord};
pub use config::{load_config, validate_config, Config};
pub use output::{ManifestEntry, OutputDir};

type Runner = fn(&mut scenarios::Context<'_>) -> Result<()>;

#[derive(Debug, Clone, Copy)]
pub struct ScenarioInfo {
    pub name: &'static str,
    pub description: &'static str,
    /// Monte-Carlo count when neither the config nor the caller sets one.
    pub default_trials: usize,
    runner: Runner,
}

pub const SCENARIOS: &[ScenarioInfo] = &[
    ScenarioInfo {
        name: "fig2",
        description: "transmit beampatterns, constellation toward the receiver and weights",
        default_trials: 1,
        runner: scenarios::fig2,
    },
    ScenarioInfo {
        name: "fig3",
        description: "covariance eigenvalues and clutter ranks, constant vs modulated stream",
        default_trials: 1,
        runner: scenarios::fig3,
    },
    ScenarioInfo {
        name: "fig4",
        description: "Doppler response on the target beam, recovery rates and clutter suppression",
        default_trials: 100,
        runner: scenarios::fig4,
    },
    ScenarioInfo {
        name: "fig5",
        description: "output SINR over Doppler for every filter",
        default_trials: 1,
        runner: scenarios::fig5,
    },
    ScenarioInfo {
        name: "fig6",
        description: "angle-Doppler maps, constant stream",
        default_trials: 1,
        runner: scenarios::fig6,
    },
    ScenarioInfo {
        name: "fig7",
        description: "angle-Doppler maps, modulated stream",
        default_trials: 1,
        runner: scenarios::fig7,
    },
    ScenarioInfo {
        name: "bench_eig",
        description: "power method vs full decomposition timing at N and 2N",
        default_trials: 0,
        runner: scenarios::bench_eig,
    },
    ScenarioInfo {
        name: "custom",
        description: "configured stream only: spectrum, SINR, covariance and one data cube",
        default_trials: 1,
        runner: scenarios::custom,
    },
];

pub fn find_scenario(name: &str) -> Result<&'static ScenarioInfo> {
    SCENARIOS
        .iter()
        .find(|s| s.name == name)
        .ok_or_else(|| Error::UnknownScenario(name.to_string()))
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub config: Config,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub out_dir: PathBuf,
}

impl RunOptions {
    pub fn new(config: Config, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            config,
            seed: None,
            trials: None,
            out_dir: out_dir.into(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub seed: u64,
    pub trials: usize,
    /// SHA-256 of the canonical JSON of scenario, seed, trials and config.
    pub param_hash: String,
    pub config: Config,
    pub files: Vec<ManifestEntry>,
    pub summary: Map<String, Value>,
    pub wall_clock_s: f64,
}

impl RunReport {
    pub fn metric(&self, key: &str) -> Option<f64> {
        self.summary.get(key).and_then(Value::as_f64)
    }
}

pub fn param_hash(scenario: &str, config: &Config, trials: usize) -> String {
    let canonical = serde_json::json!({
        "scenario": scenario,
        "trials": trials,
        "config": config,
    });
    let digest = Sha256::digest(canonical.to_string().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Runs one scenario into `options.out_dir`. On error nothing but the
/// directory itself is left behind.
pub fn run_scenario(name: &str, options: &RunOptions) -> Result<RunReport> {
    let info = find_scenario(name)?;
    let mut config = options.config.clone();
    if let Some(seed) = options.seed {
        config.seed = seed;
    }
    if let Some(trials) = options.trials {
        config.trials = Some(trials);
    }
    config.validate()?;
    let default_trials = if info.name == "bench_eig" {
        config.bench.trials
    } else {
        info.default_trials
    };
    let trials = config.trials.unwrap_or(default_trials);

    let hash = param_hash(info.name, &config, trials);
    let comment = format!("scenario={} seed={} trials={} params={}", info.name, config.seed, trials, hash);
    let start = Instant::now();
    let mut out = OutputDir::create(&options.out_dir, comment)?;
    let mut ctx = scenarios::Context {
        config: &config,
        trials,
        out: &mut out,
        summary: Map::new(),
    };
    (info.runner)(&mut ctx).map_err(|e| Error::Scenario {
        scenario: info.name.to_string(),
        source: Box::new(e),
    })?;
    let summary = std::mem::take(&mut ctx.summary);
    let files = out.commit()?;

    let report = RunReport {
        scenario: info.name.to_string(),
        seed: config.seed,
        trials,
        param_hash: hash,
        config,
        files,
        summary,
        wall_clock_s: start.elapsed().as_secs_f64(),
    };
    write_report(&options.out_dir, &report)?;
    Ok(report)
}

fn write_report(dir: &Path, report: &RunReport) -> Result<()> {
    let path = dir.join("report.json");
    let partial = dir.join("report.json.partial");
    let text = serde_json::to_string_pretty(report).map_err(|e| Error::Parse {
        path: path.clone(),
        message: e.to_string(),
    })?;
    std::fs::write(&partial, text + "\n").map_err(|e| Error::io(&partial, e))?;
    std::fs::rename(&partial, &path).map_err(|e| Error::io(&path, e))
}
