//! TOML run configuration with preset inheritance.
//!
//! A document may name a parent through the top-level `extends` key, either a
//! builtin preset (`"default"`) or a path relative to the including file.
//! Tables are merged key by key, the child winning. Every key has a default,
//! so an empty document yields the full reference parameter set.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::array::{from_db10, ArrayGeometry, C64};
use crate::beamformer::{AngleInterval, DesignSpec, WeightSet};
use crate::error::{ConfigIssue, Error, Result};
use crate::scene::{constant_symbol_stream, random_symbol_stream, SceneConfig};

const DEFAULT_PRESET: &str = include_str!("../../presets/default.toml");
const MAX_EXTENDS_DEPTH: usize = 16;

pub fn builtin_preset(name: &str) -> Option<&'static str> {
    match name {
        "default" => Some(DEFAULT_PRESET),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub seed: u64,
    /// Overrides the scenario's own Monte-Carlo count.
    pub trials: Option<usize>,
    pub array: ArraySection,
    pub design: DesignSection,
    pub scene: SceneSection,
    pub processing: ProcessingSection,
    pub bench: BenchSection,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 42,
            trials: None,
            array: ArraySection::default(),
            design: DesignSection::default(),
            scene: SceneSection::default(),
            processing: ProcessingSection::default(),
            bench: BenchSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArraySection {
    pub num_elements: usize,
    /// Element spacing in wavelengths.
    pub spacing_ratio: f64,
}

impl Default for ArraySection {
    fn default() -> Self {
        Self {
            num_elements: 10,
            spacing_ratio: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DesignSection {
    pub target_angle: f64,
    pub comm_angle: f64,
    pub sidelobe_region: Vec<[f64; 2]>,
    pub sidelobe_grid_step: f64,
    pub comm_level: f64,
    pub num_symbols: usize,
    pub similarity_bound: f64,
    pub feasibility_tolerance: f64,
}

impl Default for DesignSection {
    fn default() -> Self {
        Self {
            target_angle: 0.0,
            comm_angle: -50.0,
            sidelobe_region: vec![[-90.0, -10.0], [10.0, 90.0]],
            sidelobe_grid_step: 1.0,
            comm_level: 1e-2,
            num_symbols: 4,
            similarity_bound: 0.016,
            feasibility_tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StreamKind {
    Random,
    Constant,
}

/// `"random"`, `"constant"` or an explicit list of 1-based symbol indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StreamSpec {
    Named(StreamKind),
    Explicit(Vec<usize>),
}

/// Real amplitude or `[re, im]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Amplitude {
    Real(f64),
    Complex([f64; 2]),
}

impl Amplitude {
    pub fn value(self) -> C64 {
        match self {
            Amplitude::Real(a) => C64::new(a, 0.0),
            Amplitude::Complex([re, im]) => C64::new(re, im),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneSection {
    pub num_pulses: usize,
    pub symbol_stream: StreamSpec,
    pub target_doppler: f64,
    pub target_amplitude: Amplitude,
    pub clutter_region: [f64; 2],
    pub num_patches: usize,
    pub clutter_power_db: f64,
    pub noise_power_db: f64,
    pub doppler_center: f64,
    pub doppler_spread: f64,
}

impl Default for SceneSection {
    fn default() -> Self {
        Self {
            num_pulses: 40,
            symbol_stream: StreamSpec::Named(StreamKind::Random),
            target_doppler: 0.4,
            target_amplitude: Amplitude::Real(10f64.powf(5.0 / 20.0)),
            clutter_region: [-60.0, 60.0],
            num_patches: 100,
            clutter_power_db: 50.0,
            noise_power_db: 0.0,
            doppler_center: 0.0,
            doppler_spread: 0.008,
        }
    }
}

impl SceneSection {
    pub fn clutter_power(&self) -> f64 {
        from_db10(self.clutter_power_db)
    }

    pub fn noise_power(&self) -> f64 {
        from_db10(self.noise_power_db)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProcessingSection {
    pub doppler_bins: usize,
    pub angle_bins: usize,
    pub eigen_tolerance: f64,
    pub eigen_max_iter: usize,
}

impl Default for ProcessingSection {
    fn default() -> Self {
        Self {
            doppler_bins: 512,
            angle_bins: 181,
            eigen_tolerance: 1e-9,
            eigen_max_iter: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchSection {
    pub n: usize,
    pub rank: usize,
    pub trials: usize,
    pub warmup: usize,
}

impl Default for BenchSection {
    fn default() -> Self {
        Self {
            n: 40,
            rank: 14,
            trials: 3000,
            warmup: 20,
        }
    }
}

impl Config {
    pub fn geometry(&self) -> Result<ArrayGeometry> {
        ArrayGeometry::new(self.array.num_elements, self.array.spacing_ratio)
    }

    pub fn design_spec(&self) -> Result<DesignSpec> {
        let d = &self.design;
        Ok(DesignSpec {
            geom: self.geometry()?,
            target_angle: d.target_angle,
            comm_angle: d.comm_angle,
            sidelobe_region: d
                .sidelobe_region
                .iter()
                .map(|&[a, b]| AngleInterval::new(a, b))
                .collect(),
            sidelobe_grid_step: d.sidelobe_grid_step,
            comm_level: d.comm_level,
            num_symbols: d.num_symbols,
            similarity_bound: d.similarity_bound,
            feasibility_tolerance: d.feasibility_tolerance,
        })
    }

    /// Symbol schedule for the configured stream. Random streams draw from
    /// `stream_seed`.
    pub fn symbol_stream(&self, stream_seed: u64) -> Vec<usize> {
        let n = self.scene.num_pulses;
        match &self.scene.symbol_stream {
            StreamSpec::Named(StreamKind::Random) => random_symbol_stream(self.design.num_symbols, n, stream_seed),
            StreamSpec::Named(StreamKind::Constant) => constant_symbol_stream(n),
            StreamSpec::Explicit(list) => list.clone(),
        }
    }

    pub fn scene_config(&self, weight_set: WeightSet, symbol_stream: Vec<usize>, rng_seed: u64) -> Result<SceneConfig> {
        let s = &self.scene;
        Ok(SceneConfig {
            geom: self.geometry()?,
            num_pulses: s.num_pulses,
            weight_set,
            symbol_stream,
            target_angle: self.design.target_angle,
            target_doppler: s.target_doppler,
            target_amplitude: s.target_amplitude.value(),
            clutter_region: AngleInterval::new(s.clutter_region[0], s.clutter_region[1]),
            num_patches: s.num_patches,
            clutter_power: s.clutter_power(),
            doppler_centers: vec![s.doppler_center],
            doppler_spread: s.doppler_spread,
            noise_power: s.noise_power(),
            rng_seed,
        })
    }

    /// Every violated invariant, in document order.
    pub fn issues(&self) -> Vec<ConfigIssue> {
        let mut out = Vec::new();
        let mut check = |ok: bool, field: &str, reason: String| {
            if !ok {
                out.push(ConfigIssue::new(field, reason));
            }
        };
        let angle_ok = |a: f64| (-90.0..=90.0).contains(&a);
        let doppler_ok = |p: f64| (-0.5..=0.5).contains(&p);

        if let Some(t) = self.trials {
            check(t >= 1, "trials", "must be at least 1".into());
        }

        let a = &self.array;
        check(a.num_elements >= 1, "array.num_elements", "must be at least 1".into());
        check(
            a.spacing_ratio.is_finite() && a.spacing_ratio > 0.0,
            "array.spacing_ratio",
            format!("must be positive, got {}", a.spacing_ratio),
        );

        let d = &self.design;
        check(angle_ok(d.target_angle), "design.target_angle", format!("{} outside [-90, 90]", d.target_angle));
        check(angle_ok(d.comm_angle), "design.comm_angle", format!("{} outside [-90, 90]", d.comm_angle));
        check(!d.sidelobe_region.is_empty(), "design.sidelobe_region", "needs at least one interval".into());
        for (i, &[lo, hi]) in d.sidelobe_region.iter().enumerate() {
            check(
                lo <= hi && angle_ok(lo) && angle_ok(hi),
                &format!("design.sidelobe_region[{i}]"),
                format!("[{lo}, {hi}] is not an ordered interval within [-90, 90]"),
            );
            check(
                !(lo..=hi).contains(&d.target_angle),
                &format!("design.sidelobe_region[{i}]"),
                format!("contains the target angle {}", d.target_angle),
            );
        }
        check(
            d.sidelobe_grid_step > 0.0 && d.sidelobe_grid_step.is_finite(),
            "design.sidelobe_grid_step",
            "must be positive".into(),
        );
        check(d.comm_level > 0.0 && d.comm_level.is_finite(), "design.comm_level", "must be positive".into());
        check(
            d.num_symbols.is_power_of_two(),
            "design.num_symbols",
            format!("{} is not a power of two", d.num_symbols),
        );
        check(d.similarity_bound >= 0.0, "design.similarity_bound", "must be non-negative".into());
        check(d.feasibility_tolerance > 0.0, "design.feasibility_tolerance", "must be positive".into());

        let s = &self.scene;
        check(s.num_pulses >= 2, "scene.num_pulses", format!("must be at least 2, got {}", s.num_pulses));
        check(doppler_ok(s.target_doppler), "scene.target_doppler", format!("{} outside [-0.5, 0.5]", s.target_doppler));
        let amp = s.target_amplitude.value();
        check(amp.re.is_finite() && amp.im.is_finite(), "scene.target_amplitude", "must be finite".into());
        let [lo, hi] = s.clutter_region;
        check(
            lo <= hi && angle_ok(lo) && angle_ok(hi),
            "scene.clutter_region",
            format!("[{lo}, {hi}] is not an ordered interval within [-90, 90]"),
        );
        check(s.num_patches >= 1, "scene.num_patches", "must be at least 1".into());
        check(s.clutter_power_db.is_finite(), "scene.clutter_power_db", "must be finite".into());
        check(s.noise_power_db.is_finite(), "scene.noise_power_db", "must be finite".into());
        check(doppler_ok(s.doppler_center), "scene.doppler_center", format!("{} outside [-0.5, 0.5]", s.doppler_center));
        check(
            s.doppler_spread >= 0.0 && s.doppler_spread.is_finite(),
            "scene.doppler_spread",
            format!("must be non-negative, got {}", s.doppler_spread),
        );
        if let StreamSpec::Explicit(list) = &s.symbol_stream {
            check(
                list.len() == s.num_pulses,
                "scene.symbol_stream",
                format!("has {} entries, expected {}", list.len(), s.num_pulses),
            );
            if let Some(bad) = list.iter().find(|&&k| k == 0 || k > d.num_symbols) {
                check(false, "scene.symbol_stream", format!("symbol {bad} outside 1..={}", d.num_symbols));
            }
        }

        let p = &self.processing;
        check(p.doppler_bins >= 2, "processing.doppler_bins", "must be at least 2".into());
        check(p.angle_bins >= 2, "processing.angle_bins", "must be at least 2".into());
        check(p.eigen_tolerance > 0.0, "processing.eigen_tolerance", "must be positive".into());
        check(p.eigen_max_iter >= 1, "processing.eigen_max_iter", "must be at least 1".into());

        let b = &self.bench;
        check(b.n >= 1, "bench.n", "must be at least 1".into());
        check(b.rank < b.n, "bench.rank", format!("must be below n = {}", b.n));
        check(b.trials >= 1, "bench.trials", "must be at least 1".into());
        out
    }

    pub fn validate(&self) -> Result<()> {
        let issues = self.issues();
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(issues))
        }
    }
}

/// Parses, resolves `extends`, fills defaults and validates a document.
/// Relative `extends` paths resolve against `base_dir`.
pub fn validate_config(text: &str, base_dir: &Path) -> Result<Config> {
    let origin = PathBuf::from("<config>");
    let table = resolve(text, &origin, base_dir, &mut HashSet::new(), 0)?;
    let config = from_table(table)?;
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<Config> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut seen = HashSet::new();
    if let Ok(canon) = path.canonicalize() {
        seen.insert(canon);
    }
    let table = resolve(&text, path, base, &mut seen, 0)?;
    let config = from_table(table)?;
    config.validate()?;
    Ok(config)
}

fn from_table(table: toml::Table) -> Result<Config> {
    Config::deserialize(table).map_err(|e| Error::Config(vec![ConfigIssue::new("document", e.to_string().trim())]))
}

fn resolve(
    text: &str,
    origin: &Path,
    base_dir: &Path,
    seen: &mut HashSet<PathBuf>,
    depth: usize,
) -> Result<toml::Table> {
    if depth > MAX_EXTENDS_DEPTH {
        return Err(Error::Config(vec![ConfigIssue::new("extends", "inheritance chain too deep")]));
    }
    let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse {
        path: origin.to_path_buf(),
        message: e.to_string().trim().to_string(),
    })?;
    let parent = match table.remove("extends") {
        None => return Ok(table),
        Some(toml::Value::String(name)) => name,
        Some(_) => return Err(Error::Config(vec![ConfigIssue::new("extends", "must be a string")])),
    };
    let parent_table = if let Some(preset) = builtin_preset(&parent) {
        resolve(preset, Path::new(&parent), base_dir, seen, depth + 1)?
    } else {
        let path = base_dir.join(&parent);
        let key = path.canonicalize().unwrap_or_else(|_| path.clone());
        if !seen.insert(key) {
            return Err(Error::Config(vec![ConfigIssue::new(
                "extends",
                format!("cycle through {}", path.display()),
            )]));
        }
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        resolve(&text, &path, &dir, seen, depth + 1)?
    };
    Ok(merge(parent_table, table))
}

/// Deep merge; scalars and arrays from `child` replace those in `base`.
pub fn merge(mut base: toml::Table, child: toml::Table) -> toml::Table {
    for (key, value) in child {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(c)) => {
                let merged = merge(std::mem::take(b), c);
                *b = merged;
            }
            (_, value) => {
                base.insert(key, value);
            }
        }
    }
    base
}
