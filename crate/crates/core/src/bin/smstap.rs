use std::error::Error as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use smstap::harness::{find_scenario, load_config, run_scenario, Config, RunOptions, RunReport, SCENARIOS};
use smstap::Result;

#[derive(Parser)]
#[command(name = "smstap", version, about = "Spatial-modulation clutter mitigation scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a registered scenario.
    Run {
        scenario: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        /// Parent directory; outputs go to `<out>/<scenario>`.
        #[arg(long, env = "SMSTAP_OUT_DIR", default_value = "out")]
        out: PathBuf,
    },
    /// Time the power method against the full decomposition.
    BenchEig {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        rank: Option<usize>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, env = "SMSTAP_OUT_DIR", default_value = "out")]
        out: PathBuf,
    },
    /// Check a config file and print the resolved parameters.
    Validate { config: PathBuf },
    ListScenarios,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            let mut source = err.source();
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Run {
            scenario,
            config,
            seed,
            trials,
            out,
        } => {
            find_scenario(&scenario)?;
            let config = match config {
                Some(path) => load_config(&path)?,
                None => Config::default(),
            };
            let options = RunOptions {
                config,
                seed,
                trials,
                out_dir: out.join(&scenario),
            };
            print_report(&run_scenario(&scenario, &options)?, &options.out_dir);
        }
        Command::BenchEig {
            n,
            rank,
            trials,
            seed,
            out,
        } => {
            let mut config = Config::default();
            if let Some(n) = n {
                config.bench.n = n;
            }
            if let Some(rank) = rank {
                config.bench.rank = rank;
            }
            let options = RunOptions {
                config,
                seed,
                trials,
                out_dir: out.join("bench_eig"),
            };
            print_report(&run_scenario("bench_eig", &options)?, &options.out_dir);
        }
        Command::Validate { config } => {
            let resolved = load_config(&config)?;
            let text = toml::to_string(&resolved).unwrap_or_else(|e| format!("# unprintable: {e}\n"));
            println!("{}: ok", config.display());
            print!("{text}");
        }
        Command::ListScenarios => {
            for s in SCENARIOS {
                println!("{:<10} {}", s.name, s.description);
            }
        }
    }
    Ok(())
}

fn print_report(report: &RunReport, dir: &std::path::Path) {
    println!(
        "{}: seed {} trials {} in {:.2} s -> {}",
        report.scenario,
        report.seed,
        report.trials,
        report.wall_clock_s,
        dir.display()
    );
    for (key, value) in &report.summary {
        println!("  {key} = {value}");
    }
}
