//! `hmc-lab` command line: run, validate and list experiments driven by a
//! TOML config file.

mod config;
mod run;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::{
    load_config, parse_config, AssumptionChoice, ConfigErrors, Experiment, ExperimentConfig, Params, TvStartChoice,
};
pub use run::{execute, exit_code, run_experiment, Artifacts, Outcome, EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC, EXIT_OK, EXIT_VERIFY};

#[derive(Debug, Parser)]
#[command(name = "hmc-lab", version, about = "Numerical diagnostics for Hamiltonian Monte Carlo")]
struct Cli {
    /// Worker threads for Monte Carlo fan-out (default: logical CPUs).
    /// `HMC_LAB_WORKERS` takes precedence.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run { config: PathBuf },
    /// Check a config file and report every problem found.
    Validate { config: PathBuf },
    /// Print the available experiments.
    ListExperiments,
}

/// Resolves the worker count: env var, then flag, then logical CPUs.
pub fn resolve_workers(flag: Option<usize>, env: Option<&str>) -> Result<usize, String> {
    if let Some(v) = env {
        return match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(format!("HMC_LAB_WORKERS must be a positive integer (got `{v}`)")),
        };
    }
    match flag {
        Some(0) => Err("--workers must be positive".into()),
        Some(n) => Ok(n),
        None => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match cli.command {
        Command::ListExperiments => {
            for e in Experiment::ALL {
                println!("{:<18} {}", e.name(), e.description());
            }
            EXIT_OK
        }
        Command::Validate { config } => match load_config(&config) {
            Ok(cfg) => {
                println!("{}: ok ({})", config.display(), cfg.experiment.name());
                EXIT_OK
            }
            Err(errs) => {
                eprintln!("{}: {} error(s)\n{errs}", config.display(), errs.0.len());
                EXIT_CONFIG
            }
        },
        Command::Run { config } => {
            let cfg = match load_config(&config) {
                Ok(c) => c,
                Err(errs) => {
                    eprintln!("{}: {} error(s)\n{errs}", config.display(), errs.0.len());
                    return EXIT_CONFIG;
                }
            };
            let env = std::env::var("HMC_LAB_WORKERS").ok();
            let workers = match resolve_workers(cli.workers, env.as_deref()) {
                Ok(n) => n,
                Err(msg) => {
                    eprintln!("{msg}");
                    return EXIT_CONFIG;
                }
            };
            let pool = match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
                Ok(p) => p,
                Err(e) => {
                    eprintln!("cannot start {workers} workers: {e}");
                    return EXIT_IO;
                }
            };
            let outcome = pool.install(|| run_experiment(&cfg, workers));
            if let Some(msg) = &outcome.message {
                eprintln!("{msg}");
            }
            if outcome.code == EXIT_OK {
                println!("wrote {}", cfg.output_dir.display());
            }
            outcome.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn env_overrides_flag() {
        assert_eq!(resolve_workers(Some(3), Some("5")), Ok(5));
        assert_eq!(resolve_workers(Some(3), None), Ok(3));
        assert!(resolve_workers(None, None).unwrap() >= 1);
        assert!(resolve_workers(None, Some("zero")).is_err());
        assert!(resolve_workers(Some(0), None).is_err());
    }

    #[test]
    fn missing_config_is_a_validation_error() {
        assert_eq!(main_with_args(["hmc-lab", "validate", "/nonexistent/x.toml"]), EXIT_CONFIG);
    }

    #[test]
    fn list_experiments_succeeds() {
        assert_eq!(main_with_args(["hmc-lab", "list-experiments"]), EXIT_OK);
    }
}
