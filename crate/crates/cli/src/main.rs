//! `interp`: experiment runner and plotter for interpolating estimators in
//! noisy overparameterized linear regression.
//!
//! Exit codes: 0 on success, 2 on configuration errors, 3 when more than
//! 10% of trial rows fail in a sweep.

mod plot;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use interp_core::bounds::{
    ideal_mse_lower_gaussian, ideal_mse_upper_gaussian, parsimonious_floor, BoundParams,
};
use interp_core::experiments::{self, ExperimentConfig, RunError, Scenario};

#[derive(Parser)]
#[command(
    name = "interp",
    about = "Interpolating estimators for noisy overparameterized regression",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment sweep from a config file (or a built-in scenario
    /// name) and write records.csv / summary.csv.
    Run {
        /// Path to a TOML config, or one of the built-in scenario names
        /// (e.g. sparse-gaussian-sweep).
        config: String,
        /// key=value settings applied on top of the config.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Use the paper-scale caption parameters for a built-in scenario
        /// (no runtime promise).
        #[arg(long)]
        paper_scale: bool,
        /// Worker threads (defaults to all cores).
        #[arg(long)]
        threads: Option<usize>,
        /// Output directory (defaults to the config's output_dir).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Populate the wall_time_ms column (disables byte-identical
        /// re-runs).
        #[arg(long)]
        timings: bool,
    },
    /// Render summary.csv into static SVG plots.
    Plot {
        summary: PathBuf,
        /// Plot style: median | mean.
        #[arg(long, default_value = "median")]
        style: String,
        /// Output directory for SVG files (defaults next to the summary).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overlay the Gaussian ideal-MSE bound curves (delta = 0.5).
        #[arg(long)]
        bounds: bool,
    },
    /// Print the theoretical curve values at one parameter point.
    Bounds {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        sigma2: f64,
        #[arg(long)]
        delta: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::FailureBudget(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

enum CliError {
    Config(String),
    FailureBudget(String),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Config(format!("{e:#}"))
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            config,
            overrides,
            paper_scale,
            threads,
            out,
            timings,
        } => run_command(&config, &overrides, paper_scale, threads, out, timings),
        Command::Plot {
            summary,
            style,
            out,
            bounds,
        } => {
            let style = plot::Style::from_str(&style)?;
            let out_dir = out.unwrap_or_else(|| {
                summary
                    .parent()
                    .map(|p| p.to_path_buf())
                    .unwrap_or_else(|| PathBuf::from("."))
            });
            let written = plot::render(&summary, style, &out_dir, bounds)?;
            for path in written {
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Bounds { n, d, sigma2, delta } => {
            if !(0.0..1.0).contains(&delta) || delta == 0.0 {
                return Err(CliError::Config("delta must lie in (0, 1)".into()));
            }
            let p = BoundParams::new(n, d, sigma2, delta);
            let lower = ideal_mse_lower_gaussian(&p);
            let upper = ideal_mse_upper_gaussian(&p);
            let floor = parsimonious_floor(&p, 1.0);
            println!("ideal_mse_lower_gaussian = {lower:.6e}");
            if upper.flagged {
                println!("ideal_mse_upper_gaussian = inf (vacuous: d <= 4n)");
            } else {
                println!("ideal_mse_upper_gaussian = {:.6e}", upper.value);
            }
            if floor.flagged {
                println!(
                    "parsimonious_floor(beta=1) = {:.6e} (weak regime: d <= n e)",
                    floor.value
                );
            } else {
                println!("parsimonious_floor(beta=1) = {:.6e}", floor.value);
            }
            Ok(())
        }
    }
}

fn run_command(
    config_arg: &str,
    overrides: &[String],
    paper_scale: bool,
    threads: Option<usize>,
    out: Option<PathBuf>,
    timings: bool,
) -> Result<(), CliError> {
    let path = PathBuf::from(config_arg);
    let mut config: ExperimentConfig = if path.exists() {
        if paper_scale {
            return Err(CliError::Config(
                "--paper-scale applies to built-in scenario names, not config files".into(),
            ));
        }
        ExperimentConfig::load(&path, overrides)
            .map_err(|e| CliError::Config(e.to_string()))?
    } else {
        let scenario = Scenario::from_str(config_arg).map_err(|_| {
            CliError::Config(format!(
                "'{config_arg}' is neither a config file nor a scenario name; \
                 scenarios: {}",
                Scenario::all()
                    .iter()
                    .map(|s| s.name())
                    .collect::<Vec<_>>()
                    .join(", ")
            ))
        })?;
        let base = if paper_scale {
            ExperimentConfig::paper_scale_for(scenario)
        } else {
            ExperimentConfig::default_for(scenario)
        };
        ExperimentConfig::from_toml_str(&base.to_toml_string(), overrides)
            .map_err(|e| CliError::Config(e.to_string()))?
    };

    if let Ok(seed) = std::env::var("INTERP_SEED") {
        config.master_seed = seed
            .parse()
            .map_err(|_| CliError::Config(format!("INTERP_SEED must be an integer, got '{seed}'")))?;
    }
    if let Some(dir) = out {
        config.output_dir = dir;
    }
    if threads.is_some() {
        config.threads = threads;
    }
    if timings {
        config.record_timings = true;
    }

    match experiments::run(&config) {
        Ok(outcome) => {
            println!(
                "wrote {} ({} rows, {} failed)",
                outcome.records_path.display(),
                outcome.rows,
                outcome.failed_rows
            );
            println!("wrote {}", outcome.summary_path.display());
            Ok(())
        }
        Err(RunError::FailureBudgetExceeded { failed, total }) => Err(CliError::FailureBudget(
            format!("{failed}/{total} trial rows failed (budget is 10%)"),
        )),
        Err(e) => Err(CliError::Config(e.to_string())),
    }
}
