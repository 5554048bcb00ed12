//! Deterministic experiment runner: declarative sweeps over `(n, d)` grids
//! producing `records.csv` and `summary.csv`.

pub mod config;
pub mod record;
pub mod scenarios;

pub use config::{ConfigError, EstimatorKind, ExperimentConfig, NoiseRegime, Scenario, Statistic};
pub use record::{
    read_records, summarize, write_records, write_summary, CsvError, MetricsRecord, SummaryRow,
};

use rayon::prelude::*;
use std::path::PathBuf;
use thiserror::Error;

use crate::rng::SeededRng;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Csv(#[from] CsvError),
    #[error("solver failure budget exceeded: {failed}/{total} rows failed")]
    FailureBudgetExceeded { failed: usize, total: usize },
    #[error("thread pool error: {0}")]
    ThreadPool(String),
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub records_path: PathBuf,
    pub summary_path: PathBuf,
    pub rows: usize,
    pub failed_rows: usize,
}

/// Executes the configured sweep: every `(grid point, trial)` cell runs on
/// its own derived random stream, records are sorted into a deterministic
/// order, and `records.csv` / `summary.csv` are written with the resolved
/// config embedded as comment headers.
///
/// More than 10% failed rows is an error (exit code 3 at the CLI), but the
/// CSVs are still written for inspection.
pub fn run(config: &ExperimentConfig) -> Result<RunOutcome, RunError> {
    config.validate()?;
    let records = compute_records(config)?;

    std::fs::create_dir_all(&config.output_dir).map_err(CsvError::Io)?;
    let records_path = config.output_dir.join("records.csv");
    let summary_path = config.output_dir.join("summary.csv");
    let header = config.to_toml_string();
    write_records(&records_path, &header, &records)?;
    let summary = summarize(&records);
    write_summary(&summary_path, &header, &summary)?;

    let failed_rows = records.iter().filter(|r| r.error.is_some()).count();
    let outcome = RunOutcome {
        records_path,
        summary_path,
        rows: records.len(),
        failed_rows,
    };
    if failed_rows * 10 > records.len() {
        return Err(RunError::FailureBudgetExceeded {
            failed: failed_rows,
            total: records.len(),
        });
    }
    Ok(outcome)
}

/// Computes all records without touching the filesystem.
pub fn compute_records(config: &ExperimentConfig) -> Result<Vec<MetricsRecord>, RunError> {
    config.validate()?;
    let master = SeededRng::new(config.master_seed);
    let grid = scenarios::grid(config);
    let cells: Vec<(usize, usize, u64)> = grid
        .iter()
        .enumerate()
        .flat_map(|(gi, &(n, d))| {
            (0..config.trials)
                .map(move |t| (n, d, (gi * config.trials + t) as u64))
        })
        .collect();

    let compute = |&(n, d, cell): &(usize, usize, u64)| -> Vec<MetricsRecord> {
        scenarios::run_cell(config, n, d, master.derive(cell))
    };

    let mut records: Vec<MetricsRecord> = match config.threads {
        Some(1) => cells.iter().flat_map(|c| compute(c)).collect(),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| RunError::ThreadPool(e.to_string()))?
            .install(|| cells.par_iter().map(compute).flatten().collect()),
        None => cells.par_iter().map(compute).flatten().collect(),
    };

    // Deterministic row order regardless of scheduling.
    records.sort_by(|a, b| {
        (a.n, a.d, a.seed, &a.estimator, a.k_star).cmp(&(b.n, b.d, b.seed, &b.estimator, b.k_star))
    });
    Ok(records)
}
