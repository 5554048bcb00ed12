//! Declarative experiment configuration: scenario, estimator list, grid,
//! and run parameters, loadable from a TOML key-value file with CLI-style
//! `key=value` overrides.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid override '{0}': expected key=value")]
    BadOverride(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// The experiment families reproduced by the runner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    /// Sparse signal with iid Gaussian features: test MSE of every
    /// estimator as `d` sweeps across the overparameterized range.
    SparseGaussianSweep,
    /// Misspecified constant target on `N(1, 0.01)` features: the
    /// double-descent curve.
    WigglyDoubleDescent,
    /// Pure-noise fits: sparsity-seeking interpolators against the ideal
    /// noise-fit cost, in fixed-n, `d = n^2`, and `d = e^n` regimes.
    PureNoiseParsimony,
    /// Ideal noise-fit cost for Fourier (regular and random sampling) and
    /// Gaussian features: the converse bounds picture.
    FourierConverse,
    /// Survival/contamination filter profiles for spiked weighting schemes.
    SpikedPriorSweep,
    /// Interpolation-threshold statistics for Legendre features, regular vs
    /// random covariates.
    ThresholdRegularVsRandom,
    /// Whitened (Legendre) vs unwhitened (Vandermonde) polynomial features.
    PolyWhitening,
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::SparseGaussianSweep => "sparse-gaussian-sweep",
            Scenario::WigglyDoubleDescent => "wiggly-double-descent",
            Scenario::PureNoiseParsimony => "pure-noise-parsimony",
            Scenario::FourierConverse => "fourier-converse",
            Scenario::SpikedPriorSweep => "spiked-prior-sweep",
            Scenario::ThresholdRegularVsRandom => "threshold-regular-vs-random",
            Scenario::PolyWhitening => "poly-whitening",
        }
    }

    pub fn all() -> &'static [Scenario] {
        &[
            Scenario::SparseGaussianSweep,
            Scenario::WigglyDoubleDescent,
            Scenario::PureNoiseParsimony,
            Scenario::FourierConverse,
            Scenario::SpikedPriorSweep,
            Scenario::ThresholdRegularVsRandom,
            Scenario::PolyWhitening,
        ]
    }
}

impl FromStr for Scenario {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scenario::all()
            .iter()
            .find(|sc| sc.name() == s)
            .copied()
            .ok_or_else(|| ConfigError::Invalid(format!("unknown scenario '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    Ideal,
    MinL2,
    Omp,
    Bp,
    Lasso,
    SqrtLasso,
    HybridLasso,
    HybridOmpK,
    HybridSqrtLasso,
}

impl EstimatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::Ideal => "ideal",
            EstimatorKind::MinL2 => "min-l2",
            EstimatorKind::Omp => "omp",
            EstimatorKind::Bp => "bp",
            EstimatorKind::Lasso => "lasso",
            EstimatorKind::SqrtLasso => "sqrt-lasso",
            EstimatorKind::HybridLasso => "hybrid-lasso",
            EstimatorKind::HybridOmpK => "hybrid-omp-k",
            EstimatorKind::HybridSqrtLasso => "hybrid-sqrt-lasso",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Statistic {
    Mean,
    #[default]
    Median,
    Both,
}

/// Grid regime for the pure-noise scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseRegime {
    /// `n` fixed, sweep `d` over `d_grid`.
    #[default]
    FixedN,
    /// Sweep `n` over `n_grid` with `d = n^2`.
    NSquared,
    /// Sweep `n` over `n_grid` with `d = e^n` (rounded).
    ExpN,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub estimators: Vec<EstimatorKind>,
    pub n: usize,
    pub d_grid: Vec<usize>,
    /// Sweep values of `n` for the growing-dimension noise regimes.
    #[serde(default)]
    pub n_grid: Vec<usize>,
    pub k: usize,
    pub sigma2: f64,
    pub trials: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub statistic: Statistic,
    /// Monte Carlo test points for scenarios without an analytic MSE.
    #[serde(default = "default_n_test")]
    pub n_test: usize,
    #[serde(default)]
    pub regime: NoiseRegime,
    /// Spike support size for the spiked-prior sweep.
    #[serde(default = "default_spike_s")]
    pub spike_s: usize,
    /// Prior strengths for the spiked-prior sweep.
    #[serde(default = "default_spike_gammas")]
    pub spike_gammas: Vec<f64>,
    /// Where records.csv/summary.csv land. Runtime-only: not embedded in
    /// the CSV provenance header, so re-runs into different directories
    /// still produce byte-identical records.
    #[serde(default = "default_output_dir", skip_serializing)]
    pub output_dir: PathBuf,
    /// Populate the wall_time_ms column. Off by default so that records.csv
    /// is byte-identical across re-runs with the same seed.
    #[serde(default)]
    pub record_timings: bool,
    /// Worker threads; runtime-only, not embedded in provenance.
    #[serde(default, skip_serializing)]
    pub threads: Option<usize>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_n_test() -> usize {
    2000
}

fn default_spike_s() -> usize {
    10
}

fn default_spike_gammas() -> Vec<f64> {
    vec![0.99, 0.9, 0.6]
}

impl ExperimentConfig {
    /// Desk-scale defaults per scenario. The grids preserve the `n/d` and
    /// `k ln d / n` ratios of the paper-scale figures; the phenomena under
    /// test are ratio-driven.
    pub fn default_for(scenario: Scenario) -> Self {
        use EstimatorKind::*;
        let base = |estimators: Vec<EstimatorKind>, n: usize, d_grid: Vec<usize>, k: usize, sigma2: f64, trials: usize| {
            ExperimentConfig {
                scenario,
                estimators,
                n,
                d_grid,
                n_grid: Vec::new(),
                k,
                sigma2,
                trials,
                master_seed: 17,
                statistic: Statistic::Both,
                n_test: default_n_test(),
                regime: NoiseRegime::FixedN,
                spike_s: default_spike_s(),
                spike_gammas: default_spike_gammas(),
                output_dir: PathBuf::from(format!("out/{}", scenario.name())),
                record_timings: false,
                threads: None,
            }
        };
        match scenario {
            Scenario::SparseGaussianSweep => base(
                vec![Ideal, MinL2, Omp, Bp, HybridLasso],
                500,
                vec![250, 500, 1000, 2000, 4000, 8000],
                50,
                0.01,
                20,
            ),
            Scenario::WigglyDoubleDescent => base(
                vec![MinL2],
                10,
                vec![2, 5, 8, 10, 12, 15, 20, 50, 100, 300, 1000],
                1,
                0.01,
                50,
            ),
            Scenario::PureNoiseParsimony => base(
                vec![Ideal, Omp, Bp],
                50,
                vec![50, 100, 200, 400, 800, 1600, 3200],
                0,
                0.01,
                50,
            ),
            Scenario::FourierConverse => base(
                vec![Ideal],
                15,
                vec![15, 30, 60, 150, 450, 1500],
                0,
                1.0,
                50,
            ),
            Scenario::SpikedPriorSweep => {
                let mut c = base(vec![MinL2], 50, vec![1100], 0, 0.01, 1);
                c.spike_s = 10;
                c
            }
            Scenario::ThresholdRegularVsRandom => base(
                vec![Ideal, MinL2],
                10,
                vec![2, 4, 6, 8, 9, 10, 11, 12, 15, 20, 40, 100],
                3,
                1e-4,
                50,
            ),
            Scenario::PolyWhitening => base(
                vec![MinL2],
                10,
                vec![2, 4, 6, 8, 10, 12, 15, 20, 30, 40],
                2,
                1e-4,
                50,
            ),
        }
    }

    /// Paper-scale parameters from the figure captions. No runtime promise.
    pub fn paper_scale_for(scenario: Scenario) -> Self {
        let mut c = Self::default_for(scenario);
        match scenario {
            Scenario::SparseGaussianSweep => {
                c.n = 5000;
                c.k = 500;
                c.d_grid = vec![2500, 5000, 10000, 15000, 20000, 30000];
            }
            Scenario::PureNoiseParsimony => {
                c.n = 1000;
                c.d_grid = vec![1000, 2000, 4000, 8000, 16000, 32000];
            }
            Scenario::SpikedPriorSweep => {
                c.n = 500;
                c.d_grid = vec![11000];
            }
            Scenario::WigglyDoubleDescent
            | Scenario::FourierConverse
            | Scenario::ThresholdRegularVsRandom
            | Scenario::PolyWhitening => {}
        }
        c
    }

    /// Loads a TOML config and applies `key=value` overrides on top.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text, overrides)
    }

    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        for ov in overrides {
            let (key, value) = ov
                .split_once('=')
                .ok_or_else(|| ConfigError::BadOverride(ov.clone()))?;
            let parsed: toml::Value = match value.parse::<toml::Value>() {
                Ok(v) => v,
                Err(_) => toml::Value::String(value.to_string()),
            };
            table.insert(key.trim().to_string(), parsed);
        }
        let config: ExperimentConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.trials < 1 {
            return Err(ConfigError::Invalid("trials must be at least 1".into()));
        }
        if self.sigma2 < 0.0 {
            return Err(ConfigError::Invalid("sigma2 must be nonnegative".into()));
        }
        let grid_ok = |g: &[usize]| g.windows(2).all(|w| w[0] < w[1]);
        if self.d_grid.is_empty() && self.n_grid.is_empty() {
            return Err(ConfigError::Invalid("empty sweep grid".into()));
        }
        if !grid_ok(&self.d_grid) || !grid_ok(&self.n_grid) {
            return Err(ConfigError::Invalid(
                "sweep grids must be strictly increasing".into(),
            ));
        }
        if self.estimators.is_empty() {
            return Err(ConfigError::Invalid("no estimators selected".into()));
        }
        if self.scenario == Scenario::PureNoiseParsimony
            && self.regime != NoiseRegime::FixedN
            && self.n_grid.is_empty()
        {
            return Err(ConfigError::Invalid(
                "growing-dimension noise regimes need n_grid".into(),
            ));
        }
        Ok(())
    }

    /// Serializes the resolved config as TOML (embedded in CSV headers).
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
