//! Generative model types shared by every estimator.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::linalg::{self, LinalgError};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("support has {support} entries but sparsity bound is {k}")]
    SupportExceedsSparsity { support: usize, k: usize },
    #[error("alpha_star has nonzero entry {index} outside the declared support")]
    NonzeroOffSupport { index: usize },
    #[error("noise variance must be nonnegative, got {0}")]
    NegativeVariance(f64),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Ground truth of a `(k, sigma)`-sparse linear model: the signal
/// `alpha_star` (zero off its support), the noise variance, and the sparsity
/// bound `k`.
#[derive(Debug, Clone)]
pub struct SparseLinearInstance {
    alpha_star: DVector<f64>,
    sigma2: f64,
    k: usize,
    support_star: Vec<usize>,
}

impl SparseLinearInstance {
    pub fn new(alpha_star: DVector<f64>, sigma2: f64, k: usize) -> Result<Self, ModelError> {
        if sigma2 < 0.0 {
            return Err(ModelError::NegativeVariance(sigma2));
        }
        let support_star: Vec<usize> = alpha_star
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(i, _)| i)
            .collect();
        if support_star.len() > k {
            return Err(ModelError::SupportExceedsSparsity {
                support: support_star.len(),
                k,
            });
        }
        Ok(Self {
            alpha_star,
            sigma2,
            k,
            support_star,
        })
    }

    /// Signal with ones on `support` and zeros elsewhere.
    pub fn unit_signal(d: usize, support: &[usize], sigma2: f64) -> Result<Self, ModelError> {
        let mut alpha = DVector::zeros(d);
        for &j in support {
            alpha[j] = 1.0;
        }
        Self::new(alpha, sigma2, support.len())
    }

    /// Pure-noise instance (`alpha_star = 0`), valid for any `k >= 0`.
    pub fn pure_noise(d: usize, sigma2: f64, k: usize) -> Result<Self, ModelError> {
        Self::new(DVector::zeros(d), sigma2, k)
    }

    pub fn alpha_star(&self) -> &DVector<f64> {
        &self.alpha_star
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn support_star(&self) -> &[usize] {
        &self.support_star
    }

    pub fn dim(&self) -> usize {
        self.alpha_star.len()
    }
}

/// Realized training data: design matrix `A`, outputs `Y = A alpha* + W`,
/// and the noise vector `W` retained so the ideal (oracle) interpolator and
/// noise-fit diagnostics can be evaluated.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    pub a: DMatrix<f64>,
    pub y: DVector<f64>,
    pub w: DVector<f64>,
}

impl TrainingSet {
    /// Assembles `Y = A alpha* + W` exactly from its parts.
    pub fn assemble(a: DMatrix<f64>, inst: &SparseLinearInstance, w: DVector<f64>) -> Self {
        let y = &a * inst.alpha_star() + &w;
        Self { a, y, w }
    }

    /// Training set with externally supplied outputs (misspecified targets).
    pub fn from_outputs(a: DMatrix<f64>, y: DVector<f64>, w: DVector<f64>) -> Self {
        Self { a, y, w }
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn d(&self) -> usize {
        self.a.ncols()
    }

    /// Checks `rank(A) = n` by the smallest singular value of `A` relative to
    /// the largest (threshold `rank_tol`).
    pub fn has_full_row_rank(&self, rank_tol: f64) -> bool {
        let sv = self.a.clone().singular_values();
        let smax = sv.iter().cloned().fold(0.0_f64, f64::max);
        let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        smin > rank_tol * smax
    }
}

/// Analytic second-moment structure of a feature family.
///
/// Kept as a descriptor rather than a materialized `d x d` matrix so that
/// identity-covariance sweeps at large `d` never pay for (or allocate) a
/// trivial whitening step.
#[derive(Debug, Clone)]
pub enum CovarianceModel {
    Identity,
    Diagonal(DVector<f64>),
    Dense(DMatrix<f64>),
    /// `Sigma = feature_var * I + mean^2 * 1 1^T`, the covariance of i.i.d.
    /// `N(mean, feature_var)` features about the origin.
    IsotropicWithMeanShift { feature_var: f64, mean: f64 },
}

impl CovarianceModel {
    /// Materializes `Sigma` (test/diagnostic use).
    pub fn dense(&self, d: usize) -> DMatrix<f64> {
        match self {
            CovarianceModel::Identity => DMatrix::identity(d, d),
            CovarianceModel::Diagonal(diag) => DMatrix::from_diagonal(diag),
            CovarianceModel::Dense(m) => m.clone(),
            CovarianceModel::IsotropicWithMeanShift { feature_var, mean } => {
                let mut m = DMatrix::from_element(d, d, mean * mean);
                for i in 0..d {
                    m[(i, i)] += feature_var;
                }
                m
            }
        }
    }
}

/// Whitening data attached to a design: the whitened matrix
/// `B = A Sigma^{-1/2}` together with the covariance descriptor used to
/// apply `Sigma^{1/2}` and `Sigma^{-1/2}` to vectors.
#[derive(Debug, Clone)]
pub struct WhitenedView {
    pub b: DMatrix<f64>,
    pub covariance: CovarianceModel,
}

impl WhitenedView {
    /// Builds the view by whitening `a` under the covariance model.
    pub fn new(a: &DMatrix<f64>, covariance: CovarianceModel) -> Result<Self, LinalgError> {
        let b = whiten_design(a, &covariance)?;
        Ok(Self { b, covariance })
    }

    /// `Sigma^{1/2} v`.
    pub fn apply_sigma_sqrt(&self, v: &DVector<f64>) -> DVector<f64> {
        match &self.covariance {
            CovarianceModel::Identity => v.clone(),
            CovarianceModel::Diagonal(diag) => {
                DVector::from_fn(v.len(), |i, _| v[i] * diag[i].max(0.0).sqrt())
            }
            CovarianceModel::Dense(sigma) => linalg::sqrt_psd(sigma) * v,
            CovarianceModel::IsotropicWithMeanShift { feature_var, mean } => {
                let d = v.len() as f64;
                let spike = (feature_var + mean * mean * d).sqrt();
                let base = feature_var.sqrt();
                // Sigma^{1/2} = base (I - P) + spike P with P the projector
                // onto the all-ones direction.
                let m = v.sum() / d;
                DVector::from_fn(v.len(), |i, _| base * (v[i] - m) + spike * m)
            }
        }
    }

    /// `Sigma^{-1/2} v`.
    pub fn apply_sigma_inv_sqrt(&self, v: &DVector<f64>) -> Result<DVector<f64>, LinalgError> {
        match &self.covariance {
            CovarianceModel::Identity => Ok(v.clone()),
            CovarianceModel::Diagonal(diag) => Ok(DVector::from_fn(v.len(), |i, _| {
                v[i] / diag[i].sqrt()
            })),
            CovarianceModel::Dense(sigma) => Ok(linalg::inv_sqrt_psd(sigma)? * v),
            CovarianceModel::IsotropicWithMeanShift { feature_var, mean } => {
                let d = v.len() as f64;
                let spike = (feature_var + mean * mean * d).sqrt();
                let base = feature_var.sqrt();
                let m = v.sum() / d;
                Ok(DVector::from_fn(v.len(), |i, _| {
                    (v[i] - m) / base + m / spike
                }))
            }
        }
    }

    /// Materialized `Sigma^{-1/2}` (test/diagnostic use).
    pub fn sigma_inv_sqrt_dense(&self, d: usize) -> Result<DMatrix<f64>, LinalgError> {
        linalg::inv_sqrt_psd(&self.covariance.dense(d))
    }
}

fn whiten_design(a: &DMatrix<f64>, cov: &CovarianceModel) -> Result<DMatrix<f64>, LinalgError> {
    match cov {
        CovarianceModel::Identity => Ok(a.clone()),
        CovarianceModel::Diagonal(diag) => {
            let mut b = a.clone();
            for j in 0..b.ncols() {
                let s = diag[j].sqrt();
                for i in 0..b.nrows() {
                    b[(i, j)] /= s;
                }
            }
            Ok(b)
        }
        CovarianceModel::Dense(sigma) => Ok(a * linalg::inv_sqrt_psd(sigma)?),
        CovarianceModel::IsotropicWithMeanShift { feature_var, mean } => {
            let d = a.ncols() as f64;
            let spike = (feature_var + mean * mean * d).sqrt();
            let base = feature_var.sqrt();
            let mut b = DMatrix::zeros(a.nrows(), a.ncols());
            for i in 0..a.nrows() {
                let row_mean = a.row(i).sum() / d;
                for j in 0..a.ncols() {
                    b[(i, j)] = (a[(i, j)] - row_mean) / base + row_mean / spike;
                }
            }
            Ok(b)
        }
    }
}
