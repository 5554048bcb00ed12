//! Feature family generation: Gaussian designs, complex Fourier features,
//! and Vandermonde/Legendre polynomial features, with regularly spaced or
//! random covariates and the analytic whitening transform of each family.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::f64::consts::TAU;
use thiserror::Error;

use crate::linalg::LinalgError;
use crate::model::{CovarianceModel, WhitenedView};
use crate::rng::SeededRng;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("sampling scheme is invalid for this feature family: {0}")]
    InvalidDomain(&'static str),
    #[error("alias closed forms need n | d, got n = {n}, d = {d}")]
    NotMultiple { n: usize, d: usize },
    #[error("base frequency k* = {k_star} must lie in [0, n) with n = {n}")]
    FrequencyOutOfRange { k_star: usize, n: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Feature families of the generative model.
#[derive(Debug, Clone)]
pub enum FeatureFamily {
    /// `a(X) = X ~ N(0, I_d)`.
    GaussianIid { d: usize },
    /// `a(X) = X ~ N(0, Sigma)` with `Sigma` symmetric positive definite.
    GaussianCov { sigma: DMatrix<f64> },
    /// i.i.d. `N(mean, feature_var)` entries (double-descent example family).
    GaussianShiftedMean {
        d: usize,
        mean: f64,
        feature_var: f64,
    },
    /// Complex sinusoids `(1, e^{2 pi i x}, ..., e^{2 pi i (d-1) x})`,
    /// orthonormal under `Unif[0, 1)`.
    FourierComplex { d: usize },
    /// Raw monomials `(1, x, ..., x^{d-1})` on `[-1, 1]` (unwhitened).
    Vandermonde { d: usize },
    /// Orthonormalized Legendre polynomials under `Unif[-1, 1]`.
    Legendre { d: usize },
}

impl FeatureFamily {
    pub fn dim(&self) -> usize {
        match self {
            FeatureFamily::GaussianIid { d }
            | FeatureFamily::GaussianShiftedMean { d, .. }
            | FeatureFamily::FourierComplex { d }
            | FeatureFamily::Vandermonde { d }
            | FeatureFamily::Legendre { d } => *d,
            FeatureFamily::GaussianCov { sigma } => sigma.nrows(),
        }
    }

    pub fn is_complex(&self) -> bool {
        matches!(self, FeatureFamily::FourierComplex { .. })
    }
}

/// Covariate layout for one-dimensional (lifted) families.
///
/// Regular spacing uses `x_j = (j-1)/n` on `[0, 1)` for Fourier features and
/// `x_j = -1 + 2(j-1)/n` on `[-1, 1]` for polynomial features. Gaussian
/// families have no covariate grid and only accept `UniformRandom`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingScheme {
    RegularSpaced,
    UniformRandom,
}

/// A generated design, before outputs are attached.
pub enum Design {
    Real(RealDesign),
    Complex(ComplexDesign),
}

pub struct RealDesign {
    pub a: DMatrix<f64>,
    pub view: WhitenedView,
    /// Covariate locations for one-dimensional families.
    pub xs: Option<Vec<f64>>,
}

/// Complex Fourier design; the family is orthonormal so its covariance is
/// the identity and no whitening transform is attached.
pub struct ComplexDesign {
    pub a: DMatrix<Complex64>,
    pub xs: Vec<f64>,
}

impl Design {
    pub fn into_real(self) -> RealDesign {
        match self {
            Design::Real(r) => r,
            Design::Complex(_) => panic!("expected a real design"),
        }
    }

    pub fn into_complex(self) -> ComplexDesign {
        match self {
            Design::Complex(c) => c,
            Design::Real(_) => panic!("expected a complex design"),
        }
    }
}

/// Builds an `n x d` design for the family under the sampling scheme,
/// together with the family's analytic whitening view.
pub fn build_design(
    family: &FeatureFamily,
    scheme: SamplingScheme,
    n: usize,
    rng: &mut SeededRng,
) -> Result<Design, FeatureError> {
    match family {
        FeatureFamily::GaussianIid { d } => {
            require_random(scheme)?;
            let a = DMatrix::from_fn(n, *d, |_, _| rng.standard_normal());
            let view = WhitenedView::new(&a, CovarianceModel::Identity)?;
            Ok(Design::Real(RealDesign { a, view, xs: None }))
        }
        FeatureFamily::GaussianCov { sigma } => {
            require_random(scheme)?;
            let d = sigma.nrows();
            let half = crate::linalg::sqrt_psd(sigma);
            let z = DMatrix::from_fn(n, d, |_, _| rng.standard_normal());
            let a = &z * &half; // rows ~ N(0, Sigma)
            let view = WhitenedView::new(&a, CovarianceModel::Dense(sigma.clone()))?;
            Ok(Design::Real(RealDesign { a, view, xs: None }))
        }
        FeatureFamily::GaussianShiftedMean {
            d,
            mean,
            feature_var,
        } => {
            require_random(scheme)?;
            let sd = feature_var.sqrt();
            let a = DMatrix::from_fn(n, *d, |_, _| mean + sd * rng.standard_normal());
            let view = WhitenedView::new(
                &a,
                CovarianceModel::IsotropicWithMeanShift {
                    feature_var: *feature_var,
                    mean: *mean,
                },
            )?;
            Ok(Design::Real(RealDesign { a, view, xs: None }))
        }
        FeatureFamily::FourierComplex { d } => {
            let xs = sample_covariates(scheme, n, 0.0, 1.0, false, rng);
            let a = fourier_design(&xs, *d);
            Ok(Design::Complex(ComplexDesign { a, xs }))
        }
        FeatureFamily::Vandermonde { d } => {
            let xs = sample_covariates(scheme, n, -1.0, 1.0, true, rng);
            let a = DMatrix::from_fn(n, *d, |i, j| xs[i].powi(j as i32));
            let view = WhitenedView::new(
                &a,
                CovarianceModel::Dense(vandermonde_moment_matrix(*d)),
            )?;
            Ok(Design::Real(RealDesign {
                a,
                view,
                xs: Some(xs),
            }))
        }
        FeatureFamily::Legendre { d } => {
            let xs = sample_covariates(scheme, n, -1.0, 1.0, true, rng);
            let a = legendre_design(&xs, *d);
            let view = WhitenedView::new(&a, CovarianceModel::Identity)?;
            Ok(Design::Real(RealDesign {
                a,
                view,
                xs: Some(xs),
            }))
        }
    }
}

fn require_random(scheme: SamplingScheme) -> Result<(), FeatureError> {
    match scheme {
        SamplingScheme::UniformRandom => Ok(()),
        SamplingScheme::RegularSpaced => Err(FeatureError::InvalidDomain(
            "Gaussian families have no covariate grid; use UniformRandom",
        )),
    }
}

fn sample_covariates(
    scheme: SamplingScheme,
    n: usize,
    lo: f64,
    hi: f64,
    signed: bool,
    rng: &mut SeededRng,
) -> Vec<f64> {
    match scheme {
        SamplingScheme::RegularSpaced => {
            if signed {
                (0..n).map(|j| -1.0 + 2.0 * j as f64 / n as f64).collect()
            } else {
                (0..n).map(|j| j as f64 / n as f64).collect()
            }
        }
        SamplingScheme::UniformRandom => (0..n).map(|_| rng.uniform(lo, hi)).collect(),
    }
}

/// Row of complex Fourier features at location `x`.
pub fn fourier_row(x: f64, d: usize) -> DVector<Complex64> {
    DVector::from_fn(d, |k, _| Complex64::from_polar(1.0, TAU * k as f64 * x))
}

pub fn fourier_design(xs: &[f64], d: usize) -> DMatrix<Complex64> {
    let n = xs.len();
    let mut a = DMatrix::zeros(n, d);
    for (i, &x) in xs.iter().enumerate() {
        for k in 0..d {
            a[(i, k)] = Complex64::from_polar(1.0, TAU * k as f64 * x);
        }
    }
    a
}

/// Orthonormal Legendre features: `p_k(x) = sqrt(2k+1) P_k(x)` so that
/// `E_{X ~ Unif[-1,1]}[p_j p_k] = delta_{jk}`, via the Bonnet three-term
/// recurrence on `P_k`.
pub fn legendre_row(x: f64, d: usize) -> DVector<f64> {
    let mut out = DVector::zeros(d);
    let mut p_prev = 1.0; // P_0
    if d > 0 {
        out[0] = 1.0;
    }
    if d == 1 {
        return out;
    }
    let mut p_curr = x; // P_1
    out[1] = (3.0_f64).sqrt() * p_curr;
    for k in 1..(d - 1) {
        let kf = k as f64;
        let p_next = ((2.0 * kf + 1.0) * x * p_curr - kf * p_prev) / (kf + 1.0);
        p_prev = p_curr;
        p_curr = p_next;
        out[k + 1] = (2.0 * (kf + 1.0) + 1.0).sqrt() * p_curr;
    }
    out
}

pub fn legendre_design(xs: &[f64], d: usize) -> DMatrix<f64> {
    let n = xs.len();
    let mut a = DMatrix::zeros(n, d);
    for (i, &x) in xs.iter().enumerate() {
        a.row_mut(i).copy_from(&legendre_row(x, d).transpose());
    }
    a
}

/// Row of raw monomials at `x`.
pub fn vandermonde_row(x: f64, d: usize) -> DVector<f64> {
    DVector::from_fn(d, |j, _| x.powi(j as i32))
}

/// Exact Gram matrix of the monomials under `Unif[-1, 1]`:
/// `Sigma_{ab} = E[X^{a+b}] = 1/(a+b+1)` for even `a+b`, zero otherwise.
pub fn vandermonde_moment_matrix(d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(d, d, |a, b| {
        if (a + b) % 2 == 0 {
            1.0 / (a + b + 1) as f64
        } else {
            0.0
        }
    })
}

/// Draws fresh feature rows from a family's population distribution, for
/// held-out test evaluation. Covariate families draw `X` from the family
/// domain; Gaussian families draw the feature vector directly.
pub struct TestSampler {
    family: FeatureFamily,
    cov_sqrt: Option<DMatrix<f64>>,
}

impl TestSampler {
    pub fn new(family: &FeatureFamily) -> Result<Self, FeatureError> {
        if family.is_complex() {
            return Err(FeatureError::InvalidDomain(
                "complex families are evaluated through the fourier module",
            ));
        }
        let cov_sqrt = match family {
            FeatureFamily::GaussianCov { sigma } => Some(crate::linalg::sqrt_psd(sigma)),
            _ => None,
        };
        Ok(Self {
            family: family.clone(),
            cov_sqrt,
        })
    }

    pub fn sample(&self, rng: &mut SeededRng) -> DVector<f64> {
        match &self.family {
            FeatureFamily::GaussianIid { d } => rng.standard_normal_vector(*d),
            FeatureFamily::GaussianCov { sigma } => {
                let z = rng.standard_normal_vector(sigma.nrows());
                self.cov_sqrt.as_ref().expect("precomputed sqrt") * z
            }
            FeatureFamily::GaussianShiftedMean {
                d,
                mean,
                feature_var,
            } => {
                let sd = feature_var.sqrt();
                DVector::from_fn(*d, |_, _| mean + sd * rng.standard_normal())
            }
            FeatureFamily::Vandermonde { d } => vandermonde_row(rng.uniform(-1.0, 1.0), *d),
            FeatureFamily::Legendre { d } => legendre_row(rng.uniform(-1.0, 1.0), *d),
            FeatureFamily::FourierComplex { .. } => unreachable!("rejected in constructor"),
        }
    }
}

/// Indices of the exact aliases of base frequency `k*` on `n` regularly
/// spaced samples with `d = (M+1) n` features: `{k*+n, k*+2n, ..., k*+Mn}`.
pub fn alias_index_set(k_star: usize, n: usize, d: usize) -> Result<Vec<usize>, FeatureError> {
    if k_star >= n {
        return Err(FeatureError::FrequencyOutOfRange { k_star, n });
    }
    if d % n != 0 {
        return Err(FeatureError::NotMultiple { n, d });
    }
    let m = d / n - 1;
    Ok((1..=m).map(|l| k_star + l * n).collect())
}
