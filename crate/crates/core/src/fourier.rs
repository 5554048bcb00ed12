//! Closed-form theory for regularly spaced Fourier features: exact weighted
//! min-norm coefficients over alias cohorts, survival and contamination
//! factors, the filter view, and the time-domain interpolation kernel.
//!
//! Complex systems are solved through the real block embedding in
//! [`crate::linalg`], so one SVD kernel backs both the real and complex
//! paths. The weighted objective for complex coefficients is
//! `sum_k |alpha_k|^2 / w_k^2` with real positive weights.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::f64::consts::TAU;

use crate::features::{self, FeatureError};
use crate::interpolators::WeightScheme;
use crate::linalg::{self, LinalgError};
use crate::rng::SeededRng;

/// One cohort of mutually aliased frequencies `{k*} u S(k*)` with its
/// restricted weights and the normalizer `V = sum_{j in cohort} w_j^2`.
#[derive(Debug, Clone)]
pub struct AliasCohort {
    pub k_star: usize,
    pub indices: Vec<usize>,
    pub weights_restricted: DVector<f64>,
    pub v: f64,
}

/// Survival and contamination of every base frequency `k* in [0, n)`,
/// viewable as the filter induced by sampling plus weighted min-norm
/// estimation.
#[derive(Debug, Clone)]
pub struct FilterProfile {
    pub survival: Vec<f64>,
    pub contamination: Vec<f64>,
}

pub fn alias_cohort(
    k_star: usize,
    n: usize,
    d: usize,
    weights: &WeightScheme,
) -> Result<AliasCohort, FeatureError> {
    let aliases = features::alias_index_set(k_star, n, d)?;
    let mut indices = Vec::with_capacity(aliases.len() + 1);
    indices.push(k_star);
    indices.extend_from_slice(&aliases);
    let w = weights.weights();
    let weights_restricted = DVector::from_fn(indices.len(), |i, _| w[indices[i]]);
    let v = weights_restricted.iter().map(|x| x * x).sum();
    Ok(AliasCohort {
        k_star,
        indices,
        weights_restricted,
        v,
    })
}

/// Exact weighted min-norm coefficients for the noiseless single-frequency
/// output `Y = f_{k*}(x_train)` on `n` regularly spaced samples:
/// `alpha_j = w_j^2 / V` on the cohort of `k*`, zero elsewhere.
pub fn closed_form_weighted_solution(
    k_star: usize,
    n: usize,
    d: usize,
    weights: &WeightScheme,
) -> Result<DVector<f64>, FeatureError> {
    let cohort = alias_cohort(k_star, n, d, weights)?;
    let w = weights.weights();
    let mut alpha = DVector::zeros(d);
    for &j in &cohort.indices {
        alpha[j] = w[j] * w[j] / cohort.v;
    }
    Ok(alpha)
}

/// Survival factor `SU(k*) = w_{k*}^2 / V`: the fraction of the true
/// coefficient retained after signal bleed.
///
/// The equivalent one-pole form
/// `1 / (1 + sum_{l >= 1} w_{k*+ln}^2 / w_{k*}^2)` is evaluated alongside
/// and the two must agree to 1e-12.
pub fn survival(
    k_star: usize,
    n: usize,
    d: usize,
    weights: &WeightScheme,
) -> Result<f64, FeatureError> {
    let cohort = alias_cohort(k_star, n, d, weights)?;
    let w_star = cohort.weights_restricted[0];
    let su = w_star * w_star / cohort.v;
    let alias_ratio: f64 = cohort
        .weights_restricted
        .iter()
        .skip(1)
        .map(|w| (w / w_star) * (w / w_star))
        .sum();
    let one_pole = 1.0 / (1.0 + alias_ratio);
    assert!(
        (su - one_pole).abs() <= 1e-12 * su.max(one_pole),
        "survival closed form {su} disagrees with one-pole form {one_pole}"
    );
    Ok(su)
}

/// Contamination factor `C(k*)`: the standard deviation contributed at test
/// time by the spurious alias coefficients,
/// `C = sqrt(sum_{j in S(k*)} alpha_j^2) = sqrt(sum_{j in S(k*)} w_j^4) / V`.
///
/// For within-cohort-uniform weights this reduces to `sqrt(M) w^2 / V` with
/// `M = d/n - 1` aliases, and for unit weights to
/// `sqrt(d/n - 1) / (d/n) = sqrt(n/d) sqrt(1 - n/d)`, which approaches the
/// familiar `sqrt(n/d)` once `d >> n`.
pub fn contamination(
    k_star: usize,
    n: usize,
    d: usize,
    weights: &WeightScheme,
) -> Result<f64, FeatureError> {
    let cohort = alias_cohort(k_star, n, d, weights)?;
    let alias_coefficient_energy: f64 = cohort
        .weights_restricted
        .iter()
        .skip(1)
        .map(|w| {
            let coeff = w * w / cohort.v;
            coeff * coeff
        })
        .sum();
    Ok(alias_coefficient_energy.sqrt())
}

/// Survival/contamination filter across all base frequencies.
pub fn filter_profile(n: usize, d: usize, weights: &WeightScheme) -> Result<FilterProfile, FeatureError> {
    let mut survival_v = Vec::with_capacity(n);
    let mut contamination_v = Vec::with_capacity(n);
    for k_star in 0..n {
        survival_v.push(survival(k_star, n, d, weights)?);
        contamination_v.push(contamination(k_star, n, d, weights)?);
    }
    Ok(FilterProfile {
        survival: survival_v,
        contamination: contamination_v,
    })
}

/// Spiked weighting scheme: a `gamma` fraction of the total weight energy
/// `d` placed uniformly on the `s` lowest frequencies, the rest spread over
/// the remaining `d - s`.
pub fn spiked_weights(d: usize, s: usize, gamma: f64) -> WeightScheme {
    assert!(s >= 1 && s < d, "spike size must satisfy 1 <= s < d");
    assert!((0.0..=1.0).contains(&gamma));
    let low = (gamma * d as f64 / s as f64).sqrt();
    let high = ((1.0 - gamma) * d as f64 / (d - s) as f64).sqrt();
    WeightScheme::new(DVector::from_fn(d, |j, _| if j < s { low } else { high }))
        .expect("spiked weights are positive")
}

/// Minimum-norm interpolation of complex outputs, `alpha = A^H (A A^H)^{-1} Y`
/// through the real embedding.
pub fn min_norm_complex(
    a: &DMatrix<Complex64>,
    y: &DVector<Complex64>,
) -> Result<DVector<Complex64>, LinalgError> {
    linalg::min_norm_solve_complex(a, y)
}

/// Weighted minimum-norm interpolation of complex outputs with real positive
/// feature weights: `argmin sum_k |alpha_k|^2 / w_k^2` s.t. `A alpha = Y`.
pub fn weighted_min_norm_complex(
    a: &DMatrix<Complex64>,
    y: &DVector<Complex64>,
    weights: &WeightScheme,
) -> Result<DVector<Complex64>, LinalgError> {
    let d = a.ncols();
    if weights.len() != d {
        return Err(LinalgError::DimensionMismatch {
            context: "weight vector length",
            expected: d,
            got: weights.len(),
        });
    }
    let mut scaled = a.clone();
    for j in 0..d {
        let w = Complex64::new(weights.weights()[j], 0.0);
        for i in 0..a.nrows() {
            scaled[(i, j)] *= w;
        }
    }
    let beta = linalg::min_norm_solve_complex(&scaled, y)?;
    Ok(DVector::from_fn(d, |j, _| beta[j] * weights.weights()[j]))
}

/// Squared distance `sum_j |alpha_j - alpha*_j|^2`, which is the test MSE of
/// a coefficient vector for an orthonormal complex family.
pub fn analytic_mse_complex(alpha_hat: &DVector<Complex64>, alpha_star: &DVector<Complex64>) -> f64 {
    (alpha_hat - alpha_star).iter().map(|z| z.norm_sqr()).sum()
}

/// Measured survival and contamination of a weighted min-norm fit to the
/// noiseless output `Y = f_{k*}(x_train)`:
/// `su = |alpha_{k*}/alpha*_{k*}|` and
/// `c = sqrt(sum_{j != k*} |alpha_j|^2)`.
pub fn empirical_survival_contamination(
    a: &DMatrix<Complex64>,
    k_star: usize,
    weights: &WeightScheme,
) -> Result<(f64, f64), LinalgError> {
    let y = a.column(k_star).into_owned();
    let alpha = weighted_min_norm_complex(a, &y, weights)?;
    let su = alpha[k_star].norm();
    let c = alpha
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != k_star)
        .map(|(_, z)| z.norm_sqr())
        .sum::<f64>()
        .sqrt();
    Ok((su, c))
}

/// Time-domain interpolation kernel induced by a weighting scheme: the
/// weighted min-norm fit to the unit impulse `Y = e_1` on `n` regularly
/// spaced training points, evaluated at `grid`.
///
/// The kernel equals one at `x = 0` and zero at the other training points.
pub fn interpolation_kernel(
    weights: &WeightScheme,
    n: usize,
    d: usize,
    grid: &[f64],
) -> Result<Vec<Complex64>, FeatureError> {
    if d % n != 0 {
        return Err(FeatureError::NotMultiple { n, d });
    }
    let xs: Vec<f64> = (0..n).map(|j| j as f64 / n as f64).collect();
    let a = features::fourier_design(&xs, d);
    let mut impulse = DVector::from_element(n, Complex64::new(0.0, 0.0));
    impulse[0] = Complex64::new(1.0, 0.0);
    let alpha = weighted_min_norm_complex(&a, &impulse, weights).map_err(FeatureError::Linalg)?;
    Ok(grid
        .iter()
        .map(|&x| {
            (0..d)
                .map(|k| alpha[k] * Complex64::from_polar(1.0, TAU * k as f64 * x))
                .sum()
        })
        .collect())
}

/// Ideal noise-fit cost `w^T (A A^H)^{-1} w` for a complex design and a
/// real noise vector: the fundamental price of interpolating pure noise
/// with these features.
pub fn ideal_noise_mse_complex(
    a: &DMatrix<Complex64>,
    w: &DVector<f64>,
) -> Result<f64, LinalgError> {
    let gram = a * a.adjoint();
    let rhs = DVector::from_fn(w.len(), |i, _| Complex64::new(w[i], 0.0));
    let solved = gram.lu().solve(&rhs).ok_or(LinalgError::RankDeficient {
        sigma_min: 0.0,
        sigma_max: f64::NAN,
        tol: 0.0,
    })?;
    Ok((0..w.len()).map(|i| w[i] * solved[i].re).sum())
}

/// Monte Carlo test MSE of complex Fourier coefficients under fresh
/// `X ~ Unif[0, 1)` and real Gaussian noise, minus the irreducible `sigma2`.
pub fn empirical_test_mse_complex(
    alpha_hat: &DVector<Complex64>,
    alpha_star: &DVector<Complex64>,
    sigma2: f64,
    rng: &mut SeededRng,
    n_test: usize,
) -> (f64, f64) {
    let d = alpha_hat.len();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..n_test {
        let x = rng.uniform01();
        let row = features::fourier_row(x, d);
        let mut truth = Complex64::new(0.0, 0.0);
        let mut pred = Complex64::new(0.0, 0.0);
        for k in 0..d {
            truth += row[k] * alpha_star[k];
            pred += row[k] * alpha_hat[k];
        }
        let w = sigma2.sqrt() * rng.standard_normal();
        let err = (truth + w - pred).norm_sqr() - sigma2;
        sum += err;
        sum_sq += err * err;
    }
    let mean = sum / n_test as f64;
    let var = (sum_sq / n_test as f64 - mean * mean).max(0.0);
    (mean, (var / n_test as f64).sqrt())
}
