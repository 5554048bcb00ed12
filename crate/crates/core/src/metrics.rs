//! Test-MSE computation (analytic and Monte Carlo), error decompositions,
//! and the empirical parsimony coefficient.
//!
//! All MSE values follow the "minus irreducible noise error" convention:
//! the analytic form is `||Sigma^{1/2}(alpha_hat - alpha*)||^2` and the
//! Monte Carlo form subtracts the known `sigma^2` rather than estimating it.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::features::{FeatureError, FeatureFamily, TestSampler};
use crate::model::{SparseLinearInstance, WhitenedView};
use crate::rng::SeededRng;

/// Analytic test MSE `||Sigma^{1/2}(alpha_hat - alpha*)||^2`.
pub fn test_mse_analytic(
    alpha_hat: &DVector<f64>,
    inst: &SparseLinearInstance,
    view: &WhitenedView,
) -> f64 {
    assert_eq!(alpha_hat.len(), inst.dim(), "coefficient dimension mismatch");
    let diff = alpha_hat - inst.alpha_star();
    view.apply_sigma_sqrt(&diff).norm_squared()
}

/// Fast path for whitened families (`Sigma = I`).
pub fn test_mse_whitened(alpha_hat: &DVector<f64>, alpha_star: &DVector<f64>) -> f64 {
    (alpha_hat - alpha_star).norm_squared()
}

/// Test MSE of the zero predictor, `||Sigma^{1/2} alpha*||^2`.
pub fn null_risk(inst: &SparseLinearInstance, view: &WhitenedView) -> f64 {
    view.apply_sigma_sqrt(inst.alpha_star()).norm_squared()
}

/// Monte Carlo test MSE over fresh draws from the family's population
/// distribution: mean of `(Y - <a(X), alpha_hat>)^2 - sigma^2` with its
/// standard error.
pub fn test_mse_empirical(
    alpha_hat: &DVector<f64>,
    inst: &SparseLinearInstance,
    family: &FeatureFamily,
    rng: &mut SeededRng,
    n_test: usize,
) -> Result<(f64, f64), FeatureError> {
    empirical_mse_inner(
        alpha_hat,
        LinearTarget::Coefficients(inst.alpha_star()),
        inst.sigma2(),
        family,
        rng,
        n_test,
    )
}

/// Monte Carlo test MSE against a misspecified constant target `y = c + W`
/// that is not expressible by the features (double-descent example).
pub fn test_mse_empirical_constant_target(
    alpha_hat: &DVector<f64>,
    constant: f64,
    sigma2: f64,
    family: &FeatureFamily,
    rng: &mut SeededRng,
    n_test: usize,
) -> Result<(f64, f64), FeatureError> {
    empirical_mse_inner(
        alpha_hat,
        LinearTarget::Constant(constant),
        sigma2,
        family,
        rng,
        n_test,
    )
}

enum LinearTarget<'a> {
    Coefficients(&'a DVector<f64>),
    Constant(f64),
}

fn empirical_mse_inner(
    alpha_hat: &DVector<f64>,
    target: LinearTarget<'_>,
    sigma2: f64,
    family: &FeatureFamily,
    rng: &mut SeededRng,
    n_test: usize,
) -> Result<(f64, f64), FeatureError> {
    assert!(n_test >= 1);
    let sampler = TestSampler::new(family)?;
    let sd = sigma2.sqrt();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..n_test {
        let row = sampler.sample(rng);
        let truth = match &target {
            LinearTarget::Coefficients(alpha_star) => row.dot(alpha_star),
            LinearTarget::Constant(c) => *c,
        };
        let y = truth + sd * rng.standard_normal();
        let err = y - row.dot(alpha_hat);
        let sq = err * err - sigma2;
        sum += sq;
        sum_sq += sq * sq;
    }
    let mean = sum / n_test as f64;
    let var = (sum_sq / n_test as f64 - mean * mean).max(0.0);
    Ok((mean, (var / n_test as f64).sqrt()))
}

/// Keeps the `n` largest-magnitude coefficients (ties broken toward the
/// lower index) and zeroes the rest.
pub fn truncate_top_n(alpha: &DVector<f64>, n: usize) -> DVector<f64> {
    let mut idx: Vec<usize> = (0..alpha.len()).collect();
    idx.sort_by(|&i, &j| {
        alpha[j]
            .abs()
            .partial_cmp(&alpha[i].abs())
            .expect("finite coefficients")
            .then(i.cmp(&j))
    });
    let mut out = DVector::zeros(alpha.len());
    for &i in idx.iter().take(n) {
        out[i] = alpha[i];
    }
    out
}

/// Empirical lower estimate of the parsimony coefficient `beta`: for each
/// probe output `Y`, run the interpolating operator, truncate to the top-`n`
/// coefficients, and take the minimum over probes of
/// `||A alpha_trunc||^2 / ||Y||^2`.
///
/// This certifies `beta` only over the supplied probes, not over all of
/// `R^n`.
pub fn parsimony_beta<F>(mut interpolator: F, a: &DMatrix<f64>, probes: &[DVector<f64>]) -> f64
where
    F: FnMut(&DVector<f64>) -> DVector<f64>,
{
    let n = a.nrows();
    let mut beta = f64::INFINITY;
    for y in probes {
        assert!(y.norm() > 0.0, "probe outputs must be nonzero");
        let alpha = interpolator(y);
        let trunc = truncate_top_n(&alpha, n);
        let ratio = (a * trunc).norm_squared() / y.norm_squared();
        beta = beta.min(ratio);
    }
    beta
}

/// Complex-design variant of [`parsimony_beta`] for Fourier systems.
pub fn parsimony_beta_complex<F>(
    mut interpolator: F,
    a: &DMatrix<Complex64>,
    probes: &[DVector<Complex64>],
) -> f64
where
    F: FnMut(&DVector<Complex64>) -> DVector<Complex64>,
{
    let n = a.nrows();
    let mut beta = f64::INFINITY;
    for y in probes {
        let y_energy: f64 = y.iter().map(|z| z.norm_sqr()).sum();
        assert!(y_energy > 0.0, "probe outputs must be nonzero");
        let alpha = interpolator(y);
        let mut idx: Vec<usize> = (0..alpha.len()).collect();
        idx.sort_by(|&i, &j| {
            alpha[j]
                .norm()
                .partial_cmp(&alpha[i].norm())
                .expect("finite coefficients")
                .then(i.cmp(&j))
        });
        let mut trunc = DVector::from_element(alpha.len(), Complex64::new(0.0, 0.0));
        for &i in idx.iter().take(n) {
            trunc[i] = alpha[i];
        }
        let fit = a * trunc;
        let ratio = fit.iter().map(|z| z.norm_sqr()).sum::<f64>() / y_energy;
        beta = beta.min(ratio);
    }
    beta
}

/// Estimation error `||alpha_1 - alpha*||^2` and prediction error
/// `||A (alpha_1 - alpha*)||^2 / n` of a first-stage estimate.
pub fn estimation_and_prediction_error(
    alpha_1: &DVector<f64>,
    inst: &SparseLinearInstance,
    a: &DMatrix<f64>,
) -> (f64, f64) {
    let diff = alpha_1 - inst.alpha_star();
    let e_est = diff.norm_squared();
    let e_pred = (a * diff).norm_squared() / a.nrows() as f64;
    (e_est, e_pred)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{build_design, SamplingScheme};
    use crate::fourier;
    
    use crate::model::{CovarianceModel, TrainingSet};
    use crate::sparse::{self, OmpConfig};
    use approx::assert_relative_eq;

    #[test]
    fn analytic_zero_at_truth() {
        let inst = SparseLinearInstance::unit_signal(5, &[1], 0.1).unwrap();
        let view = WhitenedView::new(&DMatrix::identity(3, 5), CovarianceModel::Identity).unwrap();
        assert_eq!(test_mse_analytic(inst.alpha_star(), &inst, &view), 0.0);
    }

    #[test]
    fn analytic_whitened_pure_noise_is_norm_squared() {
        let inst = SparseLinearInstance::pure_noise(6, 1.0, 0).unwrap();
        let view = WhitenedView::new(&DMatrix::identity(3, 6), CovarianceModel::Identity).unwrap();
        let alpha = DVector::from_fn(6, |j, _| j as f64 * 0.3 - 0.7);
        assert_relative_eq!(
            test_mse_analytic(&alpha, &inst, &view),
            alpha.norm_squared(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn analytic_matches_empirical_dense_covariance() {
        let mut rng = SeededRng::new(200);
        let d = 6;
        let g = DMatrix::from_fn(d, d, |_, _| rng.standard_normal());
        let sigma = &g * g.transpose() + DMatrix::identity(d, d) * 0.5;
        let family = FeatureFamily::GaussianCov {
            sigma: sigma.clone(),
        };
        let inst = SparseLinearInstance::unit_signal(d, &[0, 2], 0.3).unwrap();
        let view = WhitenedView::new(
            &DMatrix::from_fn(4, d, |_, _| rng.standard_normal()),
            CovarianceModel::Dense(sigma),
        )
        .unwrap();
        let alpha = DVector::from_fn(d, |j, _| 0.4 * j as f64 - 1.0);
        let analytic = test_mse_analytic(&alpha, &inst, &view);
        let (emp, stderr) =
            test_mse_empirical(&alpha, &inst, &family, &mut rng, 100_000).unwrap();
        assert!(
            (emp - analytic).abs() <= 3.0 * stderr,
            "emp {emp} vs analytic {analytic} (stderr {stderr})"
        );
    }

    #[test]
    fn empirical_zero_for_exact_noiseless_predictor() {
        let mut rng = SeededRng::new(201);
        let inst = SparseLinearInstance::unit_signal(4, &[0], 0.0).unwrap();
        let family = FeatureFamily::GaussianIid { d: 4 };
        let (emp, _) =
            test_mse_empirical(inst.alpha_star(), &inst, &family, &mut rng, 1000).unwrap();
        assert!(emp.abs() < 1e-20);
    }

    #[test]
    fn null_predictor_attains_null_risk() {
        let mut rng = SeededRng::new(202);
        let d = 8;
        let inst = SparseLinearInstance::unit_signal(d, &[0, 1, 2], 0.2).unwrap();
        let family = FeatureFamily::GaussianIid { d };
        let view = WhitenedView::new(
            &DMatrix::from_fn(4, d, |_, _| rng.standard_normal()),
            CovarianceModel::Identity,
        )
        .unwrap();
        let zero = DVector::zeros(d);
        let (emp, stderr) = test_mse_empirical(&zero, &inst, &family, &mut rng, 100_000).unwrap();
        let nr = null_risk(&inst, &view);
        assert_relative_eq!(nr, 3.0, epsilon = 1e-12);
        assert!((emp - nr).abs() <= 3.0 * stderr.max(1e-3));
    }

    #[test]
    fn truncation_keeps_top_entries_deterministically() {
        let alpha = DVector::from_vec(vec![1.0, -3.0, 2.0, -2.0, 0.5]);
        let t = truncate_top_n(&alpha, 2);
        // |-3| then tie between |2| and |-2| resolved toward index 2.
        assert_eq!(t.as_slice(), &[0.0, -3.0, 2.0, 0.0, 0.0]);
    }

    #[test]
    fn omp_and_bp_are_one_parsimonious() {
        let mut rng = SeededRng::new(203);
        let n = 10;
        let d = 40;
        let a = DMatrix::from_fn(n, d, |_, _| rng.standard_normal());
        let probes: Vec<DVector<f64>> =
            (0..5).map(|_| rng.standard_normal_vector(n)).collect();
        let beta_omp = parsimony_beta(
            |y| {
                let ts = TrainingSet::from_outputs(a.clone(), y.clone(), DVector::zeros(n));
                sparse::omp(&ts, &OmpConfig::to_completion())
                    .unwrap()
                    .interpolator
                    .alpha_hat
            },
            &a,
            &probes,
        );
        assert_relative_eq!(beta_omp, 1.0, epsilon = 1e-8);
        let beta_bp = parsimony_beta(
            |y| {
                let ts = TrainingSet::from_outputs(a.clone(), y.clone(), DVector::zeros(n));
                sparse::basis_pursuit(&ts).unwrap().alpha_hat
            },
            &a,
            &probes,
        );
        assert_relative_eq!(beta_bp, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn min_l2_on_fourier_noise_is_far_from_parsimonious() {
        let mut rng = SeededRng::new(204);
        let n = 8;
        let d = 64;
        let design = build_design(
            &FeatureFamily::FourierComplex { d },
            SamplingScheme::RegularSpaced,
            n,
            &mut rng,
        )
        .unwrap()
        .into_complex();
        let probes: Vec<DVector<Complex64>> = (0..5)
            .map(|_| {
                let w = rng.standard_normal_vector(n);
                DVector::from_fn(n, |i, _| Complex64::new(w[i], 0.0))
            })
            .collect();
        let beta = parsimony_beta_complex(
            |y| fourier::min_norm_complex(&design.a, y).unwrap(),
            &design.a,
            &probes,
        );
        assert!(beta < 0.5, "beta = {beta}");
        assert!(beta > 0.0);
    }

    #[test]
    fn estimation_prediction_trivial_cases() {
        let mut rng = SeededRng::new(205);
        let d = 6;
        let a = DMatrix::from_fn(9, d, |_, _| rng.standard_normal());
        let inst = SparseLinearInstance::unit_signal(d, &[0, 1], 0.1).unwrap();
        let (e0, p0) = estimation_and_prediction_error(inst.alpha_star(), &inst, &a);
        assert_eq!((e0, p0), (0.0, 0.0));
        let zero = DVector::zeros(d);
        let (e1, p1) = estimation_and_prediction_error(&zero, &inst, &a);
        assert_relative_eq!(e1, 2.0, epsilon = 1e-12);
        assert_relative_eq!(
            p1,
            (&a * inst.alpha_star()).norm_squared() / 9.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn prediction_concentrates_to_estimation_for_whitened_design() {
        let mut rng = SeededRng::new(206);
        let n = 5000;
        let d = 50;
        let a = DMatrix::from_fn(n, d, |_, _| rng.standard_normal());
        let inst = SparseLinearInstance::pure_noise(d, 0.0, 0).unwrap();
        let alpha_1 = rng.standard_normal_vector(d);
        let (e_est, e_pred) = estimation_and_prediction_error(&alpha_1, &inst, &a);
        assert!(
            (e_pred / e_est - 1.0).abs() < 0.1,
            "ratio {}",
            e_pred / e_est
        );
    }
}
