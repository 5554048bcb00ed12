//! Dense interpolators: minimum-`l2`, weighted minimum-`l2`, ridge, the
//! ridge-as-augmented-interpolation identity, and (behind [`oracle`]) the
//! ideal interpolator that reads the true signal and noise.

use nalgebra::{DMatrix, DVector};
use std::collections::BTreeMap;
use thiserror::Error;

use crate::linalg::{self, LinalgError, MinNormSystem};
use crate::model::TrainingSet;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("feature weights must be positive and finite, found w[{index}] = {value}")]
    NonPositiveWeight { index: usize, value: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Per-feature positive weights `w_k` defining the weighted-`l2` geometry
/// `sum_k alpha_k^2 / w_k^2`.
#[derive(Debug, Clone)]
pub struct WeightScheme {
    w: DVector<f64>,
}

impl WeightScheme {
    pub fn new(w: DVector<f64>) -> Result<Self, SolveError> {
        for (index, &value) in w.iter().enumerate() {
            if !(value > 0.0) || !value.is_finite() {
                return Err(SolveError::NonPositiveWeight { index, value });
            }
        }
        Ok(Self { w })
    }

    pub fn uniform(d: usize) -> Self {
        Self {
            w: DVector::from_element(d, 1.0),
        }
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.w
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.len() == 0
    }
}

/// Coefficients plus solver diagnostics.
#[derive(Debug, Clone)]
pub struct InterpolatorResult {
    pub alpha_hat: DVector<f64>,
    /// `||A alpha_hat - Y||`, recomputed from the returned coefficients.
    pub residual_norm: f64,
    /// Indices with `|alpha_j| > support_tol` (default `1e-8 * ||alpha||_inf`).
    pub support: Vec<usize>,
    /// Value of the objective the solver minimized.
    pub objective: f64,
    pub diagnostics: BTreeMap<String, f64>,
}

pub const SUPPORT_TOL_REL: f64 = 1e-8;

impl InterpolatorResult {
    pub fn from_alpha(alpha_hat: DVector<f64>, ts: &TrainingSet, objective: f64) -> Self {
        let residual_norm = (&ts.a * &alpha_hat - &ts.y).norm();
        let support = support_of(&alpha_hat);
        Self {
            alpha_hat,
            residual_norm,
            support,
            objective,
            diagnostics: BTreeMap::new(),
        }
    }

    pub fn support_size(&self) -> usize {
        self.support.len()
    }
}

pub fn support_of(alpha: &DVector<f64>) -> Vec<usize> {
    let tol = SUPPORT_TOL_REL * alpha.amax();
    alpha
        .iter()
        .enumerate()
        .filter(|(_, v)| v.abs() > tol)
        .map(|(i, _)| i)
        .collect()
}

/// Minimum-`l2`-norm interpolator `alpha = A^T (A A^T)^{-1} Y`.
pub fn min_l2_interpolate(ts: &TrainingSet) -> Result<InterpolatorResult, SolveError> {
    let alpha = linalg::min_norm_solve(&ts.a, &ts.y)?;
    let objective = alpha.norm_squared();
    Ok(InterpolatorResult::from_alpha(alpha, ts, objective))
}

/// Weighted minimum-`l2`-norm interpolator:
/// `argmin sum_k alpha_k^2 / w_k^2` subject to `A alpha = Y`, computed as
/// `Gamma * min_norm_solve(A Gamma, Y)` with `Gamma = diag(w)`.
pub fn weighted_min_l2_interpolate(
    ts: &TrainingSet,
    weights: &WeightScheme,
) -> Result<InterpolatorResult, SolveError> {
    if weights.len() != ts.d() {
        return Err(SolveError::Linalg(LinalgError::DimensionMismatch {
            context: "weight vector length",
            expected: ts.d(),
            got: weights.len(),
        }));
    }
    let mut scaled = ts.a.clone();
    for j in 0..scaled.ncols() {
        let wj = weights.weights()[j];
        for i in 0..scaled.nrows() {
            scaled[(i, j)] *= wj;
        }
    }
    let beta = linalg::min_norm_solve(&scaled, &ts.y)?;
    let alpha = DVector::from_fn(ts.d(), |j, _| beta[j] * weights.weights()[j]);
    let objective = (0..ts.d())
        .map(|j| {
            let w = weights.weights()[j];
            alpha[j] * alpha[j] / (w * w)
        })
        .sum();
    Ok(InterpolatorResult::from_alpha(alpha, ts, objective))
}

/// Tikhonov solution `argmin ||A alpha - Y||^2 + lambda2 * alpha^T Gamma alpha`
/// via the normal equations `(A^T A + lambda2 Gamma) alpha = A^T Y`.
pub fn ridge_solve(
    ts: &TrainingSet,
    lambda2: f64,
    gamma: &DMatrix<f64>,
) -> Result<DVector<f64>, SolveError> {
    assert!(lambda2 > 0.0, "ridge needs lambda2 > 0");
    let lhs = ts.a.transpose() * &ts.a + gamma * lambda2;
    let rhs = ts.a.transpose() * &ts.y;
    let chol = lhs.cholesky().ok_or(LinalgError::RankDeficient {
        sigma_min: 0.0,
        sigma_max: f64::NAN,
        tol: 0.0,
    })?;
    Ok(chol.solve(&rhs))
}

/// Ridge expressed as minimum-norm interpolation of the augmented system
/// `[A Gamma^{-1/2}, lambda I]` of shape `n x (d+n)`: the first `d`
/// coordinates of its min-norm interpolator, premultiplied by
/// `Gamma^{-1/2}`, coincide with [`ridge_solve`].
pub fn ridge_as_augmented_interpolation(
    ts: &TrainingSet,
    lambda2: f64,
    gamma: &DMatrix<f64>,
) -> Result<DVector<f64>, SolveError> {
    let n = ts.n();
    let d = ts.d();
    let gamma_inv_half = linalg::inv_sqrt_psd(gamma)?;
    let lambda = lambda2.sqrt();
    let transformed = &ts.a * &gamma_inv_half;
    let mut augmented = DMatrix::zeros(n, d + n);
    augmented.view_mut((0, 0), (n, d)).copy_from(&transformed);
    for i in 0..n {
        augmented[(i, d + i)] = lambda;
    }
    let full = linalg::min_norm_solve(&augmented, &ts.y)?;
    let head = full.rows(0, d).into_owned();
    Ok(&gamma_inv_half * head)
}

/// Oracle estimators that read the true signal `alpha*` and realized noise
/// `W`. These are fundamental-limit baselines, not usable estimators; keep
/// them out of anything that pretends to learn from data alone.
pub mod oracle {
    use super::*;
    use crate::model::{SparseLinearInstance, WhitenedView};

    /// The ideal interpolator and its test MSE.
    ///
    /// Solves `Sigma^{1/2}(alpha - alpha*) = B^T (B B^T)^{-1} W` with
    /// `B = A Sigma^{-1/2}`, so the returned `alpha` interpolates `Y` and
    /// attains the lowest test MSE of any interpolating solution, namely
    /// `W^T (B B^T)^{-1} W`.
    pub fn ideal_interpolate(
        ts: &TrainingSet,
        view: &WhitenedView,
        inst: &SparseLinearInstance,
    ) -> Result<(InterpolatorResult, f64), SolveError> {
        let system = MinNormSystem::new(&view.b)?;
        let t = system.solve(&ts.w)?; // Sigma^{1/2} (alpha - alpha*)
        let ideal_mse = t.norm_squared();
        let alpha = inst.alpha_star() + view.apply_sigma_inv_sqrt(&t)?;
        let mut result = InterpolatorResult::from_alpha(alpha, ts, ideal_mse);
        result
            .diagnostics
            .insert("ideal_mse".to_string(), ideal_mse);
        Ok((result, ideal_mse))
    }

    /// Fast evaluation of only the ideal test MSE `W^T (B B^T)^{-1} W`
    /// through a Cholesky factorization of the whitened Gram matrix.
    pub fn ideal_mse(b: &DMatrix<f64>, w: &DVector<f64>) -> Result<f64, SolveError> {
        Ok(linalg::gram_inverse_quadratic(b, w)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CovarianceModel, SparseLinearInstance, WhitenedView};
    use crate::rng::SeededRng;
    use approx::assert_relative_eq;

    fn random_ts(rng: &mut SeededRng, n: usize, d: usize, sigma2: f64) -> (TrainingSet, SparseLinearInstance, WhitenedView) {
        let a = DMatrix::from_fn(n, d, |_, _| rng.standard_normal());
        let inst = SparseLinearInstance::unit_signal(d, &[0, 1], sigma2).unwrap();
        let w = crate::rng::sample_noise(rng, n, sigma2);
        let view = WhitenedView::new(&a, CovarianceModel::Identity).unwrap();
        (TrainingSet::assemble(a, &inst, w), inst, view)
    }

    #[test]
    fn min_l2_trivial_case() {
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let inst = SparseLinearInstance::new(DVector::from_vec(vec![2.0, 0.0]), 0.0, 1).unwrap();
        let ts = TrainingSet::assemble(a, &inst, DVector::zeros(1));
        let res = min_l2_interpolate(&ts).unwrap();
        assert_relative_eq!(res.alpha_hat[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(res.alpha_hat[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn weighted_with_unit_weights_equals_min_l2() {
        let mut rng = SeededRng::new(51);
        let (ts, _, _) = random_ts(&mut rng, 5, 11, 0.3);
        let plain = min_l2_interpolate(&ts).unwrap();
        let weighted = weighted_min_l2_interpolate(&ts, &WeightScheme::uniform(11)).unwrap();
        assert!((plain.alpha_hat - weighted.alpha_hat).amax() < 1e-10);
    }

    #[test]
    fn weighted_rejects_bad_weights() {
        let mut rng = SeededRng::new(52);
        let (ts, _, _) = random_ts(&mut rng, 3, 6, 0.0);
        let w = DVector::from_vec(vec![1.0, 1.0, 0.0, 1.0, 1.0, 1.0]);
        assert!(matches!(
            WeightScheme::new(w),
            Err(SolveError::NonPositiveWeight { index: 2, .. })
        ));
        let _ = ts;
    }

    #[test]
    fn norm_minimality_among_feasible_perturbations() {
        let mut rng = SeededRng::new(53);
        let (ts, _, _) = random_ts(&mut rng, 4, 10, 0.5);
        let res = min_l2_interpolate(&ts).unwrap();
        let w = DVector::from_fn(10, |j, _| 0.5 + (j as f64) * 0.25);
        let scheme = WeightScheme::new(w.clone()).unwrap();
        let wres = weighted_min_l2_interpolate(&ts, &scheme).unwrap();

        // Null-space basis via SVD of A.
        let svd = ts.a.clone().svd(false, true);
        let v_t = svd.v_t.unwrap();
        for trial in 0..200 {
            let mut delta = DVector::zeros(10);
            let z = rng.standard_normal_vector(10);
            // Remove row-space component: delta = z - V_r V_r^T z.
            let vr_z = &v_t * &z;
            delta += &z - v_t.transpose() * vr_z;
            assert!((&ts.a * &delta).norm() < 1e-8, "trial {trial}");
            let perturbed = &res.alpha_hat + &delta;
            assert!(perturbed.norm_squared() + 1e-9 >= res.objective);
            let wperturbed = &wres.alpha_hat + &delta;
            let wobj: f64 = (0..10)
                .map(|j| wperturbed[j] * wperturbed[j] / (w[j] * w[j]))
                .sum();
            assert!(wobj + 1e-9 >= wres.objective);
        }
    }

    #[test]
    fn ideal_identity_case() {
        // B = I: ideal MSE is exactly ||W||^2.
        let mut rng = SeededRng::new(54);
        let a = DMatrix::identity(4, 4);
        let inst = SparseLinearInstance::unit_signal(4, &[0], 1.0).unwrap();
        let w = rng.standard_normal_vector(4);
        let view = WhitenedView::new(&a, CovarianceModel::Identity).unwrap();
        let ts = TrainingSet::assemble(a, &inst, w.clone());
        let (_, mse) = oracle::ideal_interpolate(&ts, &view, &inst).unwrap();
        assert_relative_eq!(mse, w.norm_squared(), max_relative = 1e-12);
    }

    #[test]
    fn ideal_zero_noise_recovers_zero_error() {
        let mut rng = SeededRng::new(55);
        let (ts, inst, view) = random_ts(&mut rng, 3, 7, 0.0);
        let (res, mse) = oracle::ideal_interpolate(&ts, &view, &inst).unwrap();
        assert!(mse.abs() < 1e-18);
        assert!(res.residual_norm < 1e-8 * ts.y.norm().max(1.0));
    }

    #[test]
    fn ideal_matches_constrained_least_squares_oracle() {
        // KKT oracle: minimize ||Sigma^{1/2}(alpha - alpha*)||^2 subject to
        // A alpha = Y, via the full (d+n) x (d+n) saddle system.
        let mut rng = SeededRng::new(56);
        let n = 3;
        let d = 6;
        let a = DMatrix::from_fn(n, d, |_, _| rng.standard_normal());
        let g = DMatrix::from_fn(d, d, |_, _| rng.standard_normal());
        let sigma = &g * g.transpose() + DMatrix::identity(d, d);
        let inst = SparseLinearInstance::unit_signal(d, &[0, 3], 0.2).unwrap();
        let w = crate::rng::sample_noise(&mut rng, n, 0.2);
        let view = WhitenedView::new(&a, CovarianceModel::Dense(sigma.clone())).unwrap();
        let ts = TrainingSet::assemble(a.clone(), &inst, w);

        let (res, mse) = oracle::ideal_interpolate(&ts, &view, &inst).unwrap();

        let mut kkt = DMatrix::zeros(d + n, d + n);
        kkt.view_mut((0, 0), (d, d)).copy_from(&(&sigma * 2.0));
        kkt.view_mut((0, d), (d, n)).copy_from(&a.transpose());
        kkt.view_mut((d, 0), (n, d)).copy_from(&a);
        let mut rhs = DVector::zeros(d + n);
        rhs.rows_mut(0, d).copy_from(&(&sigma * inst.alpha_star() * 2.0));
        rhs.rows_mut(d, n).copy_from(&ts.y);
        let sol = kkt.lu().solve(&rhs).unwrap();
        let alpha_oracle = sol.rows(0, d).into_owned();

        assert!((res.alpha_hat.clone() - &alpha_oracle).amax() < 1e-8);
        let diff = &alpha_oracle - inst.alpha_star();
        let mse_oracle = (&sigma * &diff).dot(&diff);
        assert_relative_eq!(mse, mse_oracle, max_relative = 1e-8);
    }

    #[test]
    fn ideal_dominates_other_interpolators() {
        let mut rng = SeededRng::new(57);
        for _ in 0..20 {
            let (ts, inst, view) = random_ts(&mut rng, 5, 15, 1.0);
            let (_, ideal) = oracle::ideal_interpolate(&ts, &view, &inst).unwrap();
            let res = min_l2_interpolate(&ts).unwrap();
            let mse_l2 = (res.alpha_hat - inst.alpha_star()).norm_squared();
            assert!(ideal <= mse_l2 + 1e-10);
        }
    }

    #[test]
    fn ridge_scalar_shrinkage() {
        let n = 3;
        let a = DMatrix::identity(n, n);
        let inst = SparseLinearInstance::new(DVector::from_vec(vec![1.0, -2.0, 0.5]), 0.0, 3).unwrap();
        let ts = TrainingSet::assemble(a, &inst, DVector::zeros(n));
        let lambda2 = 0.7;
        let alpha = ridge_solve(&ts, lambda2, &DMatrix::identity(n, n)).unwrap();
        for i in 0..n {
            assert_relative_eq!(alpha[i], ts.y[i] / (1.0 + lambda2), epsilon = 1e-12);
        }
    }

    #[test]
    fn ridge_large_lambda_shrinks_to_zero() {
        let mut rng = SeededRng::new(58);
        let (ts, _, _) = random_ts(&mut rng, 4, 9, 0.4);
        let lambda2 = 1e8;
        let alpha = ridge_solve(&ts, lambda2, &DMatrix::identity(9, 9)).unwrap();
        let bound = (ts.a.transpose() * &ts.y).norm() / lambda2;
        assert!(alpha.norm() <= bound * (1.0 + 1e-8));
    }

    #[test]
    fn ridge_augmented_identity_simple() {
        // A = [1 1], Y = 3, Gamma = I, lambda2 = 1 => alpha = (1, 1).
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let ts = TrainingSet::from_outputs(a, DVector::from_vec(vec![3.0]), DVector::zeros(1));
        let gamma = DMatrix::identity(2, 2);
        let direct = ridge_solve(&ts, 1.0, &gamma).unwrap();
        let augmented = ridge_as_augmented_interpolation(&ts, 1.0, &gamma).unwrap();
        assert_relative_eq!(direct[0], 1.0, epsilon = 1e-10);
        assert_relative_eq!(direct[1], 1.0, epsilon = 1e-10);
        assert!((direct - augmented).amax() < 1e-10);
    }

    #[test]
    fn ridge_augmented_identity_random_instances() {
        let mut rng = SeededRng::new(59);
        for &lambda2 in &[1e-3, 1.0, 1e3] {
            for _ in 0..10 {
                let (ts, _, _) = random_ts(&mut rng, 5, 12, 0.6);
                // Random SPD Gamma with moderate condition number.
                let q = DMatrix::from_fn(12, 12, |_, _| rng.standard_normal());
                let gamma = &q * q.transpose() + DMatrix::identity(12, 12) * 0.05;
                let direct = ridge_solve(&ts, lambda2, &gamma).unwrap();
                let augmented = ridge_as_augmented_interpolation(&ts, lambda2, &gamma).unwrap();
                let rel = (direct.clone() - augmented).norm() / direct.norm();
                assert!(rel < 1e-8, "lambda2={lambda2} rel={rel}");
            }
        }
    }

    #[test]
    fn ridge_small_lambda_approaches_weighted_interpolator() {
        let mut rng = SeededRng::new(60);
        let (ts, _, _) = random_ts(&mut rng, 4, 8, 0.2);
        // Gamma geometry: diag(1/w^2) corresponds to weighted min-norm with
        // weights w.
        let w = DVector::from_fn(8, |j, _| 1.0 + 0.3 * j as f64);
        let gamma = DMatrix::from_diagonal(&DVector::from_fn(8, |j, _| 1.0 / (w[j] * w[j])));
        let ridge = ridge_as_augmented_interpolation(&ts, 1e-10, &gamma).unwrap();
        let weighted =
            weighted_min_l2_interpolate(&ts, &WeightScheme::new(w).unwrap()).unwrap();
        assert!((ridge - weighted.alpha_hat).amax() < 1e-4);
    }
}
