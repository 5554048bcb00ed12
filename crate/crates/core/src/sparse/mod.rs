//! Sparsity-seeking interpolators and estimators: orthogonal matching
//! pursuit, basis pursuit via a simplex LP, the Lagrangian Lasso, the
//! square-root Lasso, and the two-step hybrid interpolator.

mod simplex;

pub use simplex::LpSolution;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::interpolators::InterpolatorResult;
use crate::linalg::{self, LinalgError};
use crate::model::TrainingSet;
use crate::rng::SeededRng;

#[derive(Debug, Error)]
pub enum SparseError {
    #[error("column {index} of the design matrix is zero")]
    ZeroColumn { index: usize },
    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(&'static str),
    #[error("interpolation constraint is infeasible")]
    Infeasible,
    #[error("simplex exceeded its iteration budget (cycling guard)")]
    SimplexCycling,
    #[error("first-stage estimator failed: {0}")]
    FirstStage(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Stopping rule for orthogonal matching pursuit.
#[derive(Debug, Clone, Copy)]
pub enum OmpStopping {
    /// Run until `|S| = n` or the residual norm falls below 1e-12.
    ToCompletion,
    /// Stop once `||A^T r_t||_inf <= sigma * sqrt(2 (1 + eta) ln d)`.
    ResidualThreshold { sigma: f64, eta: f64 },
    /// Stop after exactly `k0` selections.
    FixedSteps(usize),
}

#[derive(Debug, Clone, Copy)]
pub struct OmpConfig {
    pub stopping: OmpStopping,
}

impl OmpConfig {
    pub fn to_completion() -> Self {
        Self {
            stopping: OmpStopping::ToCompletion,
        }
    }

    pub fn residual_threshold(sigma: f64, eta: f64) -> Self {
        assert!(eta > 0.0, "eta must be positive");
        Self {
            stopping: OmpStopping::ResidualThreshold { sigma, eta },
        }
    }

    pub fn fixed_steps(k0: usize) -> Self {
        assert!(k0 >= 1, "k0 must be at least 1");
        Self {
            stopping: OmpStopping::FixedSteps(k0),
        }
    }
}

/// OMP output: the interpolator result plus the greedy selection order.
#[derive(Debug, Clone)]
pub struct OmpResult {
    pub interpolator: InterpolatorResult,
    pub selection_order: Vec<usize>,
}

const OMP_COMPLETION_RESIDUAL: f64 = 1e-12;

/// Orthogonal matching pursuit.
///
/// Greedy selection `s_t = argmax_j |<a_j, r_{t-1}>|` (ties broken toward
/// the lowest column index), residual updated by orthogonal projection onto
/// the selected span, final coefficients by least squares on the selected
/// columns. The noise-aware stopping rule is also checked before the first
/// selection so that a below-threshold output returns the zero vector.
pub fn omp(ts: &TrainingSet, cfg: &OmpConfig) -> Result<OmpResult, SparseError> {
    let n = ts.n();
    let d = ts.d();
    let a = &ts.a;
    for j in 0..d {
        if a.column(j).norm() == 0.0 {
            return Err(SparseError::ZeroColumn { index: j });
        }
    }
    let threshold = match cfg.stopping {
        OmpStopping::ResidualThreshold { sigma, eta } => {
            Some(sigma * (2.0 * (1.0 + eta) * (d as f64).ln()).sqrt())
        }
        _ => None,
    };
    let max_steps = match cfg.stopping {
        OmpStopping::FixedSteps(k0) => k0.min(n),
        _ => n,
    };

    let mut residual = ts.y.clone();
    let mut selected: Vec<usize> = Vec::new();
    let mut is_selected = vec![false; d];
    // Thin QR of the selected columns, grown one column per step.
    let mut q = DMatrix::<f64>::zeros(n, max_steps);
    let mut r_factor = DMatrix::<f64>::zeros(max_steps, max_steps);

    for t in 0..max_steps {
        if let Some(th) = threshold {
            if a.tr_mul(&residual).amax() <= th {
                break;
            }
        }
        if residual.norm() < OMP_COMPLETION_RESIDUAL {
            break;
        }

        let correlations = a.tr_mul(&residual);
        let mut best = usize::MAX;
        let mut best_val = -1.0;
        for j in 0..d {
            if is_selected[j] {
                continue;
            }
            let v = correlations[j].abs();
            if v > best_val {
                best_val = v;
                best = j;
            }
        }
        if best == usize::MAX {
            break;
        }

        let col = a.column(best).into_owned();
        // Project out the selected span, with one reorthogonalization pass.
        let mut coeffs = DVector::zeros(max_steps);
        let mut qn = col.clone();
        if t > 0 {
            let qt = q.columns(0, t);
            let c1 = qt.tr_mul(&qn);
            qn -= qt * &c1;
            let c2 = qt.tr_mul(&qn);
            qn -= qt * &c2;
            coeffs.rows_mut(0, t).copy_from(&(c1 + c2));
        }
        let qn_norm = qn.norm();
        if qn_norm <= 1e-12 * col.norm() {
            return Err(SparseError::NumericalBreakdown(
                "selected column lies in the current span",
            ));
        }
        qn /= qn_norm;

        let prev_norm = residual.norm();
        let proj = qn.dot(&residual);
        residual -= &qn * proj;
        if residual.norm() > prev_norm * (1.0 + 1e-10) {
            return Err(SparseError::NumericalBreakdown(
                "residual grew after projection",
            ));
        }

        q.set_column(t, &qn);
        coeffs[t] = qn_norm;
        r_factor.set_column(t, &coeffs);
        selected.push(best);
        is_selected[best] = true;
    }

    // Least squares on the selected set: alpha_S = R^{-1} Q^T y.
    let t = selected.len();
    let mut alpha = DVector::zeros(d);
    if t > 0 {
        let qt_y = q.columns(0, t).tr_mul(&ts.y);
        let mut z = qt_y;
        for i in (0..t).rev() {
            let mut s = z[i];
            for j in (i + 1)..t {
                s -= r_factor[(i, j)] * z[j];
            }
            z[i] = s / r_factor[(i, i)];
        }
        for (pos, &j) in selected.iter().enumerate() {
            alpha[j] = z[pos];
        }
    }

    let objective = selected.len() as f64;
    let mut interpolator = InterpolatorResult::from_alpha(alpha, ts, objective);
    interpolator
        .diagnostics
        .insert("steps".into(), selected.len() as f64);
    Ok(OmpResult {
        interpolator,
        selection_order: selected,
    })
}

/// Minimum-`l1`-norm interpolator (basis pursuit) through the simplex LP.
///
/// The LP returns a basic optimal solution, so the support of
/// `alpha = u - v` has at most `n` entries and the `u`/`v` supports are
/// disjoint.
pub fn basis_pursuit(ts: &TrainingSet) -> Result<InterpolatorResult, SparseError> {
    let lp = basis_pursuit_lp(ts)?;
    let alpha = &lp.u - &lp.v;
    let objective: f64 = alpha.iter().map(|x| x.abs()).sum();
    let mut result = InterpolatorResult::from_alpha(alpha, ts, objective);
    result
        .diagnostics
        .insert("lp_objective".into(), lp.objective);
    result
        .diagnostics
        .insert("lp_iterations".into(), lp.iterations as f64);
    Ok(result)
}

/// The underlying basic LP solution (split variables, basis, objective).
pub fn basis_pursuit_lp(ts: &TrainingSet) -> Result<LpSolution, SparseError> {
    simplex::solve_basis_pursuit_lp(&ts.a, &ts.y)
}

/// Coordinate order for Lasso coordinate descent.
#[derive(Debug, Clone, Copy, Default)]
pub enum CoordinateOrder {
    #[default]
    Cyclic,
    /// Deterministically shuffled each sweep from the given seed.
    Shuffled(u64),
}

#[derive(Debug, Clone, Copy)]
pub struct LassoConfig {
    /// Lagrangian regularization level `lambda_n`.
    pub lambda_n: f64,
    /// Square-root-Lasso regularization level `gamma_n`.
    pub gamma_n: f64,
    pub max_sweeps: usize,
    pub kkt_tol: f64,
    pub order: CoordinateOrder,
}

impl LassoConfig {
    pub fn with_lambda(lambda_n: f64) -> Self {
        Self {
            lambda_n,
            gamma_n: 0.0,
            max_sweeps: 100_000,
            kkt_tol: 1e-8,
            order: CoordinateOrder::Cyclic,
        }
    }

    pub fn with_gamma(gamma_n: f64) -> Self {
        Self {
            lambda_n: 0.0,
            gamma_n,
            max_sweeps: 100_000,
            kkt_tol: 1e-8,
            order: CoordinateOrder::Cyclic,
        }
    }
}

/// Regularization level `2 sigma sqrt(2 ln d / n)` used by the experiments
/// for the Lagrangian Lasso.
pub fn default_lambda_n(sigma: f64, n: usize, d: usize) -> f64 {
    2.0 * sigma * (2.0 * (d as f64).ln() / n as f64).sqrt()
}

/// Noise-free regularization level `sqrt(2 ln d / n)` for the square-root
/// Lasso.
///
/// The theory prescribes `2 C' (sqrt(2 ln d / n) + delta)` with a free
/// constant; `C' = 1/2` keeps the penalty below the zero-stationarity
/// threshold `||A^T Y||_inf / (sqrt(n) ||Y||)` (about `1/sqrt(k + sigma^2)`
/// for unit sparse signals) at desk-scale `n`, where `C' = 1` provably
/// zeroes the estimator.
pub fn default_gamma_n(n: usize, d: usize) -> f64 {
    (2.0 * (d as f64).ln() / n as f64).sqrt()
}

#[derive(Debug, Clone)]
pub struct LassoSolution {
    pub alpha: DVector<f64>,
    pub converged: bool,
    pub sweeps: usize,
    pub kkt_residual: f64,
}

/// Lagrangian Lasso `argmin (1/2n) ||Y - A alpha||^2 + lambda ||alpha||_1`
/// by cyclic coordinate descent, iterated until the KKT residual is at most
/// `kkt_tol`. On sweep exhaustion the best iterate is returned with
/// `converged = false`.
pub fn lasso_cd(ts: &TrainingSet, cfg: &LassoConfig) -> LassoSolution {
    assert!(cfg.lambda_n > 0.0, "lasso needs lambda_n > 0");
    let n = ts.n();
    let d = ts.d();
    let nf = n as f64;
    let a = &ts.a;
    let lambda = cfg.lambda_n;

    let col_sq: Vec<f64> = (0..d).map(|j| a.column(j).norm_squared() / nf).collect();
    let mut alpha = DVector::zeros(d);
    let mut residual = ts.y.clone();
    let mut order: Vec<usize> = (0..d).collect();
    let mut shuffle_rng = match cfg.order {
        CoordinateOrder::Shuffled(seed) => Some(SeededRng::new(seed)),
        CoordinateOrder::Cyclic => None,
    };

    let mut sweeps = 0;
    let mut kkt = f64::INFINITY;
    while sweeps < cfg.max_sweeps {
        if let Some(rng) = shuffle_rng.as_mut() {
            // Fisher-Yates with the deterministic stream.
            for i in (1..d).rev() {
                let j = (rng.random_u64() % (i as u64 + 1)) as usize;
                order.swap(i, j);
            }
        }
        for &j in &order {
            if col_sq[j] == 0.0 {
                continue;
            }
            let old = alpha[j];
            let rho = a.column(j).dot(&residual) / nf + col_sq[j] * old;
            let new = soft_threshold(rho, lambda) / col_sq[j];
            if new != old {
                residual -= a.column(j) * (new - old);
                alpha[j] = new;
            }
        }
        sweeps += 1;
        kkt = lasso_kkt_residual(a, &residual, &alpha, lambda, nf);
        if kkt <= cfg.kkt_tol {
            return LassoSolution {
                alpha,
                converged: true,
                sweeps,
                kkt_residual: kkt,
            };
        }
    }
    LassoSolution {
        alpha,
        converged: false,
        sweeps,
        kkt_residual: kkt,
    }
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// KKT residual of the Lagrangian Lasso at `alpha`: on-support stationarity
/// `|a_j^T r / n - lambda sign(alpha_j)|` and off-support feasibility
/// `max(0, |a_j^T r / n| - lambda)`.
pub fn lasso_kkt_residual(
    a: &DMatrix<f64>,
    residual: &DVector<f64>,
    alpha: &DVector<f64>,
    lambda: f64,
    nf: f64,
) -> f64 {
    let g = a.tr_mul(residual) / nf;
    let mut worst: f64 = 0.0;
    for j in 0..alpha.len() {
        let v = if alpha[j] != 0.0 {
            (g[j] - lambda * alpha[j].signum()).abs()
        } else {
            (g[j].abs() - lambda).max(0.0)
        };
        worst = worst.max(v);
    }
    worst
}

#[derive(Debug, Clone)]
pub struct SqrtLassoSolution {
    pub alpha: DVector<f64>,
    /// Fixed-point noise estimate `||Y - A alpha|| / sqrt(n)`.
    pub sigma_hat: f64,
    pub converged: bool,
    /// Set when the residual degenerated and the basis-pursuit fallback ran.
    pub bp_fallback: bool,
    pub outer_iterations: usize,
}

const SQRT_LASSO_SIGMA_TOL: f64 = 1e-10;
const SQRT_LASSO_MAX_ALTERNATIONS: usize = 60;
const SQRT_LASSO_MAX_BISECTIONS: usize = 200;

/// Square-root Lasso
/// `argmin (1/sqrt(n)) ||Y - A alpha|| + gamma ||alpha||_1`, solved by
/// alternating scaled-Lasso iterations: estimate
/// `sigma_hat = ||Y - A alpha|| / sqrt(n)`, solve the Lagrangian Lasso with
/// `lambda = gamma * sigma_hat`, and repeat to a fixed point. The residual
/// map `phi(sigma) = ||Y - A alpha(gamma sigma)|| / sqrt(n)` is monotone,
/// so if the alternation stalls in a period-two cycle the two iterates
/// bracket the fixed point and bisection finishes the job. A degenerate
/// (interpolating) residual makes the subgradient blow up, in which case
/// the minimum-`l1` interpolator is returned with `bp_fallback` set.
pub fn sqrt_lasso(ts: &TrainingSet, cfg: &LassoConfig) -> Result<SqrtLassoSolution, SparseError> {
    assert!(cfg.gamma_n > 0.0, "square-root lasso needs gamma_n > 0");
    let n = ts.n();
    let sqrt_n = (n as f64).sqrt();
    let gamma = cfg.gamma_n;
    let y_scale = ts.y.norm() / sqrt_n;

    // Zero is stationary iff gamma >= ||A^T Y||_inf / (sqrt(n) ||Y||).
    if ts.y.norm() == 0.0
        || gamma >= ts.a.tr_mul(&ts.y).amax() / (sqrt_n * ts.y.norm()) - 1e-15
    {
        return Ok(SqrtLassoSolution {
            alpha: DVector::zeros(ts.d()),
            sigma_hat: y_scale,
            converged: true,
            bp_fallback: false,
            outer_iterations: 0,
        });
    }

    enum Step {
        Fixed(LassoSolution, f64),
        Degenerate,
    }
    let mut evaluations = 0usize;
    let mut phi = |sigma: f64| -> Step {
        evaluations += 1;
        let inner = lasso_cd(
            ts,
            &LassoConfig {
                lambda_n: gamma * sigma,
                ..*cfg
            },
        );
        let next = (&ts.y - &ts.a * &inner.alpha).norm() / sqrt_n;
        if next <= 1e-10 * y_scale.max(1e-300) {
            Step::Degenerate
        } else {
            Step::Fixed(inner, next)
        }
    };

    let mut sigma = y_scale;
    let mut best: Option<(LassoSolution, f64)> = None;
    let mut previous: Option<f64> = None;
    for _ in 0..SQRT_LASSO_MAX_ALTERNATIONS {
        match phi(sigma) {
            Step::Degenerate => {
                let bp = basis_pursuit(ts)?;
                return Ok(SqrtLassoSolution {
                    alpha: bp.alpha_hat,
                    sigma_hat: 0.0,
                    converged: true,
                    bp_fallback: true,
                    outer_iterations: evaluations,
                });
            }
            Step::Fixed(inner, next) => {
                let delta = (next - sigma).abs();
                best = Some((inner, next));
                if delta <= SQRT_LASSO_SIGMA_TOL * next.max(1e-300) {
                    let (inner, sigma_hat) = best.unwrap();
                    return Ok(SqrtLassoSolution {
                        alpha: inner.alpha,
                        sigma_hat,
                        converged: true,
                        bp_fallback: false,
                        outer_iterations: evaluations,
                    });
                }
                previous = Some(sigma);
                sigma = next;
            }
        }
    }

    // Alternation stalled: solve g(sigma) = phi(sigma) - sigma = 0 by
    // bisection. phi is monotone increasing with phi(sigma) <= sigma for
    // sigma above the fixed point and >= below it, so a sign-changing
    // bracket is found by geometric expansion from the last iterate.
    let _ = previous;
    let mut eval_g = |s: f64| -> Result<Option<(LassoSolution, f64, f64)>, SparseError> {
        match phi(s) {
            Step::Degenerate => Ok(None),
            Step::Fixed(inner, value) => Ok(Some((inner, value, value - s))),
        }
    };
    let degenerate_exit = |evaluations: usize, ts: &TrainingSet| -> Result<SqrtLassoSolution, SparseError> {
        let bp = basis_pursuit(ts)?;
        Ok(SqrtLassoSolution {
            alpha: bp.alpha_hat,
            sigma_hat: 0.0,
            converged: true,
            bp_fallback: true,
            outer_iterations: evaluations,
        })
    };

    let Some((inner0, value0, g0)) = eval_g(sigma)? else {
        return degenerate_exit(evaluations, ts);
    };
    best = Some((inner0, value0));
    let (mut lo, mut hi) = (sigma, sigma);
    let mut bracketed = false;
    if g0 > 0.0 {
        // Fixed point above: expand upward (phi is capped near y_scale).
        for _ in 0..60 {
            hi *= 1.5;
            match eval_g(hi)? {
                None => return degenerate_exit(evaluations, ts),
                Some((inner, value, g)) => {
                    best = Some((inner, value));
                    if g <= 0.0 {
                        bracketed = true;
                        break;
                    }
                    lo = hi;
                }
            }
        }
    } else {
        // Fixed point below: expand downward.
        for _ in 0..60 {
            lo *= 0.5;
            match eval_g(lo)? {
                None => return degenerate_exit(evaluations, ts),
                Some((inner, value, g)) => {
                    best = Some((inner, value));
                    if g >= 0.0 {
                        bracketed = true;
                        break;
                    }
                    hi = lo;
                }
            }
        }
    }

    let mut converged = false;
    if bracketed {
        for _ in 0..SQRT_LASSO_MAX_BISECTIONS {
            let mid = 0.5 * (lo + hi);
            match eval_g(mid)? {
                None => return degenerate_exit(evaluations, ts),
                Some((inner, value, g)) => {
                    best = Some((inner, value));
                    if g.abs() <= SQRT_LASSO_SIGMA_TOL * value.max(1e-300) {
                        converged = true;
                        break;
                    }
                    if g > 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo <= f64::EPSILON * hi {
                        converged = g.abs() <= 1e-8 * value.max(1e-300);
                        break;
                    }
                }
            }
        }
    }
    let (inner, sigma_hat) = best.expect("at least one inner solve");
    Ok(SqrtLassoSolution {
        alpha: inner.alpha,
        sigma_hat,
        converged,
        bp_fallback: false,
        outer_iterations: evaluations,
    })
}

/// KKT residual of the joint square-root-Lasso objective at `alpha`
/// (undefined at an exactly interpolating point).
pub fn sqrt_lasso_kkt_residual(ts: &TrainingSet, alpha: &DVector<f64>, gamma: f64) -> f64 {
    let residual = &ts.y - &ts.a * alpha;
    let scale = (ts.n() as f64).sqrt() * residual.norm();
    let g = ts.a.tr_mul(&residual) / scale;
    let mut worst: f64 = 0.0;
    for j in 0..alpha.len() {
        let v = if alpha[j] != 0.0 {
            (g[j] - gamma * alpha[j].signum()).abs()
        } else {
            (g[j].abs() - gamma).max(0.0)
        };
        worst = worst.max(v);
    }
    worst
}

/// Two-step hybrid interpolator: run any first-stage estimator, then fit
/// its residual with the minimum-`l2`-norm correction
/// `Delta = argmin ||Delta|| s.t. A Delta = Y - A alpha_1`.
///
/// Diagnostics record `||Delta||^2` and the first-stage residual energy.
pub fn hybrid_interpolate<F>(ts: &TrainingSet, first_stage: F) -> Result<InterpolatorResult, SparseError>
where
    F: FnOnce(&TrainingSet) -> Result<DVector<f64>, SparseError>,
{
    let alpha_1 = first_stage(ts)?;
    if alpha_1.len() != ts.d() {
        return Err(SparseError::FirstStage(format!(
            "first stage returned {} coefficients for d = {}",
            alpha_1.len(),
            ts.d()
        )));
    }
    let stage_residual = &ts.y - &ts.a * &alpha_1;
    let delta = linalg::min_norm_solve_fast(&ts.a, &stage_residual)?;
    let alpha = &alpha_1 + &delta;
    let mut result = InterpolatorResult::from_alpha(alpha, ts, delta.norm_squared());
    result
        .diagnostics
        .insert("delta_norm_sq".into(), delta.norm_squared());
    result.diagnostics.insert(
        "stage1_residual_norm_sq".into(),
        stage_residual.norm_squared(),
    );
    Ok(result)
}

/// Monte Carlo lower estimate of the restricted eigenvalue of `A` over the
/// cone `{||Delta_{S^c}||_1 <= 3 ||Delta_S||_1}`: the minimum of
/// `||A Delta||^2 / (n ||Delta||^2)` over random cone directions.
/// Certifying the exact constant is NP-hard, so this is a measured
/// diagnostic, not a guarantee.
pub fn restricted_eigenvalue_estimate(
    a: &DMatrix<f64>,
    support: &[usize],
    samples: usize,
    rng: &mut SeededRng,
) -> f64 {
    let n = a.nrows() as f64;
    let d = a.ncols();
    let mut kappa = f64::INFINITY;
    for _ in 0..samples {
        let mut delta = DVector::zeros(d);
        let mut l1_s = 0.0;
        for &j in support {
            delta[j] = rng.standard_normal();
            l1_s += delta[j].abs();
        }
        // Off-support mass drawn at a random fraction of the cone budget.
        let budget = 3.0 * l1_s * rng.uniform01();
        let mut off = DVector::from_fn(d, |j, _| {
            if support.contains(&j) {
                0.0
            } else {
                rng.standard_normal()
            }
        });
        let off_l1: f64 = off.iter().map(|x| x.abs()).sum();
        if off_l1 > 0.0 {
            off *= budget / off_l1;
        }
        delta += off;
        let ratio = (a * &delta).norm_squared() / (n * delta.norm_squared());
        kappa = kappa.min(ratio);
    }
    kappa
}
