//! Dense linear algebra kernel shared by every solver in the crate.
//!
//! All minimum-norm solves are routed through one SVD-based kernel
//! ([`MinNormSystem`]) so that rank handling and numerical behavior are
//! uniform across interpolators. Complex systems (Fourier features) are
//! mapped to equivalent real systems of twice the size and solved by the
//! same kernel.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

/// Default relative rank tolerance: singular values at or below
/// `DEFAULT_RANK_TOL * sigma_max` are treated as zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Relative eigenvalue floor for computing `Sigma^{-1/2}`; eigenvalues at or
/// below `EIGENVALUE_FLOOR * lambda_max` are an error.
pub const EIGENVALUE_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is rank deficient: sigma_min = {sigma_min:.3e} <= {tol:.3e} * sigma_max = {sigma_max:.3e}")]
    RankDeficient {
        sigma_min: f64,
        sigma_max: f64,
        tol: f64,
    },
    #[error("dimension mismatch: {context} (expected {expected}, got {got})")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("eigenvalue {value:.3e} below floor {floor:.3e}; covariance not invertible at working precision")]
    EigenvalueBelowFloor { value: f64, floor: f64 },
    #[error("SVD failed to converge")]
    SvdFailed,
}

/// SVD factorization of a design matrix, reusable across right-hand sides.
///
/// For a full-row-rank `n x d` matrix `M` (`n <= d`), [`MinNormSystem::solve`]
/// returns `M^T (M M^T)^{-1} y`, the unique minimum-Euclidean-norm solution
/// of `M x = y`. For a full-column-rank tall matrix it returns the unique
/// least-squares solution instead; both are the pseudoinverse applied to `y`.
pub struct MinNormSystem {
    u: DMatrix<f64>,
    singular_values: DVector<f64>,
    v_t: DMatrix<f64>,
    rank: usize,
    sigma_max: f64,
    sigma_min: f64,
}

impl MinNormSystem {
    pub fn new(m: &DMatrix<f64>) -> Result<Self, LinalgError> {
        Self::with_rank_tol(m, DEFAULT_RANK_TOL)
    }

    pub fn with_rank_tol(m: &DMatrix<f64>, rank_tol: f64) -> Result<Self, LinalgError> {
        let svd = m
            .clone()
            .try_svd(true, true, f64::EPSILON, 0)
            .ok_or(LinalgError::SvdFailed)?;
        let u = svd.u.ok_or(LinalgError::SvdFailed)?;
        let v_t = svd.v_t.ok_or(LinalgError::SvdFailed)?;
        let s = svd.singular_values;
        let sigma_max = s.iter().cloned().fold(0.0_f64, f64::max);
        let sigma_min = s.iter().cloned().fold(f64::INFINITY, f64::min);
        let full = m.nrows().min(m.ncols());
        if sigma_min <= rank_tol * sigma_max || sigma_max == 0.0 {
            return Err(LinalgError::RankDeficient {
                sigma_min,
                sigma_max,
                tol: rank_tol,
            });
        }
        Ok(Self {
            u,
            singular_values: s,
            v_t,
            rank: full,
            sigma_max,
            sigma_min,
        })
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma_max
    }

    pub fn sigma_min(&self) -> f64 {
        self.sigma_min
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Pseudoinverse applied to `y`.
    pub fn solve(&self, y: &DVector<f64>) -> Result<DVector<f64>, LinalgError> {
        if y.len() != self.u.nrows() {
            return Err(LinalgError::DimensionMismatch {
                context: "right-hand side length",
                expected: self.u.nrows(),
                got: y.len(),
            });
        }
        let mut z = self.u.tr_mul(y);
        for i in 0..z.len() {
            z[i] /= self.singular_values[i];
        }
        Ok(self.v_t.tr_mul(&z))
    }
}

/// Minimum-norm solution of the underdetermined system `M x = y`.
///
/// Requires `n <= d` and full row rank (smallest singular value above
/// `rank_tol * sigma_max`, with `rank_tol` defaulting to
/// [`DEFAULT_RANK_TOL`]).
pub fn min_norm_solve(m: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>, LinalgError> {
    min_norm_solve_with_tol(m, y, DEFAULT_RANK_TOL)
}

pub fn min_norm_solve_with_tol(
    m: &DMatrix<f64>,
    y: &DVector<f64>,
    rank_tol: f64,
) -> Result<DVector<f64>, LinalgError> {
    if m.nrows() > m.ncols() {
        return Err(LinalgError::DimensionMismatch {
            context: "min-norm solve needs n <= d",
            expected: m.nrows(),
            got: m.ncols(),
        });
    }
    MinNormSystem::with_rank_tol(m, rank_tol)?.solve(y)
}

/// Minimum-norm solve through the Gram route `x = M^T (M M^T)^{-1} y`.
///
/// Any solution lying in the row space of `M` that satisfies `M x = y` is
/// *the* minimum-norm solution, so this path is self-certifying: the result
/// is accepted only if the interpolation contract
/// `||M x - y|| <= 1e-8 ||y||` holds, and otherwise (or when the Cholesky
/// factorization fails near rank deficiency) the solve falls back to the
/// SVD kernel. Large well-conditioned sweeps are orders of magnitude
/// faster this way with identical results.
pub fn min_norm_solve_fast(m: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>, LinalgError> {
    if m.nrows() > m.ncols() {
        return Err(LinalgError::DimensionMismatch {
            context: "min-norm solve needs n <= d",
            expected: m.nrows(),
            got: m.ncols(),
        });
    }
    let gram = m * m.transpose();
    if let Some(chol) = gram.cholesky() {
        let z = chol.solve(y);
        let x = m.tr_mul(&z);
        if (m * &x - y).norm() <= 1e-8 * y.norm() {
            return Ok(x);
        }
    }
    min_norm_solve(m, y)
}

/// Unique least-squares solution of the overdetermined system `M x ~ y`
/// (`n >= d`, full column rank). Used by experiments below the
/// interpolation threshold, where exact interpolation is infeasible.
pub fn least_squares(m: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>, LinalgError> {
    if m.nrows() < m.ncols() {
        return Err(LinalgError::DimensionMismatch {
            context: "least squares needs n >= d",
            expected: m.ncols(),
            got: m.nrows(),
        });
    }
    MinNormSystem::new(m)?.solve(y)
}

/// Evaluates `w^T (B B^T)^{-1} w` through a Cholesky factorization of the
/// Gram matrix. This is the closed form for the ideal test MSE; a unit test
/// pins it against the SVD route.
pub fn gram_inverse_quadratic(b: &DMatrix<f64>, w: &DVector<f64>) -> Result<f64, LinalgError> {
    let gram = b * b.transpose();
    let chol = gram.cholesky().ok_or(LinalgError::RankDeficient {
        sigma_min: 0.0,
        sigma_max: f64::NAN,
        tol: 0.0,
    })?;
    let solved = chol.solve(w);
    Ok(w.dot(&solved))
}

/// Smallest eigenvalue of `B B^T` (used for hybrid error bounds).
pub fn gram_min_eigenvalue(b: &DMatrix<f64>) -> f64 {
    let gram = b * b.transpose();
    gram.symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Real block embedding of a complex matrix:
/// `[[Re M, -Im M], [Im M, Re M]]`.
///
/// A complex system `M z = y` is equivalent to the embedded real system on
/// `[Re z; Im z]`, and Euclidean norms are preserved, so the minimum-norm
/// solution of the embedding is the minimum-norm complex solution.
pub fn complex_embed_matrix(m: &DMatrix<Complex64>) -> DMatrix<f64> {
    let (n, d) = m.shape();
    let mut out = DMatrix::zeros(2 * n, 2 * d);
    for j in 0..d {
        for i in 0..n {
            let z = m[(i, j)];
            out[(i, j)] = z.re;
            out[(i, j + d)] = -z.im;
            out[(i + n, j)] = z.im;
            out[(i + n, j + d)] = z.re;
        }
    }
    out
}

pub fn complex_embed_vector(y: &DVector<Complex64>) -> DVector<f64> {
    let n = y.len();
    DVector::from_fn(2 * n, |i, _| if i < n { y[i].re } else { y[i - n].im })
}

pub fn complex_unembed_vector(x: &DVector<f64>) -> DVector<Complex64> {
    let d = x.len() / 2;
    DVector::from_fn(d, |i, _| Complex64::new(x[i], x[i + d]))
}

/// Minimum-norm solution of a complex system via the real block embedding.
/// Routed through the self-certifying fast path (Fourier designs embed to
/// well-conditioned systems), with the SVD kernel as fallback.
pub fn min_norm_solve_complex(
    m: &DMatrix<Complex64>,
    y: &DVector<Complex64>,
) -> Result<DVector<Complex64>, LinalgError> {
    let me = complex_embed_matrix(m);
    let ye = complex_embed_vector(y);
    Ok(complex_unembed_vector(&min_norm_solve_fast(&me, &ye)?))
}

fn symmetric_eigen_sorted(sigma: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let sym = (sigma + sigma.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    (eig.eigenvalues, eig.eigenvectors)
}

/// Symmetric PSD square root with negative eigenvalues clamped to zero.
pub fn sqrt_psd(sigma: &DMatrix<f64>) -> DMatrix<f64> {
    let (vals, vecs) = symmetric_eigen_sorted(sigma);
    let scaled = DMatrix::from_fn(vecs.nrows(), vecs.ncols(), |i, j| {
        vecs[(i, j)] * vals[j].max(0.0).sqrt()
    });
    &scaled * vecs.transpose()
}

/// Inverse symmetric square root `Sigma^{-1/2}` by eigendecomposition.
///
/// Errors with [`LinalgError::EigenvalueBelowFloor`] if any eigenvalue is at
/// or below `EIGENVALUE_FLOOR * lambda_max`.
pub fn inv_sqrt_psd(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>, LinalgError> {
    let (vals, vecs) = symmetric_eigen_sorted(sigma);
    let lambda_max = vals.iter().cloned().fold(0.0_f64, f64::max);
    let floor = EIGENVALUE_FLOOR * lambda_max;
    for &v in vals.iter() {
        if v <= floor {
            return Err(LinalgError::EigenvalueBelowFloor { value: v, floor });
        }
    }
    let scaled = DMatrix::from_fn(vecs.nrows(), vecs.ncols(), |i, j| {
        vecs[(i, j)] / vals[j].sqrt()
    });
    Ok(&scaled * vecs.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;
    use approx::assert_relative_eq;

    fn random_matrix(rng: &mut SeededRng, n: usize, d: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, d, |_, _| rng.standard_normal())
    }

    /// Independent pseudoinverse oracle: full SVD of `M^T`.
    fn pinv_via_transpose_svd(m: &DMatrix<f64>) -> DMatrix<f64> {
        let mt = m.transpose();
        let svd = mt.svd(true, true);
        let u = svd.u.unwrap();
        let v_t = svd.v_t.unwrap();
        let smax = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
        // M^T = U S V^T  =>  M = V S U^T  =>  pinv(M) = U S^{-1} V^T.
        let mut sinv = DMatrix::zeros(u.ncols(), v_t.nrows());
        for i in 0..svd.singular_values.len() {
            let s = svd.singular_values[i];
            if s > 1e-13 * smax {
                sinv[(i, i)] = 1.0 / s;
            }
        }
        &u * sinv * &v_t
    }

    #[test]
    fn identity_case() {
        let m = DMatrix::identity(3, 3);
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let x = min_norm_solve(&m, &y).unwrap();
        assert_relative_eq!(x, y, epsilon = 1e-14);
    }

    #[test]
    fn symmetry_forces_equal_split() {
        let m = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let y = DVector::from_vec(vec![1.0]);
        let x = min_norm_solve(&m, &y).unwrap();
        assert_relative_eq!(x[0], 0.5, epsilon = 1e-14);
        assert_relative_eq!(x[1], 0.5, epsilon = 1e-14);
    }

    #[test]
    fn matches_pseudoinverse_oracle() {
        let mut rng = SeededRng::new(91);
        let m = random_matrix(&mut rng, 4, 8);
        let y = rng.standard_normal_vector(4);
        let x = min_norm_solve(&m, &y).unwrap();
        let oracle = pinv_via_transpose_svd(&m) * &y;
        assert!((x - oracle).amax() < 1e-9);
    }

    #[test]
    fn interpolates_and_is_minimal() {
        let mut rng = SeededRng::new(17);
        let m = random_matrix(&mut rng, 5, 12);
        let y = rng.standard_normal_vector(5);
        let x = min_norm_solve(&m, &y).unwrap();
        assert!((&m * &x - &y).norm() <= 1e-8 * y.norm());
        // Any feasible point obtained by adding a null-space direction is longer.
        let oracle = pinv_via_transpose_svd(&m);
        let p_null = DMatrix::identity(12, 12) - &oracle * &m;
        for _ in 0..50 {
            let z = rng.standard_normal_vector(12);
            let perturbed = &x + &p_null * z;
            assert!(perturbed.norm() >= x.norm() - 1e-10);
        }
    }

    #[test]
    fn projection_property() {
        // min_norm_solve(M, M x0) is the row-space projection of x0.
        let mut rng = SeededRng::new(23);
        for _ in 0..5 {
            let m = random_matrix(&mut rng, 5, 10);
            let x0 = rng.standard_normal_vector(10);
            let y = &m * &x0;
            let x = min_norm_solve(&m, &y).unwrap();
            let p_row = pinv_via_transpose_svd(&m) * &m;
            let projected = &p_row * &x0;
            assert!((x - projected).amax() < 1e-9);
        }
    }

    #[test]
    fn rank_deficient_detected() {
        let mut m = DMatrix::zeros(2, 4);
        m[(0, 0)] = 1.0;
        m[(1, 0)] = 1.0; // second row duplicates the first
        let y = DVector::from_vec(vec![1.0, 1.0]);
        assert!(matches!(
            min_norm_solve(&m, &y),
            Err(LinalgError::RankDeficient { .. })
        ));
    }

    #[test]
    fn dimension_checks() {
        let m = DMatrix::<f64>::zeros(3, 2);
        let y = DVector::zeros(3);
        assert!(matches!(
            min_norm_solve(&m, &y),
            Err(LinalgError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn least_squares_matches_normal_equations() {
        let mut rng = SeededRng::new(5);
        let m = random_matrix(&mut rng, 10, 4);
        let y = rng.standard_normal_vector(10);
        let x = least_squares(&m, &y).unwrap();
        let normal = (m.transpose() * &m)
            .cholesky()
            .unwrap()
            .solve(&(m.transpose() * &y));
        assert!((x - normal).amax() < 1e-10);
    }

    #[test]
    fn fast_path_matches_svd_path() {
        let mut rng = SeededRng::new(101);
        for _ in 0..10 {
            let m = random_matrix(&mut rng, 6, 17);
            let y = rng.standard_normal_vector(6);
            let fast = min_norm_solve_fast(&m, &y).unwrap();
            let svd = min_norm_solve(&m, &y).unwrap();
            assert!((fast - svd).amax() < 1e-9);
        }
    }

    #[test]
    fn gram_quadratic_matches_svd_route() {
        let mut rng = SeededRng::new(29);
        let b = random_matrix(&mut rng, 6, 20);
        let w = rng.standard_normal_vector(6);
        let fast = gram_inverse_quadratic(&b, &w).unwrap();
        let t = MinNormSystem::new(&b).unwrap().solve(&w).unwrap();
        assert_relative_eq!(fast, t.norm_squared(), max_relative = 1e-10);
    }

    #[test]
    fn complex_min_norm_agrees_with_direct_solve() {
        let mut rng = SeededRng::new(31);
        let n = 3;
        let d = 6;
        let m = DMatrix::from_fn(n, d, |_, _| {
            Complex64::new(rng.standard_normal(), rng.standard_normal())
        });
        let y = DVector::from_fn(n, |_, _| {
            Complex64::new(rng.standard_normal(), rng.standard_normal())
        });
        let z = min_norm_solve_complex(&m, &y).unwrap();
        // Interpolation in the complex system.
        let r = &m * &z - &y;
        assert!(r.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt() < 1e-9);
        // Direct complex pseudoinverse: z = M^H (M M^H)^{-1} y.
        let mh = m.adjoint();
        let gram = &m * &mh;
        let direct = &mh * gram.clone().lu().solve(&y).unwrap();
        for i in 0..d {
            assert!((z[i] - direct[i]).norm() < 1e-9);
        }
    }

    #[test]
    fn inv_sqrt_round_trip() {
        let mut rng = SeededRng::new(37);
        let g = random_matrix(&mut rng, 5, 5);
        let sigma = &g * g.transpose() + DMatrix::identity(5, 5);
        let s_inv_half = inv_sqrt_psd(&sigma).unwrap();
        let should_be_identity = &s_inv_half * &sigma * &s_inv_half;
        assert!((should_be_identity - DMatrix::identity(5, 5)).amax() < 1e-10);
        let s_half = sqrt_psd(&sigma);
        assert!((&s_half * &s_half - sigma).amax() < 1e-9);
    }

    #[test]
    fn inv_sqrt_floor_error() {
        let sigma = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1e-16]));
        assert!(matches!(
            inv_sqrt_psd(&sigma),
            Err(LinalgError::EigenvalueBelowFloor { .. })
        ));
    }
}
