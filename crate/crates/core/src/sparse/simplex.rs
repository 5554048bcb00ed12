//! Revised simplex method specialized to the basis-pursuit linear program
//!
//! ```text
//!     min  1^T u + 1^T v
//!     s.t. [A  -A] [u; v] = b,   u, v >= 0
//! ```
//!
//! The split structure keeps pricing cheap: with simplex multipliers `y`,
//! the reduced cost of `u_j` is `1 - <a_j, y>` and of `v_j` is
//! `1 + <a_j, y>`, so one product `g = A^T y` prices all `2d` columns and
//! the most attractive entering variable is the one maximizing `|g_j|`.
//!
//! The solver returns a *basic* optimal solution, which is what certifies
//! the `|supp| <= n` property of the minimum-`l1` interpolator. Dantzig
//! pricing is used while progress is made; after a run of degenerate pivots
//! it switches to Bland's rule, which provably cannot cycle, and switches
//! back once a nondegenerate step occurs.

use nalgebra::{DMatrix, DVector};

use super::SparseError;

const PRICE_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-11;
const DEGENERATE_STEP: f64 = 1e-12;
const BLAND_TRIGGER: usize = 40;
const REFACTOR_EVERY: usize = 128;

/// Basic optimal solution of the split-form LP.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub u: DVector<f64>,
    pub v: DVector<f64>,
    /// Indices of basic variables; `j < d` is `u_j`, `j >= d` is `v_{j-d}`.
    pub basis: Vec<usize>,
    pub objective: f64,
    pub iterations: usize,
}

struct Tableau<'a> {
    a: &'a DMatrix<f64>,
    b: DVector<f64>,
    n: usize,
    d: usize,
    basis: Vec<usize>,
    binv: DMatrix<f64>,
    xb: DVector<f64>,
}

impl<'a> Tableau<'a> {
    /// Column of the constraint matrix for variable `var` (`+a_j` or `-a_j`).
    fn column(&self, var: usize) -> DVector<f64> {
        if var < self.d {
            self.a.column(var).into_owned()
        } else {
            -self.a.column(var - self.d).into_owned()
        }
    }

    fn refactorize(&mut self) -> Result<(), SparseError> {
        let mut bm = DMatrix::zeros(self.n, self.n);
        for (i, &var) in self.basis.iter().enumerate() {
            bm.set_column(i, &self.column(var));
        }
        self.binv = bm
            .try_inverse()
            .ok_or(SparseError::NumericalBreakdown("singular simplex basis"))?;
        self.xb = &self.binv * &self.b;
        for x in self.xb.iter_mut() {
            if *x < 0.0 {
                if *x < -1e-7 {
                    return Err(SparseError::NumericalBreakdown(
                        "basic solution lost feasibility",
                    ));
                }
                *x = 0.0;
            }
        }
        Ok(())
    }

    fn pivot(&mut self, entering: usize, w: &DVector<f64>, row: usize, step: f64) {
        let wr = w[row];
        for i in 0..self.n {
            if i != row {
                self.xb[i] -= step * w[i];
                if self.xb[i] < 0.0 {
                    self.xb[i] = 0.0;
                }
            }
        }
        self.xb[row] = step;
        self.basis[row] = entering;
        // Product-form update of the basis inverse.
        let pivot_row = self.binv.row(row) / wr;
        for i in 0..self.n {
            if i == row {
                continue;
            }
            let wi = w[i];
            if wi != 0.0 {
                for j in 0..self.n {
                    self.binv[(i, j)] -= wi * pivot_row[j];
                }
            }
        }
        self.binv.row_mut(row).copy_from(&pivot_row);
    }
}

/// Solves the BP linear program for `A alpha = b`. `A` must have full row
/// rank for feasibility; rank-deficient inputs surface as `Infeasible`.
pub fn solve_basis_pursuit_lp(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<LpSolution, SparseError> {
    let n = a.nrows();
    let d = a.ncols();
    assert!(d >= 1 && n >= 1);

    let mut t = warm_start(a, b).map(Ok).unwrap_or_else(|| phase_one(a, b))?;

    let max_iter = 200 * (n + d) + 20_000;
    let mut iterations = 0usize;
    let mut degenerate_run = 0usize;
    let mut bland = false;
    let mut since_refactor = 0usize;

    loop {
        // Multipliers y = B^{-T} 1 (all basic costs are one), then price
        // every column at once through g = A^T y.
        let ones = DVector::from_element(n, 1.0);
        let y = t.binv.tr_mul(&ones);
        let g = t.a.tr_mul(&y);

        let entering = if bland {
            let mut found = None;
            for j in 0..(2 * d) {
                let rc = if j < d { 1.0 - g[j] } else { 1.0 + g[j - d] };
                if rc < -PRICE_TOL {
                    found = Some(j);
                    break;
                }
            }
            found
        } else {
            let mut best = None;
            let mut best_score = 1.0 + PRICE_TOL;
            for j in 0..d {
                let score = g[j].abs();
                if score > best_score {
                    best_score = score;
                    best = Some(if g[j] > 0.0 { j } else { j + d });
                }
            }
            best
        };

        let Some(entering) = entering else {
            break; // optimal
        };

        let col = t.column(entering);
        let w = &t.binv * &col;

        // Ratio test; ties resolved toward the smallest basic variable
        // index, which is the Bland leaving rule.
        let mut row = None;
        let mut best_ratio = f64::INFINITY;
        for i in 0..n {
            if w[i] > PIVOT_TOL {
                let ratio = t.xb[i] / w[i];
                let better = match row {
                    None => true,
                    Some(r) => {
                        ratio < best_ratio - 1e-12
                            || (ratio < best_ratio + 1e-12 && t.basis[i] < t.basis[r as usize])
                    }
                };
                if better {
                    best_ratio = ratio;
                    row = Some(i as u32);
                }
            }
        }
        let Some(row) = row else {
            // The objective is bounded below by zero, so an unbounded ray
            // can only be numerical noise.
            return Err(SparseError::NumericalBreakdown("unbounded pricing direction"));
        };
        let row = row as usize;
        let step = best_ratio;

        t.pivot(entering, &w, row, step);
        iterations += 1;
        since_refactor += 1;

        if step <= DEGENERATE_STEP {
            degenerate_run += 1;
            if degenerate_run >= BLAND_TRIGGER {
                bland = true;
            }
        } else {
            degenerate_run = 0;
            bland = false;
        }

        if since_refactor >= REFACTOR_EVERY {
            t.refactorize()?;
            since_refactor = 0;
        }

        if iterations > max_iter {
            return Err(SparseError::SimplexCycling);
        }
    }

    t.refactorize()?;
    let mut u = DVector::zeros(d);
    let mut v = DVector::zeros(d);
    for (i, &var) in t.basis.iter().enumerate() {
        let val = t.xb[i];
        if var < d {
            u[var] = val;
        } else {
            v[var - d] = val;
        }
    }
    let objective = t.xb.sum();
    Ok(LpSolution {
        u,
        v,
        basis: t.basis,
        objective,
        iterations,
    })
}

/// Tries to start from the basis formed by the first `n` columns of `A`
/// (signed to make the basic values nonnegative). Generic designs admit
/// this start and skip phase one entirely.
fn warm_start<'a>(a: &'a DMatrix<f64>, b: &DVector<f64>) -> Option<Tableau<'a>> {
    let n = a.nrows();
    let d = a.ncols();
    if d < n {
        return None;
    }
    let lead = a.view((0, 0), (n, n)).into_owned();
    let lu = lead.clone().lu();
    let x0 = lu.solve(b)?;
    // Reject nearly singular leading blocks.
    let scale = lead.amax();
    let inv = lead.try_inverse()?;
    if inv.amax() * scale > 1e12 {
        return None;
    }
    let mut basis = Vec::with_capacity(n);
    let mut binv = inv;
    let mut xb = DVector::zeros(n);
    for i in 0..n {
        if x0[i] >= 0.0 {
            basis.push(i);
            xb[i] = x0[i];
        } else {
            basis.push(i + d);
            xb[i] = -x0[i];
            // Negating the basis column negates the corresponding row of
            // the inverse.
            for j in 0..n {
                binv[(i, j)] = -binv[(i, j)];
            }
        }
    }
    Some(Tableau {
        a,
        b: b.clone(),
        n,
        d,
        basis,
        binv,
        xb,
    })
}

/// Phase-one simplex with artificial variables, used when the warm start is
/// unavailable. Artificial `i` has the signed unit column `sign(b_i) e_i`.
fn phase_one<'a>(a: &'a DMatrix<f64>, b: &DVector<f64>) -> Result<Tableau<'a>, SparseError> {
    let n = a.nrows();
    let d = a.ncols();
    let signs: Vec<f64> = b.iter().map(|&x| if x >= 0.0 { 1.0 } else { -1.0 }).collect();

    // Basis starts as the artificials; variables [0, 2d) are real, variable
    // 2d + i is artificial i.
    let mut basis: Vec<usize> = (0..n).map(|i| 2 * d + i).collect();
    let mut binv = DMatrix::from_diagonal(&DVector::from_iterator(n, signs.iter().cloned()));
    let mut xb = DVector::from_fn(n, |i, _| b[i].abs());

    let column = |var: usize| -> DVector<f64> {
        if var < d {
            a.column(var).into_owned()
        } else if var < 2 * d {
            -a.column(var - d).into_owned()
        } else {
            let mut e = DVector::zeros(n);
            e[var - 2 * d] = signs[var - 2 * d];
            e
        }
    };
    let cost = |var: usize| -> f64 {
        if var < 2 * d {
            0.0
        } else {
            1.0
        }
    };

    let max_iter = 200 * (n + d) + 20_000;
    let mut iterations = 0usize;
    loop {
        let cb = DVector::from_fn(n, |i, _| cost(basis[i]));
        let y = binv.tr_mul(&cb);
        let g = a.tr_mul(&y);
        // Enter only real variables; artificial reduced costs never improve.
        let mut entering = None;
        let mut best = -PRICE_TOL;
        for j in 0..d {
            let rc_u = -g[j];
            let rc_v = g[j];
            if rc_u < best {
                best = rc_u;
                entering = Some(j);
            }
            if rc_v < best {
                best = rc_v;
                entering = Some(j + d);
            }
        }
        let Some(entering) = entering else {
            break;
        };
        let w = &binv * column(entering);
        let mut row: Option<usize> = None;
        let mut best_ratio = f64::INFINITY;
        for i in 0..n {
            if w[i] > PIVOT_TOL {
                let ratio = xb[i] / w[i];
                // Prefer kicking artificials out of the basis on ties.
                let better = match row {
                    None => true,
                    Some(r) => {
                        ratio < best_ratio - 1e-12
                            || (ratio < best_ratio + 1e-12 && basis[i] > basis[r])
                    }
                };
                if better {
                    best_ratio = ratio;
                    row = Some(i);
                }
            }
        }
        let Some(row) = row else {
            return Err(SparseError::NumericalBreakdown("phase-one unbounded"));
        };
        let wr = w[row];
        for i in 0..n {
            if i != row {
                xb[i] = (xb[i] - best_ratio * w[i]).max(0.0);
            }
        }
        xb[row] = best_ratio;
        basis[row] = entering;
        let pivot_row = binv.row(row) / wr;
        for i in 0..n {
            if i == row {
                continue;
            }
            let wi = w[i];
            if wi != 0.0 {
                for j in 0..n {
                    binv[(i, j)] -= wi * pivot_row[j];
                }
            }
        }
        binv.row_mut(row).copy_from(&pivot_row);

        iterations += 1;
        if iterations > max_iter {
            return Err(SparseError::SimplexCycling);
        }
    }

    let infeasibility: f64 = (0..n)
        .filter(|&i| basis[i] >= 2 * d)
        .map(|i| xb[i])
        .sum();
    if infeasibility > 1e-8 * (1.0 + b.norm()) {
        return Err(SparseError::Infeasible);
    }
    // Any artificial still basic sits at value ~0; replace it by a real
    // variable whose tableau column has a usable pivot in that row.
    for i in 0..n {
        if basis[i] >= 2 * d {
            let mut replaced = false;
            for j in 0..(2 * d) {
                if basis.contains(&j) {
                    continue;
                }
                let w = &binv * column(j);
                if w[i].abs() > 1e-8 {
                    let wr = w[i];
                    xb[i] = 0.0;
                    basis[i] = j;
                    let pivot_row = binv.row(i) / wr;
                    for r in 0..n {
                        if r == i {
                            continue;
                        }
                        let wi = w[r];
                        if wi != 0.0 {
                            for c in 0..n {
                                binv[(r, c)] -= wi * pivot_row[c];
                            }
                        }
                    }
                    binv.row_mut(i).copy_from(&pivot_row);
                    replaced = true;
                    break;
                }
            }
            if !replaced {
                return Err(SparseError::NumericalBreakdown(
                    "could not drive artificial out of basis",
                ));
            }
        }
    }

    Ok(Tableau {
        a,
        b: b.clone(),
        n,
        d,
        basis,
        binv,
        xb,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    #[test]
    fn identity_design_returns_outputs() {
        let a = DMatrix::identity(3, 3);
        let b = DVector::from_vec(vec![0.5, -2.0, 1.0]);
        let sol = solve_basis_pursuit_lp(&a, &b).unwrap();
        let alpha = &sol.u - &sol.v;
        assert!((alpha - &b).amax() < 1e-10);
        assert!((sol.objective - 3.5).abs() < 1e-10);
    }

    #[test]
    fn cheaper_column_wins() {
        // A = [2 1], b = 2: vertex solutions are (1, 0) with l1 = 1 and
        // (0, 2) with l1 = 2; the scaled column is cheaper per unit.
        let a = DMatrix::from_row_slice(1, 2, &[2.0, 1.0]);
        let b = DVector::from_vec(vec![2.0]);
        let sol = solve_basis_pursuit_lp(&a, &b).unwrap();
        let alpha = &sol.u - &sol.v;
        assert!((alpha[0] - 1.0).abs() < 1e-12);
        assert!(alpha[1].abs() < 1e-12);
        assert!((sol.objective - 1.0).abs() < 1e-12);
    }

    #[test]
    fn disjoint_supports_and_small_basis() {
        let mut rng = SeededRng::new(64);
        for trial in 0..25 {
            let n = 6;
            let d = 20;
            let a = DMatrix::from_fn(n, d, |_, _| rng.standard_normal());
            let b = rng.standard_normal_vector(n);
            let sol = solve_basis_pursuit_lp(&a, &b).unwrap();
            let alpha = &sol.u - &sol.v;
            assert!(
                (&a * &alpha - &b).norm() <= 1e-8 * b.norm().max(1.0),
                "trial {trial} infeasible"
            );
            for j in 0..d {
                assert!(
                    !(sol.u[j] > 1e-10 && sol.v[j] > 1e-10),
                    "supports overlap at {j}"
                );
            }
            let nnz = alpha.iter().filter(|x| x.abs() > 1e-10).count();
            assert!(nnz <= n, "support {nnz} > n = {n}");
        }
    }

    #[test]
    fn phase_one_handles_singular_leading_block() {
        // First n columns identical: warm start is rejected, phase one runs.
        let mut rng = SeededRng::new(65);
        let n = 4;
        let d = 12;
        let mut a = DMatrix::from_fn(n, d, |_, _| rng.standard_normal());
        for j in 1..n {
            let c0 = a.column(0).into_owned();
            a.set_column(j, &c0);
        }
        let b = rng.standard_normal_vector(n);
        let sol = solve_basis_pursuit_lp(&a, &b).unwrap();
        let alpha = &sol.u - &sol.v;
        assert!((&a * &alpha - &b).norm() <= 1e-8 * b.norm());
    }

    #[test]
    fn infeasible_system_detected() {
        // Rank-1 A with b outside its column space.
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 1.0, 2.0, 3.0]);
        let b = DVector::from_vec(vec![1.0, -1.0]);
        assert!(matches!(
            solve_basis_pursuit_lp(&a, &b),
            Err(SparseError::Infeasible) | Err(SparseError::NumericalBreakdown(_))
        ));
    }

    #[test]
    fn objective_below_random_feasible_points() {
        let mut rng = SeededRng::new(66);
        let n = 5;
        let d = 15;
        let a = DMatrix::from_fn(n, d, |_, _| rng.standard_normal());
        let b = rng.standard_normal_vector(n);
        let sol = solve_basis_pursuit_lp(&a, &b).unwrap();
        // Random feasible points: particular solution plus null-space noise.
        let pinv_part = crate::linalg::min_norm_solve(&a, &b).unwrap();
        let svd = a.clone().svd(false, true);
        let v_t = svd.v_t.unwrap();
        for _ in 0..1000 {
            let z = rng.standard_normal_vector(d);
            let null_component = &z - v_t.transpose() * (&v_t * &z);
            let x = &pinv_part + null_component;
            assert!((&a * &x - &b).norm() < 1e-8);
            let l1: f64 = x.iter().map(|t| t.abs()).sum();
            assert!(sol.objective <= l1 + 1e-8);
        }
    }
}
