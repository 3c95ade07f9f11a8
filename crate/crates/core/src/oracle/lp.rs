//! Dense two-phase primal simplex with Bland's rule.
//!
//! Solves `min costᵀx  s.t.  Ax = b, x ≥ 0`. Sized for the l1 baseline: a few
//! hundred rows and columns at most.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

const EPS: f64 = 1e-9;
const MAX_PIVOTS: usize = 200_000;
/// Smallest entry accepted when pivoting an artificial out of the basis.
const DRIVE_OUT_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum LpError {
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("simplex stopped after {0} pivots")]
    IterationLimit(usize),
}

/// `min costᵀx  s.t.  Ax = b, x ≥ 0`.
#[derive(Debug, Clone)]
pub struct StandardLp {
    pub a: DMatrix<f64>,
    pub b: Vec<f64>,
    pub cost: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Basic columns, one per non-redundant row.
    pub basis: Vec<usize>,
    /// Original rows left after dropping redundant ones, ascending. Together
    /// with `basis` they index an invertible basis matrix.
    pub rows: Vec<usize>,
    pub pivots: usize,
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    /// Reduced costs, with `-objective` in the last slot.
    obj: Vec<f64>,
    basis: Vec<usize>,
    /// Original rows still in play.
    origin: Vec<usize>,
    pivots: usize,
}

impl Tableau {
    fn rhs(&self) -> usize {
        self.obj.len() - 1
    }

    fn pivot(&mut self, r: usize, col: usize) {
        let p = self.rows[r][col];
        self.rows[r].iter_mut().for_each(|v| *v /= p);
        let pivot_row = std::mem::take(&mut self.rows[r]);
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[col];
            if f != 0.0 {
                row.iter_mut().zip(&pivot_row).for_each(|(v, &pv)| *v -= f * pv);
                row[col] = 0.0;
            }
        }
        let f = self.obj[col];
        if f != 0.0 {
            self.obj.iter_mut().zip(&pivot_row).for_each(|(v, &pv)| *v -= f * pv);
            self.obj[col] = 0.0;
        }
        self.rows[r] = pivot_row;
        self.basis[r] = col;
        self.pivots += 1;
    }

    /// Runs Bland-rule pivots over columns `< allowed` until optimal.
    fn optimize(&mut self, allowed: usize) -> Result<(), LpError> {
        let rhs = self.rhs();
        loop {
            if self.pivots >= MAX_PIVOTS {
                return Err(LpError::IterationLimit(self.pivots));
            }
            let Some(col) = (0..allowed).find(|&j| self.obj[j] < -EPS) else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                if row[col] <= EPS {
                    continue;
                }
                let ratio = row[rhs] / row[col];
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((j, best)) => {
                        if ratio < best - EPS
                            || (ratio <= best + EPS && self.basis[i] < self.basis[j])
                        {
                            Some((i, ratio))
                        } else {
                            Some((j, best))
                        }
                    }
                };
            }
            let Some((r, _)) = leave else {
                return Err(LpError::Unbounded);
            };
            self.pivot(r, col);
        }
    }
}

pub fn solve(lp: &StandardLp) -> Result<LpSolution, LpError> {
    let (m, nv) = lp.a.shape();
    assert_eq!(lp.b.len(), m, "b has one entry per row");
    assert_eq!(lp.cost.len(), nv, "cost has one entry per column");
    let width = nv + m + 1;
    let rhs = width - 1;

    let mut rows = Vec::with_capacity(m);
    for i in 0..m {
        let sign = if lp.b[i] < 0.0 { -1.0 } else { 1.0 };
        let mut row = vec![0.0; width];
        for (j, v) in row.iter_mut().take(nv).enumerate() {
            *v = sign * lp.a[(i, j)];
        }
        row[nv + i] = 1.0;
        row[rhs] = sign * lp.b[i];
        rows.push(row);
    }
    // phase 1: minimize the sum of artificials
    let mut obj = vec![0.0; width];
    for row in &rows {
        for j in 0..nv {
            obj[j] -= row[j];
        }
        obj[rhs] -= row[rhs];
    }
    let mut t = Tableau { rows, obj, basis: (nv..nv + m).collect(), origin: (0..m).collect(), pivots: 0 };
    t.optimize(nv + m)?;
    let scale = 1.0 + lp.b.iter().map(|v| v.abs()).sum::<f64>();
    if -t.obj[rhs] > 1e-8 * scale {
        return Err(LpError::Infeasible);
    }

    // drive artificials out of the basis; rows where that fails are redundant
    let mut r = 0;
    while r < t.rows.len() {
        if t.basis[r] >= nv {
            let col = (0..nv).max_by(|&a, &b| t.rows[r][a].abs().total_cmp(&t.rows[r][b].abs()));
            if let Some(col) = col.filter(|&j| t.rows[r][j].abs() > DRIVE_OUT_TOL) {
                t.pivot(r, col);
            } else {
                // the constraint whose artificial sits here is implied by the others
                let dropped = t.basis[r] - nv;
                t.rows.remove(r);
                t.basis.remove(r);
                t.origin.retain(|&o| o != dropped);
                continue;
            }
        }
        r += 1;
    }

    // phase 2
    let mut obj = vec![0.0; width];
    obj[..nv].copy_from_slice(&lp.cost);
    for (row, &bcol) in t.rows.iter().zip(&t.basis) {
        let cb = lp.cost[bcol];
        if cb != 0.0 {
            obj.iter_mut().zip(row).for_each(|(v, &rv)| *v -= cb * rv);
        }
    }
    t.obj = obj;
    t.optimize(nv)?;

    let mut x = vec![0.0; nv];
    for (row, &bcol) in t.rows.iter().zip(&t.basis) {
        x[bcol] = row[rhs].max(0.0);
    }
    let objective = lp.cost.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(LpSolution { x, objective, basis: t.basis, rows: t.origin, pivots: t.pivots })
}

/// Optimality evidence recomputed from the original data: duals from the
/// final basis, then primal feasibility, dual feasibility and complementary
/// slackness residuals.
#[derive(Debug, Clone)]
pub struct Certificate {
    pub duals: Vec<f64>,
    pub max_primal_residual: f64,
    pub max_dual_infeasibility: f64,
    pub max_complementarity: f64,
    pub duality_gap: f64,
}

pub fn certificate(lp: &StandardLp, sol: &LpSolution) -> Certificate {
    let (m, nv) = lp.a.shape();
    let k = sol.basis.len();
    let basis_matrix = DMatrix::from_fn(k, k, |i, j| lp.a[(sol.rows[i], sol.basis[j])]);
    let cb = DVector::from_iterator(k, sol.basis.iter().map(|&j| lp.cost[j]));
    let y = if k == 0 {
        DVector::zeros(0)
    } else {
        basis_matrix.transpose().lu().solve(&cb).unwrap_or_else(|| DVector::zeros(k))
    };

    let mut duals = vec![0.0; m];
    for (i, &row) in sol.rows.iter().enumerate() {
        duals[row] = y[i];
    }
    let duals_v = DVector::from_column_slice(&duals);
    let x = DVector::from_column_slice(&sol.x);
    let reduced = DVector::from_column_slice(&lp.cost) - lp.a.transpose() * &duals_v;
    let primal = (&lp.a * &x - DVector::from_column_slice(&lp.b)).amax();
    let negative = sol.x.iter().fold(0.0f64, |acc, v| acc.max(-v));
    let max_dual_infeasibility = reduced.iter().fold(0.0f64, |acc, d| acc.max(-d));
    let max_complementarity = (0..nv).map(|j| (x[j] * reduced[j]).abs()).fold(0.0, f64::max);
    let dual_objective: f64 = duals.iter().zip(&lp.b).map(|(y, b)| y * b).sum();
    Certificate {
        duals,
        max_primal_residual: primal.max(negative),
        max_dual_infeasibility,
        max_complementarity,
        duality_gap: (sol.objective - dual_objective).abs(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp(rows: usize, cols: usize, a: &[f64], b: &[f64], cost: &[f64]) -> StandardLp {
        StandardLp { a: DMatrix::from_row_slice(rows, cols, a), b: b.to_vec(), cost: cost.to_vec() }
    }

    #[test]
    fn small_textbook_problem() {
        // max 3x + 2y  s.t. x + y ≤ 4, x + 3y ≤ 6, x ≤ 3  (slacks s1..s3)
        let p = lp(
            3,
            5,
            &[1.0, 1.0, 1.0, 0.0, 0.0, 1.0, 3.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
            &[4.0, 6.0, 3.0],
            &[-3.0, -2.0, 0.0, 0.0, 0.0],
        );
        let s = solve(&p).unwrap();
        assert!((s.objective + 11.0).abs() < 1e-9);
        assert!((s.x[0] - 3.0).abs() < 1e-9 && (s.x[1] - 1.0).abs() < 1e-9);
        let cert = certificate(&p, &s);
        assert!(cert.max_complementarity < 1e-8);
        assert!(cert.max_dual_infeasibility < 1e-8);
        assert!(cert.duality_gap < 1e-8);
    }

    #[test]
    fn infeasible_problem() {
        // x1 + x2 = -1 with x ≥ 0
        let p = lp(1, 2, &[1.0, 1.0], &[-1.0], &[1.0, 1.0]);
        assert_eq!(solve(&p).unwrap_err(), LpError::Infeasible);
    }

    #[test]
    fn unbounded_problem() {
        // min -x1  s.t. x1 - x2 = 0
        let p = lp(1, 2, &[1.0, -1.0], &[0.0], &[-1.0, 0.0]);
        assert_eq!(solve(&p).unwrap_err(), LpError::Unbounded);
    }

    #[test]
    fn redundant_rows_are_dropped() {
        // x1 + x2 = 2 stated twice
        let p = lp(2, 2, &[1.0, 1.0, 1.0, 1.0], &[2.0, 2.0], &[1.0, 2.0]);
        let s = solve(&p).unwrap();
        assert_eq!(s.basis.len(), 1);
        assert!((s.objective - 2.0).abs() < 1e-12);
        let cert = certificate(&p, &s);
        assert!(cert.max_primal_residual < 1e-12);
        assert!(cert.max_complementarity < 1e-12);
    }

    #[test]
    fn degenerate_problem_terminates() {
        // Beale's cycling example in standard form
        let p = lp(
            3,
            7,
            &[
                0.25, -8.0, -1.0, 9.0, 1.0, 0.0, 0.0, //
                0.5, -12.0, -0.5, 3.0, 0.0, 1.0, 0.0, //
                0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0,
            ],
            &[0.0, 0.0, 1.0],
            &[-0.75, 20.0, -0.5, 6.0, 0.0, 0.0, 0.0],
        );
        let s = solve(&p).unwrap();
        assert!((s.objective + 1.25).abs() < 1e-9);
        let cert = certificate(&p, &s);
        assert!(cert.max_complementarity < 1e-8 && cert.max_dual_infeasibility < 1e-8);
    }
}
