use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::grid::{build_measurement_matrix, GridTopology, MeasurementSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("measurement matrix has rank {rank}, need {needed}: the state is unobservable")]
pub struct RankError {
    pub rank: usize,
    pub needed: usize,
}

const RANK_RTOL: f64 = 1e-10;

/// Numerical rank from singular values, relative to the largest one.
pub fn rank(m: &DMatrix<f64>) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().singular_values();
    let max = sv.max();
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > max * RANK_RTOL * m.nrows().max(m.ncols()) as f64).count()
}

/// True when the protected rows of H together with unit rows for the
/// protected states have full column rank, i.e. no hidden attack exists.
pub fn protections_pin_all_states(topo: &GridTopology, ms: &MeasurementSet) -> bool {
    let h = build_measurement_matrix(topo, ms);
    let n = topo.bus_count();
    let protected = ms.protected_ids();
    let states: Vec<usize> = ms.protected_states().iter().map(|b| b.index()).collect();
    let rows = protected.len() + states.len();
    let mut stacked = DMatrix::zeros(rows, n);
    for (r, &id) in protected.iter().enumerate() {
        stacked.row_mut(r).copy_from(&h.matrix().row(id));
    }
    for (r, &col) in states.iter().enumerate() {
        stacked[(protected.len() + r, col)] = 1.0;
    }
    rank(&stacked) == n
}

/// Least-squares solver for a fixed full-column-rank H, factored once.
pub struct LeastSquares {
    h: DMatrix<f64>,
    /// Leading `n` rows of Qᵀ.
    qt: DMatrix<f64>,
    r: DMatrix<f64>,
}

impl LeastSquares {
    pub fn new(h: &DMatrix<f64>) -> Result<Self, RankError> {
        let r = rank(h);
        if r < h.ncols() || h.nrows() < h.ncols() {
            return Err(RankError { rank: r, needed: h.ncols() });
        }
        let qr = h.clone().qr();
        let qt = qr.q().transpose().rows(0, h.ncols()).into_owned();
        Ok(LeastSquares { h: h.clone(), qt, r: qr.r() })
    }

    /// Returns the estimate and the residual norm `‖z − Hx̂‖₂`.
    pub fn solve(&self, z: &DVector<f64>) -> (DVector<f64>, f64) {
        let rhs = &self.qt * z;
        let x = self.r.solve_upper_triangular(&rhs).expect("full rank R is invertible");
        let residual = (z - &self.h * &x).norm();
        (x, residual)
    }
}

pub fn least_squares_estimate(
    h: &DMatrix<f64>,
    z: &DVector<f64>,
) -> Result<(DVector<f64>, f64), RankError> {
    Ok(LeastSquares::new(h)?.solve(z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn chain_h() -> DMatrix<f64> {
        let (topo, ms) = fixtures::chain3();
        build_measurement_matrix(&topo, &ms).into_inner()
    }

    #[test]
    fn exact_measurements_recover_state() {
        let h = chain_h();
        let x = DVector::from_vec(vec![0.1, -0.2, 0.3]);
        let (x_hat, r) = least_squares_estimate(&h, &(&h * &x)).unwrap();
        assert!((x_hat - x).amax() < 1e-10);
        assert!(r < 1e-10);
    }

    #[test]
    fn column_space_shift_moves_estimate() {
        let h = chain_h();
        let x = DVector::from_vec(vec![0.1, -0.2, 0.3]);
        let c = DVector::from_vec(vec![0.0, 1.0, 1.0]);
        let (x_hat, r) = least_squares_estimate(&h, &(&h * (&x + &c))).unwrap();
        assert!((x_hat - x - c).amax() < 1e-10);
        assert!(r < 1e-10);
    }

    #[test]
    fn residual_matches_projection_route() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (m, n) = (12, 5);
        let h = DMatrix::from_fn(m, n, |_, _| rng.random_range(-2.0..2.0));
        let z = DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0));
        let (_, r) = least_squares_estimate(&h, &z).unwrap();
        // normal equations: P = H (HᵀH)⁻¹ Hᵀ
        let gram_inv = (h.transpose() * &h).try_inverse().unwrap();
        let p = &h * gram_inv * h.transpose();
        let r_proj = (&z - p * &z).norm();
        assert!((r - r_proj).abs() <= 1e-8);
    }

    #[test]
    fn rank_deficient_matrix_is_rejected() {
        let (topo, _) = fixtures::chain3();
        let ms = MeasurementSet::standard(&topo, &[]);
        let h = build_measurement_matrix(&topo, &ms).into_inner();
        let err = LeastSquares::new(&h).err().unwrap();
        assert_eq!(err, RankError { rank: 2, needed: 3 });
    }

    #[test]
    fn pinned_states() {
        let (topo, ms) = fixtures::chain3();
        assert!(!protections_pin_all_states(&topo, &ms));
        assert!(protections_pin_all_states(&topo, &ms.with_protected(&[0, 1, 2])));
        let mut partial = ms.with_protected(&[0, 1]);
        assert!(!protections_pin_all_states(&topo, &partial));
        partial.protect_state(crate::grid::BusId(3));
        assert!(protections_pin_all_states(&topo, &partial));
    }
}
