//! Thresholded l1 relaxation of the minimum-cardinality attack.
//!
//! Solves `min ‖a‖₁  s.t.  a = Hc, c ≥ 0, 1ᵀc ≥ θ₁, H_protected c = 0,
//! c(i) = 0 for protected states`, then keeps the entries with `|a(i)| > θ₂`.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::grid::{build_measurement_matrix, GridTopology, MeasurementSet};
use crate::oracle::lp::{self, Certificate, LpError, StandardLp};

pub const DEFAULT_THETA1: f64 = 1.0;
pub const DEFAULT_THETA2: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum L1Error {
    #[error("no admissible state shift: the protections pin every state")]
    Infeasible,
    #[error(transparent)]
    Solver(LpError),
}

#[derive(Debug, Clone)]
pub struct L1Result {
    /// `Hc` for the LP's `c`, one entry per measurement.
    pub raw_a: Vec<f64>,
    pub c: Vec<f64>,
    pub thresholded_support: Vec<usize>,
    pub cardinality: usize,
    pub objective: f64,
    pub certificate: Certificate,
}

pub fn l1_attack(
    topo: &GridTopology,
    ms: &MeasurementSet,
    theta1: f64,
    theta2: f64,
) -> Result<L1Result, L1Error> {
    let h = build_measurement_matrix(topo, ms).into_inner();
    let n = topo.bus_count();
    let free: Vec<usize> =
        topo.buses().filter(|b| !ms.protected_states().contains(b)).map(|b| b.index()).collect();
    let unprotected = ms.unprotected_ids();
    let protected = ms.protected_ids();

    // columns: c over free buses, then (a⁺, a⁻) per unprotected meter, then
    // the surplus of the normalization row
    let nc = free.len();
    let cols = nc + 2 * unprotected.len() + 1;
    let rows = unprotected.len() + protected.len() + 1;
    let mut a = DMatrix::zeros(rows, cols);
    let mut b = vec![0.0; rows];
    let mut cost = vec![0.0; cols];
    for (r, &meas) in unprotected.iter().enumerate() {
        for (k, &bus) in free.iter().enumerate() {
            a[(r, k)] = -h[(meas, bus)];
        }
        a[(r, nc + 2 * r)] = 1.0;
        a[(r, nc + 2 * r + 1)] = -1.0;
        cost[nc + 2 * r] = 1.0;
        cost[nc + 2 * r + 1] = 1.0;
    }
    for (i, &meas) in protected.iter().enumerate() {
        let r = unprotected.len() + i;
        for (k, &bus) in free.iter().enumerate() {
            a[(r, k)] = h[(meas, bus)];
        }
    }
    let last = rows - 1;
    for k in 0..nc {
        a[(last, k)] = 1.0;
    }
    a[(last, cols - 1)] = -1.0;
    b[last] = theta1;

    let problem = StandardLp { a, b, cost };
    let sol = lp::solve(&problem).map_err(|e| match e {
        LpError::Infeasible => L1Error::Infeasible,
        other => L1Error::Solver(other),
    })?;
    let certificate = lp::certificate(&problem, &sol);

    let mut c = vec![0.0; n];
    for (k, &bus) in free.iter().enumerate() {
        c[bus] = sol.x[k];
    }
    let raw_a: Vec<f64> = (&h * DVector::from_column_slice(&c)).iter().copied().collect();
    let thresholded_support: Vec<usize> =
        raw_a.iter().enumerate().filter(|(_, v)| v.abs() > theta2).map(|(i, _)| i).collect();
    Ok(L1Result {
        cardinality: thresholded_support.len(),
        thresholded_support,
        raw_a,
        c,
        objective: sol.objective,
        certificate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::optimal_attack;
    use crate::fixtures;

    #[test]
    fn chain_matches_optimum() {
        let (topo, ms) = fixtures::chain3();
        let r = l1_attack(&topo, &ms, DEFAULT_THETA1, DEFAULT_THETA2).unwrap();
        // the objective is at least max c(i) >= 1/3, reached by a uniform shift
        assert_eq!(r.cardinality, 1);
        assert_eq!(r.thresholded_support, vec![2]);
        assert!((r.objective - 1.0 / 3.0).abs() < 1e-9);
        assert!(r.c.iter().all(|&v| v >= 0.0));
        assert!(r.c.iter().sum::<f64>() >= 1.0 - 1e-9);
    }

    #[test]
    fn infeasible_when_fully_protected() {
        let (topo, ms) = fixtures::chain3();
        let err = l1_attack(&topo, &ms.with_protected(&[0, 1, 2]), 1.0, 1e-3).unwrap_err();
        assert_eq!(err, L1Error::Infeasible);
    }

    #[test]
    fn respects_protections() {
        let topo = fixtures::ieee14();
        let mut ms = fixtures::ieee14_standard().with_protected(&[0, 3, 7, 20]);
        ms.protect_state(crate::grid::BusId(5));
        let r = l1_attack(&topo, &ms, 1.0, 1e-3).unwrap();
        for id in ms.protected_ids() {
            assert!(r.raw_a[id].abs() < 1e-8);
        }
        assert!(r.c[4].abs() < 1e-12);
        assert!(r.cardinality >= optimal_attack(&topo, &ms).cardinality);
        assert!(r.certificate.max_complementarity <= 1e-8);
        assert!(r.certificate.max_dual_infeasibility <= 1e-8);
    }
}
