//! Optimal hidden attacks from the min-cut of the protected attack graph.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;
use thiserror::Error;

use crate::attack_graph::protected_attack_graph;
use crate::grid::{build_measurement_matrix, GridTopology, MeasurementSet};
use crate::mincut::{global_min_cut, label_sides, MinCutError};
use crate::oracle::lsq::{LeastSquares, RankError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackStatus {
    Optimal,
    /// Protections pin every state variable; no hidden attack exists.
    Infeasible,
    /// H lacks full column rank: some buses can be shifted without touching
    /// any meter.
    Unobservable,
}

/// Attacker effort, ordered so that an impossible attack ranks above any
/// finite meter count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AttackCost {
    Meters(usize),
    Impossible,
}

impl AttackCost {
    pub fn meters(self) -> Option<usize> {
        match self {
            AttackCost::Meters(m) => Some(m),
            AttackCost::Impossible => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackResult {
    pub status: AttackStatus,
    pub cardinality: usize,
    /// Ids of corrupted measurements, ascending.
    pub attacked_measurements: Vec<usize>,
    /// State shift per bus; 0-1 valued.
    pub c: Vec<f64>,
    /// Injected vector, `a = Hc`.
    pub a: Vec<f64>,
}

#[derive(Serialize)]
struct AttackReport<'a> {
    status: AttackStatus,
    cardinality: usize,
    attacked_measurements: &'a [usize],
    c: Vec<u8>,
    a: &'a [f64],
}

impl AttackResult {
    pub fn cost(&self) -> AttackCost {
        match self.status {
            AttackStatus::Infeasible => AttackCost::Impossible,
            _ => AttackCost::Meters(self.cardinality),
        }
    }

    /// Buses (1-based) whose estimate the attack shifts.
    pub fn shifted_buses(&self) -> Vec<usize> {
        self.c.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(i, _)| i + 1).collect()
    }

    pub fn to_json(&self) -> String {
        let report = AttackReport {
            status: self.status,
            cardinality: self.cardinality,
            attacked_measurements: &self.attacked_measurements,
            c: self.c.iter().map(|&v| u8::from(v != 0.0)).collect(),
            a: &self.a,
        };
        serde_json::to_string_pretty(&report).expect("report serializes")
    }
}

fn assemble(
    topo: &GridTopology,
    ms: &MeasurementSet,
    status: AttackStatus,
    c: Vec<f64>,
) -> AttackResult {
    let h = build_measurement_matrix(topo, ms);
    let a = h.matrix() * DVector::from_column_slice(&c);
    let attacked_measurements: Vec<usize> =
        a.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(i, _)| i).collect();
    AttackResult {
        status,
        cardinality: attacked_measurements.len(),
        attacked_measurements,
        c,
        a: a.iter().copied().collect(),
    }
}

/// Minimum-cardinality hidden attack respecting protected measurements and
/// protected state variables.
pub fn optimal_attack(topo: &GridTopology, ms: &MeasurementSet) -> AttackResult {
    let n = topo.bus_count();
    let g = protected_attack_graph(topo, ms);
    match global_min_cut(&g) {
        Ok(cut) => {
            let labels = label_sides(&g, &cut);
            let c = labels[..n].iter().map(|&l| f64::from(l)).collect();
            let result = assemble(topo, ms, AttackStatus::Optimal, c);
            debug_assert_eq!(result.cardinality as u64, cut.value);
            result
        }
        Err(MinCutError::Infeasible) => AttackResult {
            status: AttackStatus::Infeasible,
            cardinality: 0,
            attacked_measurements: Vec::new(),
            c: vec![0.0; n],
            a: vec![0.0; ms.len()],
        },
        Err(MinCutError::Disconnected) => {
            let reached = g.reachable_from_reference(&[]);
            let c = (0..n).map(|i| f64::from(u8::from(!reached[g.supernode_of(i)]))).collect();
            let result = assemble(topo, ms, AttackStatus::Unobservable, c);
            debug_assert_eq!(result.cardinality, 0);
            result
        }
    }
}

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("only optimal attacks can be verified (status {0:?})")]
    NotOptimal(AttackStatus),
    #[error(transparent)]
    Rank(#[from] RankError),
    #[error(
        "trial {trial}: residual changed by {residual_diff:e}, estimate shift off by {shift_deviation:e}"
    )]
    VerificationFailure { trial: usize, residual_diff: f64, shift_deviation: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerifyReport {
    pub trials: usize,
    pub max_residual_diff: f64,
    pub max_shift_deviation: f64,
}

pub const VERIFY_TOLERANCE: f64 = 1e-8;

/// Checks that `result.a` leaves the least-squares residual unchanged and
/// shifts the estimate by exactly `result.c`, over `trials` random states
/// (uniform in ±π/6) with Gaussian noise of standard deviation `noise_sigma`.
pub fn verify_hidden(
    topo: &GridTopology,
    ms: &MeasurementSet,
    result: &AttackResult,
    trials: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<VerifyReport, VerifyError> {
    if result.status != AttackStatus::Optimal {
        return Err(VerifyError::NotOptimal(result.status));
    }
    let h = build_measurement_matrix(topo, ms).into_inner();
    let solver = LeastSquares::new(&h)?;
    let a = DVector::from_column_slice(&result.a);
    let c = DVector::from_column_slice(&result.c);
    let noise = Normal::new(0.0, noise_sigma).expect("finite, non-negative sigma");
    let bound = std::f64::consts::PI / 6.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut report = VerifyReport { trials, max_residual_diff: 0.0, max_shift_deviation: 0.0 };
    for trial in 0..trials {
        let x = DVector::from_fn(h.ncols(), |_, _| rng.random_range(-bound..=bound));
        let e = DVector::from_fn(h.nrows(), |_, _| noise.sample(&mut rng));
        let z = &h * x + e;
        let (x_hat, r) = solver.solve(&z);
        let (x_att, r_att) = solver.solve(&(&z + &a));
        let residual_diff = (r_att - r).abs();
        let shift_deviation = (x_att - x_hat - &c).amax();
        report.max_residual_diff = report.max_residual_diff.max(residual_diff);
        report.max_shift_deviation = report.max_shift_deviation.max(shift_deviation);
        if residual_diff > VERIFY_TOLERANCE || shift_deviation > VERIFY_TOLERANCE {
            return Err(VerifyError::VerificationFailure { trial, residual_diff, shift_deviation });
        }
    }
    Ok(report)
}
