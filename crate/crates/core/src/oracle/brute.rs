//! Exhaustive search over 0-1 state shifts and over protection subsets.

use itertools::Itertools;
use thiserror::Error;

use crate::attack::{optimal_attack, AttackCost};
use crate::grid::{build_measurement_matrix, GridTopology, MeasurementSet};

pub const WITNESS_CAP: usize = 100;
pub const MAX_PROTECTION_SUBSETS: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("{buses} buses exceed the enumeration limit of {limit}")]
    TooManyBuses { buses: usize, limit: usize },
    #[error("{subsets} protection subsets exceed the limit of {limit}")]
    TooManySubsets { subsets: u128, limit: u128 },
    #[error("budget {k} exceeds the {available} unprotected measurements")]
    BudgetTooLarge { k: usize, available: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleReport {
    /// `None` when no admissible non-zero shift exists.
    pub optimal_cardinality: Option<usize>,
    /// Up to [`WITNESS_CAP`] optimal 0-1 shifts, in enumeration order.
    pub witnesses: Vec<Vec<u8>>,
    pub enumerated_count: u64,
}

/// Minimum `‖Hc‖₀` over every non-zero 0-1 vector `c` that keeps protected
/// measurements and protected states untouched. `c` runs as a binary counter
/// with bus 1 in the lowest bit.
pub fn brute_force_attack(
    topo: &GridTopology,
    ms: &MeasurementSet,
    max_n: usize,
) -> Result<OracleReport, OracleError> {
    let n = topo.bus_count();
    if n > max_n || n >= 63 {
        return Err(OracleError::TooManyBuses { buses: n, limit: max_n.min(62) });
    }
    let rows = build_measurement_matrix(topo, ms).sparse_rows();
    let protected: Vec<bool> = ms.measurements().iter().map(|m| m.protected).collect();
    let pinned: u64 = ms.protected_states().iter().map(|b| 1u64 << b.index()).sum();

    let mut best: Option<usize> = None;
    let mut witnesses = Vec::new();
    let total = (1u64 << n) - 1;
    'shifts: for mask in 1..=total {
        if mask & pinned != 0 {
            continue;
        }
        let mut count = 0;
        for (row, entries) in rows.iter().enumerate() {
            let value: f64 =
                entries.iter().filter(|(col, _)| mask >> col & 1 == 1).map(|(_, v)| v).sum();
            if value != 0.0 {
                if protected[row] {
                    continue 'shifts;
                }
                count += 1;
            }
        }
        match best {
            Some(b) if count > b => continue,
            Some(b) if count == b => {}
            _ => {
                best = Some(count);
                witnesses.clear();
            }
        }
        if witnesses.len() < WITNESS_CAP {
            witnesses.push((0..n).map(|i| (mask >> i & 1) as u8).collect());
        }
    }
    Ok(OracleReport { optimal_cardinality: best, witnesses, enumerated_count: total })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtectionOptimum {
    pub value: AttackCost,
    /// First maximizing subset in lexicographic order of measurement ids.
    pub subset: Vec<usize>,
    pub evaluated: u64,
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i as u128 + 1))
}

/// Best attainable attack cost over every way of protecting `k` more
/// measurements.
pub fn brute_force_protection(
    topo: &GridTopology,
    ms: &MeasurementSet,
    k: usize,
) -> Result<ProtectionOptimum, OracleError> {
    let candidates = ms.unprotected_ids();
    if k > candidates.len() {
        return Err(OracleError::BudgetTooLarge { k, available: candidates.len() });
    }
    let subsets = binomial(candidates.len(), k);
    if subsets > MAX_PROTECTION_SUBSETS {
        return Err(OracleError::TooManySubsets { subsets, limit: MAX_PROTECTION_SUBSETS });
    }
    let mut best: Option<(AttackCost, Vec<usize>)> = None;
    let mut evaluated = 0;
    for subset in candidates.into_iter().combinations(k) {
        evaluated += 1;
        let value = optimal_attack(topo, &ms.with_protected(&subset)).cost();
        if best.as_ref().is_none_or(|(b, _)| value > *b) {
            best = Some((value, subset));
        }
    }
    let (value, subset) = best.expect("at least the empty subset");
    Ok(ProtectionOptimum { value, subset, evaluated })
}
