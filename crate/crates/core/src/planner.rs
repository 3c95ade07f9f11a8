//! Greedy defender planning: protect measurements or place secure PMUs one at
//! a time, each time picking the candidate that most raises the attacker's
//! min-cut.
//!
//! Every candidate is evaluated from scratch. Ties go to the lowest candidate
//! id, so plans do not depend on evaluation order.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::attack::{optimal_attack, AttackCost, AttackResult, AttackStatus};
use crate::grid::{expand_pmu, BusId, GridTopology, MeasurementSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PlanKind {
    Measurement,
    Pmu,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanStep {
    pub step: usize,
    /// Measurement id or 1-based bus id; `None` once the attacker is locked out.
    pub chosen: Option<usize>,
    /// `None` when no hidden attack remains.
    pub cardinality_after: Option<usize>,
    pub infeasible_after: bool,
}

#[derive(Debug, Clone)]
pub struct Plan {
    pub kind: PlanKind,
    pub steps: Vec<PlanStep>,
    pub measurements: MeasurementSet,
    pub initial: AttackResult,
    pub final_attack: AttackResult,
}

#[derive(Serialize)]
struct StepRecord {
    step: usize,
    kind: PlanKind,
    chosen: Option<usize>,
    cardinality_after: Option<usize>,
    infeasible_after: bool,
}

impl Plan {
    pub fn final_cost(&self) -> AttackCost {
        self.final_attack.cost()
    }

    /// Attack cost after `k` steps (`k = 0` is the baseline).
    pub fn cost_after(&self, k: usize) -> AttackCost {
        if k == 0 {
            return self.initial.cost();
        }
        let step = &self.steps[k - 1];
        match step.cardinality_after {
            Some(c) if !step.infeasible_after => AttackCost::Meters(c),
            _ => AttackCost::Impossible,
        }
    }

    pub fn to_json(&self) -> String {
        let records: Vec<StepRecord> = self
            .steps
            .iter()
            .map(|s| StepRecord {
                step: s.step,
                kind: self.kind,
                chosen: s.chosen,
                cardinality_after: s.cardinality_after,
                infeasible_after: s.infeasible_after,
            })
            .collect();
        serde_json::to_string_pretty(&records).expect("plan serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("budget {k} exceeds the {available} available candidates")]
    BudgetTooLarge { k: usize, available: usize },
    #[error("baseline scenario has status {0:?}; planning needs an attackable baseline")]
    BaselineNotAttackable(AttackStatus),
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ProtectOptions {
    /// Consider every unprotected measurement instead of only the ones the
    /// current optimal attack touches.
    pub full_scan: bool,
}

fn step_record(step: usize, chosen: Option<usize>, attack: &AttackResult) -> PlanStep {
    let infeasible = attack.status == AttackStatus::Infeasible;
    PlanStep {
        step,
        chosen,
        cardinality_after: (!infeasible).then_some(attack.cardinality),
        infeasible_after: infeasible,
    }
}

/// Index of the first candidate with the largest cost.
fn first_best(results: &[AttackResult]) -> usize {
    let mut best = 0;
    for (i, r) in results.iter().enumerate().skip(1) {
        if r.cost() > results[best].cost() {
            best = i;
        }
    }
    best
}

fn greedy<C, E>(
    kind: PlanKind,
    topo: &GridTopology,
    ms: &MeasurementSet,
    k: usize,
    candidates: C,
    extend: E,
) -> Plan
where
    C: Fn(&MeasurementSet, &AttackResult, &[usize]) -> Vec<usize>,
    E: Fn(&MeasurementSet, usize) -> MeasurementSet + Sync,
{
    let initial = optimal_attack(topo, ms);
    let mut current = ms.clone();
    let mut attack = initial.clone();
    let mut chosen = Vec::new();
    let mut steps = Vec::with_capacity(k);
    for step in 1..=k {
        if attack.status == AttackStatus::Infeasible {
            steps.push(step_record(step, None, &attack));
            continue;
        }
        let pool = candidates(&current, &attack, &chosen);
        if pool.is_empty() {
            break;
        }
        let trials: Vec<(MeasurementSet, AttackResult)> = pool
            .par_iter()
            .map(|&cand| {
                let next = extend(&current, cand);
                let result = optimal_attack(topo, &next);
                (next, result)
            })
            .collect();
        let results: Vec<AttackResult> = trials.iter().map(|(_, r)| r.clone()).collect();
        let best = first_best(&results);
        let (next, result) = trials.into_iter().nth(best).expect("index in range");
        chosen.push(pool[best]);
        steps.push(step_record(step, Some(pool[best]), &result));
        current = next;
        attack = result;
    }
    Plan { kind, steps, measurements: current, initial, final_attack: attack }
}

/// Greedily protects `k` more measurements. Candidates at each step are the
/// measurements the current optimal attack corrupts.
pub fn greedy_protect(topo: &GridTopology, ms: &MeasurementSet, k: usize) -> Result<Plan, PlanError> {
    greedy_protect_with(topo, ms, k, ProtectOptions::default())
}

pub fn greedy_protect_with(
    topo: &GridTopology,
    ms: &MeasurementSet,
    k: usize,
    options: ProtectOptions,
) -> Result<Plan, PlanError> {
    let available = ms.unprotected_ids().len();
    if k > available {
        return Err(PlanError::BudgetTooLarge { k, available });
    }
    let baseline = optimal_attack(topo, ms).status;
    if baseline != AttackStatus::Optimal {
        return Err(PlanError::BaselineNotAttackable(baseline));
    }
    Ok(greedy(
        PlanKind::Measurement,
        topo,
        ms,
        k,
        |current, attack, _| {
            if options.full_scan {
                current.unprotected_ids()
            } else {
                attack.attacked_measurements.clone()
            }
        },
        |current, id| current.with_protected(&[id]),
    ))
}

/// Greedily places `k` secure PMUs, scanning every bus not yet chosen.
pub fn greedy_pmu(topo: &GridTopology, ms: &MeasurementSet, k: usize) -> Result<Plan, PlanError> {
    let n = topo.bus_count();
    if k > n {
        return Err(PlanError::BudgetTooLarge { k, available: n });
    }
    let baseline = optimal_attack(topo, ms).status;
    if baseline != AttackStatus::Optimal {
        return Err(PlanError::BaselineNotAttackable(baseline));
    }
    Ok(greedy(
        PlanKind::Pmu,
        topo,
        ms,
        k,
        |_, _, chosen| topo.buses().map(|b| b.0).filter(|b| !chosen.contains(b)).collect(),
        |current, bus| expand_pmu(current, BusId(bus), true, topo).expect("bus exists"),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn star_single_step_takes_lowest_candidate() {
        let (topo, ms) = fixtures::star(4);
        let plan = greedy_protect(&topo, &ms, 1).unwrap();
        assert_eq!(plan.initial.cardinality, 1);
        // first attack support
        let first = plan.initial.attacked_measurements[0];
        assert_eq!(
            plan.steps,
            vec![PlanStep { step: 1, chosen: Some(first), cardinality_after: Some(1), infeasible_after: false }]
        );
    }

    #[test]
    fn star_four_steps_stay_at_one() {
        let (topo, ms) = fixtures::star(4);
        let plan = greedy_protect(&topo, &ms, 4).unwrap();
        assert_eq!(plan.steps.len(), 4);
        for s in &plan.steps {
            assert_eq!(s.cardinality_after, Some(1));
            assert!(!s.infeasible_after);
        }
        let mut chosen: Vec<usize> = plan.steps.iter().filter_map(|s| s.chosen).collect();
        chosen.sort_unstable();
        chosen.dedup();
        assert_eq!(chosen.len(), 4);
        assert_eq!(plan.final_attack.cardinality, 1);
        assert_eq!(plan.measurements.protected_ids(), chosen);
    }

    #[test]
    fn star_five_steps_lock_out_the_attacker() {
        let (topo, ms) = fixtures::star(4);
        let plan = greedy_protect(&topo, &ms, 5).unwrap();
        let last = plan.steps.last().unwrap();
        assert!(last.infeasible_after);
        assert_eq!(last.cardinality_after, None);
        assert_eq!(plan.final_cost(), AttackCost::Impossible);
    }

    #[test]
    fn zero_budget_plans_are_empty() {
        let (topo, ms) = fixtures::chain3();
        let plan = greedy_protect(&topo, &ms, 0).unwrap();
        assert!(plan.steps.is_empty());
        assert_eq!(plan.measurements, ms);
        assert!(greedy_pmu(&topo, &ms, 0).unwrap().steps.is_empty());
    }

    #[test]
    fn chain_pmu_at_center_locks_out() {
        let (topo, ms) = fixtures::chain3();
        let plan = greedy_pmu(&topo, &ms, 1).unwrap();
        assert_eq!(
            plan.steps,
            vec![PlanStep { step: 1, chosen: Some(2), cardinality_after: None, infeasible_after: true }]
        );
        let padded = greedy_pmu(&topo, &ms, 3).unwrap();
        assert_eq!(padded.steps.len(), 3);
        assert!(padded.steps[1..].iter().all(|s| s.chosen.is_none() && s.infeasible_after));
    }

    #[test]
    fn budget_limits() {
        let (topo, ms) = fixtures::chain3();
        assert_eq!(greedy_protect(&topo, &ms, 4).unwrap_err(), PlanError::BudgetTooLarge { k: 4, available: 3 });
        assert!(greedy_pmu(&topo, &ms, 4).is_err());
    }

    #[test]
    fn infeasible_baseline_is_rejected() {
        let (topo, ms) = fixtures::chain3();
        let mut locked = ms.with_protected(&[0, 1]);
        locked.protect_state(BusId(1));
        assert_eq!(
            greedy_protect(&topo, &locked, 1).unwrap_err(),
            PlanError::BaselineNotAttackable(AttackStatus::Infeasible)
        );
    }

    #[test]
    fn plan_json_shape() {
        let (topo, ms) = fixtures::chain3();
        let plan = greedy_pmu(&topo, &ms, 1).unwrap();
        let v: serde_json::Value = serde_json::from_str(&plan.to_json()).unwrap();
        assert_eq!(
            v,
            serde_json::json!([{"step": 1, "kind": "pmu", "chosen": 2,
                                "cardinality_after": null, "infeasible_after": true}])
        );
    }
}
