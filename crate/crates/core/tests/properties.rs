mod common;

use common::{admissible, random_scenario, rescaled, rng, shuffled, support};
use gridcut::attack::AttackCost;
use gridcut::attack_graph::protected_attack_graph;
use gridcut::experiment::{
    format_sig6, randomize_scenario, run_sweep, Engine, ScenarioConfig, SummaryRow, Sweep, SweepParam,
    SweepResult,
};
use gridcut::oracle::lp::{self, StandardLp};
use gridcut::oracle::{brute_force_attack, brute_force_protection, l1_attack, protections_pin_all_states, L1Error};
use gridcut::{
    build_measurement_matrix, global_min_cut, greedy_protect, optimal_attack, AttackStatus, MeasurementSet,
    Scenario,
};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;

fn config() -> ProptestConfig {
    ProptestConfig { cases: 128, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn engine_matches_exhaustive_oracle(seed in any::<u64>()) {
        let (topo, ms) = random_scenario(seed, 10);
        let engine = optimal_attack(&topo, &ms);
        let oracle = brute_force_attack(&topo, &ms, 10).unwrap();
        prop_assert_eq!(engine.cost().meters(), oracle.optimal_cardinality);
        if engine.status == AttackStatus::Optimal {
            let c: Vec<f64> = engine.c.clone();
            prop_assert!(!oracle.witnesses.is_empty());
            prop_assert!(admissible(&topo, &ms, &c, 0.0));
        }
    }

    #[test]
    fn cut_value_counts_corrupted_meters(seed in any::<u64>()) {
        let (topo, ms) = random_scenario(seed, 12);
        let r = optimal_attack(&topo, &ms);
        if r.status != AttackStatus::Infeasible {
            let hits = support(&topo, &ms, &r.c, 0.0);
            prop_assert_eq!(&hits, &r.attacked_measurements);
            prop_assert_eq!(hits.len(), r.cardinality);
            prop_assert!(admissible(&topo, &ms, &r.c, 0.0));
            prop_assert!(r.c.iter().all(|&v| v == 0.0 || v == 1.0));
            let a = common::apply_h(&topo, &ms, &r.c);
            for (x, y) in a.iter().zip(&r.a) {
                prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
            }
        }
        if r.status == AttackStatus::Optimal {
            let g = protected_attack_graph(&topo, &ms);
            prop_assert_eq!(global_min_cut(&g).unwrap().value as usize, r.cardinality);
            prop_assert!(r.c.contains(&1.0));
        }
    }

    #[test]
    fn infeasible_exactly_when_protections_have_full_rank(seed in any::<u64>()) {
        let (topo, ms) = random_scenario(seed, 10);
        let r = optimal_attack(&topo, &ms);
        prop_assert_eq!(r.status == AttackStatus::Infeasible, protections_pin_all_states(&topo, &ms));
    }

    #[test]
    fn relabelling_measurements_changes_nothing(seed in any::<u64>()) {
        let (topo, ms) = random_scenario(seed, 12);
        let mut r = rng(seed ^ 0xabcd);
        let order = shuffled(&(0..ms.len()).collect::<Vec<_>>(), &mut r);
        let permuted = MeasurementSet::new(
            order.iter().map(|&i| ms.measurements()[i]).collect(),
            ms.protected_states().clone(),
        );
        let a = optimal_attack(&topo, &ms);
        let b = optimal_attack(&topo, &permuted);
        prop_assert_eq!(a.status, b.status);
        prop_assert_eq!(a.cardinality, b.cardinality);
        let g1 = protected_attack_graph(&topo, &ms);
        let g2 = protected_attack_graph(&topo, &permuted);
        prop_assert_eq!(g1.supernode_map(), g2.supernode_map());
        prop_assert_eq!(g1.total_weight(), g2.total_weight());
    }

    #[test]
    fn real_valued_shifts_never_beat_the_cut(seed in any::<u64>()) {
        let (topo, ms) = random_scenario(seed, 12);
        let best = optimal_attack(&topo, &ms);
        let g = protected_attack_graph(&topo, &ms);
        let mut r = rng(seed ^ 0x5eed);
        for _ in 0..50 {
            // constant per supernode and zero on the reference keeps every constraint
            let per_node: Vec<f64> = (0..g.node_count())
                .map(|s| if s == g.reference() { 0.0 } else { r.random_range(-3.0..3.0) })
                .collect();
            let c: Vec<f64> = (0..topo.bus_count()).map(|i| per_node[g.supernode_of(i)]).collect();
            let c: Vec<f64> = c.into_iter().map(|v| if v.abs() < 1e-12 { 0.0 } else { v }).collect();
            if c.iter().all(|&v| v == 0.0) {
                continue;
            }
            prop_assert!(admissible(&topo, &ms, &c, 1e-9));
            let count = support(&topo, &ms, &c, 1e-12).len();
            match best.cost() {
                AttackCost::Meters(m) => prop_assert!(count >= m),
                AttackCost::Impossible => prop_assert!(false, "infeasible scenario admitted a shift"),
            }
        }
    }

    #[test]
    fn susceptance_values_do_not_matter(seed in any::<u64>()) {
        let (topo, ms) = random_scenario(seed, 12);
        let scaled = rescaled(&topo, &mut rng(seed ^ 0xb));
        let a = optimal_attack(&topo, &ms);
        let b = optimal_attack(&scaled, &ms);
        prop_assert_eq!(a.status, b.status);
        prop_assert_eq!(&a.attacked_measurements, &b.attacked_measurements);
        prop_assert_eq!(&a.c, &b.c);
        let h1 = build_measurement_matrix(&topo, &ms);
        let h2 = build_measurement_matrix(&scaled, &ms);
        let pattern = |h: &DMatrix<f64>| h.map(|v| v != 0.0);
        prop_assert_eq!(pattern(h1.matrix()), pattern(h2.matrix()));
    }

    #[test]
    fn protecting_more_never_helps_the_attacker(seed in any::<u64>(), pick in any::<prop::sample::Index>()) {
        let (topo, ms) = random_scenario(seed, 12);
        let open = ms.unprotected_ids();
        prop_assume!(!open.is_empty());
        let id = open[pick.index(open.len())];
        let before = optimal_attack(&topo, &ms);
        let after = optimal_attack(&topo, &ms.with_protected(&[id]));
        if before.status != AttackStatus::Unobservable {
            prop_assert!(after.cost() >= before.cost());
        }
    }

    #[test]
    fn protecting_outside_the_support_keeps_the_cut(seed in any::<u64>()) {
        let (topo, ms) = random_scenario(seed, 10);
        let base = optimal_attack(&topo, &ms);
        prop_assume!(base.status == AttackStatus::Optimal);
        for id in ms.unprotected_ids() {
            if !base.attacked_measurements.contains(&id) {
                let after = optimal_attack(&topo, &ms.with_protected(&[id]));
                prop_assert_eq!(after.cost(), base.cost());
            }
        }
    }

    #[test]
    fn greedy_never_beats_exhaustive_protection(seed in any::<u64>(), k in 1usize..=2) {
        let (topo, ms) = random_scenario(seed, 8);
        prop_assume!(optimal_attack(&topo, &ms).status == AttackStatus::Optimal);
        prop_assume!(ms.unprotected_ids().len() >= k);
        let plan = greedy_protect(&topo, &ms, k).unwrap();
        let best = brute_force_protection(&topo, &ms, k).unwrap();
        prop_assert!(plan.final_cost() <= best.value);
        if k == 1 {
            prop_assert_eq!(plan.final_cost(), best.value);
        }
    }

    #[test]
    fn l1_support_is_never_below_the_cut(seed in any::<u64>()) {
        let (topo, ms) = random_scenario(seed, 10);
        let engine = optimal_attack(&topo, &ms);
        match l1_attack(&topo, &ms, 1.0, 1e-3) {
            Ok(r) => {
                prop_assert!(engine.status != AttackStatus::Infeasible);
                prop_assert!(r.cardinality >= engine.cardinality);
                prop_assert!(r.c.iter().all(|&v| v >= -1e-9));
                for id in ms.protected_ids() {
                    prop_assert!(r.raw_a[id].abs() <= 1e-7);
                }
                let cert = &r.certificate;
                prop_assert!(cert.max_primal_residual <= 1e-7);
                prop_assert!(cert.max_dual_infeasibility <= 1e-7);
                prop_assert!(cert.max_complementarity <= 1e-7);
            }
            Err(L1Error::Infeasible) => prop_assert_eq!(engine.status, AttackStatus::Infeasible),
            Err(e) => prop_assert!(false, "solver error {e}"),
        }
    }

    #[test]
    fn scenario_json_round_trips(seed in any::<u64>()) {
        let (topo, ms) = random_scenario(seed, 12);
        let s = Scenario { topology: topo, measurements: ms, seed: Some(seed) };
        let back = Scenario::from_json(&s.to_json()).unwrap();
        prop_assert_eq!(back, s);
    }

    #[test]
    fn randomized_scenarios_are_reproducible(seed in any::<u64>(), trial in 0usize..1000, f in 0.0f64..=1.0) {
        let topo = gridcut::fixtures::ieee14();
        let cfg = ScenarioConfig { seed, protect_fraction: f, ..ScenarioConfig::default() };
        let a = randomize_scenario(&topo, &cfg, trial).unwrap();
        prop_assert_eq!(&a, &randomize_scenario(&topo, &cfg, trial).unwrap());
        prop_assert_eq!(a.protected_ids().len(), (f * a.len() as f64).round() as usize);
    }

    #[test]
    fn simplex_certificates_hold(seed in any::<u64>()) {
        // min cᵀx over {Ax = b, x ≥ 0} with b = A x₀ for a random x₀ ≥ 0 and c ≥ 0, so an optimum exists
        let mut r = rng(seed);
        let m = r.random_range(1..=5);
        let n = r.random_range(m..=9);
        let a = DMatrix::from_fn(m, n, |_, _| f64::from(r.random_range(-4i32..=4)));
        let x0: Vec<f64> = (0..n).map(|_| f64::from(r.random_range(0..=3))).collect();
        let b: Vec<f64> = (0..m).map(|i| (0..n).map(|j| a[(i, j)] * x0[j]).sum()).collect();
        let cost: Vec<f64> = (0..n).map(|_| f64::from(r.random_range(0..=5))).collect();
        let problem = StandardLp { a, b, cost: cost.clone() };
        let sol = lp::solve(&problem).unwrap();
        let cert = lp::certificate(&problem, &sol);
        prop_assert!(cert.max_primal_residual <= 1e-8);
        prop_assert!(cert.max_dual_infeasibility <= 1e-8);
        prop_assert!(cert.max_complementarity <= 1e-8);
        prop_assert!(cert.duality_gap <= 1e-8);
        let start: f64 = cost.iter().zip(&x0).map(|(c, x)| c * x).sum();
        prop_assert!(sol.objective <= start + 1e-9);
    }

    #[test]
    fn summary_csv_round_trips(
        rows in proptest::collection::vec(
            (0u32..1000, proptest::option::of((0usize..50, 0usize..50)), 0usize..5, 1usize..200),
            1..8,
        ),
        param in prop::sample::select(vec![SweepParam::ProtectFraction, SweepParam::PmuCount, SweepParam::GreedyK]),
    ) {
        let rows: Vec<SummaryRow> = rows
            .into_iter()
            .map(|(v, span, infeasible, trials)| {
                let (lo, hi) = span.map_or((None, None), |(a, b)| (Some(a.min(b)), Some(a.max(b))));
                let mean = lo.zip(hi).map(|(lo, hi)| {
                    let raw = (lo as f64 * 2.0 + hi as f64) / 3.0;
                    format_sig6(raw).parse::<f64>().unwrap()
                });
                SummaryRow {
                    sweep_value: f64::from(v) / 100.0,
                    mean,
                    min: lo,
                    max: hi,
                    infeasible_count: infeasible,
                    trials,
                }
            })
            .collect();
        let result = SweepResult { sweep_param: param, rows };
        prop_assert_eq!(SweepResult::from_csv(&result.to_csv().unwrap()).unwrap(), result);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, ..ProptestConfig::default() })]

    #[test]
    fn nested_sweeps_are_monotone_per_trial(seed in any::<u64>()) {
        let topo = gridcut::fixtures::ieee14();
        let cfg = ScenarioConfig { seed, trials: 4, ..ScenarioConfig::default() };
        let sweep = Sweep { param: SweepParam::ProtectFraction, values: vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5] };
        let out = run_sweep(&topo, &cfg, &sweep, Engine::MinCut).unwrap();
        for trial in 0..4 {
            let costs: Vec<AttackCost> = out.raw.iter().filter(|r| r.trial == trial).map(|r| r.cost()).collect();
            prop_assert!(costs.windows(2).all(|w| w[0] <= w[1]), "{:?}", costs);
        }
        let brute = run_sweep(&topo, &cfg, &sweep, Engine::BruteForce).unwrap();
        prop_assert_eq!(
            brute.raw.iter().map(|r| r.cardinality).collect::<Vec<_>>(),
            out.raw.iter().map(|r| r.cardinality).collect::<Vec<_>>()
        );
    }
}


#[test]
fn l1_certificate_survives_dropped_constraints() {
    // redundant protected rows force the simplex to discard constraints
    let (topo, ms) = random_scenario(12761076380263181370, 10);
    let r = l1_attack(&topo, &ms, 1.0, 1e-3).unwrap();
    assert!(r.certificate.max_dual_infeasibility <= 1e-8);
    assert!(r.certificate.max_complementarity <= 1e-8);
    assert!(r.certificate.duality_gap <= 1e-8);
    assert!(r.cardinality >= optimal_attack(&topo, &ms).cardinality);
}
