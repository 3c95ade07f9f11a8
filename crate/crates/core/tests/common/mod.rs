#![allow(dead_code)]

use gridcut::{BusId, GridTopology, Line, Measurement, MeasurementKind, MeasurementSet};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Connected grid on `n` buses: a random spanning tree plus `extra` more
/// lines, which may repeat an existing pair.
pub fn random_topology(rng: &mut ChaCha8Rng, n: usize, extra: usize) -> GridTopology {
    let mut lines = Vec::new();
    for bus in 2..=n {
        let parent = rng.random_range(1..bus);
        lines.push(Line::new(parent, bus, rng.random_range(0.5..20.0)));
    }
    for _ in 0..extra {
        let a = rng.random_range(1..=n);
        let b = rng.random_range(1..=n);
        if a != b {
            lines.push(Line::new(a, b, rng.random_range(0.5..20.0)));
        }
    }
    GridTopology::new(n, lines).expect("random grid is valid")
}

/// Flow meters on most lines, some redundant copies, angle meters on a random
/// share of buses, then random protections and pinned states.
pub fn random_measurements(
    rng: &mut ChaCha8Rng,
    topo: &GridTopology,
    protect_p: f64,
    state_p: f64,
) -> MeasurementSet {
    let mut ms = MeasurementSet::from_measurements(Vec::new());
    for l in 0..topo.lines().len() {
        if rng.random_bool(0.9) {
            ms.push(Measurement::flow(l));
        }
        if rng.random_bool(0.1) {
            ms.push(Measurement::flow(l));
        }
    }
    for b in 1..=topo.bus_count() {
        if rng.random_bool(0.5) {
            ms.push(Measurement::angle(b));
        }
    }
    if rng.random_bool(0.8) {
        ms.push(Measurement::angle(rng.random_range(1..=topo.bus_count())));
    }
    for id in 0..ms.len() {
        if rng.random_bool(protect_p) {
            ms.protect(id);
        }
    }
    for b in topo.buses() {
        if rng.random_bool(state_p) {
            ms.protect_state(b);
        }
    }
    ms
}

/// Random small scenario driven entirely by `seed`.
pub fn random_scenario(seed: u64, max_n: usize) -> (GridTopology, MeasurementSet) {
    let mut r = rng(seed);
    let n = r.random_range(2..=max_n);
    let extra = r.random_range(0..=n);
    let topo = random_topology(&mut r, n, extra);
    let protect_p = r.random_range(0.0..0.4);
    let state_p = if r.random_bool(0.3) { 0.15 } else { 0.0 };
    let ms = random_measurements(&mut r, &topo, protect_p, state_p);
    (topo, ms)
}

/// `Hc` evaluated row by row straight from the topology.
pub fn apply_h(topo: &GridTopology, ms: &MeasurementSet, c: &[f64]) -> Vec<f64> {
    ms.measurements()
        .iter()
        .map(|m| match m.kind {
            MeasurementKind::LineFlow(l) => {
                let line = &topo.lines()[l];
                let (lo, hi) = (line.from.index().min(line.to.index()), line.from.index().max(line.to.index()));
                line.susceptance * (c[lo] - c[hi])
            }
            MeasurementKind::BusAngle(b) => c[b.index()],
        })
        .collect()
}

/// Measurements touched by the shift `c`, with entries below `tol` treated as zero.
pub fn support(topo: &GridTopology, ms: &MeasurementSet, c: &[f64], tol: f64) -> Vec<usize> {
    apply_h(topo, ms, c).iter().enumerate().filter(|(_, v)| v.abs() > tol).map(|(i, _)| i).collect()
}

/// Protected meters untouched and pinned states unshifted.
pub fn admissible(topo: &GridTopology, ms: &MeasurementSet, c: &[f64], tol: f64) -> bool {
    let hits = support(topo, ms, c, tol);
    hits.iter().all(|&id| !ms.is_protected(id))
        && ms.protected_states().iter().all(|b: &BusId| c[b.index()].abs() <= tol)
}

/// Same grid with every susceptance multiplied by an independent factor.
pub fn rescaled(topo: &GridTopology, rng: &mut ChaCha8Rng) -> GridTopology {
    let b: Vec<f64> = topo.lines().iter().map(|l| l.susceptance * rng.random_range(0.01..100.0)).collect();
    topo.with_susceptances(&b).expect("positive susceptances")
}

pub fn shuffled<T: Clone>(items: &[T], rng: &mut ChaCha8Rng) -> Vec<T> {
    let mut v = items.to_vec();
    v.shuffle(rng);
    v
}
