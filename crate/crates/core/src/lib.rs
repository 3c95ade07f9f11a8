//! Minimum-cardinality hidden data-injection attacks on DC state estimation.
//!
//! A hidden attack adds `a = Hc` to the measurements: the least-squares
//! residual is unchanged while the state estimate moves by `c`. The fewest
//! meters an attacker must corrupt equals the global min-cut of a graph with
//! one node per bus, one reference node and one edge per measurement. This
//! crate builds that graph, computes the optimal attack, plans defensive
//! protections greedily, and ships brute-force and LP baselines to check the
//! results.

pub mod attack;
pub mod attack_graph;
pub mod case;
pub mod experiment;
pub mod fixtures;
pub mod grid;
pub mod mincut;
pub mod oracle;
pub mod planner;
pub mod unionfind;

pub use attack::{optimal_attack, verify_hidden, AttackResult, AttackStatus, VerifyReport};
pub use attack_graph::{apply_protections, build_attack_graph, AttackGraph};
pub use case::{builtin_case, load_case, parse_matpower, CaseFormat, Scenario};
pub use grid::{
    build_measurement_matrix, expand_pmu, BusId, GridError, GridTopology, Line, Measurement,
    MeasurementKind, MeasurementMatrix, MeasurementSet, Source,
};
pub use mincut::{global_min_cut, label_sides, CutResult, MinCutError};
pub use planner::{greedy_pmu, greedy_protect, Plan, PlanError, PlanStep};
