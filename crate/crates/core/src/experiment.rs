//! Randomized scenarios, parameter sweeps and CSV output.
//!
//! Every trial draws from its own ChaCha8 stream: the generator is seeded
//! with `ChaCha8Rng::seed_from_u64(seed)` and switched to stream `trial`.
//! Within a trial the draws happen in a fixed order (flow meters when
//! coverage is below 1, angle meters, a permutation of all measurements for
//! protection, a permutation of buses for PMUs), and the full permutations
//! are always drawn so sweep values only change how long a prefix is used.
//! Sweeps over protection fraction or PMU count are therefore nested per
//! trial unless independent draws are requested.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attack::{optimal_attack, AttackCost, AttackStatus};
use crate::grid::{expand_pmu, BusId, GridError, GridTopology, MeasurementSet};
use crate::oracle::{brute_force_attack, l1_attack, L1Error, OracleError};
use crate::oracle::l1::{DEFAULT_THETA1, DEFAULT_THETA2};
use crate::planner::{greedy_pmu, greedy_protect, Plan, PlanError};

/// Stream reserved for angle meters when they are held fixed across trials.
const FIXED_METER_STREAM: u64 = u64::MAX;
/// Bus limit for the brute-force engine.
pub const BRUTE_FORCE_MAX_N: usize = 20;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    L1(#[from] L1Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("malformed CSV: {0}")]
    MalformedCsv(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum PmuPlacement {
    None,
    /// Buses with their secure flag, placed in order.
    Explicit(Vec<(BusId, bool)>),
    /// `count` distinct buses drawn at random.
    Random { count: usize, secure: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub flow_coverage: f64,
    pub angle_coverage: f64,
    pub protect_fraction: f64,
    pub pmus: PmuPlacement,
    pub seed: u64,
    pub trials: usize,
    /// Redraw every sweep point from its own seed instead of nesting.
    pub independent_draws: bool,
    /// Use the same angle-meter buses in every trial.
    pub fixed_meters: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            flow_coverage: 1.0,
            angle_coverage: 0.6,
            protect_fraction: 0.0,
            pmus: PmuPlacement::None,
            seed: 0,
            trials: 1,
            independent_draws: false,
            fixed_meters: false,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        for (name, v) in [
            ("flow_coverage", self.flow_coverage),
            ("angle_coverage", self.angle_coverage),
            ("protect_fraction", self.protect_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(ExperimentError::InvalidConfig(format!("{name} = {v} is outside [0, 1]")));
            }
        }
        if self.trials == 0 {
            return Err(ExperimentError::InvalidConfig("trials must be at least 1".into()));
        }
        Ok(())
    }
}

fn trial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn share(fraction: f64, count: usize) -> usize {
    ((fraction * count as f64).round() as usize).min(count)
}

fn permutation(len: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut p: Vec<usize> = (0..len).collect();
    p.shuffle(rng);
    p
}

/// Measurement set for one trial; a pure function of `(config, trial)`.
pub fn randomize_scenario(
    topo: &GridTopology,
    config: &ScenarioConfig,
    trial: usize,
) -> Result<MeasurementSet, ExperimentError> {
    config.validate()?;
    let mut rng = trial_rng(config.seed, trial as u64);
    let n = topo.bus_count();
    let line_count = topo.lines().len();

    let mut lines: Vec<usize> = if config.flow_coverage < 1.0 {
        permutation(line_count, &mut rng)[..share(config.flow_coverage, line_count)].to_vec()
    } else {
        (0..line_count).collect()
    };
    lines.sort_unstable();

    let mut angle_buses = if config.fixed_meters {
        permutation(n, &mut trial_rng(config.seed, FIXED_METER_STREAM))
    } else {
        permutation(n, &mut rng)
    };
    angle_buses.truncate(share(config.angle_coverage, n));
    angle_buses.sort_unstable();

    let mut ms = MeasurementSet::from_measurements(
        lines
            .iter()
            .map(|&l| crate::grid::Measurement::flow(l))
            .chain(angle_buses.iter().map(|&b| crate::grid::Measurement::angle(b + 1)))
            .collect(),
    );

    let order = permutation(ms.len(), &mut rng);
    for &id in &order[..share(config.protect_fraction, ms.len())] {
        ms.protect(id);
    }

    let bus_order = permutation(n, &mut rng);
    match &config.pmus {
        PmuPlacement::None => {}
        PmuPlacement::Explicit(list) => {
            for &(bus, secure) in list {
                ms = expand_pmu(&ms, bus, secure, topo)?;
            }
        }
        PmuPlacement::Random { count, secure } => {
            if *count > n {
                return Err(ExperimentError::InvalidConfig(format!(
                    "{count} PMUs requested for {n} buses"
                )));
            }
            for &b in &bus_order[..*count] {
                ms = expand_pmu(&ms, BusId::from_index(b), *secure, topo)?;
            }
        }
    }
    Ok(ms)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParam {
    ProtectFraction,
    PmuCount,
    PmuFraction,
    /// Greedy measurement protection budget.
    GreedyK,
    /// Greedy secure-PMU budget.
    GreedyPmuK,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::ProtectFraction => "protect_fraction",
            SweepParam::PmuCount => "pmu_count",
            SweepParam::PmuFraction => "pmu_fraction",
            SweepParam::GreedyK => "greedy_k",
            SweepParam::GreedyPmuK => "greedy_pmu_k",
        }
    }

    const ALL: [SweepParam; 5] = [
        SweepParam::ProtectFraction,
        SweepParam::PmuCount,
        SweepParam::PmuFraction,
        SweepParam::GreedyK,
        SweepParam::GreedyPmuK,
    ];
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParam {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SweepParam::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| {
            let names: Vec<&str> = SweepParam::ALL.iter().map(|p| p.name()).collect();
            ExperimentError::InvalidConfig(format!(
                "unknown sweep parameter '{s}' (expected one of {})",
                names.join(", ")
            ))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    MinCut,
    BruteForce,
    L1,
}

impl FromStr for Engine {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mincut" | "min-cut" => Ok(Engine::MinCut),
            "brute" | "brute-force" | "bruteforce" => Ok(Engine::BruteForce),
            "l1" => Ok(Engine::L1),
            _ => Err(ExperimentError::InvalidConfig(format!(
                "unknown engine '{s}' (expected mincut, brute or l1)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrialStatus {
    Optimal,
    Infeasible,
    Unobservable,
}

impl From<AttackStatus> for TrialStatus {
    fn from(s: AttackStatus) -> Self {
        match s {
            AttackStatus::Optimal => TrialStatus::Optimal,
            AttackStatus::Infeasible => TrialStatus::Infeasible,
            AttackStatus::Unobservable => TrialStatus::Unobservable,
        }
    }
}

impl TrialStatus {
    fn name(self) -> &'static str {
        match self {
            TrialStatus::Optimal => "optimal",
            TrialStatus::Infeasible => "infeasible",
            TrialStatus::Unobservable => "unobservable",
        }
    }
}

/// One trial at one sweep value.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRow {
    pub sweep_param: SweepParam,
    pub sweep_value: f64,
    pub trial: usize,
    /// `None` for infeasible trials.
    pub cardinality: Option<usize>,
    pub status: TrialStatus,
}

impl RawRow {
    pub fn cost(&self) -> AttackCost {
        self.cardinality.map_or(AttackCost::Impossible, AttackCost::Meters)
    }
}

/// Aggregate over the trials at one sweep value. `mean`, `min` and `max`
/// cover feasible trials only and are `None` when every trial is infeasible.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub sweep_value: f64,
    /// Rounded to 6 significant digits.
    pub mean: Option<f64>,
    pub min: Option<usize>,
    pub max: Option<usize>,
    pub infeasible_count: usize,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub sweep_param: SweepParam,
    pub rows: Vec<SummaryRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub raw: Vec<RawRow>,
    pub summary: SweepResult,
}

#[derive(Debug, Clone, Copy)]
struct Outcome {
    cardinality: Option<usize>,
    status: TrialStatus,
}

fn evaluate(topo: &GridTopology, ms: &MeasurementSet, engine: Engine) -> Result<Outcome, ExperimentError> {
    Ok(match engine {
        Engine::MinCut => {
            let r = optimal_attack(topo, ms);
            Outcome { cardinality: r.cost().meters(), status: r.status.into() }
        }
        Engine::BruteForce => {
            let r = brute_force_attack(topo, ms, BRUTE_FORCE_MAX_N)?;
            let status = match r.optimal_cardinality {
                None => TrialStatus::Infeasible,
                Some(0) => TrialStatus::Unobservable,
                Some(_) => TrialStatus::Optimal,
            };
            Outcome { cardinality: r.optimal_cardinality, status }
        }
        Engine::L1 => match l1_attack(topo, ms, DEFAULT_THETA1, DEFAULT_THETA2) {
            Ok(r) => Outcome { cardinality: Some(r.cardinality), status: TrialStatus::Optimal },
            Err(L1Error::Infeasible) => Outcome { cardinality: None, status: TrialStatus::Infeasible },
            Err(e) => return Err(e.into()),
        },
    })
}

fn config_at(base: &ScenarioConfig, topo: &GridTopology, param: SweepParam, value: f64, index: usize) -> ScenarioConfig {
    let mut cfg = base.clone();
    if base.independent_draws {
        cfg.seed = base.seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    }
    match param {
        SweepParam::ProtectFraction => cfg.protect_fraction = value,
        SweepParam::PmuCount => cfg.pmus = PmuPlacement::Random { count: value as usize, secure: true },
        SweepParam::PmuFraction => {
            cfg.pmus = PmuPlacement::Random { count: share(value, topo.bus_count()), secure: true }
        }
        SweepParam::GreedyK | SweepParam::GreedyPmuK => {}
    }
    cfg
}

fn check_values(sweep: &Sweep) -> Result<(), ExperimentError> {
    if sweep.values.is_empty() {
        return Err(ExperimentError::InvalidConfig("sweep has no values".into()));
    }
    for &v in &sweep.values {
        let ok = match sweep.param {
            SweepParam::ProtectFraction | SweepParam::PmuFraction => (0.0..=1.0).contains(&v),
            _ => v >= 0.0 && v.fract() == 0.0,
        };
        if !ok {
            return Err(ExperimentError::InvalidConfig(format!(
                "value {v} is not valid for {}",
                sweep.param
            )));
        }
    }
    Ok(())
}

/// Runs `config.trials` randomized scenarios at every sweep value.
///
/// Greedy sweeps run one plan per trial with the largest budget and read the
/// cost after each prefix; they require the min-cut engine.
pub fn run_sweep(
    topo: &GridTopology,
    config: &ScenarioConfig,
    sweep: &Sweep,
    engine: Engine,
) -> Result<SweepOutput, ExperimentError> {
    config.validate()?;
    check_values(sweep)?;
    if engine == Engine::BruteForce && topo.bus_count() > BRUTE_FORCE_MAX_N {
        return Err(OracleError::TooManyBuses { buses: topo.bus_count(), limit: BRUTE_FORCE_MAX_N }.into());
    }
    let mut order: Vec<usize> = (0..sweep.values.len()).collect();
    order.sort_by(|&a, &b| sweep.values[a].total_cmp(&sweep.values[b]));

    let greedy = matches!(sweep.param, SweepParam::GreedyK | SweepParam::GreedyPmuK);
    if greedy && engine != Engine::MinCut {
        return Err(ExperimentError::InvalidConfig("greedy sweeps use the min-cut engine".into()));
    }

    // per_trial[t][i] is the outcome of trial t at sorted value i
    let per_trial: Vec<Vec<Outcome>> = (0..config.trials)
        .into_par_iter()
        .map(|trial| -> Result<Vec<Outcome>, ExperimentError> {
            if greedy {
                let ms = randomize_scenario(topo, config, trial)?;
                let k_max = order.iter().map(|&i| sweep.values[i] as usize).max().unwrap_or(0);
                let plan = match sweep.param {
                    SweepParam::GreedyK => greedy_protect(topo, &ms, k_max),
                    _ => greedy_pmu(topo, &ms, k_max),
                };
                let plan: Option<Plan> = match plan {
                    Ok(p) => Some(p),
                    Err(PlanError::BaselineNotAttackable(_)) => None,
                    Err(e) => return Err(e.into()),
                };
                Ok(order
                    .iter()
                    .map(|&i| {
                        let k = sweep.values[i] as usize;
                        let baseline = || optimal_attack(topo, &ms);
                        match &plan {
                            Some(p) if k <= p.steps.len() => {
                                let cost = p.cost_after(k);
                                let status = if k == 0 {
                                    p.initial.status.into()
                                } else if cost == AttackCost::Impossible {
                                    TrialStatus::Infeasible
                                } else {
                                    TrialStatus::Optimal
                                };
                                Outcome { cardinality: cost.meters(), status }
                            }
                            Some(p) => Outcome {
                                cardinality: p.final_cost().meters(),
                                status: p.final_attack.status.into(),
                            },
                            None => {
                                let r = baseline();
                                Outcome { cardinality: r.cost().meters(), status: r.status.into() }
                            }
                        }
                    })
                    .collect())
            } else {
                order
                    .iter()
                    .map(|&i| {
                        let cfg = config_at(config, topo, sweep.param, sweep.values[i], i);
                        let ms = randomize_scenario(topo, &cfg, trial)?;
                        evaluate(topo, &ms, engine)
                    })
                    .collect()
            }
        })
        .collect::<Result<_, _>>()?;

    let mut raw = Vec::with_capacity(order.len() * config.trials);
    let mut rows = Vec::with_capacity(order.len());
    for (pos, &i) in order.iter().enumerate() {
        let value = sweep.values[i];
        for (trial, outcomes) in per_trial.iter().enumerate() {
            let o = outcomes[pos];
            raw.push(RawRow {
                sweep_param: sweep.param,
                sweep_value: value,
                trial,
                cardinality: o.cardinality,
                status: o.status,
            });
        }
        let feasible: Vec<usize> = per_trial.iter().filter_map(|o| o[pos].cardinality).collect();
        let mean = (!feasible.is_empty())
            .then(|| round_sig6(feasible.iter().sum::<usize>() as f64 / feasible.len() as f64));
        rows.push(SummaryRow {
            sweep_value: value,
            mean,
            min: feasible.iter().min().copied(),
            max: feasible.iter().max().copied(),
            infeasible_count: config.trials - feasible.len(),
            trials: config.trials,
        });
    }
    Ok(SweepOutput { raw, summary: SweepResult { sweep_param: sweep.param, rows } })
}

/// `%g`-style rendering with 6 significant digits.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn round_sig6(x: f64) -> f64 {
    format_sig6(x).parse().expect("formatted float parses")
}

pub const RAW_HEADER: [&str; 5] = ["sweep_param", "sweep_value", "trial", "cardinality", "status"];
pub const SUMMARY_HEADER: [&str; 7] =
    ["sweep_param", "sweep_value", "mean", "min", "max", "infeasible_count", "trials"];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn write_csv(header: &[&str], records: impl Iterator<Item = Vec<String>>) -> Result<String, ExperimentError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header)?;
    for r in records {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| ExperimentError::MalformedCsv(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("CSV is UTF-8"))
}

fn read_csv(text: &str, header: &[&str]) -> Result<Vec<csv::StringRecord>, ExperimentError> {
    let mut r = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let found: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if found != header {
        return Err(ExperimentError::MalformedCsv(format!("unexpected header {found:?}")));
    }
    r.records().map(|rec| rec.map_err(Into::into)).collect()
}

fn field<T: FromStr>(rec: &csv::StringRecord, idx: usize) -> Result<T, ExperimentError> {
    rec.get(idx)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| ExperimentError::MalformedCsv(format!("bad field {idx} in {rec:?}")))
}

fn opt_field<T: FromStr>(rec: &csv::StringRecord, idx: usize) -> Result<Option<T>, ExperimentError> {
    match rec.get(idx) {
        Some("") => Ok(None),
        _ => field(rec, idx).map(Some),
    }
}

impl SweepOutput {
    pub fn raw_csv(&self) -> Result<String, ExperimentError> {
        write_csv(
            &RAW_HEADER,
            self.raw.iter().map(|r| {
                vec![
                    r.sweep_param.name().to_string(),
                    format_sig6(r.sweep_value),
                    r.trial.to_string(),
                    opt(r.cardinality),
                    r.status.name().to_string(),
                ]
            }),
        )
    }

    pub fn parse_raw_csv(text: &str) -> Result<Vec<RawRow>, ExperimentError> {
        read_csv(text, &RAW_HEADER)?
            .iter()
            .map(|rec| {
                let status = match rec.get(4) {
                    Some("optimal") => TrialStatus::Optimal,
                    Some("infeasible") => TrialStatus::Infeasible,
                    Some("unobservable") => TrialStatus::Unobservable,
                    other => {
                        return Err(ExperimentError::MalformedCsv(format!("bad status {other:?}")))
                    }
                };
                Ok(RawRow {
                    sweep_param: field::<String>(rec, 0)?.parse()?,
                    sweep_value: field(rec, 1)?,
                    trial: field(rec, 2)?,
                    cardinality: opt_field(rec, 3)?,
                    status,
                })
            })
            .collect()
    }
}

impl SweepResult {
    pub fn to_csv(&self) -> Result<String, ExperimentError> {
        write_csv(
            &SUMMARY_HEADER,
            self.rows.iter().map(|r| {
                vec![
                    self.sweep_param.name().to_string(),
                    format_sig6(r.sweep_value),
                    r.mean.map(format_sig6).unwrap_or_default(),
                    opt(r.min),
                    opt(r.max),
                    r.infeasible_count.to_string(),
                    r.trials.to_string(),
                ]
            }),
        )
    }

    pub fn from_csv(text: &str) -> Result<Self, ExperimentError> {
        let records = read_csv(text, &SUMMARY_HEADER)?;
        let mut param = None;
        let mut rows = Vec::with_capacity(records.len());
        for rec in &records {
            let p: SweepParam = field::<String>(rec, 0)?.parse()?;
            if param.is_some_and(|q| q != p) {
                return Err(ExperimentError::MalformedCsv("mixed sweep parameters".into()));
            }
            param = Some(p);
            rows.push(SummaryRow {
                sweep_value: field(rec, 1)?,
                mean: opt_field(rec, 2)?,
                min: opt_field(rec, 3)?,
                max: opt_field(rec, 4)?,
                infeasible_count: field(rec, 5)?,
                trials: field(rec, 6)?,
            });
        }
        let sweep_param =
            param.ok_or_else(|| ExperimentError::MalformedCsv("no data rows".into()))?;
        Ok(SweepResult { sweep_param, rows })
    }

    pub fn means(&self) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r.mean).collect()
    }
}
