//! Physical network, measurement configuration and the DC measurement matrix.
//!
//! Buses are identified externally by dense 1-based [`BusId`]s. Lines and
//! measurements are identified by their position in the owning list, so a
//! measurement id is also its row in the measurement matrix.

use std::collections::BTreeSet;
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("validation error: {0}")]
    Validation(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// 1-based bus identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BusId(pub usize);

impl BusId {
    /// 0-based column of this bus in the measurement matrix.
    pub fn index(self) -> usize {
        self.0 - 1
    }

    pub fn from_index(index: usize) -> Self {
        BusId(index + 1)
    }
}

impl fmt::Display for BusId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A transmission line with its susceptance magnitude in per-unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line {
    pub from: BusId,
    pub to: BusId,
    pub susceptance: f64,
}

impl Line {
    pub fn new(from: usize, to: usize, susceptance: f64) -> Self {
        Line { from: BusId(from), to: BusId(to), susceptance }
    }

    pub fn touches(&self, bus: BusId) -> bool {
        self.from == bus || self.to == bus
    }

    /// Endpoints ordered so the lower-numbered bus comes first.
    pub fn ordered(&self) -> (BusId, BusId) {
        if self.from <= self.to {
            (self.from, self.to)
        } else {
            (self.to, self.from)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridTopology {
    bus_count: usize,
    lines: Vec<Line>,
    /// Source-file id of each dense bus, indexed by `BusId::index`.
    original_ids: Vec<i64>,
}

impl GridTopology {
    pub fn new(bus_count: usize, lines: Vec<Line>) -> Result<Self, GridError> {
        let original_ids = (1..=bus_count as i64).collect();
        Self::with_original_ids(bus_count, lines, original_ids)
    }

    pub fn with_original_ids(
        bus_count: usize,
        lines: Vec<Line>,
        original_ids: Vec<i64>,
    ) -> Result<Self, GridError> {
        if bus_count == 0 {
            return Err(GridError::Validation("grid has no buses".into()));
        }
        if original_ids.len() != bus_count {
            return Err(GridError::Validation(format!(
                "id map has {} entries for {} buses",
                original_ids.len(),
                bus_count
            )));
        }
        for (id, line) in lines.iter().enumerate() {
            for bus in [line.from, line.to] {
                if bus.0 == 0 || bus.0 > bus_count {
                    return Err(GridError::Validation(format!(
                        "line {id} references bus {bus}, but the grid has {bus_count} buses"
                    )));
                }
            }
            if line.from == line.to {
                return Err(GridError::Validation(format!(
                    "line {id} connects bus {} to itself",
                    line.from
                )));
            }
            if !(line.susceptance.is_finite() && line.susceptance > 0.0) {
                return Err(GridError::Validation(format!(
                    "line {id} ({}-{}) has non-positive susceptance {}",
                    line.from, line.to, line.susceptance
                )));
            }
        }
        Ok(GridTopology { bus_count, lines, original_ids })
    }

    pub fn bus_count(&self) -> usize {
        self.bus_count
    }

    pub fn buses(&self) -> impl Iterator<Item = BusId> {
        (1..=self.bus_count).map(BusId)
    }

    pub fn lines(&self) -> &[Line] {
        &self.lines
    }

    pub fn line(&self, id: usize) -> Option<&Line> {
        self.lines.get(id)
    }

    pub fn contains_bus(&self, bus: BusId) -> bool {
        bus.0 >= 1 && bus.0 <= self.bus_count
    }

    pub fn original_id(&self, bus: BusId) -> i64 {
        self.original_ids[bus.index()]
    }

    pub fn original_ids(&self) -> &[i64] {
        &self.original_ids
    }

    /// Ids of the lines incident on `bus`, in line order.
    pub fn incident_lines(&self, bus: BusId) -> Vec<usize> {
        self.lines
            .iter()
            .enumerate()
            .filter(|(_, l)| l.touches(bus))
            .map(|(id, _)| id)
            .collect()
    }

    pub fn degree(&self, bus: BusId) -> usize {
        self.lines.iter().filter(|l| l.touches(bus)).count()
    }

    /// First line joining `a` and `b` in either orientation.
    pub fn find_line(&self, a: BusId, b: BusId) -> Option<usize> {
        self.lines
            .iter()
            .position(|l| (l.from == a && l.to == b) || (l.from == b && l.to == a))
    }

    /// Same network with every line's susceptance replaced.
    pub fn with_susceptances(&self, susceptances: &[f64]) -> Result<Self, GridError> {
        if susceptances.len() != self.lines.len() {
            return Err(GridError::Validation(format!(
                "expected {} susceptances, got {}",
                self.lines.len(),
                susceptances.len()
            )));
        }
        let lines = self
            .lines
            .iter()
            .zip(susceptances)
            .map(|(l, &b)| Line { susceptance: b, ..*l })
            .collect();
        Self::with_original_ids(self.bus_count, lines, self.original_ids.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MeasurementKind {
    /// Power flow through the line with this id.
    LineFlow(usize),
    /// Voltage phase angle at a bus.
    BusAngle(BusId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Source {
    #[default]
    Scada,
    Pmu { bus: BusId, secure: bool },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Measurement {
    pub kind: MeasurementKind,
    pub protected: bool,
    pub source: Source,
}

impl Measurement {
    pub fn flow(line: usize) -> Self {
        Measurement { kind: MeasurementKind::LineFlow(line), protected: false, source: Source::Scada }
    }

    pub fn angle(bus: usize) -> Self {
        Measurement {
            kind: MeasurementKind::BusAngle(BusId(bus)),
            protected: false,
            source: Source::Scada,
        }
    }

    pub fn protected(mut self) -> Self {
        self.protected = true;
        self
    }
}

/// Ordered measurements plus the set of protected state variables.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MeasurementSet {
    measurements: Vec<Measurement>,
    protected_states: BTreeSet<BusId>,
}

impl MeasurementSet {
    pub fn new(measurements: Vec<Measurement>, protected_states: BTreeSet<BusId>) -> Self {
        MeasurementSet { measurements, protected_states }
    }

    pub fn from_measurements(measurements: Vec<Measurement>) -> Self {
        Self::new(measurements, BTreeSet::new())
    }

    /// Flow meters on every line followed by angle meters on `angle_buses`.
    pub fn standard(topo: &GridTopology, angle_buses: &[BusId]) -> Self {
        let mut measurements: Vec<_> = (0..topo.lines().len()).map(Measurement::flow).collect();
        measurements.extend(angle_buses.iter().map(|b| Measurement::angle(b.0)));
        Self::from_measurements(measurements)
    }

    pub fn len(&self) -> usize {
        self.measurements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measurements.is_empty()
    }

    pub fn measurements(&self) -> &[Measurement] {
        &self.measurements
    }

    pub fn get(&self, id: usize) -> Option<&Measurement> {
        self.measurements.get(id)
    }

    pub fn protected_states(&self) -> &BTreeSet<BusId> {
        &self.protected_states
    }

    pub fn push(&mut self, m: Measurement) -> usize {
        self.measurements.push(m);
        self.measurements.len() - 1
    }

    pub fn is_protected(&self, id: usize) -> bool {
        self.measurements[id].protected
    }

    /// Ids of protected measurements (S_m).
    pub fn protected_ids(&self) -> Vec<usize> {
        self.ids_where(|m| m.protected)
    }

    /// Ids of unprotected measurements (complement of S_m).
    pub fn unprotected_ids(&self) -> Vec<usize> {
        self.ids_where(|m| !m.protected)
    }

    fn ids_where(&self, pred: impl Fn(&Measurement) -> bool) -> Vec<usize> {
        self.measurements
            .iter()
            .enumerate()
            .filter(|(_, m)| pred(m))
            .map(|(id, _)| id)
            .collect()
    }

    pub fn protect(&mut self, id: usize) {
        self.measurements[id].protected = true;
    }

    /// Copy with the given measurements additionally protected.
    pub fn with_protected(&self, ids: &[usize]) -> Self {
        let mut out = self.clone();
        for &id in ids {
            out.protect(id);
        }
        out
    }

    pub fn protect_state(&mut self, bus: BusId) {
        self.protected_states.insert(bus);
    }

    /// Checks every reference against `topo` and the secure-PMU protection rule.
    pub fn validate(&self, topo: &GridTopology) -> Result<(), GridError> {
        for (id, m) in self.measurements.iter().enumerate() {
            match m.kind {
                MeasurementKind::LineFlow(line) if line >= topo.lines().len() => {
                    return Err(GridError::Validation(format!(
                        "measurement {id} refers to missing line {line}"
                    )));
                }
                MeasurementKind::BusAngle(bus) if !topo.contains_bus(bus) => {
                    return Err(GridError::Validation(format!(
                        "measurement {id} refers to missing bus {bus}"
                    )));
                }
                _ => {}
            }
            if let Source::Pmu { bus, secure } = m.source {
                if !topo.contains_bus(bus) {
                    return Err(GridError::Validation(format!(
                        "measurement {id} comes from a PMU at missing bus {bus}"
                    )));
                }
                if secure && !m.protected {
                    return Err(GridError::Validation(format!(
                        "measurement {id} comes from a secure PMU but is unprotected"
                    )));
                }
            }
        }
        if let Some(bus) = self.protected_states.iter().find(|b| !topo.contains_bus(**b)) {
            return Err(GridError::Validation(format!("protected state {bus} is not a bus")));
        }
        Ok(())
    }
}

/// Dense DC measurement matrix H; row k is measurement k.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementMatrix {
    h: DMatrix<f64>,
}

impl MeasurementMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.h
    }

    pub fn rows(&self) -> usize {
        self.h.nrows()
    }

    pub fn cols(&self) -> usize {
        self.h.ncols()
    }

    pub fn row_of(&self, measurement: usize) -> usize {
        measurement
    }

    /// Non-zero entries of each row as `(column, value)` pairs.
    pub fn sparse_rows(&self) -> Vec<Vec<(usize, f64)>> {
        (0..self.h.nrows())
            .map(|r| {
                (0..self.h.ncols())
                    .filter(|&c| self.h[(r, c)] != 0.0)
                    .map(|c| (c, self.h[(r, c)]))
                    .collect()
            })
            .collect()
    }
}

/// Builds H. Flow rows carry `+B` at the lower-numbered endpoint and `-B` at
/// the other; angle rows carry a single 1.
pub fn build_measurement_matrix(topo: &GridTopology, ms: &MeasurementSet) -> MeasurementMatrix {
    let mut h = DMatrix::zeros(ms.len(), topo.bus_count());
    for (row, m) in ms.measurements().iter().enumerate() {
        match m.kind {
            MeasurementKind::LineFlow(id) => {
                let line = &topo.lines()[id];
                let (lo, hi) = line.ordered();
                h[(row, lo.index())] = line.susceptance;
                h[(row, hi.index())] = -line.susceptance;
            }
            MeasurementKind::BusAngle(bus) => h[(row, bus.index())] = 1.0,
        }
    }
    MeasurementMatrix { h }
}

/// Appends the readings of a PMU at `bus`: its angle, then the flow on every
/// incident line. A secure PMU's readings are protected and its bus joins the
/// protected states.
pub fn expand_pmu(
    ms: &MeasurementSet,
    bus: BusId,
    secure: bool,
    topo: &GridTopology,
) -> Result<MeasurementSet, GridError> {
    if !topo.contains_bus(bus) {
        return Err(GridError::Validation(format!("cannot place a PMU at missing bus {bus}")));
    }
    let mut out = ms.clone();
    let source = Source::Pmu { bus, secure };
    out.push(Measurement { kind: MeasurementKind::BusAngle(bus), protected: secure, source });
    for line in topo.incident_lines(bus) {
        out.push(Measurement { kind: MeasurementKind::LineFlow(line), protected: secure, source });
    }
    if secure {
        out.protect_state(bus);
    }
    Ok(out)
}
