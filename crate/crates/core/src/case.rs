//! Case-file ingestion and the native scenario JSON format.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::grid::{
    BusId, GridError, GridTopology, Line, Measurement, MeasurementKind, MeasurementSet, Source,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseFormat {
    Matpower,
    NativeJson,
}

impl CaseFormat {
    /// `.json` is native, everything else is read as MATPOWER.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => CaseFormat::NativeJson,
            _ => CaseFormat::Matpower,
        }
    }
}

/// IEEE test systems shipped with the crate, as MATPOWER text.
pub const BUILTIN_CASES: &[(&str, &str)] = &[
    ("ieee14", include_str!("../data/case14.m")),
    ("ieee30", include_str!("../data/case30.m")),
    ("ieee57", include_str!("../data/case57.m")),
    ("ieee118", include_str!("../data/case118.m")),
];

pub fn builtin_case_text(name: &str) -> Option<&'static str> {
    let key = name.trim_start_matches("case").trim_start_matches("ieee");
    BUILTIN_CASES
        .iter()
        .find(|(n, _)| n.trim_start_matches("ieee") == key)
        .map(|(_, text)| *text)
}

/// Parses one of [`BUILTIN_CASES`] by name (`ieee14`, `case14` or `14`).
pub fn builtin_case(name: &str) -> Option<GridTopology> {
    builtin_case_text(name).map(|text| parse_matpower(text).expect("bundled case is valid"))
}

pub fn load_case(path: impl AsRef<Path>, format: CaseFormat) -> Result<GridTopology, GridError> {
    let text = std::fs::read_to_string(path)?;
    match format {
        CaseFormat::Matpower => parse_matpower(&text),
        CaseFormat::NativeJson => Ok(Scenario::from_json(&text)?.topology),
    }
}

struct Row {
    line: usize,
    values: Vec<f64>,
}

/// Reads `mpc.bus` (column 1 = id) and `mpc.branch` (columns 1, 2 = endpoints,
/// column 4 = reactance). Susceptance is `|1/x|`. Bus ids are renumbered to
/// dense `1..n` in ascending original-id order.
pub fn parse_matpower(text: &str) -> Result<GridTopology, GridError> {
    let bus_rows = matrix_block(text, "bus")?;
    let branch_rows = matrix_block(text, "branch")?;

    let mut ids = Vec::with_capacity(bus_rows.len());
    let mut seen = HashMap::new();
    for row in &bus_rows {
        let id = integer(row, 0)?;
        if seen.insert(id, row.line).is_some() {
            return Err(GridError::Validation(format!(
                "duplicate bus id {id} (line {})",
                row.line
            )));
        }
        ids.push(id);
    }
    ids.sort_unstable();
    let dense: HashMap<i64, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i + 1)).collect();

    let mut lines = Vec::with_capacity(branch_rows.len());
    for row in &branch_rows {
        if row.values.len() < 4 {
            return Err(GridError::Parse {
                line: row.line,
                message: format!("branch record has {} columns, need at least 4", row.values.len()),
            });
        }
        let endpoint = |col: usize| -> Result<usize, GridError> {
            let id = integer(row, col)?;
            dense.get(&id).copied().ok_or_else(|| {
                GridError::Validation(format!(
                    "branch at line {} references unknown bus {id}",
                    row.line
                ))
            })
        };
        let from = endpoint(0)?;
        let to = endpoint(1)?;
        let reactance = row.values[3];
        lines.push(Line::new(from, to, (1.0 / reactance).abs()));
    }
    GridTopology::with_original_ids(ids.len(), lines, ids).map_err(|e| match e {
        GridError::Validation(msg) => GridError::Validation(format!("{msg} (MATPOWER input)")),
        other => other,
    })
}

fn integer(row: &Row, col: usize) -> Result<i64, GridError> {
    let v = row.values.get(col).copied().ok_or_else(|| GridError::Parse {
        line: row.line,
        message: format!("missing column {}", col + 1),
    })?;
    if v.fract() != 0.0 {
        return Err(GridError::Parse {
            line: row.line,
            message: format!("expected an integer id in column {}, found {v}", col + 1),
        });
    }
    Ok(v as i64)
}

fn matrix_block(text: &str, name: &str) -> Result<Vec<Row>, GridError> {
    let mut rows = Vec::new();
    let mut inside = false;
    let mut found = false;
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let mut content = raw.split('%').next().unwrap_or("").trim();
        if !inside {
            let Some(rest) = content.strip_prefix("mpc.") else { continue };
            let Some((lhs, rhs)) = rest.split_once('=') else { continue };
            if lhs.trim() != name {
                continue;
            }
            let Some(body) = rhs.trim().strip_prefix('[') else {
                return Err(GridError::Parse {
                    line: lineno,
                    message: format!("expected '[' after mpc.{name} ="),
                });
            };
            if found {
                return Err(GridError::Parse {
                    line: lineno,
                    message: format!("mpc.{name} defined twice"),
                });
            }
            inside = true;
            found = true;
            content = body;
        }
        let (body, closed) = match content.find(']') {
            Some(pos) => (&content[..pos], true),
            None => (content, false),
        };
        for segment in body.split(';') {
            let segment = segment.trim();
            if segment.is_empty() {
                continue;
            }
            let values = segment
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|t| !t.is_empty())
                .map(|t| {
                    t.parse::<f64>().map_err(|_| GridError::Parse {
                        line: lineno,
                        message: format!("invalid number '{t}' in mpc.{name}"),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(Row { line: lineno, values });
        }
        if closed {
            inside = false;
        }
    }
    if inside {
        return Err(GridError::Parse {
            line: text.lines().count(),
            message: format!("unterminated mpc.{name} matrix"),
        });
    }
    if !found {
        return Err(GridError::Parse { line: 0, message: format!("no mpc.{name} matrix found") });
    }
    Ok(rows)
}

/// A grid together with its measurement configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub topology: GridTopology,
    pub measurements: MeasurementSet,
    pub seed: Option<u64>,
}

#[derive(Serialize, Deserialize)]
struct ScenarioFile {
    buses: usize,
    lines: Vec<(usize, usize, f64)>,
    #[serde(default)]
    measurements: Vec<MeasurementRecord>,
    #[serde(default)]
    protected_states: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum KindTag {
    Flow,
    Angle,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Target {
    Bus(usize),
    Pair([usize; 2]),
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum SourceRecord {
    Scada,
    Pmu { bus: usize, secure: bool },
}

#[derive(Serialize, Deserialize)]
struct MeasurementRecord {
    kind: KindTag,
    target: Target,
    #[serde(default)]
    protected: bool,
    #[serde(default = "scada")]
    source: SourceRecord,
    /// 0-based line index; only needed to pick among parallel lines.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    line: Option<usize>,
}

fn scada() -> SourceRecord {
    SourceRecord::Scada
}

impl Scenario {
    pub fn new(topology: GridTopology, measurements: MeasurementSet) -> Self {
        Scenario { topology, measurements, seed: None }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GridError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), GridError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, GridError> {
        let file: ScenarioFile = serde_json::from_str(text)?;
        let lines = file.lines.iter().map(|&(f, t, b)| Line::new(f, t, b)).collect();
        let topology = GridTopology::new(file.buses, lines)?;

        let mut measurements = Vec::with_capacity(file.measurements.len());
        for (id, rec) in file.measurements.iter().enumerate() {
            let kind = match (&rec.kind, &rec.target) {
                (KindTag::Angle, Target::Bus(b)) => MeasurementKind::BusAngle(BusId(*b)),
                (KindTag::Flow, Target::Pair([a, b])) => {
                    let line = match rec.line {
                        Some(line) => {
                            let ok = topology.line(line).is_some_and(|l| {
                                l.ordered() == Line::new(*a, *b, 1.0).ordered()
                            });
                            if !ok {
                                return Err(GridError::Validation(format!(
                                    "measurement {id}: line {line} does not join buses {a} and {b}"
                                )));
                            }
                            line
                        }
                        None => topology.find_line(BusId(*a), BusId(*b)).ok_or_else(|| {
                            GridError::Validation(format!(
                                "measurement {id}: no line between buses {a} and {b}"
                            ))
                        })?,
                    };
                    MeasurementKind::LineFlow(line)
                }
                _ => {
                    return Err(GridError::Validation(format!(
                        "measurement {id}: flow targets are [from, to] pairs, angle targets are bus ids"
                    )))
                }
            };
            let source = match rec.source {
                SourceRecord::Scada => Source::Scada,
                SourceRecord::Pmu { bus, secure } => Source::Pmu { bus: BusId(bus), secure },
            };
            measurements.push(Measurement { kind, protected: rec.protected, source });
        }
        let states: BTreeSet<BusId> = file.protected_states.iter().map(|&b| BusId(b)).collect();
        let measurements = MeasurementSet::new(measurements, states);
        measurements.validate(&topology)?;
        Ok(Scenario { topology, measurements, seed: file.seed })
    }

    pub fn to_json(&self) -> String {
        let topo = &self.topology;
        let records = self
            .measurements
            .measurements()
            .iter()
            .map(|m| {
                let (kind, target, line) = match m.kind {
                    MeasurementKind::BusAngle(b) => (KindTag::Angle, Target::Bus(b.0), None),
                    MeasurementKind::LineFlow(id) => {
                        let l = &topo.lines()[id];
                        let first = topo.find_line(l.from, l.to);
                        let line = (first != Some(id)).then_some(id);
                        (KindTag::Flow, Target::Pair([l.from.0, l.to.0]), line)
                    }
                };
                let source = match m.source {
                    Source::Scada => SourceRecord::Scada,
                    Source::Pmu { bus, secure } => SourceRecord::Pmu { bus: bus.0, secure },
                };
                MeasurementRecord { kind, target, protected: m.protected, source, line }
            })
            .collect();
        let file = ScenarioFile {
            buses: topo.bus_count(),
            lines: topo.lines().iter().map(|l| (l.from.0, l.to.0, l.susceptance)).collect(),
            measurements: records,
            protected_states: self.measurements.protected_states().iter().map(|b| b.0).collect(),
            seed: self.seed,
        };
        serde_json::to_string_pretty(&file).expect("scenario serializes")
    }
}
