//! Small hand-built scenarios used across tests, examples and the CLI docs.

use crate::case::builtin_case;
use crate::grid::{BusId, GridTopology, Line, Measurement, MeasurementSet};

/// Buses 1-2-3 in a line with unit susceptance; flows on both lines and an
/// angle meter at bus 1.
pub fn chain3() -> (GridTopology, MeasurementSet) {
    let topo = GridTopology::new(3, vec![Line::new(1, 2, 1.0), Line::new(2, 3, 1.0)])
        .expect("valid chain");
    let ms = MeasurementSet::from_measurements(vec![
        Measurement::flow(0),
        Measurement::flow(1),
        Measurement::angle(1),
    ]);
    (topo, ms)
}

/// Bus 1 at the center of `leaves` radial lines; flows on every line and an
/// angle meter at the center.
pub fn star(leaves: usize) -> (GridTopology, MeasurementSet) {
    let lines = (0..leaves).map(|i| Line::new(1, i + 2, 1.0)).collect();
    let topo = GridTopology::new(leaves + 1, lines).expect("valid star");
    let ms = MeasurementSet::standard(&topo, &[BusId(1)]);
    (topo, ms)
}

/// Four buses in a ring; flows on all four lines and an angle meter at bus 1.
pub fn cycle4() -> (GridTopology, MeasurementSet) {
    let lines = (0..4).map(|i| Line::new(i + 1, (i + 1) % 4 + 1, 1.0)).collect();
    let topo = GridTopology::new(4, lines).expect("valid ring");
    let ms = MeasurementSet::standard(&topo, &[BusId(1)]);
    (topo, ms)
}

pub fn ieee14() -> GridTopology {
    builtin_case("ieee14").expect("bundled")
}

/// Flows on all 20 lines of the IEEE 14-bus system plus angle meters on a
/// fixed 8 of the 14 buses.
pub fn ieee14_standard() -> MeasurementSet {
    let angles: Vec<BusId> = [1, 2, 4, 6, 8, 9, 11, 13].into_iter().map(BusId).collect();
    MeasurementSet::standard(&ieee14(), &angles)
}
