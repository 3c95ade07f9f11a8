//! The attack graph: one node per bus plus a reference node, one edge per
//! measurement. Angle meters become edges to the reference node. Protection
//! constraints are realized by contracting nodes into supernodes.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::grid::{GridTopology, MeasurementKind, MeasurementSet};
use crate::unionfind::DisjointSet;

/// Weighted edge between two supernodes. The weight is the number of
/// measurements it carries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphEdge {
    pub u: usize,
    pub v: usize,
    pub measurements: Vec<usize>,
}

impl GraphEdge {
    pub fn weight(&self) -> u64 {
        self.measurements.len() as u64
    }

    pub fn other(&self, node: usize) -> usize {
        if node == self.u {
            self.v
        } else {
            self.u
        }
    }
}

/// Multigraph over supernodes. Original node `i < n` is bus `i + 1`, original
/// node `n` is the reference.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttackGraph {
    bus_count: usize,
    supernode_of: Vec<usize>,
    supernode_count: usize,
    edges: Vec<GraphEdge>,
    infeasible: bool,
}

fn endpoints(topo: &GridTopology, kind: MeasurementKind) -> (usize, usize) {
    let n = topo.bus_count();
    match kind {
        MeasurementKind::LineFlow(id) => {
            let (lo, hi) = topo.lines()[id].ordered();
            (lo.index(), hi.index())
        }
        MeasurementKind::BusAngle(bus) => (bus.index(), n),
    }
}

/// One edge per measurement, parallel measurements merged. No protections
/// are applied.
pub fn build_attack_graph(topo: &GridTopology, ms: &MeasurementSet) -> AttackGraph {
    let n = topo.bus_count();
    let mut grouped: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (id, m) in ms.measurements().iter().enumerate() {
        grouped.entry(endpoints(topo, m.kind)).or_default().push(id);
    }
    AttackGraph {
        bus_count: n,
        supernode_of: (0..=n).collect(),
        supernode_count: n + 1,
        edges: grouped
            .into_iter()
            .map(|((u, v), measurements)| GraphEdge { u, v, measurements })
            .collect(),
        infeasible: false,
    }
}

/// Contracts protected state variables into the reference, and the endpoints
/// of every protected measurement into each other.
pub fn apply_protections(g: &AttackGraph, topo: &GridTopology, ms: &MeasurementSet) -> AttackGraph {
    let n = g.bus_count;
    let mut ds = DisjointSet::new(n + 1);
    for node in 0..=n {
        ds.union(node, g.representative(g.supernode_of[node]));
    }
    for bus in ms.protected_states() {
        ds.union(bus.index(), n);
    }
    for m in ms.measurements().iter().filter(|m| m.protected) {
        let (u, v) = endpoints(topo, m.kind);
        ds.union(u, v);
    }
    g.contract(&mut ds)
}

/// `apply_protections(build_attack_graph(..))`.
pub fn protected_attack_graph(topo: &GridTopology, ms: &MeasurementSet) -> AttackGraph {
    apply_protections(&build_attack_graph(topo, ms), topo, ms)
}

impl AttackGraph {
    fn representative(&self, supernode: usize) -> usize {
        self.supernode_of.iter().position(|&s| s == supernode).expect("supernode has members")
    }

    fn contract(&self, ds: &mut DisjointSet) -> AttackGraph {
        // Supernodes are numbered by their smallest original member.
        let mut label_of_root: BTreeMap<usize, usize> = BTreeMap::new();
        let supernode_of: Vec<usize> = (0..=self.bus_count)
            .map(|node| {
                let root = ds.find(node);
                let next = label_of_root.len();
                *label_of_root.entry(root).or_insert(next)
            })
            .collect();
        let supernode_count = label_of_root.len();

        let relabel: Vec<usize> =
            (0..self.supernode_count).map(|s| supernode_of[self.representative(s)]).collect();
        let mut grouped: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for e in &self.edges {
            let (a, b) = (relabel[e.u], relabel[e.v]);
            if a == b {
                continue;
            }
            grouped.entry((a.min(b), a.max(b))).or_default().extend(&e.measurements);
        }
        let edges = grouped
            .into_iter()
            .map(|((u, v), mut measurements)| {
                measurements.sort_unstable();
                GraphEdge { u, v, measurements }
            })
            .collect();
        AttackGraph {
            bus_count: self.bus_count,
            supernode_of,
            supernode_count,
            edges,
            infeasible: supernode_count == 1,
        }
    }

    pub fn bus_count(&self) -> usize {
        self.bus_count
    }

    /// Number of supernodes.
    pub fn node_count(&self) -> usize {
        self.supernode_count
    }

    /// Supernode holding the reference node.
    pub fn reference(&self) -> usize {
        self.supernode_of[self.bus_count]
    }

    pub fn supernode_of(&self, original: usize) -> usize {
        self.supernode_of[original]
    }

    pub fn supernode_map(&self) -> &[usize] {
        &self.supernode_of
    }

    /// Original nodes merged into `supernode`, ascending.
    pub fn members(&self, supernode: usize) -> Vec<usize> {
        (0..=self.bus_count).filter(|&i| self.supernode_of[i] == supernode).collect()
    }

    pub fn edges(&self) -> &[GraphEdge] {
        &self.edges
    }

    pub fn is_infeasible(&self) -> bool {
        self.infeasible
    }

    pub fn total_weight(&self) -> u64 {
        self.edges.iter().map(GraphEdge::weight).sum()
    }

    pub(crate) fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.supernode_count];
        for (idx, e) in self.edges.iter().enumerate() {
            adj[e.u].push(idx);
            adj[e.v].push(idx);
        }
        adj
    }

    /// Breadth-first reachability from the reference supernode, ignoring the
    /// edges flagged in `removed`.
    pub fn reachable_from_reference(&self, removed: &[bool]) -> Vec<bool> {
        let adj = self.adjacency();
        let mut seen = vec![false; self.supernode_count];
        let mut queue = std::collections::VecDeque::from([self.reference()]);
        seen[self.reference()] = true;
        while let Some(node) = queue.pop_front() {
            for &e in &adj[node] {
                if removed.get(e).copied().unwrap_or(false) {
                    continue;
                }
                let next = self.edges[e].other(node);
                if !seen[next] {
                    seen[next] = true;
                    queue.push_back(next);
                }
            }
        }
        seen
    }

    pub fn is_connected(&self) -> bool {
        self.reachable_from_reference(&[]).into_iter().all(|r| r)
    }

    /// Graphviz text listing supernodes and weighted edges.
    pub fn to_dot(&self) -> String {
        let label = |node: usize| {
            if node == self.bus_count {
                "ref".to_string()
            } else {
                (node + 1).to_string()
            }
        };
        let mut out = String::from("graph attack {\n");
        for s in 0..self.supernode_count {
            let members: Vec<String> = self.members(s).into_iter().map(label).collect();
            let shape = if s == self.reference() { ", shape=box" } else { "" };
            let _ = writeln!(out, "  s{s} [label=\"{{{}}}\"{shape}];", members.join(","));
        }
        for e in &self.edges {
            let ids: Vec<String> = e.measurements.iter().map(usize::to_string).collect();
            let _ = writeln!(
                out,
                "  s{} -- s{} [label=\"{}\", weight={}, measurements=\"{}\"];",
                e.u,
                e.v,
                e.weight(),
                e.weight(),
                ids.join(",")
            );
        }
        out.push_str("}\n");
        out
    }
}
