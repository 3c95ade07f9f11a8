//! Global minimum cut (Stoer–Wagner) and cut-side labeling.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use thiserror::Error;

use crate::attack_graph::AttackGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum MinCutError {
    #[error("every node is contracted into the reference; no cut exists")]
    Infeasible,
    #[error("graph is disconnected")]
    Disconnected,
}

/// A global cut of an [`AttackGraph`], oriented so the reference supernode is
/// on `reference_side`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CutResult {
    pub value: u64,
    pub reference_side: Vec<usize>,
    pub attacked_side: Vec<usize>,
    /// Indices into `AttackGraph::edges`.
    pub cut_edges: Vec<usize>,
}

/// Minimum cut of a connected undirected multigraph with at least two nodes.
///
/// Every maximum-adjacency phase starts from `start`, so `start` never ends
/// up on the returned shore. Returns the cut weight and that shore, sorted.
/// Among equal minima the first found in the contraction sequence wins.
/// Returns `None` for fewer than two nodes.
pub fn stoer_wagner(
    node_count: usize,
    edges: &[(usize, usize, u64)],
    start: usize,
) -> Option<(u64, Vec<usize>)> {
    if node_count < 2 {
        return None;
    }
    assert!(start < node_count, "start node out of range");
    let mut adj: Vec<BTreeMap<usize, u64>> = vec![BTreeMap::new(); node_count];
    for &(u, v, w) in edges {
        if u != v && w > 0 {
            *adj[u].entry(v).or_default() += w;
            *adj[v].entry(u).or_default() += w;
        }
    }
    let mut members: Vec<Vec<usize>> = (0..node_count).map(|v| vec![v]).collect();
    let mut active: Vec<usize> = (0..node_count).collect();
    let mut best: Option<(u64, Vec<usize>)> = None;

    let mut key = vec![0u64; node_count];
    let mut added = vec![false; node_count];
    while active.len() > 1 {
        for &v in &active {
            key[v] = 0;
            added[v] = false;
        }
        let mut heap: BinaryHeap<(u64, Reverse<usize>)> =
            active.iter().map(|&v| (u64::from(v == start), Reverse(v))).collect();
        key[start] = 1;
        let (mut prev, mut last) = (usize::MAX, usize::MAX);
        while let Some((k, Reverse(v))) = heap.pop() {
            if added[v] || k != key[v] {
                continue;
            }
            added[v] = true;
            if v == start {
                key[v] = 0;
            }
            prev = last;
            last = v;
            for (&u, &w) in &adj[v] {
                if !added[u] {
                    key[u] += w;
                    heap.push((key[u], Reverse(u)));
                }
            }
        }
        let (s, t) = (prev, last);
        let phase_cut = key[t];
        if best.as_ref().is_none_or(|(value, _)| phase_cut < *value) {
            best = Some((phase_cut, members[t].clone()));
        }

        // merge t into s
        let t_adj = std::mem::take(&mut adj[t]);
        for (u, w) in t_adj {
            adj[u].remove(&t);
            if u != s {
                *adj[s].entry(u).or_default() += w;
                *adj[u].entry(s).or_default() += w;
            }
        }
        let moved = std::mem::take(&mut members[t]);
        members[s].extend(moved);
        active.retain(|&v| v != t);
    }
    best.map(|(value, mut side)| {
        side.sort_unstable();
        (value, side)
    })
}

/// Minimum-weight global cut of the contracted attack graph.
pub fn global_min_cut(g: &AttackGraph) -> Result<CutResult, MinCutError> {
    if g.is_infeasible() || g.node_count() < 2 {
        return Err(MinCutError::Infeasible);
    }
    if !g.is_connected() {
        return Err(MinCutError::Disconnected);
    }
    let edges: Vec<(usize, usize, u64)> = g.edges().iter().map(|e| (e.u, e.v, e.weight())).collect();
    let (value, shore) = stoer_wagner(g.node_count(), &edges, g.reference()).expect("at least two supernodes");

    let mut on_shore = vec![false; g.node_count()];
    for &v in &shore {
        on_shore[v] = true;
    }
    if on_shore[g.reference()] {
        on_shore.iter_mut().for_each(|b| *b = !*b);
    }
    let (attacked_side, reference_side): (Vec<usize>, Vec<usize>) =
        (0..g.node_count()).partition(|&v| on_shore[v]);
    let cut_edges: Vec<usize> = g
        .edges()
        .iter()
        .enumerate()
        .filter(|(_, e)| on_shore[e.u] != on_shore[e.v])
        .map(|(idx, _)| idx)
        .collect();
    debug_assert_eq!(cut_edges.iter().map(|&e| g.edges()[e].weight()).sum::<u64>(), value);
    Ok(CutResult { value, reference_side, attacked_side, cut_edges })
}

/// Labels every original node (buses then the reference) 0 when it is still
/// reachable from the reference after deleting the cut edges, 1 otherwise.
pub fn label_sides(g: &AttackGraph, cut: &CutResult) -> Vec<u8> {
    let mut removed = vec![false; g.edges().len()];
    for &e in &cut.cut_edges {
        removed[e] = true;
    }
    let reached = g.reachable_from_reference(&removed);
    g.supernode_map().iter().map(|&s| u8::from(!reached[s])).collect()
}
