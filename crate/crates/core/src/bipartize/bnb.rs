//! Best-first branch-and-bound for the bipartization model.
//!
//! Only vertex colors are branched on: once both endpoint colors of an edge
//! are known, the edge logic leaves exactly one feasible value for
//! `(z_e, x^L_e, x^R_e)`, so the edge variables never need their own branch.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::milp::{MilpModel, MilpObjective};
use super::traverse::{bfs_bipartize, Traversal};
use super::BipartizationDecision;

const SQRT2: f64 = std::f64::consts::SQRT_2;
const ABS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MilpStatus {
    /// Incumbent proven within `rel_gap` of the optimum.
    Optimal,
    TimeLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpSolution {
    pub decision: BipartizationDecision,
    pub objective: f64,
    pub bound: f64,
    pub gap: f64,
    pub status: MilpStatus,
    pub nodes: u64,
    pub elapsed_s: f64,
}

struct Node {
    bound: f64,
    seq: u64,
    colors: Vec<u8>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // Max-heap on the reverse: smallest bound first, then oldest.
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then(other.seq.cmp(&self.seq))
    }
}

struct Search<'a> {
    model: &'a MilpModel,
    order: Vec<usize>,
    neighbors: Vec<Vec<usize>>,
    symmetric: bool,
}

impl Search<'_> {
    /// Lower bound on every completion of the partial coloring that fixes
    /// `order[..colors.len()]`.
    fn bound(&self, colors: &[u8]) -> f64 {
        let m = self.model;
        let n = m.vertex_count();
        let mut assigned: Vec<Option<u8>> = vec![None; n];
        for (k, &c) in colors.iter().enumerate() {
            assigned[self.order[k]] = Some(c);
        }
        let mut t = [0.0f64; 2];
        let mut splits = 0usize;
        for (v, c) in assigned.iter().enumerate() {
            if let Some(c) = *c {
                t[c as usize] = t[c as usize].max(m.contributions[v]);
            }
        }
        for &(i, j) in &m.endpoints {
            if let (Some(a), Some(b)) = (assigned[i], assigned[j]) {
                if a == b {
                    splits += 1;
                    t[1 - a as usize] = t[1 - a as usize].max(SQRT2);
                }
            }
        }
        let counts = m.objective == MilpObjective::NormPlusCounts;
        let base_t = if counts { t[0] + t[1] } else { t[0] };
        let mut min_splits = 0usize;
        let mut best_excess = 0.0f64;
        for v in (0..n).filter(|&v| assigned[v].is_none()) {
            let mut same = [0usize; 2];
            for &w in &self.neighbors[v] {
                if let Some(c) = assigned[w] {
                    same[c as usize] += 1;
                }
            }
            let cv = m.contributions[v];
            let cost = |side: usize| {
                let mut tt = t;
                tt[side] = tt[side].max(cv);
                if same[side] > 0 {
                    tt[1 - side] = tt[1 - side].max(SQRT2);
                }
                if counts {
                    tt[0] + tt[1] + same[side] as f64
                } else {
                    tt[0]
                }
            };
            let ms = if counts { same[0].min(same[1]) } else { 0 };
            min_splits += ms;
            best_excess = best_excess.max(cost(0).min(cost(1)) - base_t - ms as f64);
        }
        let mut lb = base_t + best_excess;
        if counts {
            lb += (n + splits + min_splits) as f64;
        }
        lb
    }

    fn full_coloring(&self, colors: &[u8]) -> Vec<u8> {
        let mut c = vec![0u8; colors.len()];
        for (k, &v) in colors.iter().enumerate() {
            c[self.order[k]] = v;
        }
        c
    }

    fn children(&self, colors: &[u8]) -> &'static [u8] {
        if colors.is_empty() && self.symmetric {
            &[0]
        } else {
            &[0, 1]
        }
    }
}

/// Repeated single-vertex recoloring while it strictly improves the objective.
fn local_search(model: &MilpModel, mut coloring: Vec<u8>) -> (Vec<u8>, f64) {
    let mut best = model.evaluate_coloring(&coloring);
    for _ in 0..100 {
        let mut improved = false;
        for v in 0..coloring.len() {
            coloring[v] ^= 1;
            let val = model.evaluate_coloring(&coloring);
            if val < best - ABS_TOL {
                best = val;
                improved = true;
            } else {
                coloring[v] ^= 1;
            }
        }
        if !improved {
            break;
        }
    }
    (coloring, best)
}

/// Solves the model to `options.rel_gap` or until `options.time_limit_s`.
/// The incumbent starts from the better of the BFS and DFS decisions after
/// local search, so a valid decision is always returned and it is never
/// worse than BFS.
pub fn solve_milp(model: &MilpModel) -> MilpSolution {
    let start = Instant::now();
    let n = model.vertex_count();
    let topo = crate::graph::CouplingGraph::from_edge_list(n, &model.endpoints).expect("model built from a valid graph");

    let mut incumbent: Option<(Vec<u8>, f64)> = None;
    for tr in [Traversal::Bfs, Traversal::Dfs] {
        let cand = local_search(model, bfs_bipartize(&topo, tr).coloring);
        if incumbent.as_ref().is_none_or(|inc| cand.1 < inc.1 - ABS_TOL) {
            incumbent = Some(cand);
        }
    }
    let (mut best_coloring, mut best) = incumbent.expect("at least one warm start");

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| model.contributions[b].total_cmp(&model.contributions[a]).then(a.cmp(&b)));
    let mut neighbors = vec![Vec::new(); n];
    for &(i, j) in &model.endpoints {
        neighbors[i].push(j);
        neighbors[j].push(i);
    }
    let search = Search { model, order, neighbors, symmetric: model.objective == MilpObjective::NormPlusCounts };

    let threshold = |inc: f64| inc - ABS_TOL.max(model.options.rel_gap * inc.abs());
    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    let mut pruned_min = f64::INFINITY;
    let mut nodes = 0u64;
    let mut timed_out = false;
    heap.push(Node { bound: search.bound(&[]), seq, colors: Vec::new() });

    'outer: while let Some(node) = heap.pop() {
        if node.bound >= threshold(best) {
            pruned_min = pruned_min.min(node.bound);
            break;
        }
        let mut current = node;
        loop {
            nodes += 1;
            if nodes % 256 == 0 && start.elapsed().as_secs_f64() > model.options.time_limit_s {
                timed_out = true;
                heap.push(current);
                break 'outer;
            }
            if current.colors.len() == n {
                let coloring = search.full_coloring(&current.colors);
                let val = model.evaluate_coloring(&coloring);
                if val < best - ABS_TOL {
                    best = val;
                    best_coloring = coloring;
                }
                break;
            }
            let mut kids: Vec<Node> = Vec::with_capacity(2);
            for &c in search.children(&current.colors) {
                let mut colors = current.colors.clone();
                colors.push(c);
                let bound = search.bound(&colors);
                if bound >= threshold(best) {
                    pruned_min = pruned_min.min(bound);
                } else {
                    seq += 1;
                    kids.push(Node { bound, seq, colors });
                }
            }
            kids.sort_by(|a, b| a.bound.total_cmp(&b.bound).then(a.seq.cmp(&b.seq)));
            let mut kids = kids.into_iter();
            let Some(next) = kids.next() else { break };
            heap.extend(kids);
            if heap.len() > model.options.max_open_nodes {
                let mut v = std::mem::take(&mut heap).into_sorted_vec();
                // into_sorted_vec is ascending under the reversed order, so the
                // best nodes sit at the end.
                let keep = v.split_off(v.len() - model.options.max_open_nodes / 2);
                pruned_min = v.iter().map(|n| n.bound).fold(pruned_min, f64::min);
                heap = keep.into_iter().collect();
            }
            current = next;
        }
    }

    let open_min = heap.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min);
    let bound = open_min.min(pruned_min).min(best);
    let gap = if best.abs() > 0.0 { ((best - bound) / best.abs()).max(0.0) } else { 0.0 };
    MilpSolution {
        decision: model.decision_for(&best_coloring),
        objective: best,
        bound,
        gap,
        status: if timed_out { MilpStatus::TimeLimit } else { MilpStatus::Optimal },
        nodes,
        elapsed_s: start.elapsed().as_secs_f64(),
    }
}
