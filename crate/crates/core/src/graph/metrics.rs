use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Structural summary of a (possibly bipartite) graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphMetrics {
    pub vertex_count: usize,
    pub edge_count: usize,
    /// `2|E| / |V|`
    pub average_degree: f64,
    /// `min(|L|, |R|) / max(|L|, |R|)`; only present when a partition is given.
    pub balance_score: Option<f64>,
    pub is_bipartite: bool,
}

/// A proper 2-coloring of the graph, or `None` if it has an odd cycle.
pub fn two_coloring(n: usize, edges: &[(usize, usize)]) -> Option<Vec<u8>> {
    let mut adj = vec![Vec::new(); n];
    for &(i, j) in edges {
        adj[i].push(j);
        adj[j].push(i);
    }
    let mut color: Vec<Option<u8>> = vec![None; n];
    let mut queue = VecDeque::new();
    for root in 0..n {
        if color[root].is_some() {
            continue;
        }
        color[root] = Some(0);
        queue.push_back(root);
        while let Some(u) = queue.pop_front() {
            let cu = color[u].unwrap();
            for &w in &adj[u] {
                match color[w] {
                    None => {
                        color[w] = Some(1 - cu);
                        queue.push_back(w);
                    }
                    Some(cw) if cw == cu => return None,
                    Some(_) => {}
                }
            }
        }
    }
    Some(color.into_iter().map(|c| c.unwrap()).collect())
}

/// Metrics of a graph on `n` vertices. When `partition` is given it must be
/// a proper 2-coloring (one side label per vertex).
pub fn compute_metrics(n: usize, edges: &[(usize, usize)], partition: Option<&[u8]>) -> Result<GraphMetrics> {
    let is_bipartite = two_coloring(n, edges).is_some();
    let balance_score = match partition {
        None => None,
        Some(p) => {
            if p.len() != n {
                return Err(Error::InvalidPartition(format!("{} labels for {n} vertices", p.len())));
            }
            if let Some(&bad) = p.iter().find(|&&s| s > 1) {
                return Err(Error::InvalidPartition(format!("side label {bad}")));
            }
            if let Some(&(i, j)) = edges.iter().find(|&&(i, j)| p[i] == p[j]) {
                return Err(Error::InvalidPartition(format!("edge ({i}, {j}) does not cross the partition")));
            }
            let right = p.iter().filter(|&&s| s == 1).count();
            let left = n - right;
            let hi = left.max(right);
            Some(if hi == 0 { 0.0 } else { left.min(right) as f64 / hi as f64 })
        }
    };
    Ok(GraphMetrics {
        vertex_count: n,
        edge_count: edges.len(),
        average_degree: if n == 0 { 0.0 } else { 2.0 * edges.len() as f64 / n as f64 },
        balance_score,
        is_bipartite,
    })
}
