use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{BipartizationDecision, EdgeDecision};
use crate::graph::CouplingGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Traversal {
    Bfs,
    Dfs,
}

/// Colors vertices in traversal order and subdivides every edge whose
/// endpoints end up with the same color, placing the new node on the other
/// side. Components are started in vertex order with alternating colors;
/// neighbors are visited in vertex order.
pub fn bfs_bipartize(graph: &CouplingGraph, traversal: Traversal) -> BipartizationDecision {
    let n = graph.vertex_count();
    let incidence = graph.incidence();
    let mut color: Vec<Option<u8>> = vec![None; n];
    let mut edges = vec![EdgeDecision::KEEP; graph.edge_count()];
    let mut frontier = VecDeque::new();
    let mut start = 0u8;
    for v in 0..n {
        if color[v].is_some() {
            continue;
        }
        color[v] = Some(start);
        frontier.push_back(v);
        while let Some(u) = match traversal {
            Traversal::Bfs => frontier.pop_front(),
            Traversal::Dfs => frontier.pop_back(),
        } {
            let p = color[u].expect("queued vertices are colored");
            for &k in &incidence[u] {
                let w = graph.edges[k].other(u);
                match color[w] {
                    None => {
                        color[w] = Some(1 - p);
                        frontier.push_back(w);
                    }
                    Some(c) if c == p && !edges[k].split => edges[k] = EdgeDecision::split_to(1 - p),
                    Some(_) => {}
                }
            }
        }
        start = 1 - start;
    }
    BipartizationDecision { coloring: color.into_iter().map(Option::unwrap).collect(), edges }
}
