//! Bipartization by edge subdivision.
//!
//! A decision assigns every vertex a side (`0` = left, `1` = right) and says
//! for every edge whether it is subdivided and on which side the new node
//! goes. Decisions come from graph traversal ([`bfs_bipartize`]), the
//! optimization model ([`build_milp`] + [`solve_milp`]), or an external
//! assignment file ([`import_decision`]); [`materialize`] turns any of them
//! into a [`BipartiteGraph`].

mod bnb;
mod materialize;
mod milp;
mod traverse;

pub use bnb::{solve_milp, MilpSolution, MilpStatus};
pub use materialize::{materialize, BipartiteGraph, BEdge, BVertex, BVertexOrigin};
pub use milp::{build_milp, contribution, contributions, Balance, ContributionMode, MilpModel, MilpObjective, MilpOptions, Row, Sense};
pub use traverse::{bfs_bipartize, Traversal};

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::CouplingGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EdgeDecision {
    pub split: bool,
    /// Side of the subdivision node; meaningless when `split` is false.
    pub side: u8,
}

impl EdgeDecision {
    pub const KEEP: Self = Self { split: false, side: 0 };

    pub fn split_to(side: u8) -> Self {
        Self { split: true, side }
    }
}

/// `(c, sigma)`, indexed like the graph's vertices and edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BipartizationDecision {
    pub coloring: Vec<u8>,
    pub edges: Vec<EdgeDecision>,
}

impl BipartizationDecision {
    pub fn split_count(&self) -> usize {
        self.edges.iter().filter(|e| e.split).count()
    }

    /// Side labels of the materialized graph: original vertices, then one
    /// per subdivision node in edge order.
    pub fn sides(&self) -> Vec<u8> {
        let mut s = self.coloring.clone();
        s.extend(self.edges.iter().filter(|e| e.split).map(|e| e.side));
        s
    }

    pub fn check_covers(&self, graph: &CouplingGraph) -> Result<()> {
        if self.coloring.len() != graph.vertex_count() || self.edges.len() != graph.edge_count() {
            return Err(Error::InvalidPartition(format!(
                "decision covers {} vertices and {} edges, graph has {} and {}",
                self.coloring.len(),
                self.edges.len(),
                graph.vertex_count(),
                graph.edge_count()
            )));
        }
        if let Some(k) = self.coloring.iter().position(|&c| c > 1) {
            return Err(Error::InvalidPartition(format!("vertex {} has color {}", graph.vertices[k].id, self.coloring[k])));
        }
        if let Some(k) = self.edges.iter().position(|e| e.split && e.side > 1) {
            return Err(Error::InvalidPartition(format!("edge {} has side {}", graph.edges[k].id, self.edges[k].side)));
        }
        Ok(())
    }

    pub fn to_file(&self, graph: &CouplingGraph) -> DecisionFile {
        DecisionFile {
            coloring: graph.vertices.iter().zip(&self.coloring).map(|(v, c)| (v.id.clone(), *c)).collect(),
            edge_decisions: graph
                .edges
                .iter()
                .zip(&self.edges)
                .map(|(e, d)| (e.id.clone(), (u8::from(d.split), d.side)))
                .collect(),
        }
    }

    pub fn from_file(graph: &CouplingGraph, file: &DecisionFile) -> Result<Self> {
        let coloring = lookup(graph.vertices.iter().map(|v| v.id.as_str()), &file.coloring)?;
        let edges = lookup(graph.edges.iter().map(|e| e.id.as_str()), &file.edge_decisions)?
            .into_iter()
            .map(|(split, side)| EdgeDecision { split: split != 0, side })
            .collect();
        let d = Self { coloring, edges };
        d.check_covers(graph)?;
        Ok(d)
    }
}

fn lookup<'a, T: Copy>(ids: impl Iterator<Item = &'a str>, map: &BTreeMap<String, T>) -> Result<Vec<T>> {
    let mut missing = Vec::new();
    let mut known = HashSet::new();
    let mut out = Vec::new();
    for id in ids {
        known.insert(id);
        match map.get(id) {
            Some(v) => out.push(*v),
            None => missing.push(id.to_string()),
        }
    }
    missing.extend(map.keys().filter(|k| !known.contains(k.as_str())).cloned());
    if missing.is_empty() {
        Ok(out)
    } else {
        Err(Error::Vertices(missing))
    }
}

/// On-disk decision: `{"coloring": {id: c}, "edge_decisions": {id: [split, side]}}`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DecisionFile {
    pub coloring: BTreeMap<String, u8>,
    pub edge_decisions: BTreeMap<String, (u8, u8)>,
}

impl DecisionFile {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

/// Edge decisions implied by a coloring: equal endpoint colors force a split,
/// and the new node goes to the side opposite both endpoints.
pub fn decision_from_coloring(graph: &CouplingGraph, coloring: Vec<u8>) -> Result<BipartizationDecision> {
    let edges = graph
        .edges
        .iter()
        .map(|e| {
            let (ci, cj) = (coloring.get(e.endpoints.0).copied(), coloring.get(e.endpoints.1).copied());
            match (ci, cj) {
                (Some(a), Some(b)) if a == b => EdgeDecision::split_to(1 - a.min(1)),
                _ => EdgeDecision::KEEP,
            }
        })
        .collect();
    let d = BipartizationDecision { coloring, edges };
    d.check_covers(graph)?;
    Ok(d)
}

/// Every vertex on the left and every edge subdivided: the standard
/// consensus-style reformulation, which needs no search at all.
pub fn basic_decision(graph: &CouplingGraph) -> BipartizationDecision {
    decision_from_coloring(graph, vec![0; graph.vertex_count()]).expect("all-zero coloring covers the graph")
}

/// Parses an assignment file (`vertex_id<TAB>color` per line, `#` comments)
/// and derives the edge decisions from the coloring.
pub fn import_decision(graph: &CouplingGraph, text: &str) -> Result<BipartizationDecision> {
    let index: HashMap<&str, usize> = graph.vertices.iter().enumerate().map(|(k, v)| (v.id.as_str(), k)).collect();
    let mut coloring: Vec<Option<u8>> = vec![None; graph.vertex_count()];
    let mut unknown = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |message: String| Error::Parse { line: n + 1, message };
        let (id, color) = line
            .rsplit_once('\t')
            .or_else(|| line.rsplit_once(char::is_whitespace))
            .ok_or_else(|| parse_err(format!("expected `id<TAB>color`, got `{line}`")))?;
        let (id, color) = (id.trim(), color.trim());
        let c: u8 = match color {
            "0" => 0,
            "1" => 1,
            _ => return Err(parse_err(format!("color must be 0 or 1, got `{color}`"))),
        };
        match index.get(id) {
            Some(&k) if coloring[k].is_some() => return Err(parse_err(format!("vertex {id} listed twice"))),
            Some(&k) => coloring[k] = Some(c),
            None => unknown.push(id.to_string()),
        }
    }
    unknown.extend(
        coloring
            .iter()
            .enumerate()
            .filter(|(_, c)| c.is_none())
            .map(|(k, _)| graph.vertices[k].id.clone()),
    );
    if !unknown.is_empty() {
        return Err(Error::Vertices(unknown));
    }
    decision_from_coloring(graph, coloring.into_iter().map(Option::unwrap).collect())
}

pub fn import_decision_file(graph: &CouplingGraph, path: impl AsRef<Path>) -> Result<BipartizationDecision> {
    import_decision(graph, &std::fs::read_to_string(path)?)
}

/// Assignment file text for `coloring`.
pub fn format_assignment(graph: &CouplingGraph, coloring: &[u8]) -> String {
    let mut s = String::from("# vertex_id\tcolor\n");
    for (v, c) in graph.vertices.iter().zip(coloring) {
        let _ = writeln!(s, "{}\t{}", v.id, c);
    }
    s
}
