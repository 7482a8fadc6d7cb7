use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::BipartizationDecision;
use crate::error::{Error, Result};
use crate::graph::{compute_metrics, two_coloring, CouplingGraph, GraphMetrics, VertexKind};
use crate::mbp::LinearMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BVertexOrigin {
    /// Vertex of the coupling graph, by index.
    Original { vertex: usize, kind: VertexKind },
    /// Node inserted on the coupling-graph edge with this index and id.
    Subdivision { edge: usize, edge_id: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BVertex {
    pub id: String,
    pub dim: usize,
    /// `0` = left, `1` = right.
    pub side: u8,
    pub origin: BVertexOrigin,
}

impl BVertex {
    pub fn is_subdivision(&self) -> bool {
        matches!(self.origin, BVertexOrigin::Subdivision { .. })
    }
}

/// `left_map * v[left] + right_map * v[right] = rhs`
#[derive(Debug, Clone, PartialEq)]
pub struct BEdge {
    pub id: String,
    pub left: usize,
    pub right: usize,
    pub left_map: LinearMap,
    pub right_map: LinearMap,
    pub rhs: Vec<f64>,
}

/// Bipartite graph: original vertices in graph order, then one subdivision
/// node per split edge in edge order. Every edge runs left to right.
#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteGraph {
    pub vertices: Vec<BVertex>,
    pub edges: Vec<BEdge>,
}

pub fn subdivision_vertex_id(edge_id: &str) -> String {
    format!("sub:{edge_id}")
}

/// Builds the bipartite graph of a decision. A split edge
/// `Q_i x_i + Q_j x_j = b` becomes `Q_i x_i - w = 0` and `Q_j x_j + w = b`.
pub fn materialize(graph: &CouplingGraph, decision: &BipartizationDecision) -> Result<BipartiteGraph> {
    decision.check_covers(graph)?;
    let mut vertices: Vec<BVertex> = graph
        .vertices
        .iter()
        .zip(&decision.coloring)
        .enumerate()
        .map(|(k, (v, &c))| BVertex {
            id: v.id.clone(),
            dim: v.dim,
            side: c,
            origin: BVertexOrigin::Original { vertex: k, kind: v.kind.clone() },
        })
        .collect();
    let mut edges = Vec::with_capacity(graph.edge_count() + decision.split_count());
    let push = |edges: &mut Vec<BEdge>, vertices: &[BVertex], id: String, a: (usize, LinearMap), b: (usize, LinearMap), rhs: Vec<f64>| {
        if vertices[a.0].side == vertices[b.0].side {
            return Err(Error::NotBipartite(format!(
                "edge {id} joins {} and {}, both on side {}",
                vertices[a.0].id, vertices[b.0].id, vertices[a.0].side
            )));
        }
        let (l, r) = if vertices[a.0].side == 0 { (a, b) } else { (b, a) };
        edges.push(BEdge { id, left: l.0, right: r.0, left_map: l.1, right_map: r.1, rhs });
        Ok(())
    };
    for (k, (e, d)) in graph.edges.iter().zip(&decision.edges).enumerate() {
        let (i, j) = e.endpoints;
        if !d.split {
            push(&mut edges, &vertices, e.id.clone(), (i, e.maps.0.clone()), (j, e.maps.1.clone()), e.rhs.clone())?;
            continue;
        }
        let m = e.rhs.len();
        let w = vertices.len();
        vertices.push(BVertex {
            id: subdivision_vertex_id(&e.id),
            dim: m,
            side: d.side,
            origin: BVertexOrigin::Subdivision { edge: k, edge_id: e.id.clone() },
        });
        push(
            &mut edges,
            &vertices,
            format!("{}/0", e.id),
            (i, e.maps.0.clone()),
            (w, LinearMap::scaled_identity(-1.0, m)),
            vec![0.0; m],
        )?;
        push(&mut edges, &vertices, format!("{}/1", e.id), (j, e.maps.1.clone()), (w, LinearMap::identity(m)), e.rhs.clone())?;
    }
    let g = BipartiteGraph { vertices, edges };
    if two_coloring(g.vertices.len(), &g.pairs()).is_none() {
        return Err(Error::NotBipartite("materialized graph has an odd cycle".into()));
    }
    Ok(g)
}

impl BipartiteGraph {
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.edges.iter().map(|e| (e.left, e.right)).collect()
    }

    pub fn sides(&self) -> Vec<u8> {
        self.vertices.iter().map(|v| v.side).collect()
    }

    pub fn left(&self) -> Vec<usize> {
        (0..self.vertices.len()).filter(|&k| self.vertices[k].side == 0).collect()
    }

    pub fn right(&self) -> Vec<usize> {
        (0..self.vertices.len()).filter(|&k| self.vertices[k].side == 1).collect()
    }

    pub fn subdivision_nodes(&self) -> Vec<usize> {
        (0..self.vertices.len()).filter(|&k| self.vertices[k].is_subdivision()).collect()
    }

    pub fn is_bipartite(&self) -> bool {
        self.edges.iter().all(|e| self.vertices[e.left].side == 0 && self.vertices[e.right].side == 1)
            && two_coloring(self.vertices.len(), &self.pairs()).is_some()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.vertices.len()];
        for e in &self.edges {
            d[e.left] += 1;
            d[e.right] += 1;
        }
        d
    }

    pub fn metrics(&self) -> GraphMetrics {
        compute_metrics(self.vertices.len(), &self.pairs(), Some(&self.sides())).expect("edges cross the partition")
    }

    pub fn to_dot(&self) -> String {
        let mut s = String::from("graph bipartite {\n");
        for (side, name) in [(0u8, "left"), (1, "right")] {
            let _ = writeln!(s, "  subgraph cluster_{name} {{\n    label=\"{name}\";");
            for v in self.vertices.iter().filter(|v| v.side == side) {
                let shape = match &v.origin {
                    BVertexOrigin::Subdivision { .. } => "diamond",
                    BVertexOrigin::Original { kind: VertexKind::Constraint { .. }, .. } => "box",
                    BVertexOrigin::Original { .. } => "ellipse",
                };
                let _ = writeln!(s, "    \"{}\" [shape={shape}];", v.id);
            }
            s.push_str("  }\n");
        }
        for e in &self.edges {
            let _ = writeln!(s, "  \"{}\" -- \"{}\" [label=\"{}\"];", self.vertices[e.left].id, self.vertices[e.right].id, e.id);
        }
        s.push_str("}\n");
        s
    }

    pub fn to_json_file(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

#[derive(Serialize, Deserialize)]
struct BEdgeRepr {
    id: String,
    left: String,
    right: String,
    left_map: LinearMap,
    right_map: LinearMap,
    rhs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct BipartiteRepr {
    vertices: Vec<BVertex>,
    edges: Vec<BEdgeRepr>,
}

impl Serialize for BipartiteGraph {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        BipartiteRepr {
            vertices: self.vertices.clone(),
            edges: self
                .edges
                .iter()
                .map(|e| BEdgeRepr {
                    id: e.id.clone(),
                    left: self.vertices[e.left].id.clone(),
                    right: self.vertices[e.right].id.clone(),
                    left_map: e.left_map.clone(),
                    right_map: e.right_map.clone(),
                    rhs: e.rhs.clone(),
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for BipartiteGraph {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = BipartiteRepr::deserialize(d)?;
        let index: HashMap<&str, usize> = repr.vertices.iter().enumerate().map(|(k, v)| (v.id.as_str(), k)).collect();
        let find = |id: &str| index.get(id).copied().ok_or_else(|| D::Error::custom(format!("unknown vertex {id}")));
        let mut edges = Vec::with_capacity(repr.edges.len());
        for e in repr.edges {
            edges.push(BEdge {
                left: find(&e.left)?,
                right: find(&e.right)?,
                id: e.id,
                left_map: e.left_map,
                right_map: e.right_map,
                rhs: e.rhs,
            });
        }
        let g = BipartiteGraph { vertices: repr.vertices, edges };
        if !g.is_bipartite() {
            return Err(D::Error::custom("edges do not run from the left side to the right side"));
        }
        Ok(g)
    }
}
