//! Coupling graphs: one variable node per block, one constraint node per
//! constraint that couples three or more blocks (star expansion), and edges
//! carrying the linear coupling data.

mod metrics;

pub use metrics::{compute_metrics, two_coloring, GraphMetrics};

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mbp::{LinearMap, LinearRow, LinearSystem, MultiblockProblem, ProxFn};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum VertexKind {
    Variable {
        block: String,
    },
    /// Auxiliary `y = (y_1, .., y_arity)` with `sum_s y_s = rhs`.
    Constraint {
        constraint: String,
        arity: usize,
        rhs: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vertex {
    pub id: String,
    pub kind: VertexKind,
    pub dim: usize,
}

impl Vertex {
    pub fn is_constraint(&self) -> bool {
        matches!(self.kind, VertexKind::Constraint { .. })
    }

    /// The constraint set of a constraint node as a prox term.
    pub fn constraint_prox(&self) -> Option<ProxFn> {
        match &self.kind {
            VertexKind::Constraint { arity, rhs, .. } => {
                Some(ProxFn::sum_to_constant(rhs.clone(), *arity).expect("arity >= 3"))
            }
            VertexKind::Variable { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EdgeOrigin {
    /// One or more two-block constraints on the same pair, rows stacked in order.
    Direct { constraints: Vec<String> },
    /// `A_i x_i - y_slot = 0` for a constraint node.
    Star { constraint: String, slot: usize },
    /// Added directly, e.g. by [`CouplingGraph::from_edge_list`].
    Synthetic,
}

/// `maps.0 * v[endpoints.0] + maps.1 * v[endpoints.1] = rhs`
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub id: String,
    pub endpoints: (usize, usize),
    pub maps: (LinearMap, LinearMap),
    pub rhs: Vec<f64>,
    pub origin: EdgeOrigin,
}

impl Edge {
    /// The other endpoint and the map acting on `v`, if `v` is an endpoint.
    pub fn map_on(&self, v: usize) -> Option<&LinearMap> {
        if self.endpoints.0 == v {
            Some(&self.maps.0)
        } else if self.endpoints.1 == v {
            Some(&self.maps.1)
        } else {
            None
        }
    }

    pub fn other(&self, v: usize) -> usize {
        if self.endpoints.0 == v {
            self.endpoints.1
        } else {
            self.endpoints.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CouplingGraph {
    pub vertices: Vec<Vertex>,
    pub edges: Vec<Edge>,
}

pub fn constraint_vertex_id(constraint: &str) -> String {
    format!("con:{constraint}")
}

/// Graph of `problem`. The problem must already be valid.
///
/// A block listed twice in one constraint has its maps summed.
pub fn build_coupling_graph(problem: &MultiblockProblem) -> Result<CouplingGraph> {
    problem.ensure_valid()?;
    let mut g = CouplingGraph {
        vertices: problem
            .blocks
            .iter()
            .map(|b| Vertex {
                id: b.id.clone(),
                kind: VertexKind::Variable { block: b.id.clone() },
                dim: b.dim,
            })
            .collect(),
        edges: Vec::new(),
    };
    let index = problem.block_index();
    let mut direct: HashMap<(usize, usize), usize> = HashMap::new();

    for c in &problem.constraints {
        let mut terms: Vec<(usize, LinearMap)> = Vec::new();
        for t in &c.terms {
            let v = index[t.block.as_str()];
            match terms.iter_mut().find(|(u, _)| *u == v) {
                Some((_, m)) => *m = m.add(&t.map)?,
                None => terms.push((v, t.map.clone())),
            }
        }
        if terms.len() == 2 {
            terms.sort_by_key(|t| t.0);
            let (b, a) = (terms.pop().unwrap(), terms.pop().unwrap());
            let key = (a.0, b.0);
            match direct.get(&key) {
                Some(&k) => {
                    let e = &mut g.edges[k];
                    e.maps.0 = LinearMap::vstack(&[&e.maps.0, &a.1])?;
                    e.maps.1 = LinearMap::vstack(&[&e.maps.1, &b.1])?;
                    e.rhs.extend_from_slice(&c.rhs);
                    e.id = format!("{}+{}", e.id, c.id);
                    if let EdgeOrigin::Direct { constraints } = &mut e.origin {
                        constraints.push(c.id.clone());
                    }
                }
                None => {
                    direct.insert(key, g.edges.len());
                    g.edges.push(Edge {
                        id: c.id.clone(),
                        endpoints: key,
                        maps: (a.1, b.1),
                        rhs: c.rhs.clone(),
                        origin: EdgeOrigin::Direct { constraints: vec![c.id.clone()] },
                    });
                }
            }
        } else {
            let m = c.rhs.len();
            let arity = terms.len();
            let cv = g.vertices.len();
            g.vertices.push(Vertex {
                id: constraint_vertex_id(&c.id),
                kind: VertexKind::Constraint { constraint: c.id.clone(), arity, rhs: c.rhs.clone() },
                dim: arity * m,
            });
            for (slot, (v, map)) in terms.into_iter().enumerate() {
                g.edges.push(Edge {
                    id: format!("{}@{}", c.id, g.vertices[v].id),
                    endpoints: (cv, v),
                    maps: (LinearMap::selector(slot, m, arity, -1.0), map),
                    rhs: vec![0.0; m],
                    origin: EdgeOrigin::Star { constraint: c.id.clone(), slot },
                });
            }
        }
    }
    Ok(g)
}

impl CouplingGraph {
    /// Graph on `n` scalar vertices `v0..` with `Identity`/`-Identity` maps and
    /// zero right-hand sides. Mostly useful for topology-only work.
    pub fn from_edge_list(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Self {
            vertices: (0..n)
                .map(|i| Vertex {
                    id: format!("v{i}"),
                    kind: VertexKind::Variable { block: format!("v{i}") },
                    dim: 1,
                })
                .collect(),
            edges: Vec::new(),
        };
        for (k, &(i, j)) in edges.iter().enumerate() {
            g.edges.push(Edge {
                id: format!("e{k}"),
                endpoints: (i, j),
                maps: (LinearMap::identity(1), LinearMap::scaled_identity(-1.0, 1)),
                rhs: vec![0.0],
                origin: EdgeOrigin::Synthetic,
            });
        }
        g.check()?;
        Ok(g)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn vertex_index(&self, id: &str) -> Option<usize> {
        self.vertices.iter().position(|v| v.id == id)
    }

    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.edges.iter().map(|e| e.endpoints).collect()
    }

    /// Incident edge indices per vertex, ordered by the neighbor's index.
    pub fn incidence(&self) -> Vec<Vec<usize>> {
        let mut inc = vec![Vec::new(); self.vertices.len()];
        for (k, e) in self.edges.iter().enumerate() {
            inc[e.endpoints.0].push(k);
            inc[e.endpoints.1].push(k);
        }
        for (v, list) in inc.iter_mut().enumerate() {
            list.sort_by_key(|&k| (self.edges[k].other(v), k));
        }
        inc
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.vertices.len()];
        for e in &self.edges {
            d[e.endpoints.0] += 1;
            d[e.endpoints.1] += 1;
        }
        d
    }

    /// Checks the structural invariants: known distinct endpoints, no
    /// parallel edges, map dimensions, and constraint-node degree.
    pub fn check(&self) -> Result<()> {
        let n = self.vertices.len();
        let mut seen = std::collections::HashSet::new();
        for e in &self.edges {
            let (i, j) = e.endpoints;
            if i >= n || j >= n {
                return Err(Error::InvalidGraph(format!("edge {} has an unknown endpoint", e.id)));
            }
            if i == j {
                return Err(Error::InvalidGraph(format!("edge {} is a self-loop", e.id)));
            }
            if !seen.insert((i.min(j), i.max(j))) {
                return Err(Error::InvalidGraph(format!("edge {} is parallel to another edge", e.id)));
            }
            let m = e.rhs.len();
            let ok = e.maps.0.in_dim() == self.vertices[i].dim
                && e.maps.1.in_dim() == self.vertices[j].dim
                && e.maps.0.out_dim() == m
                && e.maps.1.out_dim() == m;
            if !ok {
                return Err(Error::InvalidGraph(format!("edge {} has inconsistent map dimensions", e.id)));
            }
        }
        let deg = self.degrees();
        for (v, d) in self.vertices.iter().zip(deg) {
            if v.is_constraint() && d < 3 {
                return Err(Error::InvalidGraph(format!("constraint node {} has degree {d}", v.id)));
            }
        }
        Ok(())
    }

    pub fn is_bipartite(&self) -> (bool, Option<Vec<u8>>) {
        let c = two_coloring(self.vertices.len(), &self.pairs());
        (c.is_some(), c)
    }

    pub fn metrics(&self, partition: Option<&[u8]>) -> Result<GraphMetrics> {
        compute_metrics(self.vertices.len(), &self.pairs(), partition)
    }

    /// The original constraint system recovered from the graph: direct edges
    /// as they are, and each constraint node's star collapsed to
    /// `sum_i A_i x_i = b`.
    pub fn eliminate_constraint_nodes(&self) -> Result<LinearSystem> {
        let vars: Vec<usize> = (0..self.vertices.len()).filter(|&v| !self.vertices[v].is_constraint()).collect();
        let pos: HashMap<usize, usize> = vars.iter().enumerate().map(|(k, &v)| (v, k)).collect();
        let mut rows = Vec::new();
        let mut stars: Vec<(usize, LinearRow)> = Vec::new();
        for e in &self.edges {
            let (i, j) = e.endpoints;
            match (self.vertices[i].is_constraint(), self.vertices[j].is_constraint()) {
                (false, false) => rows.push(LinearRow {
                    terms: vec![(pos[&i], e.maps.0.clone()), (pos[&j], e.maps.1.clone())],
                    rhs: e.rhs.clone(),
                }),
                (true, false) | (false, true) => {
                    let (c, x, map) = if self.vertices[i].is_constraint() { (i, j, &e.maps.1) } else { (j, i, &e.maps.0) };
                    let k = match stars.iter().position(|s| s.0 == c) {
                        Some(k) => k,
                        None => {
                            let VertexKind::Constraint { rhs, .. } = &self.vertices[c].kind else {
                                unreachable!("checked above")
                            };
                            stars.push((c, LinearRow { terms: Vec::new(), rhs: rhs.clone() }));
                            stars.len() - 1
                        }
                    };
                    stars[k].1.terms.push((pos[&x], map.clone()));
                }
                (true, true) => {
                    return Err(Error::InvalidGraph(format!("edge {} joins two constraint nodes", e.id)))
                }
            }
        }
        rows.extend(stars.into_iter().map(|s| s.1));
        Ok(LinearSystem {
            vars: vars.iter().map(|&v| (self.vertices[v].id.clone(), self.vertices[v].dim)).collect(),
            rows,
        })
    }

    pub fn to_dot(&self) -> String {
        let mut s = String::from("graph coupling {\n");
        for v in &self.vertices {
            let shape = if v.is_constraint() { "box" } else { "ellipse" };
            let _ = writeln!(s, "  \"{}\" [shape={shape}];", v.id);
        }
        for e in &self.edges {
            let _ = writeln!(
                s,
                "  \"{}\" -- \"{}\" [label=\"{}\"];",
                self.vertices[e.endpoints.0].id, self.vertices[e.endpoints.1].id, e.id
            );
        }
        s.push_str("}\n");
        s
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn to_json_file(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct EdgeRepr {
    id: String,
    endpoints: (String, String),
    maps: (LinearMap, LinearMap),
    rhs: Vec<f64>,
    origin: EdgeOrigin,
}

#[derive(Serialize, Deserialize)]
struct GraphRepr {
    vertices: Vec<Vertex>,
    edges: Vec<EdgeRepr>,
}

impl Serialize for CouplingGraph {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let id = |k: usize| self.vertices[k].id.clone();
        GraphRepr {
            vertices: self.vertices.clone(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeRepr {
                    id: e.id.clone(),
                    endpoints: (id(e.endpoints.0), id(e.endpoints.1)),
                    maps: e.maps.clone(),
                    rhs: e.rhs.clone(),
                    origin: e.origin.clone(),
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for CouplingGraph {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = GraphRepr::deserialize(d)?;
        let index: HashMap<&str, usize> =
            repr.vertices.iter().enumerate().map(|(k, v)| (v.id.as_str(), k)).collect();
        let find = |id: &str| index.get(id).copied().ok_or_else(|| D::Error::custom(format!("unknown vertex {id}")));
        let mut edges = Vec::with_capacity(repr.edges.len());
        for e in repr.edges {
            edges.push(Edge {
                endpoints: (find(&e.endpoints.0)?, find(&e.endpoints.1)?),
                id: e.id,
                maps: e.maps,
                rhs: e.rhs,
                origin: e.origin,
            });
        }
        let g = CouplingGraph { vertices: repr.vertices, edges };
        g.check().map_err(D::Error::custom)?;
        Ok(g)
    }
}
