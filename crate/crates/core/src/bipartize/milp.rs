use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{BipartizationDecision, EdgeDecision};
#[cfg(doc)]
use super::decision_from_coloring;
use crate::error::{Error, Result};
use crate::graph::CouplingGraph;
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContributionMode {
    /// `sqrt(lambda_max(sum_e Q_e^T Q_e))`
    Exact,
    /// `sqrt(sum_e ||Q_e||_F^2)`, an upper bound on the exact value.
    #[default]
    Frobenius,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MilpObjective {
    /// `t^L` only.
    NormOnly,
    /// `t^L + t^R` plus the number of vertices of the bipartite graph.
    #[default]
    NormPlusCounts,
}

/// Soft balance penalty `weight * |n_L - n_R|`, or with a core count target
/// `weight * (|n_L - T| + |n_R - T|)`, where `n_L`, `n_R` count the vertices
/// (original and subdivision) on each side.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Balance {
    pub weight: f64,
    pub target: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MilpOptions {
    pub rel_gap: f64,
    pub time_limit_s: f64,
    /// Open-node cap; beyond it the worst nodes are dropped (their bounds
    /// still count towards the reported bound).
    pub max_open_nodes: usize,
}

impl Default for MilpOptions {
    fn default() -> Self {
        Self { rel_gap: 0.01, time_limit_s: 60.0, max_open_nodes: 1 << 21 }
    }
}

/// Binary model over `(x^L_i, x^R_i)` per vertex and `(z_e, x^L_e, x^R_e)` per
/// edge, plus continuous `t^L`, `t^R`.
#[derive(Debug, Clone, PartialEq)]
pub struct MilpModel {
    pub vertex_ids: Vec<String>,
    pub edge_ids: Vec<String>,
    pub endpoints: Vec<(usize, usize)>,
    pub contributions: Vec<f64>,
    pub objective: MilpObjective,
    pub balance: Balance,
    pub options: MilpOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

/// `sum coeffs . vars (sense) rhs`
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub name: String,
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Row {
    pub fn satisfied(&self, values: &[f64], tol: f64) -> bool {
        let lhs: f64 = self.coeffs.iter().map(|&(k, a)| a * values[k]).sum();
        match self.sense {
            Sense::Le => lhs <= self.rhs + tol,
            Sense::Ge => lhs >= self.rhs - tol,
            Sense::Eq => (lhs - self.rhs).abs() <= tol,
        }
    }
}

/// Contribution of vertex `v` to the norm of its side's stacked operator.
pub fn contribution(graph: &CouplingGraph, v: usize, mode: ContributionMode) -> Result<f64> {
    let dim = graph.vertices[v].dim;
    let maps: Vec<_> = graph.edges.iter().filter_map(|e| e.map_on(v)).collect();
    if maps.iter().any(|m| !m.is_finite()) {
        return Err(Error::NonFinite(graph.vertices[v].id.clone()));
    }
    Ok(match mode {
        ContributionMode::Frobenius => maps.iter().map(|m| m.frobenius_sq()).sum::<f64>().sqrt(),
        ContributionMode::Exact => {
            let mut g = DMatrix::zeros(dim, dim);
            for m in maps {
                g += m.gram();
            }
            linalg::lambda_max_psd(&g).max(0.0).sqrt()
        }
    })
}

pub fn contributions(graph: &CouplingGraph, mode: ContributionMode) -> Result<Vec<f64>> {
    (0..graph.vertex_count()).map(|v| contribution(graph, v, mode)).collect()
}

pub fn build_milp(
    graph: &CouplingGraph,
    objective: MilpObjective,
    mode: ContributionMode,
    balance: Option<Balance>,
    options: MilpOptions,
) -> Result<MilpModel> {
    graph.check()?;
    Ok(MilpModel {
        vertex_ids: graph.vertices.iter().map(|v| v.id.clone()).collect(),
        edge_ids: graph.edges.iter().map(|e| e.id.clone()).collect(),
        endpoints: graph.pairs(),
        contributions: contributions(graph, mode)?,
        objective,
        balance: balance.unwrap_or_default(),
        options,
    })
}

impl MilpModel {
    pub fn vertex_count(&self) -> usize {
        self.vertex_ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_ids.len()
    }

    pub fn num_binaries(&self) -> usize {
        2 * self.vertex_count() + 3 * self.edge_count()
    }

    /// `t^L`, `t^R`, and two balance deviation variables when balance is on.
    pub fn num_continuous(&self) -> usize {
        if self.balance_active() {
            4
        } else {
            2
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_binaries() + self.num_continuous()
    }

    fn balance_active(&self) -> bool {
        self.balance.weight > 0.0
    }

    pub fn xl(&self, i: usize) -> usize {
        2 * i
    }
    pub fn xr(&self, i: usize) -> usize {
        2 * i + 1
    }
    pub fn z(&self, e: usize) -> usize {
        2 * self.vertex_count() + 3 * e
    }
    pub fn xle(&self, e: usize) -> usize {
        self.z(e) + 1
    }
    pub fn xre(&self, e: usize) -> usize {
        self.z(e) + 2
    }
    pub fn tl(&self) -> usize {
        self.num_binaries()
    }
    pub fn tr(&self) -> usize {
        self.num_binaries() + 1
    }

    pub fn var_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.num_vars());
        for i in 0..self.vertex_count() {
            names.push(format!("xL_{i}"));
            names.push(format!("xR_{i}"));
        }
        for e in 0..self.edge_count() {
            names.push(format!("z_{e}"));
            names.push(format!("xLe_{e}"));
            names.push(format!("xRe_{e}"));
        }
        names.push("tL".into());
        names.push("tR".into());
        if self.balance_active() {
            names.push("dL".into());
            names.push("dR".into());
        }
        names
    }

    /// Objective coefficients over [`Self::var_names`].
    pub fn cost(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.num_vars()];
        c[self.tl()] = 1.0;
        if self.objective == MilpObjective::NormPlusCounts {
            c[self.tr()] = 1.0;
            c[..self.num_binaries()].iter_mut().for_each(|v| *v = 1.0);
            for e in 0..self.edge_count() {
                c[self.z(e)] = 0.0;
            }
        }
        if self.balance_active() {
            let n = self.num_binaries();
            c[n + 2] = self.balance.weight;
            c[n + 3] = self.balance.weight;
        }
        c
    }

    /// All constraint rows: node assignment, edge logic, contribution bounds
    /// and, when active, the balance deviation rows.
    pub fn rows(&self) -> Vec<Row> {
        let mut rows = Vec::new();
        let row = |name: String, coeffs: Vec<(usize, f64)>, sense, rhs| Row { name, coeffs, sense, rhs };
        for i in 0..self.vertex_count() {
            rows.push(row(format!("node_{i}"), vec![(self.xl(i), 1.0), (self.xr(i), 1.0)], Sense::Eq, 1.0));
        }
        for (e, &(i, j)) in self.endpoints.iter().enumerate() {
            let (z, xle) = (self.z(e), self.xle(e));
            rows.push(row(format!("split_{e}"), vec![(xle, 1.0), (self.xre(e), 1.0), (z, -1.0)], Sense::Eq, 0.0));
            let ends = vec![(self.xl(i), 1.0), (self.xl(j), 1.0)];
            rows.push(row(format!("ends_lo_{e}"), [ends.clone(), vec![(z, 1.0)]].concat(), Sense::Ge, 1.0));
            rows.push(row(format!("ends_hi_{e}"), [ends, vec![(z, -1.0)]].concat(), Sense::Le, 1.0));
            for (tag, v) in [("i", i), ("j", j)] {
                let pair = vec![(self.xl(v), 1.0), (xle, 1.0)];
                rows.push(row(format!("sub_{tag}_lo_{e}"), [pair.clone(), vec![(z, -1.0)]].concat(), Sense::Ge, 0.0));
                rows.push(row(format!("sub_{tag}_hi_{e}"), [pair, vec![(z, 1.0)]].concat(), Sense::Le, 2.0));
            }
        }
        let both = self.objective == MilpObjective::NormPlusCounts;
        for (side, t, x, xe) in [("L", self.tl(), 0, 1), ("R", self.tr(), 1, 2)] {
            if side == "R" && !both {
                continue;
            }
            for i in 0..self.vertex_count() {
                rows.push(row(format!("t{side}_v{i}"), vec![(t, 1.0), (2 * i + x, -self.contributions[i])], Sense::Ge, 0.0));
            }
            for e in 0..self.edge_count() {
                rows.push(row(format!("t{side}_e{e}"), vec![(t, 1.0), (self.z(e) + xe, -std::f64::consts::SQRT_2)], Sense::Ge, 0.0));
            }
        }
        if self.balance_active() {
            let n = self.num_binaries();
            let count = |x: usize, xe: usize| -> Vec<(usize, f64)> {
                (0..self.vertex_count())
                    .map(|i| (2 * i + x, 1.0))
                    .chain((0..self.edge_count()).map(|e| (self.z(e) + xe, 1.0)))
                    .collect()
            };
            let neg = |v: Vec<(usize, f64)>| v.into_iter().map(|(k, a)| (k, -a)).collect::<Vec<_>>();
            let (l, r) = (count(0, 1), count(1, 2));
            match self.balance.target {
                None => {
                    rows.push(row("bal_p".into(), [vec![(n + 2, 1.0)], neg(l.clone()), r.clone()].concat(), Sense::Ge, 0.0));
                    rows.push(row("bal_m".into(), [vec![(n + 2, 1.0)], l, neg(r)].concat(), Sense::Ge, 0.0));
                    rows.push(row("bal_z".into(), vec![(n + 3, 1.0)], Sense::Eq, 0.0));
                }
                Some(t) => {
                    let t = t as f64;
                    for (k, side) in [(n + 2, l), (n + 3, r)] {
                        rows.push(row(format!("bal_p{k}"), [vec![(k, 1.0)], neg(side.clone())].concat(), Sense::Ge, -t));
                        rows.push(row(format!("bal_m{k}"), [vec![(k, 1.0)], side].concat(), Sense::Ge, t));
                    }
                }
            }
        }
        rows
    }

    /// Full variable vector of a decision, with the continuous variables at
    /// their smallest feasible values.
    pub fn assignment(&self, d: &BipartizationDecision) -> Vec<f64> {
        let mut v = vec![0.0; self.num_vars()];
        for (i, &c) in d.coloring.iter().enumerate() {
            v[self.xl(i)] = f64::from(1 - c);
            v[self.xr(i)] = f64::from(c);
        }
        for (e, ed) in d.edges.iter().enumerate() {
            if ed.split {
                v[self.z(e)] = 1.0;
                v[if ed.side == 0 { self.xle(e) } else { self.xre(e) }] = 1.0;
            }
        }
        let (tl, tr) = self.side_norms(d);
        v[self.tl()] = tl;
        v[self.tr()] = if self.objective == MilpObjective::NormPlusCounts { tr } else { 0.0 };
        if self.balance_active() {
            let (bl, br) = self.balance_terms(d);
            let n = self.num_binaries();
            v[n + 2] = bl;
            v[n + 3] = br;
        }
        v
    }

    /// Largest contribution on each side, counting `sqrt(2)` per subdivision node.
    pub fn side_norms(&self, d: &BipartizationDecision) -> (f64, f64) {
        let mut t = [0.0f64; 2];
        for (i, &c) in d.coloring.iter().enumerate() {
            t[c as usize] = t[c as usize].max(self.contributions[i]);
        }
        for e in d.edges.iter().filter(|e| e.split) {
            t[e.side as usize] = t[e.side as usize].max(std::f64::consts::SQRT_2);
        }
        (t[0], t[1])
    }

    fn balance_terms(&self, d: &BipartizationDecision) -> (f64, f64) {
        let sides = d.sides();
        let r = sides.iter().filter(|&&s| s == 1).count() as f64;
        let l = sides.len() as f64 - r;
        match self.balance.target {
            None => ((l - r).abs(), 0.0),
            Some(t) => ((l - t as f64).abs(), (r - t as f64).abs()),
        }
    }

    /// Objective value of a decision.
    pub fn evaluate(&self, d: &BipartizationDecision) -> f64 {
        let (tl, tr) = self.side_norms(d);
        let mut obj = match self.objective {
            MilpObjective::NormOnly => tl,
            MilpObjective::NormPlusCounts => tl + tr + (self.vertex_count() + d.split_count()) as f64,
        };
        if self.balance_active() {
            let (a, b) = self.balance_terms(d);
            obj += self.balance.weight * (a + b);
        }
        obj
    }

    /// Objective of the decision implied by a coloring.
    pub fn evaluate_coloring(&self, coloring: &[u8]) -> f64 {
        self.evaluate(&self.decision_for(coloring))
    }

    /// The decision a coloring implies (see [`decision_from_coloring`]).
    pub fn decision_for(&self, coloring: &[u8]) -> BipartizationDecision {
        BipartizationDecision {
            coloring: coloring.to_vec(),
            edges: self
                .endpoints
                .iter()
                .map(|&(i, j)| if coloring[i] == coloring[j] { EdgeDecision::split_to(1 - coloring[i]) } else { EdgeDecision::KEEP })
                .collect(),
        }
    }

    /// CPLEX LP text of the model.
    pub fn to_lp(&self) -> String {
        let names = self.var_names();
        let term = |a: f64, k: usize| {
            let sign = if a < 0.0 { "-" } else { "+" };
            format!(" {sign} {} {}", fmt_num(a.abs()), names[k])
        };
        let mut s = String::from("\\ bipartization model\n");
        for (i, id) in self.vertex_ids.iter().enumerate() {
            let _ = writeln!(s, "\\ vertex {i}: {id}");
        }
        for (e, id) in self.edge_ids.iter().enumerate() {
            let _ = writeln!(s, "\\ edge {e}: {id}");
        }
        s.push_str("Minimize\n obj:");
        for (k, c) in self.cost().iter().enumerate().filter(|(_, c)| **c != 0.0) {
            s.push_str(&term(*c, k));
        }
        s.push_str("\nSubject To\n");
        for r in self.rows() {
            let _ = write!(s, " {}:", r.name);
            for &(k, a) in &r.coeffs {
                s.push_str(&term(a, k));
            }
            let op = match r.sense {
                Sense::Le => "<=",
                Sense::Ge => ">=",
                Sense::Eq => "=",
            };
            let _ = writeln!(s, " {op} {}", fmt_num(r.rhs));
        }
        s.push_str("Bounds\n");
        for k in self.num_binaries()..self.num_vars() {
            let _ = writeln!(s, " {} >= 0", names[k]);
        }
        s.push_str("Binary\n");
        for name in &names[..self.num_binaries()] {
            let _ = writeln!(s, " {name}");
        }
        s.push_str("End\n");
        s
    }
}

fn fmt_num(v: f64) -> String {
    format!("{v:?}")
}
