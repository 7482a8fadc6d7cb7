//! Canonical two-block form `min f(x) + h(z)  s.t.  A x + B z = b`.
//!
//! Left vertices of a bipartite graph become the `x` blocks, right vertices
//! the `z` blocks, and every edge one coupling row group. Since no edge joins
//! two vertices on the same side, `A` and `B` are block diagonal up to a row
//! permutation.

use std::collections::HashMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bipartize::{BVertexOrigin, BipartiteGraph, ContributionMode};
use crate::error::{check_dim, Error, Result};
use crate::graph::VertexKind;
use crate::linalg;
use crate::mbp::{LinearMap, LinearRow, LinearSystem, MultiblockProblem, ProxFn, SmoothFn};

/// Where a two-block variable comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Provenance {
    /// Block of the original problem; `vertex` is its coupling-graph index.
    Original { vertex: usize },
    /// Concatenated `y` of a constraint coupling three or more blocks, with
    /// `sum_s y_s = target`.
    ConstraintNode { constraint: String, arity: usize, target: Vec<f64> },
    /// Node inserted on a subdivided edge.
    Subdivision { edge_id: String },
}

impl Provenance {
    pub fn is_auxiliary(&self) -> bool {
        !matches!(self, Self::Original { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideBlock {
    pub id: String,
    pub dim: usize,
    pub smooth: SmoothFn,
    pub prox: ProxFn,
    pub provenance: Provenance,
}

/// `a * x[left] + b * z[right] = rhs`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub id: String,
    pub left: usize,
    pub right: usize,
    pub a: LinearMap,
    pub b: LinearMap,
    pub rhs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoBlockProblem {
    pub left: Vec<SideBlock>,
    pub right: Vec<SideBlock>,
    pub couplings: Vec<Coupling>,
    /// Upper bounds on `||A||` and `||B||`.
    pub norm_bounds: (f64, f64),
}

/// Objective parts for every vertex of `bipartite`: original blocks keep
/// theirs, constraint nodes get the indicator of `sum_s y_s = b`, and
/// subdivision nodes get nothing.
pub fn objectives_for(problem: &MultiblockProblem, bipartite: &BipartiteGraph) -> Result<HashMap<String, (SmoothFn, ProxFn)>> {
    let mut out = HashMap::with_capacity(bipartite.vertices.len());
    for v in &bipartite.vertices {
        let parts = match &v.origin {
            BVertexOrigin::Original { kind: VertexKind::Variable { block }, .. } => {
                let b = problem.block(block).ok_or_else(|| Error::Vertices(vec![block.clone()]))?;
                (b.smooth.clone(), b.prox.clone())
            }
            BVertexOrigin::Original { kind: VertexKind::Constraint { arity, rhs, .. }, .. } => {
                (SmoothFn::zero(), ProxFn::sum_to_constant(rhs.clone(), *arity)?)
            }
            BVertexOrigin::Subdivision { .. } => (SmoothFn::zero(), ProxFn::Zero),
        };
        out.insert(v.id.clone(), parts);
    }
    Ok(out)
}

/// Two-block problem of `bipartite`. Blocks keep the bipartite graph's vertex
/// order on each side: original blocks, then constraint nodes, then
/// subdivision nodes.
pub fn assemble(bipartite: &BipartiteGraph, objectives: &HashMap<String, (SmoothFn, ProxFn)>) -> Result<TwoBlockProblem> {
    let missing: Vec<String> =
        bipartite.vertices.iter().filter(|v| !objectives.contains_key(&v.id)).map(|v| v.id.clone()).collect();
    if !missing.is_empty() {
        return Err(Error::Vertices(missing));
    }
    let mut slot = vec![0usize; bipartite.vertices.len()];
    let (mut left, mut right) = (Vec::new(), Vec::new());
    for (k, v) in bipartite.vertices.iter().enumerate() {
        let (smooth, prox) = objectives[&v.id].clone();
        let provenance = match &v.origin {
            BVertexOrigin::Original { vertex, kind: VertexKind::Variable { .. } } => Provenance::Original { vertex: *vertex },
            BVertexOrigin::Original { kind: VertexKind::Constraint { constraint, arity, rhs }, .. } => {
                Provenance::ConstraintNode { constraint: constraint.clone(), arity: *arity, target: rhs.clone() }
            }
            BVertexOrigin::Subdivision { edge_id, .. } => Provenance::Subdivision { edge_id: edge_id.clone() },
        };
        let block = SideBlock { id: v.id.clone(), dim: v.dim, smooth, prox, provenance };
        let side = if v.side == 0 { &mut left } else { &mut right };
        slot[k] = side.len();
        side.push(block);
    }
    let couplings = bipartite
        .edges
        .iter()
        .map(|e| Coupling {
            id: e.id.clone(),
            left: slot[e.left],
            right: slot[e.right],
            a: e.left_map.clone(),
            b: e.right_map.clone(),
            rhs: e.rhs.clone(),
        })
        .collect();
    let mut p = TwoBlockProblem { left, right, couplings, norm_bounds: (0.0, 0.0) };
    p.norm_bounds = p.compute_norm_bounds(ContributionMode::Frobenius);
    Ok(p)
}

/// [`objectives_for`] followed by [`assemble`].
pub fn assemble_problem(problem: &MultiblockProblem, bipartite: &BipartiteGraph) -> Result<TwoBlockProblem> {
    assemble(bipartite, &objectives_for(problem, bipartite)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Var {
    L(usize),
    R(usize),
}

impl TwoBlockProblem {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn to_json_file(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    /// Coupling indices per left block and per right block.
    pub fn incidence(&self) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
        let mut l = vec![Vec::new(); self.left.len()];
        let mut r = vec![Vec::new(); self.right.len()];
        for (k, c) in self.couplings.iter().enumerate() {
            l[c.left].push(k);
            r[c.right].push(k);
        }
        (l, r)
    }

    /// Norm of each block's stacked coupling operator (exact) or its
    /// Frobenius upper bound.
    pub fn block_norms(&self, mode: ContributionMode) -> (Vec<f64>, Vec<f64>) {
        let (li, ri) = self.incidence();
        let norm = |dim: usize, maps: Vec<&LinearMap>| match mode {
            ContributionMode::Frobenius => maps.iter().map(|m| m.frobenius_sq()).sum::<f64>().sqrt(),
            ContributionMode::Exact => {
                let mut g = DMatrix::zeros(dim, dim);
                for m in maps {
                    g += m.gram();
                }
                linalg::lambda_max_psd(&g).max(0.0).sqrt()
            }
        };
        let l = self.left.iter().zip(&li).map(|(b, ks)| norm(b.dim, ks.iter().map(|&k| &self.couplings[k].a).collect())).collect();
        let r = self.right.iter().zip(&ri).map(|(b, ks)| norm(b.dim, ks.iter().map(|&k| &self.couplings[k].b).collect())).collect();
        (l, r)
    }

    /// `(||A||, ||B||)` bounds: the largest block norm on each side.
    pub fn compute_norm_bounds(&self, mode: ContributionMode) -> (f64, f64) {
        let (l, r) = self.block_norms(mode);
        let max = |v: Vec<f64>| v.into_iter().fold(0.0, f64::max);
        (max(l), max(r))
    }

    pub fn with_norm_bounds(mut self, mode: ContributionMode) -> Self {
        self.norm_bounds = self.compute_norm_bounds(mode);
        self
    }

    pub fn rows(&self) -> usize {
        self.couplings.iter().map(|c| c.rhs.len()).sum()
    }

    fn check_point(&self, x: &[Vec<f64>], z: &[Vec<f64>]) -> Result<()> {
        check_dim(|| "left block count".into(), self.left.len(), x.len())?;
        check_dim(|| "right block count".into(), self.right.len(), z.len())?;
        for (b, v) in self.left.iter().zip(x).chain(self.right.iter().zip(z)) {
            check_dim(|| format!("block {}", b.id), b.dim, v.len())?;
        }
        Ok(())
    }

    /// `A^e x_i + B^e z_j - b^e` for every coupling.
    pub fn residual(&self, x: &[Vec<f64>], z: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        self.check_point(x, z)?;
        Ok(self.residual_unchecked(x, z))
    }

    pub(crate) fn residual_unchecked(&self, x: &[Vec<f64>], z: &[Vec<f64>]) -> Vec<Vec<f64>> {
        self.couplings
            .iter()
            .map(|c| {
                let mut r: Vec<f64> = c.rhs.iter().map(|v| -v).collect();
                c.a.apply_add(&x[c.left], 1.0, &mut r);
                c.b.apply_add(&z[c.right], 1.0, &mut r);
                r
            })
            .collect()
    }

    /// `sum f + g` over both sides.
    pub fn objective(&self, x: &[Vec<f64>], z: &[Vec<f64>]) -> Result<f64> {
        self.check_point(x, z)?;
        Ok(self
            .left
            .iter()
            .zip(x)
            .chain(self.right.iter().zip(z))
            .map(|(b, v)| b.smooth.value(v) + b.prox.value(v))
            .sum())
    }

    /// Smooth part of the objective only (indicators dropped).
    pub fn smooth_objective(&self, x: &[Vec<f64>], z: &[Vec<f64>]) -> f64 {
        self.left.iter().zip(x).chain(self.right.iter().zip(z)).map(|(b, v)| b.smooth.value(v)).sum()
    }

    fn offsets(blocks: &[SideBlock]) -> Vec<usize> {
        let mut acc = 0;
        blocks
            .iter()
            .map(|b| {
                let o = acc;
                acc += b.dim;
                o
            })
            .collect()
    }

    /// Dense `(A, B, b)`, rows in coupling order and columns in block order.
    pub fn to_dense(&self) -> (DMatrix<f64>, DMatrix<f64>, DVector<f64>) {
        let (lo, ro) = (Self::offsets(&self.left), Self::offsets(&self.right));
        let n: usize = self.left.iter().map(|b| b.dim).sum();
        let m: usize = self.right.iter().map(|b| b.dim).sum();
        let rows = self.rows();
        let (mut a, mut b, mut rhs) = (DMatrix::zeros(rows, n), DMatrix::zeros(rows, m), DVector::zeros(rows));
        let mut r0 = 0;
        for c in &self.couplings {
            let k = c.rhs.len();
            a.view_mut((r0, lo[c.left]), (k, self.left[c.left].dim)).copy_from(&c.a.to_dense());
            b.view_mut((r0, ro[c.right]), (k, self.right[c.right].dim)).copy_from(&c.b.to_dense());
            rhs.rows_mut(r0, k).copy_from_slice(&c.rhs);
            r0 += k;
        }
        (a, b, rhs)
    }

    /// Two-block point for values of the original blocks: auxiliary blocks
    /// take the least-squares solution of the coupling rows with the
    /// original blocks fixed (exact whenever the original point is feasible).
    pub fn lift(&self, point: &HashMap<String, Vec<f64>>) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        let vars: Vec<(Var, &SideBlock)> = self
            .left
            .iter()
            .enumerate()
            .map(|(k, b)| (Var::L(k), b))
            .chain(self.right.iter().enumerate().map(|(k, b)| (Var::R(k), b)))
            .collect();
        let mut x: Vec<Vec<f64>> = self.left.iter().map(|b| vec![0.0; b.dim]).collect();
        let mut z: Vec<Vec<f64>> = self.right.iter().map(|b| vec![0.0; b.dim]).collect();
        let mut aux = Vec::new();
        for (var, b) in &vars {
            if b.provenance.is_auxiliary() {
                aux.push(*var);
                continue;
            }
            let v = point.get(&b.id).ok_or_else(|| Error::Vertices(vec![b.id.clone()]))?;
            check_dim(|| format!("point for block {}", b.id), b.dim, v.len())?;
            match var {
                Var::L(k) => x[*k] = v.clone(),
                Var::R(k) => z[*k] = v.clone(),
            }
        }
        if aux.is_empty() {
            return Ok((x, z));
        }
        let dim = |v: Var| match v {
            Var::L(k) => self.left[k].dim,
            Var::R(k) => self.right[k].dim,
        };
        let mut col = HashMap::new();
        let mut cols = 0;
        for &v in &aux {
            col.insert(format!("{v:?}"), cols);
            cols += dim(v);
        }
        let rows = self.rows();
        let mut m = DMatrix::zeros(rows, cols);
        let mut rhs = DVector::zeros(rows);
        let mut r0 = 0;
        let base = self.residual_unchecked(&x, &z);
        for (c, r) in self.couplings.iter().zip(&base) {
            let k = c.rhs.len();
            for (v, map) in [(Var::L(c.left), &c.a), (Var::R(c.right), &c.b)] {
                if let Some(&off) = col.get(&format!("{v:?}")) {
                    m.view_mut((r0, off), (k, dim(v))).copy_from(&map.to_dense());
                }
            }
            for (i, val) in r.iter().enumerate() {
                rhs[r0 + i] = -val;
            }
            r0 += k;
        }
        let sol = linalg::min_norm_solution(&m, &rhs, 1e-12);
        for &v in &aux {
            let off = col[&format!("{v:?}")];
            let vals = sol.as_slice()[off..off + dim(v)].to_vec();
            match v {
                Var::L(k) => x[k] = vals,
                Var::R(k) => z[k] = vals,
            }
        }
        Ok((x, z))
    }
}

fn is_signed_identity(map: &LinearMap, sign: f64) -> bool {
    let d = map.to_dense();
    d.is_square() && d == DMatrix::identity(d.nrows(), d.ncols()) * sign
}

/// Eliminates every subdivision node (its two rows are added, cancelling
/// `-w` against `+w`) and then every constraint node (its rows are added and
/// `sum_s y_s` is replaced by the target), leaving a system over the
/// original blocks only, ordered by coupling-graph vertex index.
pub fn eliminate_auxiliaries(problem: &TwoBlockProblem) -> Result<LinearSystem> {
    let blocks: Vec<&SideBlock> = problem.left.iter().chain(&problem.right).collect();
    let nl = problem.left.len();
    let mut rows: Vec<Option<LinearRow>> = problem
        .couplings
        .iter()
        .map(|c| Some(LinearRow { terms: vec![(c.left, c.a.clone()), (nl + c.right, c.b.clone())], rhs: c.rhs.clone() }))
        .collect();

    let rows_with = |rows: &[Option<LinearRow>], v: usize| -> Vec<usize> {
        (0..rows.len()).filter(|&k| rows[k].as_ref().is_some_and(|r| r.terms.iter().any(|t| t.0 == v))).collect()
    };
    let not_elim = |b: &SideBlock, reason: String| Error::NonEliminable { block: b.id.clone(), reason };

    for (v, b) in blocks.iter().enumerate() {
        if !matches!(b.provenance, Provenance::Subdivision { .. }) {
            continue;
        }
        let ks = rows_with(&rows, v);
        if ks.len() != 2 {
            return Err(not_elim(b, format!("appears in {} coupling rows, expected 2", ks.len())));
        }
        let (r1, r2) = (rows[ks[0]].take().unwrap(), rows[ks[1]].take().unwrap());
        let own = |r: &LinearRow| r.terms.iter().find(|t| t.0 == v).map(|t| t.1.clone()).unwrap();
        let (m1, m2) = (own(&r1), own(&r2));
        let cancels = (is_signed_identity(&m1, -1.0) && is_signed_identity(&m2, 1.0))
            || (is_signed_identity(&m1, 1.0) && is_signed_identity(&m2, -1.0));
        if !cancels {
            return Err(not_elim(b, "couplings are not -I and +I".into()));
        }
        let terms = r1.terms.into_iter().chain(r2.terms).filter(|t| t.0 != v).collect();
        let rhs = r1.rhs.iter().zip(&r2.rhs).map(|(a, c)| a + c).collect();
        rows[ks[0]] = Some(LinearRow { terms, rhs });
    }

    for (v, b) in blocks.iter().enumerate() {
        let Provenance::ConstraintNode { arity, target, .. } = &b.provenance else {
            continue;
        };
        let m = target.len();
        let ks = rows_with(&rows, v);
        if ks.len() != *arity {
            return Err(not_elim(b, format!("appears in {} coupling rows, expected {arity}", ks.len())));
        }
        let mut covered = vec![false; *arity];
        let mut terms = Vec::new();
        let mut rhs = target.clone();
        for &k in &ks {
            let r = rows[k].take().unwrap();
            let own = r.terms.iter().find(|t| t.0 == v).unwrap().1.clone();
            let slot = (0..*arity).find(|&s| own == LinearMap::selector(s, m, *arity, -1.0));
            match slot {
                Some(s) if !covered[s] => covered[s] = true,
                _ => return Err(not_elim(b, format!("row group {k} does not select a fresh slot with -I"))),
            }
            terms.extend(r.terms.into_iter().filter(|t| t.0 != v));
            rhs.iter_mut().zip(&r.rhs).for_each(|(a, c)| *a += c);
        }
        rows[ks[0]] = Some(LinearRow { terms, rhs });
    }

    let mut originals: Vec<(usize, usize)> = blocks
        .iter()
        .enumerate()
        .filter_map(|(k, b)| match b.provenance {
            Provenance::Original { vertex } => Some((vertex, k)),
            _ => None,
        })
        .collect();
    originals.sort();
    let pos: HashMap<usize, usize> = originals.iter().enumerate().map(|(p, &(_, k))| (k, p)).collect();
    let mut out = Vec::new();
    for r in rows.into_iter().flatten() {
        let mut terms: Vec<(usize, LinearMap)> = Vec::new();
        for (v, map) in r.terms {
            let p = *pos.get(&v).ok_or_else(|| not_elim(blocks[v], "still referenced after elimination".into()))?;
            match terms.iter_mut().find(|t| t.0 == p) {
                Some(t) => t.1 = t.1.add(&map)?,
                None => terms.push((p, map)),
            }
        }
        out.push(LinearRow { terms, rhs: r.rhs });
    }
    Ok(LinearSystem {
        vars: originals.iter().map(|&(_, k)| (blocks[k].id.clone(), blocks[k].dim)).collect(),
        rows: out,
    })
}
