use nalgebra::{DMatrix, DVector};

use crate::linalg;
use crate::mbp::{LinearMap, MultiblockProblem};

/// One row group `sum_j M_j v_j = rhs` over the variables of a [`LinearSystem`].
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRow {
    pub terms: Vec<(usize, LinearMap)>,
    pub rhs: Vec<f64>,
}

/// A linear equality system over named vector variables. Used to compare the
/// constraint sets of a problem before and after reformulation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinearSystem {
    pub vars: Vec<(String, usize)>,
    pub rows: Vec<LinearRow>,
}

impl LinearSystem {
    pub fn from_problem(problem: &MultiblockProblem) -> Self {
        let index = problem.block_index();
        Self {
            vars: problem.blocks.iter().map(|b| (b.id.clone(), b.dim)).collect(),
            rows: problem
                .constraints
                .iter()
                .map(|c| LinearRow {
                    terms: c.terms.iter().map(|t| (index[t.block.as_str()], t.map.clone())).collect(),
                    rhs: c.rhs.clone(),
                })
                .collect(),
        }
    }

    /// Offsets of every variable in the stacked unknown vector.
    pub fn offsets(&self) -> Vec<usize> {
        let mut acc = 0;
        self.vars
            .iter()
            .map(|(_, d)| {
                let o = acc;
                acc += d;
                o
            })
            .collect()
    }

    pub fn to_dense(&self) -> (DMatrix<f64>, DVector<f64>) {
        let offsets = self.offsets();
        let cols: usize = self.vars.iter().map(|v| v.1).sum();
        let rows: usize = self.rows.iter().map(|r| r.rhs.len()).sum();
        let mut m = DMatrix::zeros(rows, cols);
        let mut b = DVector::zeros(rows);
        let mut r0 = 0;
        for row in &self.rows {
            for (var, map) in &row.terms {
                let d = map.to_dense();
                let mut view = m.view_mut((r0, offsets[*var]), d.shape());
                view += d;
            }
            for (k, v) in row.rhs.iter().enumerate() {
                b[r0 + k] = *v;
            }
            r0 += row.rhs.len();
        }
        (m, b)
    }

    /// Minimum-norm least-squares solution, split per variable.
    pub fn min_norm_solution(&self) -> Vec<Vec<f64>> {
        let (m, b) = self.to_dense();
        let x = linalg::min_norm_solution(&m, &b, 1e-12);
        let mut out = Vec::new();
        let mut k = 0;
        for (_, d) in &self.vars {
            out.push(x.as_slice()[k..k + d].to_vec());
            k += d;
        }
        out
    }

    /// Same system with variables renamed into the order of `order`.
    pub fn reorder_like(&self, order: &[(String, usize)]) -> Option<Self> {
        let pos: std::collections::HashMap<&str, usize> =
            order.iter().enumerate().map(|(i, v)| (v.0.as_str(), i)).collect();
        let map: Option<Vec<usize>> = self.vars.iter().map(|v| pos.get(v.0.as_str()).copied()).collect();
        let map = map?;
        Some(Self {
            vars: order.to_vec(),
            rows: self
                .rows
                .iter()
                .map(|r| LinearRow {
                    terms: r.terms.iter().map(|(v, m)| (map[*v], m.clone())).collect(),
                    rhs: r.rhs.clone(),
                })
                .collect(),
        })
    }
}
