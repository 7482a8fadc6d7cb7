//! Decentralized consensus least squares: agents on a random connected
//! graph each hold `(Q_i, q_i)` with `q_i = Q_i x_bar + noise`, and must agree
//! on one `x`.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mbp::{Block, BlockConstraint, LinearMap, MultiblockProblem, ProxFn, SmoothFn, Term};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConsensusSpec {
    pub agent_count: usize,
    /// Range of the extra-edge probability `p`, as multiples of `1/|V|`.
    pub p_range: (f64, f64),
    /// `(rows, cols)` of every `Q_i`.
    pub dims: (usize, usize),
    pub noise_std: f64,
}

impl Default for ConsensusSpec {
    fn default() -> Self {
        Self { agent_count: 50, p_range: (2.0, 10.0), dims: (25, 50), noise_std: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusInstance {
    /// Communication graph, pairs `(i, j)` with `i < j`.
    pub edges: Vec<(usize, usize)>,
    pub x_bar: Vec<f64>,
    /// `x_i = z_ij`, `x_j = z_ij` for every edge.
    pub standard: MultiblockProblem,
    /// `x_i - x_j = 0` for every edge; its coupling graph is the
    /// communication graph.
    pub direct: MultiblockProblem,
}

impl ConsensusInstance {
    pub fn agent_count(&self) -> usize {
        self.direct.blocks.len()
    }

    /// The consensus optimum: least squares on the stacked `(Q_i, q_i)`.
    pub fn stacked_solution(&self) -> Result<Vec<f64>> {
        let n = self.x_bar.len();
        let (mut h, mut g) = (DMatrix::zeros(n, n), DVector::zeros(n));
        for b in &self.direct.blocks {
            let (hi, li) = b.smooth.quadratic_model(n);
            h += hi;
            g -= DVector::from_vec(li);
        }
        h.cholesky()
            .map(|c| c.solve(&g).as_slice().to_vec())
            .ok_or_else(|| Error::Generator("stacked least-squares system is singular".into()))
    }
}

pub fn agent_id(i: usize) -> String {
    format!("x{}", i + 1)
}

pub fn edge_var_id(i: usize, j: usize) -> String {
    format!("z{}_{}", i + 1, j + 1)
}

/// Random spanning tree (each node joins a uniformly chosen earlier node of a
/// random order), then every remaining pair independently with probability
/// `p ~ U[p_range] / |V|`, capped at one.
pub fn random_connected_graph(n: usize, p_range: (f64, f64), rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut edges = std::collections::BTreeSet::new();
    for k in 1..n {
        let parent = order[rng.random_range(0..k)];
        let (a, b) = (order[k].min(parent), order[k].max(parent));
        edges.insert((a, b));
    }
    let p = if p_range.1 > p_range.0 { rng.random_range(p_range.0..p_range.1) } else { p_range.0 } / n as f64;
    let p = p.clamp(0.0, 1.0);
    for a in 0..n {
        for b in a + 1..n {
            if rng.random_bool(p) {
                edges.insert((a, b));
            }
        }
    }
    edges.into_iter().collect()
}

pub fn gen_consensus_ls(spec: &ConsensusSpec, seed: u64) -> Result<ConsensusInstance> {
    let n = spec.agent_count;
    let (rows, cols) = spec.dims;
    if n < 2 || rows == 0 || cols == 0 {
        return Err(Error::Generator(format!("consensus needs >= 2 agents and positive dims, got {spec:?}")));
    }
    let (lo, hi) = spec.p_range;
    if !(lo > 0.0 && lo <= hi) || !(spec.noise_std >= 0.0) {
        return Err(Error::Generator(format!("invalid consensus parameters {spec:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges = random_connected_graph(n, spec.p_range, &mut rng);
    let x_bar = DVector::from_fn(cols, |_, _| rng.sample::<f64, _>(StandardNormal));
    let agents = (0..n)
        .map(|i| {
            let q = DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal));
            let noise = DVector::from_fn(rows, |_, _| spec.noise_std * rng.sample::<f64, _>(StandardNormal));
            let rhs = &q * &x_bar + noise;
            Ok(Block { id: agent_id(i), dim: cols, smooth: SmoothFn::least_squares(q, rhs.as_slice().to_vec())?, prox: ProxFn::Zero })
        })
        .collect::<Result<Vec<_>>>()?;
    let id = || LinearMap::identity(cols);
    let neg = || LinearMap::scaled_identity(-1.0, cols);
    let term = |b: String, map: LinearMap| Term { block: b, map };
    let direct = MultiblockProblem {
        blocks: agents.clone(),
        constraints: edges
            .iter()
            .map(|&(i, j)| BlockConstraint {
                id: format!("e{}_{}", i + 1, j + 1),
                terms: vec![term(agent_id(i), id()), term(agent_id(j), neg())],
                rhs: vec![0.0; cols],
            })
            .collect(),
    };
    let mut blocks = agents;
    blocks.extend(
        edges.iter().map(|&(i, j)| Block { id: edge_var_id(i, j), dim: cols, smooth: SmoothFn::zero(), prox: ProxFn::Zero }),
    );
    let constraints = edges
        .iter()
        .flat_map(|&(i, j)| {
            [i, j].map(|a| BlockConstraint {
                id: format!("e{}_{}@{}", i + 1, j + 1, a + 1),
                terms: vec![term(agent_id(a), id()), term(edge_var_id(i, j), neg())],
                rhs: vec![0.0; cols],
            })
        })
        .collect();
    Ok(ConsensusInstance {
        edges,
        x_bar: x_bar.as_slice().to_vec(),
        standard: MultiblockProblem { blocks, constraints },
        direct,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_coupling_graph;

    fn tiny() -> ConsensusSpec {
        ConsensusSpec { agent_count: 5, dims: (6, 8), ..Default::default() }
    }

    #[test]
    fn standard_form_is_already_bipartite() {
        let inst = gen_consensus_ls(&ConsensusSpec { dims: (3, 4), ..Default::default() }, 2).unwrap();
        let g = build_coupling_graph(&inst.standard).unwrap();
        let (v, e) = (inst.agent_count(), inst.edges.len());
        assert_eq!(g.vertex_count(), v + e);
        assert_eq!(g.edge_count(), 2 * e);
        assert!(g.is_bipartite().0);
    }

    #[test]
    fn direct_form_graph_is_the_communication_graph() {
        let inst = gen_consensus_ls(&ConsensusSpec { dims: (3, 4), ..Default::default() }, 5).unwrap();
        let g = build_coupling_graph(&inst.direct).unwrap();
        let mut pairs: Vec<(usize, usize)> = g.pairs().into_iter().map(|(a, b)| (a.min(b), a.max(b))).collect();
        pairs.sort();
        assert_eq!(pairs, inst.edges);
    }

    #[test]
    fn graph_is_connected_and_simple() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..20 {
            let edges = random_connected_graph(30, (2.0, 10.0), &mut rng);
            let mut parent: Vec<usize> = (0..30).collect();
            fn find(p: &mut [usize], x: usize) -> usize {
                if p[x] != x {
                    p[x] = find(p, p[x]);
                }
                p[x]
            }
            for &(a, b) in &edges {
                assert!(a < b);
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                parent[ra] = rb;
            }
            let root = find(&mut parent, 0);
            assert!((0..30).all(|v| find(&mut parent, v) == root));
            assert!(edges.len() >= 29);
        }
    }

    #[test]
    fn stacked_solution_matches_normal_equations() {
        let inst = gen_consensus_ls(&tiny(), 1).unwrap();
        let x = inst.stacked_solution().unwrap();
        // Independent oracle: stack every (Q_i, q_i) and solve by SVD.
        let (rows, cols) = (6, 8);
        let mut q = DMatrix::zeros(rows * 5, cols);
        let mut b = DVector::zeros(rows * 5);
        for (k, blk) in inst.direct.blocks.iter().enumerate() {
            let crate::mbp::SmoothKind::LeastSquares { q_mat, q_vec } = blk.smooth.kind() else { panic!() };
            q.view_mut((k * rows, 0), (rows, cols)).copy_from(q_mat);
            b.rows_mut(k * rows, rows).copy_from_slice(q_vec);
        }
        let want = q.svd(true, true).solve(&b, 1e-12).unwrap();
        for (a, w) in x.iter().zip(want.iter()) {
            assert!((a - w).abs() < 1e-9);
        }
        // Low noise keeps the estimate close to the planted point.
        for (a, w) in x.iter().zip(&inst.x_bar) {
            assert!((a - w).abs() < 0.5);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(gen_consensus_ls(&tiny(), 3).unwrap(), gen_consensus_ls(&tiny(), 3).unwrap());
    }

    #[test]
    fn bad_specs_are_rejected() {
        assert!(gen_consensus_ls(&ConsensusSpec { agent_count: 1, ..tiny() }, 0).is_err());
        assert!(gen_consensus_ls(&ConsensusSpec { p_range: (0.0, 1.0), ..tiny() }, 0).is_err());
        assert!(gen_consensus_ls(&ConsensusSpec { noise_std: -1.0, ..tiny() }, 0).is_err());
    }
}
