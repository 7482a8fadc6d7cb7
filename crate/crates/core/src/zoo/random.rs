//! Random feasible convex QPs in multiblock form, with block and constraint
//! dimensions drawn from `{2, 3, 4, 5}` and standard normal data.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mbp::{Block, BlockConstraint, LinearMap, MultiblockProblem, ProxFn, SmoothFn, Term};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RandomQpSpec {
    pub blocks: usize,
    pub constraints: usize,
    /// Largest number of blocks one constraint may couple.
    pub max_arity: usize,
    /// Probability that a constraint couples more than two blocks.
    pub hyper_prob: f64,
    /// Smallest and largest block/constraint dimension.
    pub dims: (usize, usize),
}

impl Default for RandomQpSpec {
    fn default() -> Self {
        Self { blocks: 6, constraints: 8, max_arity: 4, hyper_prob: 0.25, dims: (2, 5) }
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| normal(rng))
}

/// A QP whose constraints are satisfied by a hidden random point, so the
/// instance is always feasible. Objectives are `1/2 x^T (M^T M + 0.1 I) x + q^T x`.
pub fn gen_random_qp(spec: &RandomQpSpec, seed: u64) -> Result<MultiblockProblem> {
    let (lo, hi) = spec.dims;
    if spec.blocks < 2 || spec.max_arity < 2 || lo == 0 || lo > hi {
        return Err(Error::Generator(format!("invalid random QP spec {spec:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut blocks = Vec::with_capacity(spec.blocks);
    let mut hidden = Vec::with_capacity(spec.blocks);
    for i in 0..spec.blocks {
        let n = rng.random_range(lo..=hi);
        let m = gaussian(&mut rng, n, n);
        let p = m.transpose() * &m + DMatrix::identity(n, n) * 0.1;
        let p = (&p + p.transpose()) * 0.5;
        let q = (0..n).map(|_| normal(&mut rng)).collect();
        hidden.push((0..n).map(|_| normal(&mut rng)).collect::<Vec<f64>>());
        blocks.push(Block { id: format!("x{}", i + 1), dim: n, smooth: SmoothFn::quadratic(p, q)?, prox: ProxFn::Zero });
    }
    let max_arity = spec.max_arity.min(spec.blocks);
    let mut constraints = Vec::with_capacity(spec.constraints);
    for k in 0..spec.constraints {
        let arity = if max_arity > 2 && rng.random_bool(spec.hyper_prob) { rng.random_range(3..=max_arity) } else { 2 };
        let mut members: Vec<usize> = (0..spec.blocks).collect();
        for s in 0..arity {
            let t = rng.random_range(s..members.len());
            members.swap(s, t);
        }
        members.truncate(arity);
        members.sort_unstable();
        let m = rng.random_range(lo..=hi);
        let mut rhs = vec![0.0; m];
        let mut terms = Vec::with_capacity(arity);
        for &b in &members {
            let map = LinearMap::from_matrix(&gaussian(&mut rng, m, blocks[b].dim))?;
            map.apply_add(&hidden[b], 1.0, &mut rhs);
            terms.push(Term { block: blocks[b].id.clone(), map });
        }
        constraints.push(BlockConstraint { id: format!("c{}", k + 1), terms, rhs });
    }
    Ok(MultiblockProblem { blocks, constraints })
}
