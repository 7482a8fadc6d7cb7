//! Random feasible min-cost network flow, as a multiblock problem over arc
//! flows with one balance constraint per node.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mbp::{Block, BlockConstraint, LinearMap, MultiblockProblem, ProxFn, SmoothFn, Term};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkFlowSpec {
    pub node_count: usize,
    pub arc_count: usize,
    pub cost_range: (f64, f64),
    pub capacity_range: (f64, f64),
    /// Fraction of nodes kept at undirected degree two when possible.
    pub degree2_fraction: f64,
    /// Supplies are scaled so that `max |b_i|` stays below this.
    pub supply_bound: f64,
}

impl Default for NetworkFlowSpec {
    fn default() -> Self {
        Self {
            node_count: 20,
            arc_count: 60,
            cost_range: (0.0, 10.0),
            capacity_range: (0.0, 40.0),
            degree2_fraction: 0.3,
            supply_bound: 100.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub from: usize,
    pub to: usize,
    pub cost: f64,
    pub capacity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkFlowInstance {
    pub arcs: Vec<Arc>,
    pub supplies: Vec<f64>,
    /// The sampled flow the supplies were derived from.
    pub flow: Vec<f64>,
    pub problem: MultiblockProblem,
}

pub fn arc_id(k: usize) -> String {
    format!("f{}", k + 1)
}

pub fn node_id(i: usize) -> String {
    format!("n{}", i + 1)
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Undirected edge list: a Hamiltonian cycle, then extra edges among nodes
/// outside the protected degree-two set, then any missing pair, then (only
/// when the simple graph is complete) repeated pairs.
fn topology(spec: &NetworkFlowSpec, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let n = spec.node_count;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let key = |a: usize, b: usize| (a.min(b), a.max(b));
    let mut edges: Vec<(usize, usize)> = (0..n).map(|k| (order[k], order[(k + 1) % n])).collect();
    if n == 2 {
        edges.truncate(1);
    }
    let mut present: HashSet<(usize, usize)> = edges.iter().map(|&(a, b)| key(a, b)).collect();
    let mut protect: Vec<usize> = (0..n).collect();
    protect.shuffle(rng);
    let protected: HashSet<usize> = protect[..((spec.degree2_fraction * n as f64).round() as usize).min(n)].iter().copied().collect();
    let free = |a: usize, b: usize| !protected.contains(&a) && !protected.contains(&b);
    let mut pool: Vec<(usize, usize)> =
        (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).filter(|p| !present.contains(p)).collect();
    pool.shuffle(rng);
    let (first, rest): (Vec<_>, Vec<_>) = pool.into_iter().partition(|&(a, b)| free(a, b));
    for p in first.into_iter().chain(rest) {
        if edges.len() >= spec.arc_count {
            break;
        }
        present.insert(p);
        edges.push(p);
    }
    while edges.len() < spec.arc_count {
        let a = rng.random_range(0..n);
        let b = (a + rng.random_range(1..n)) % n;
        edges.push(key(a, b));
    }
    edges
}

pub fn gen_network_flow(spec: &NetworkFlowSpec, seed: u64) -> Result<NetworkFlowInstance> {
    let n = spec.node_count;
    if n < 2 || spec.arc_count < n {
        return Err(Error::Generator(format!(
            "network flow needs at least 2 nodes and arc_count >= node_count, got {n} nodes and {} arcs",
            spec.arc_count
        )));
    }
    let ranges_ok = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo <= hi;
    if !ranges_ok(spec.cost_range) || !ranges_ok(spec.capacity_range) || !(spec.supply_bound > 0.0) {
        return Err(Error::Generator(format!("invalid network flow ranges in {spec:?}")));
    }
    if !(0.0..=1.0).contains(&spec.degree2_fraction) {
        return Err(Error::Generator(format!("degree2_fraction {} outside [0, 1]", spec.degree2_fraction)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let arcs: Vec<Arc> = topology(spec, &mut rng)
        .into_iter()
        .map(|(a, b)| {
            let (from, to) = if rng.random_bool(0.5) { (a, b) } else { (b, a) };
            let cost = uniform(&mut rng, spec.cost_range);
            let capacity = uniform(&mut rng, spec.capacity_range);
            Arc { from, to, cost, capacity }
        })
        .collect();
    let mut flow: Vec<f64> = arcs.iter().map(|a| uniform(&mut rng, (0.0, a.capacity))).collect();

    let mut incident: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (k, a) in arcs.iter().enumerate() {
        incident[a.from].push((k, 1.0));
        incident[a.to].push((k, -1.0));
    }
    // Supplies are accumulated in the same order a constraint is evaluated,
    // so the generating flow satisfies every balance exactly.
    let net = |flow: &[f64]| -> Vec<f64> {
        incident
            .iter()
            .map(|inc| {
                let mut s = [0.0];
                for &(k, sign) in inc {
                    LinearMap::scaled_identity(sign, 1).apply_add(&[flow[k]], 1.0, &mut s);
                }
                s[0]
            })
            .collect()
    };
    let mut supplies = net(&flow);
    let peak = supplies.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if peak > spec.supply_bound {
        let scale = spec.supply_bound / peak;
        flow.iter_mut().for_each(|f| *f *= scale);
        supplies = net(&flow);
    }

    let blocks = arcs
        .iter()
        .enumerate()
        .map(|(k, a)| {
            Ok(Block {
                id: arc_id(k),
                dim: 1,
                smooth: SmoothFn::linear(vec![a.cost]),
                prox: ProxFn::box_indicator(vec![0.0], vec![a.capacity])?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let constraints = incident
        .iter()
        .enumerate()
        .map(|(i, inc)| BlockConstraint {
            id: node_id(i),
            terms: inc.iter().map(|&(k, sign)| Term { block: arc_id(k), map: LinearMap::scaled_identity(sign, 1) }).collect(),
            rhs: vec![supplies[i]],
        })
        .collect();
    Ok(NetworkFlowInstance { arcs, supplies, flow, problem: MultiblockProblem { blocks, constraints } })
}
