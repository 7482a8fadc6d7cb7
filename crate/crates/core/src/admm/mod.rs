//! Two-block ADMM over a [`TwoBlockProblem`].
//!
//! With the augmented Lagrangian
//! `L(x, z, lambda) = f(x) + h(z) + lambda^T (Ax + Bz - b) + rho/2 ||Ax + Bz - b||^2`
//! one iteration is
//!
//! ```text
//! x <- argmin_x L(x, z, lambda)
//! z <- argmin_z L(x, z, lambda)
//! lambda <- lambda + rho (Ax + Bz - b)
//! ```
//!
//! Because no coupling joins two blocks of one side, both minimizations split
//! into independent block problems that run in parallel. The exact variant
//! solves them in closed form; the linearized (FLiP) variant replaces each by
//! one proximal gradient step.
//!
//! The primal residual is `||Ax + Bz - b||_inf` and the dual residual
//! `||rho A^T B (z - z_prev)||_inf`. Both are also logged in the 2-norm.

mod block;

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use rayon::ThreadPool;
use serde::{Deserialize, Serialize};

use crate::bipartize::ContributionMode;
use crate::error::{check_dim, Error, Result};
use crate::linalg;
use crate::reformulate::TwoBlockProblem;

pub use block::MAX_EXACT_DIM;
use block::{flip_step_size, ExactSolver};

/// Iterations without improvement of the best residual before giving up.
pub const STALL_WINDOW: usize = 1000;
/// Improvement of the best residual below this counts as none.
pub const STALL_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    #[default]
    ExactAdmm,
    FlipAdmm,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::ExactAdmm => "exact_admm",
            Self::FlipAdmm => "flip_admm",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub rho: f64,
    /// Both residuals (infinity norm) must fall below this.
    pub tol: f64,
    pub max_iters: usize,
    pub algorithm: Algorithm,
    /// Safety factor on the linearized step size, in `(0, 1]`.
    pub step_scale: f64,
    pub threads: usize,
    /// Trace every `log_every`-th iteration (the last one is always traced).
    pub log_every: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { rho: 1.0, tol: 1e-4, max_iters: 10_000, algorithm: Algorithm::ExactAdmm, step_scale: 1.0, threads: 1, log_every: 1 }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return bad(format!("rho must be positive, got {}", self.rho));
        }
        if !(self.tol > 0.0) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if !(self.step_scale > 0.0 && self.step_scale <= 1.0) {
            return bad(format!("step_scale must lie in (0, 1], got {}", self.step_scale));
        }
        if self.max_iters == 0 || self.threads == 0 || self.log_every == 0 {
            return bad("max_iters, threads and log_every must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmmState {
    pub x: Vec<Vec<f64>>,
    pub z: Vec<Vec<f64>>,
    /// One multiplier per coupling.
    pub lambda: Vec<Vec<f64>>,
    pub iter: usize,
}

impl AdmmState {
    pub fn zeros(problem: &TwoBlockProblem) -> Self {
        Self {
            x: problem.left.iter().map(|b| vec![0.0; b.dim]).collect(),
            z: problem.right.iter().map(|b| vec![0.0; b.dim]).collect(),
            lambda: problem.couplings.iter().map(|c| vec![0.0; c.rhs.len()]).collect(),
            iter: 0,
        }
    }

    fn check(&self, problem: &TwoBlockProblem) -> Result<()> {
        check_dim(|| "left block count".into(), problem.left.len(), self.x.len())?;
        check_dim(|| "right block count".into(), problem.right.len(), self.z.len())?;
        check_dim(|| "multiplier count".into(), problem.couplings.len(), self.lambda.len())?;
        for (b, v) in problem.left.iter().zip(&self.x).chain(problem.right.iter().zip(&self.z)) {
            check_dim(|| format!("block {}", b.id), b.dim, v.len())?;
        }
        for (c, l) in problem.couplings.iter().zip(&self.lambda) {
            check_dim(|| format!("multiplier of {}", c.id), c.rhs.len(), l.len())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIters,
    Stalled,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Converged => "converged",
            Self::MaxIters => "max_iters",
            Self::Stalled => "stalled",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iter: usize,
    pub primal_inf: f64,
    pub dual_inf: f64,
    pub primal_l2: f64,
    pub dual_l2: f64,
    /// Smooth parts plus finite prox terms; indicators are omitted since the
    /// iterates of indicator blocks are feasible by construction.
    pub objective: f64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmmTrace {
    pub entries: Vec<TraceEntry>,
    pub termination: Termination,
    pub iterations: usize,
}

impl AdmmTrace {
    pub fn last(&self) -> Option<&TraceEntry> {
        self.entries.last()
    }

    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "iter,primal_inf,dual_inf,objective,wall_time_s")?;
        for e in &self.entries {
            writeln!(out, "{},{:e},{:e},{:e},{:.6}", e.iter, e.primal_inf, e.dual_inf, e.objective, e.wall_time_s)?;
        }
        Ok(())
    }

    pub fn to_csv_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(&mut f)?;
        f.flush()?;
        Ok(())
    }

    /// Same trace without wall-clock times, for determinism checks.
    pub fn without_times(&self) -> Self {
        let mut t = self.clone();
        t.entries.iter_mut().for_each(|e| e.wall_time_s = 0.0);
        t
    }
}

/// `(||Ax + Bz - b||_inf, ||rho A^T B (z - z_prev)||_inf)`
pub fn primal_dual_residuals(problem: &TwoBlockProblem, prev: &AdmmState, state: &AdmmState, rho: f64) -> Result<(f64, f64)> {
    prev.check(problem)?;
    state.check(problem)?;
    let r = Residuals::compute(problem, &prev.z, &state.x, &state.z, rho);
    Ok((r.primal_inf, r.dual_inf))
}

struct Residuals {
    per_coupling: Vec<Vec<f64>>,
    primal_inf: f64,
    dual_inf: f64,
    primal_l2: f64,
    dual_l2: f64,
}

impl Residuals {
    fn compute(problem: &TwoBlockProblem, z_prev: &[Vec<f64>], x: &[Vec<f64>], z: &[Vec<f64>], rho: f64) -> Self {
        let per_coupling = problem.residual_unchecked(x, z);
        let mut dual: Vec<Vec<f64>> = problem.left.iter().map(|b| vec![0.0; b.dim]).collect();
        for c in &problem.couplings {
            let dz: Vec<f64> = z[c.right].iter().zip(&z_prev[c.right]).map(|(a, b)| a - b).collect();
            let bdz = c.b.apply(&dz);
            c.a.apply_transpose_add(&bdz, rho, &mut dual[c.left]);
        }
        let (p, d) = (per_coupling.concat(), dual.concat());
        Self {
            primal_inf: linalg::inf_norm(&p),
            dual_inf: linalg::inf_norm(&d),
            primal_l2: linalg::l2_norm(&p),
            dual_l2: linalg::l2_norm(&d),
            per_coupling,
        }
    }
}

enum Updater {
    Exact { left: Vec<ExactSolver>, right: Vec<ExactSolver> },
    Flip { left: Vec<f64>, right: Vec<f64> },
}

/// A solver prepared for one problem and configuration: block factorizations
/// (exact) or step sizes (linearized) are computed once and reused.
pub struct Admm<'a> {
    problem: &'a TwoBlockProblem,
    config: SolverConfig,
    incidence: (Vec<Vec<usize>>, Vec<Vec<usize>>),
    updater: Updater,
    pool: Option<ThreadPool>,
}

impl<'a> Admm<'a> {
    pub fn new(problem: &'a TwoBlockProblem, config: &SolverConfig) -> Result<Self> {
        config.validate()?;
        let incidence = problem.incidence();
        let rho = config.rho;
        let updater = match config.algorithm {
            Algorithm::ExactAdmm => {
                let gram = |dim: usize, maps: Vec<&crate::mbp::LinearMap>| {
                    let mut g = DMatrix::zeros(dim, dim);
                    for m in maps {
                        g += m.gram();
                    }
                    g
                };
                let left = problem
                    .left
                    .iter()
                    .zip(&incidence.0)
                    .map(|(b, ks)| ExactSolver::new(b, &gram(b.dim, ks.iter().map(|&k| &problem.couplings[k].a).collect()), rho))
                    .collect::<Result<_>>()?;
                let right = problem
                    .right
                    .iter()
                    .zip(&incidence.1)
                    .map(|(b, ks)| ExactSolver::new(b, &gram(b.dim, ks.iter().map(|&k| &problem.couplings[k].b).collect()), rho))
                    .collect::<Result<_>>()?;
                Updater::Exact { left, right }
            }
            Algorithm::FlipAdmm => {
                let (cl, cr) = problem.block_norms(ContributionMode::Exact);
                let steps = |blocks: &[crate::reformulate::SideBlock], c: &[f64]| {
                    blocks.iter().zip(c).map(|(b, &c)| flip_step_size(b, c, rho, config.step_scale)).collect::<Result<Vec<_>>>()
                };
                Updater::Flip { left: steps(&problem.left, &cl)?, right: steps(&problem.right, &cr)? }
            }
        };
        let pool = if config.threads > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(config.threads)
                    .build()
                    .map_err(|e| Error::Config(format!("cannot start {} worker threads: {e}", config.threads)))?,
            )
        } else {
            None
        };
        Ok(Self { problem, config: config.clone(), incidence, updater, pool })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    fn map_blocks<T: Send>(&self, n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
        match &self.pool {
            Some(pool) => pool.install(|| (0..n).into_par_iter().map(&f).collect()),
            None => (0..n).map(f).collect(),
        }
    }

    /// `sum_e M_e^T (other_e - b_e + lambda_e / rho)` over the couplings of one
    /// block, where `other_e` is the contribution of the opposite side.
    fn coupling_term(&self, ks: &[usize], dim: usize, left: bool, x: &[Vec<f64>], z: &[Vec<f64>], lambda: &[Vec<f64>]) -> Vec<f64> {
        let rho = self.config.rho;
        let mut out = vec![0.0; dim];
        for &k in ks {
            let c = &self.problem.couplings[k];
            let mut s: Vec<f64> = c.rhs.iter().zip(&lambda[k]).map(|(b, l)| l / rho - b).collect();
            let (own, other) = if left { (&c.a, c.b.apply(&z[c.right])) } else { (&c.b, c.a.apply(&x[c.left])) };
            s.iter_mut().zip(&other).for_each(|(a, o)| *a += o);
            own.apply_transpose_add(&s, 1.0, &mut out);
        }
        out
    }

    /// Gradient of the smooth part of the augmented Lagrangian for one block:
    /// `grad f + sum_e M_e^T (lambda_e + rho r_e)`.
    fn lagrangian_gradient(&self, left: bool, i: usize, x: &[Vec<f64>], z: &[Vec<f64>], lambda: &[Vec<f64>]) -> Vec<f64> {
        let rho = self.config.rho;
        let (block, own, ks) =
            if left { (&self.problem.left[i], &x[i], &self.incidence.0[i]) } else { (&self.problem.right[i], &z[i], &self.incidence.1[i]) };
        let mut g = block.smooth.gradient(own);
        for &k in ks {
            let c = &self.problem.couplings[k];
            let mut s: Vec<f64> = c.rhs.iter().zip(&lambda[k]).map(|(b, l)| l - rho * b).collect();
            c.a.apply_add(&x[c.left], rho, &mut s);
            c.b.apply_add(&z[c.right], rho, &mut s);
            let m = if left { &c.a } else { &c.b };
            m.apply_transpose_add(&s, 1.0, &mut g);
        }
        g
    }

    fn update_side(&self, left: bool, x: &[Vec<f64>], z: &[Vec<f64>], lambda: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let rho = self.config.rho;
        let (blocks, inc) = if left { (&self.problem.left, &self.incidence.0) } else { (&self.problem.right, &self.incidence.1) };
        match &self.updater {
            Updater::Exact { left: ls, right: rs } => {
                let solvers = if left { ls } else { rs };
                self.map_blocks(blocks.len(), |i| {
                    let mut c = self.coupling_term(&inc[i], blocks[i].dim, left, x, z, lambda);
                    c.iter_mut().for_each(|v| *v *= rho);
                    solvers[i].solve(&c)
                })
            }
            Updater::Flip { left: ls, right: rs } => {
                let steps = if left { ls } else { rs };
                self.map_blocks(blocks.len(), |i| {
                    let cur = if left { &x[i] } else { &z[i] };
                    let g = self.lagrangian_gradient(left, i, x, z, lambda);
                    let a = steps[i];
                    let trial: Vec<f64> = cur.iter().zip(&g).map(|(v, g)| v - a * g).collect();
                    blocks[i].prox.prox_unchecked(&trial, a)
                })
            }
        }
    }

    fn step_inner(&self, state: &mut AdmmState) -> Residuals {
        let rho = self.config.rho;
        let z_prev = state.z.clone();
        state.x = self.update_side(true, &state.x, &state.z, &state.lambda);
        state.z = self.update_side(false, &state.x, &state.z, &state.lambda);
        let r = Residuals::compute(self.problem, &z_prev, &state.x, &state.z, rho);
        for (l, rk) in state.lambda.iter_mut().zip(&r.per_coupling) {
            l.iter_mut().zip(rk).for_each(|(a, b)| *a += rho * b);
        }
        state.iter += 1;
        r
    }

    /// One iteration in place; returns `(primal_inf, dual_inf)`.
    pub fn step(&self, state: &mut AdmmState) -> Result<(f64, f64)> {
        state.check(self.problem)?;
        let r = self.step_inner(state);
        Ok((r.primal_inf, r.dual_inf))
    }

    /// Smooth parts plus non-indicator prox terms.
    pub fn objective(&self, state: &AdmmState) -> f64 {
        let p = self.problem;
        p.left
            .iter()
            .zip(&state.x)
            .chain(p.right.iter().zip(&state.z))
            .map(|(b, v)| b.smooth.value(v) + if b.prox.is_indicator() { 0.0 } else { b.prox.value(v) })
            .sum()
    }

    pub fn run(&self, mut state: AdmmState) -> Result<(AdmmState, AdmmTrace)> {
        state.check(self.problem)?;
        let cfg = &self.config;
        let start = Instant::now();
        let mut entries = Vec::new();
        let mut best = f64::INFINITY;
        let mut last_improvement = 0;
        let mut termination = Termination::MaxIters;
        for k in 1..=cfg.max_iters {
            let r = self.step_inner(&mut state);
            let worst = r.primal_inf.max(r.dual_inf);
            let done = if worst < cfg.tol {
                termination = Termination::Converged;
                true
            } else if !worst.is_finite() || k - last_improvement >= STALL_WINDOW {
                termination = Termination::Stalled;
                true
            } else {
                k == cfg.max_iters
            };
            if best - worst > STALL_TOL {
                best = worst;
                last_improvement = k;
            }
            if k % cfg.log_every == 0 || done {
                let entry = TraceEntry {
                    iter: state.iter,
                    primal_inf: r.primal_inf,
                    dual_inf: r.dual_inf,
                    primal_l2: r.primal_l2,
                    dual_l2: r.dual_l2,
                    objective: self.objective(&state),
                    wall_time_s: start.elapsed().as_secs_f64(),
                };
                log::debug!(
                    "iter {} primal {:.3e} dual {:.3e} objective {:.6e}",
                    entry.iter,
                    entry.primal_inf,
                    entry.dual_inf,
                    entry.objective
                );
                entries.push(entry);
            }
            if done {
                break;
            }
        }
        let iterations = entries.last().map_or(state.iter, |e| e.iter);
        log::info!("{} after {iterations} iterations ({})", termination, cfg.algorithm);
        Ok((state, AdmmTrace { entries, termination, iterations }))
    }
}

/// Runs ADMM from the zero state.
pub fn solve(problem: &TwoBlockProblem, config: &SolverConfig) -> Result<(AdmmState, AdmmTrace)> {
    let admm = Admm::new(problem, config)?;
    admm.run(AdmmState::zeros(problem))
}

/// One linearized iteration: a proximal gradient step on every left block,
/// then on every right block at the new `x`, then the multiplier update.
pub fn flip_step(problem: &TwoBlockProblem, state: &AdmmState, config: &SolverConfig) -> Result<AdmmState> {
    let cfg = SolverConfig { algorithm: Algorithm::FlipAdmm, ..config.clone() };
    let admm = Admm::new(problem, &cfg)?;
    let mut next = state.clone();
    admm.step(&mut next)?;
    Ok(next)
}

/// Whether every block has a closed-form exact update.
pub fn exact_supported(problem: &TwoBlockProblem, rho: f64) -> Result<()> {
    Admm::new(problem, &SolverConfig { rho, ..Default::default() }).map(|_| ())
}

#[cfg(test)]
mod tests;
