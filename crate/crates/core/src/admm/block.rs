//! Closed-form minimizers of one block's augmented Lagrangian,
//! `argmin_x 1/2 x^T Q x + (l + c)^T x + g(x)` with `Q = H + rho * G`, where
//! `(H, l)` is the exact quadratic model of the smooth part, `G` the Gram
//! matrix of the block's stacked coupling maps and `c` the coupling term of
//! the current iterate.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::linalg;
use crate::mbp::ProxFn;
use crate::reformulate::SideBlock;

/// Blocks larger than this are refused by the exact solver.
pub const MAX_EXACT_DIM: usize = 2000;

#[derive(Debug, Clone)]
enum Factor {
    Cholesky(Cholesky<f64, Dyn>),
    /// Singular `Q`: minimum-norm stationary point.
    Pinv(DMatrix<f64>),
}

impl Factor {
    fn new(q: DMatrix<f64>) -> Self {
        let scale = q.amax().max(1.0);
        match Cholesky::new(q.clone()) {
            Some(c) if c.l().diagonal().iter().all(|d| *d > 1e-10 * scale.sqrt()) => Self::Cholesky(c),
            _ => Self::Pinv(linalg::pseudo_inverse(&q, 1e-12)),
        }
    }

    fn solve(&self, rhs: DVector<f64>) -> DVector<f64> {
        match self {
            Self::Cholesky(c) => c.solve(&rhs),
            Self::Pinv(p) => p * rhs,
        }
    }
}

/// Per-coordinate data of a separable update; `fixed` holds coordinates whose
/// curvature is zero and whose minimizer therefore does not move.
#[derive(Debug, Clone)]
struct Diagonal {
    q: Vec<f64>,
    fixed: Vec<Option<f64>>,
}

#[derive(Debug, Clone)]
enum Kind {
    Linear(Factor),
    Clamp { diag: Diagonal, lower: Vec<f64>, upper: Vec<f64> },
    SoftThreshold { diag: Diagonal, weight: f64 },
    /// `Q = alpha I`: project the unconstrained minimizer.
    Projection { alpha: f64, set: ProxFn },
    /// General `Q` over `{x : C x = d}`: the KKT system.
    Kkt { inv: DMatrix<f64>, d: Vec<f64> },
}

#[derive(Debug, Clone)]
pub(crate) struct ExactSolver {
    l: Vec<f64>,
    kind: Kind,
}

fn is_diagonal(m: &DMatrix<f64>) -> bool {
    m.iter().enumerate().all(|(k, v)| k % m.nrows() == k / m.nrows() || *v == 0.0)
}

fn unsupported(b: &SideBlock, reason: impl Into<String>) -> Error {
    Error::UnsupportedBlock { block: b.id.clone(), reason: reason.into() }
}

impl ExactSolver {
    pub(crate) fn new(block: &SideBlock, gram: &DMatrix<f64>, rho: f64) -> Result<Self> {
        let n = block.dim;
        if n > MAX_EXACT_DIM {
            return Err(unsupported(block, format!("dimension {n} exceeds {MAX_EXACT_DIM}")));
        }
        let (h, l) = block.smooth.quadratic_model(n);
        let q = h + gram * rho;
        let kind = match &block.prox {
            ProxFn::Zero => Kind::Linear(Factor::new(q)),
            ProxFn::BoxIndicator { lower, upper } => {
                if !is_diagonal(&q) {
                    return Err(unsupported(block, "box indicator with coupled coordinates"));
                }
                let fixed = (0..n)
                    .map(|k| {
                        if q[(k, k)] > 0.0 {
                            return Ok(None);
                        }
                        let v = if l[k] > 0.0 {
                            lower[k]
                        } else if l[k] < 0.0 {
                            upper[k]
                        } else {
                            0.0_f64.clamp(lower[k], upper[k])
                        };
                        if v.is_finite() {
                            Ok(Some(v))
                        } else {
                            Err(unsupported(block, format!("coordinate {k} is unbounded below")))
                        }
                    })
                    .collect::<Result<_>>()?;
                Kind::Clamp { diag: Diagonal { q: q.diagonal().as_slice().to_vec(), fixed }, lower: lower.clone(), upper: upper.clone() }
            }
            ProxFn::L1 { weight } => {
                if !is_diagonal(&q) {
                    return Err(unsupported(block, "l1 term with non-orthogonal coupling columns"));
                }
                let fixed = (0..n)
                    .map(|k| match q[(k, k)] > 0.0 {
                        true => Ok(None),
                        false if l[k].abs() <= *weight => Ok(Some(0.0)),
                        false => Err(unsupported(block, format!("coordinate {k} is unbounded below"))),
                    })
                    .collect::<Result<_>>()?;
                Kind::SoftThreshold { diag: Diagonal { q: q.diagonal().as_slice().to_vec(), fixed }, weight: *weight }
            }
            ProxFn::AffineSubspaceIndicator(_) | ProxFn::SumToConstantIndicator { .. } => {
                let alpha = q[(0, 0)];
                if alpha > 0.0 && q == DMatrix::identity(n, n) * alpha {
                    Kind::Projection { alpha, set: block.prox.clone() }
                } else {
                    let (c, d) = match &block.prox {
                        ProxFn::AffineSubspaceIndicator(a) => (a.matrix().clone(), a.rhs().to_vec()),
                        ProxFn::SumToConstantIndicator { target, arity } => {
                            let m = target.len();
                            (DMatrix::from_fn(m, m * arity, |i, j| if j % m == i { 1.0 } else { 0.0 }), target.clone())
                        }
                        _ => unreachable!(),
                    };
                    let r = c.nrows();
                    let mut kkt = DMatrix::zeros(n + r, n + r);
                    kkt.view_mut((0, 0), (n, n)).copy_from(&q);
                    kkt.view_mut((n, 0), (r, n)).copy_from(&c);
                    kkt.view_mut((0, n), (n, r)).copy_from(&c.transpose());
                    Kind::Kkt { inv: linalg::pseudo_inverse(&kkt, 1e-12), d }
                }
            }
        };
        Ok(Self { l, kind })
    }

    /// Minimizer for the coupling term `c`.
    pub(crate) fn solve(&self, c: &[f64]) -> Vec<f64> {
        let lin: Vec<f64> = self.l.iter().zip(c).map(|(a, b)| a + b).collect();
        match &self.kind {
            Kind::Linear(f) => f.solve(-DVector::from_vec(lin)).as_slice().to_vec(),
            Kind::Clamp { diag, lower, upper } => (0..lin.len())
                .map(|k| diag.fixed[k].unwrap_or_else(|| (-lin[k] / diag.q[k]).clamp(lower[k], upper[k])))
                .collect(),
            Kind::SoftThreshold { diag, weight } => (0..lin.len())
                .map(|k| {
                    diag.fixed[k].unwrap_or_else(|| {
                        let v = -lin[k];
                        v.signum() * (v.abs() - weight).max(0.0) / diag.q[k]
                    })
                })
                .collect(),
            Kind::Projection { alpha, set } => {
                let free: Vec<f64> = lin.iter().map(|v| -v / alpha).collect();
                set.prox_unchecked(&free, 1.0)
            }
            Kind::Kkt { inv, d } => {
                let n = lin.len();
                let rhs = DVector::from_iterator(n + d.len(), lin.iter().map(|v| -v).chain(d.iter().copied()));
                (inv * rhs).as_slice()[..n].to_vec()
            }
        }
    }
}

/// Step size of the linearized update: `step_scale / (L + rho * c^2)`.
pub(crate) fn flip_step_size(block: &SideBlock, contribution: f64, rho: f64, step_scale: f64) -> Result<f64> {
    let lip = block.smooth.lipschitz();
    if !lip.is_finite() {
        return Err(Error::InfiniteLipschitz(block.id.clone()));
    }
    let denom = lip + rho * contribution * contribution;
    // A block with neither curvature nor couplings only sees its own prox.
    Ok(if denom > 0.0 { step_scale / denom } else { step_scale })
}

