use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg;
use crate::mbp::smooth::{matrix_to_rows, rows_to_matrix};

/// Absolute tolerance used when evaluating equality-set indicators.
pub const EQUALITY_TOL: f64 = 1e-9;

/// Singular values of `C C^T` below this fraction of the largest are dropped.
const PINV_CUTOFF: f64 = 1e-10;

/// `{x : C x = d}` with a cached pseudo-inverse of `C C^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineSet {
    c: DMatrix<f64>,
    d: Vec<f64>,
    gram_pinv: DMatrix<f64>,
}

impl AffineSet {
    pub fn new(c: DMatrix<f64>, d: Vec<f64>) -> Result<Self> {
        if c.nrows() != d.len() || c.ncols() == 0 {
            return Err(Error::InvalidFunction(format!(
                "affine set with C {}x{} and d of length {}",
                c.nrows(),
                c.ncols(),
                d.len()
            )));
        }
        let gram_pinv = linalg::pseudo_inverse(&(&c * c.transpose()), PINV_CUTOFF);
        let set = Self { c, d, gram_pinv };
        // The least-norm point must satisfy Cx = d, otherwise the set is empty.
        let x0 = set.project(&vec![0.0; set.c.ncols()]);
        let r = &set.c * DVector::from_column_slice(&x0) - DVector::from_column_slice(&set.d);
        let scale = linalg::inf_norm(&set.d).max(1.0);
        if r.amax() > EQUALITY_TOL * scale {
            return Err(Error::InconsistentAffine { residual: r.amax() });
        }
        Ok(set)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn rhs(&self) -> &[f64] {
        &self.d
    }

    /// `z - C^T (C C^T)^+ (C z - d)`
    pub fn project(&self, z: &[f64]) -> Vec<f64> {
        let zv = DVector::from_column_slice(z);
        let r = &self.c * &zv - DVector::from_column_slice(&self.d);
        let out = zv - self.c.transpose() * (&self.gram_pinv * r);
        out.as_slice().to_vec()
    }

    pub fn violation(&self, x: &[f64]) -> f64 {
        let r = &self.c * DVector::from_column_slice(x) - DVector::from_column_slice(&self.d);
        r.amax()
    }
}

/// Proximal-friendly part `g_i` of a block objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProxRepr", into = "ProxRepr")]
pub enum ProxFn {
    Zero,
    BoxIndicator { lower: Vec<f64>, upper: Vec<f64> },
    AffineSubspaceIndicator(AffineSet),
    /// Indicator of `{(y_1..y_arity) : sum_k y_k = target}` with each `y_k`
    /// of length `target.len()`.
    SumToConstantIndicator { target: Vec<f64>, arity: usize },
    L1 { weight: f64 },
}

impl ProxFn {
    pub fn box_indicator(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::InvalidFunction("box bounds of different lengths".into()));
        }
        if lower.iter().zip(&upper).any(|(l, u)| l.is_nan() || u.is_nan() || l > u) {
            return Err(Error::InvalidFunction("box with lower > upper".into()));
        }
        Ok(Self::BoxIndicator { lower, upper })
    }

    pub fn affine(c: DMatrix<f64>, d: Vec<f64>) -> Result<Self> {
        AffineSet::new(c, d).map(Self::AffineSubspaceIndicator)
    }

    pub fn sum_to_constant(target: Vec<f64>, arity: usize) -> Result<Self> {
        if arity == 0 || target.is_empty() {
            return Err(Error::InvalidFunction("sum-to-constant set needs arity and width".into()));
        }
        Ok(Self::SumToConstantIndicator { target, arity })
    }

    pub fn l1(weight: f64) -> Result<Self> {
        if !(weight >= 0.0) || !weight.is_finite() {
            return Err(Error::InvalidFunction(format!("l1 weight {weight}")));
        }
        Ok(Self::L1 { weight })
    }

    /// The block dimension this function requires, if it fixes one.
    pub fn dim(&self) -> Option<usize> {
        match self {
            Self::Zero | Self::L1 { .. } => None,
            Self::BoxIndicator { lower, .. } => Some(lower.len()),
            Self::AffineSubspaceIndicator(a) => Some(a.c.ncols()),
            Self::SumToConstantIndicator { target, arity } => Some(target.len() * arity),
        }
    }

    pub fn is_indicator(&self) -> bool {
        matches!(
            self,
            Self::BoxIndicator { .. } | Self::AffineSubspaceIndicator(_) | Self::SumToConstantIndicator { .. }
        )
    }

    /// `g(x)`; indicators return `0` or `+inf`.
    pub fn value(&self, x: &[f64]) -> f64 {
        let feasible = match self {
            Self::Zero => return 0.0,
            Self::L1 { weight } => return weight * x.iter().map(|v| v.abs()).sum::<f64>(),
            Self::BoxIndicator { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (l, u))| l <= v && v <= u),
            Self::AffineSubspaceIndicator(a) => a.violation(x) <= EQUALITY_TOL,
            Self::SumToConstantIndicator { target, arity } => {
                let m = target.len();
                (0..m).all(|k| {
                    let s: f64 = (0..*arity).map(|j| x[j * m + k]).sum();
                    (s - target[k]).abs() <= EQUALITY_TOL
                })
            }
        };
        if feasible {
            0.0
        } else {
            f64::INFINITY
        }
    }

    /// `argmin_x g(x) + 1/(2 gamma) ||x - z||^2`
    pub fn prox(&self, z: &[f64], gamma: f64) -> Result<Vec<f64>> {
        if !(gamma > 0.0) {
            return Err(Error::Config(format!("prox step gamma must be positive, got {gamma}")));
        }
        if let Some(d) = self.dim() {
            check_dim(|| "prox argument".into(), d, z.len())?;
        }
        Ok(self.prox_unchecked(z, gamma))
    }

    pub(crate) fn prox_unchecked(&self, z: &[f64], gamma: f64) -> Vec<f64> {
        match self {
            Self::Zero => z.to_vec(),
            Self::BoxIndicator { lower, upper } => z
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(v, (l, u))| v.max(*l).min(*u))
                .collect(),
            Self::AffineSubspaceIndicator(a) => a.project(z),
            Self::SumToConstantIndicator { target, arity } => {
                let m = target.len();
                let mut out = z.to_vec();
                for k in 0..m {
                    let s: f64 = (0..*arity).map(|j| z[j * m + k]).sum();
                    let shift = (target[k] - s) / *arity as f64;
                    for j in 0..*arity {
                        out[j * m + k] += shift;
                    }
                }
                out
            }
            Self::L1 { weight } => {
                let t = gamma * weight;
                z.iter().map(|v| v.signum() * (v.abs() - t).max(0.0)).collect()
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum ProxRepr {
    Zero,
    /// `null` bounds encode infinities.
    BoxIndicator {
        lower: Vec<Option<f64>>,
        upper: Vec<Option<f64>>,
    },
    AffineSubspaceIndicator {
        c: Vec<Vec<f64>>,
        d: Vec<f64>,
    },
    SumToConstantIndicator {
        target: Vec<f64>,
        arity: usize,
    },
    L1 {
        weight: f64,
    },
}

impl TryFrom<ProxRepr> for ProxFn {
    type Error = Error;

    fn try_from(r: ProxRepr) -> Result<Self> {
        match r {
            ProxRepr::Zero => Ok(Self::Zero),
            ProxRepr::BoxIndicator { lower, upper } => Self::box_indicator(
                lower.into_iter().map(|v| v.unwrap_or(f64::NEG_INFINITY)).collect(),
                upper.into_iter().map(|v| v.unwrap_or(f64::INFINITY)).collect(),
            ),
            ProxRepr::AffineSubspaceIndicator { c, d } => Self::affine(rows_to_matrix(&c, "C")?, d),
            ProxRepr::SumToConstantIndicator { target, arity } => Self::sum_to_constant(target, arity),
            ProxRepr::L1 { weight } => Self::l1(weight),
        }
    }
}

impl From<ProxFn> for ProxRepr {
    fn from(p: ProxFn) -> Self {
        let finite = |v: f64| v.is_finite().then_some(v);
        match p {
            ProxFn::Zero => Self::Zero,
            ProxFn::BoxIndicator { lower, upper } => Self::BoxIndicator {
                lower: lower.into_iter().map(finite).collect(),
                upper: upper.into_iter().map(finite).collect(),
            },
            ProxFn::AffineSubspaceIndicator(a) => Self::AffineSubspaceIndicator {
                c: matrix_to_rows(&a.c),
                d: a.d,
            },
            ProxFn::SumToConstantIndicator { target, arity } => Self::SumToConstantIndicator { target, arity },
            ProxFn::L1 { weight } => Self::L1 { weight },
        }
    }
}
