use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Smooth part `f_i` of a block objective.
#[derive(Debug, Clone, PartialEq)]
pub enum SmoothKind {
    Zero,
    /// `q^T x`
    Linear { q: Vec<f64> },
    /// `1/2 x^T P x + q^T x`
    Quadratic { p: DMatrix<f64>, q: Vec<f64> },
    /// `||Q x - q||^2`
    LeastSquares { q_mat: DMatrix<f64>, q_vec: Vec<f64> },
}

/// A smooth convex function together with a Lipschitz bound on its gradient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SmoothRepr", into = "SmoothRepr")]
pub struct SmoothFn {
    kind: SmoothKind,
    lipschitz: f64,
}

impl SmoothFn {
    pub fn zero() -> Self {
        Self {
            kind: SmoothKind::Zero,
            lipschitz: 0.0,
        }
    }

    pub fn linear(q: Vec<f64>) -> Self {
        Self {
            kind: SmoothKind::Linear { q },
            lipschitz: 0.0,
        }
    }

    /// Fails unless `p` is square, symmetric and positive semidefinite.
    pub fn quadratic(p: DMatrix<f64>, q: Vec<f64>) -> Result<Self> {
        let n = p.nrows();
        if p.ncols() != n || q.len() != n {
            return Err(Error::InvalidFunction(format!(
                "quadratic with P {}x{} and q of length {}",
                p.nrows(),
                p.ncols(),
                q.len()
            )));
        }
        if p.iter().chain(q.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidFunction("quadratic with non-finite data".into()));
        }
        let scale = p.amax().max(1.0);
        if (&p - p.transpose()).amax() > 1e-10 * scale {
            return Err(Error::InvalidFunction("quadratic P is not symmetric".into()));
        }
        if linalg::lambda_min_sym(&p) < -1e-10 * scale {
            return Err(Error::InvalidFunction("quadratic P is not positive semidefinite".into()));
        }
        let lipschitz = linalg::lambda_max_psd(&p);
        Ok(Self {
            kind: SmoothKind::Quadratic { p, q },
            lipschitz,
        })
    }

    /// `1/2 sum_i diag_i x_i^2`, a convenience for scalar and separable blocks.
    pub fn diagonal_quadratic(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        Self::quadratic(DMatrix::from_diagonal(&DVector::from_column_slice(diag)), vec![0.0; n])
    }

    pub fn least_squares(q_mat: DMatrix<f64>, q_vec: Vec<f64>) -> Result<Self> {
        if q_mat.nrows() != q_vec.len() || q_mat.ncols() == 0 {
            return Err(Error::InvalidFunction(format!(
                "least squares with Q {}x{} and q of length {}",
                q_mat.nrows(),
                q_mat.ncols(),
                q_vec.len()
            )));
        }
        // ||Qx-q||^2 has gradient 2Q^T(Qx-q), so L = 2 sigma_max(Q)^2.
        let lipschitz = 2.0 * linalg::lambda_max_psd(&(q_mat.transpose() * &q_mat));
        Ok(Self {
            kind: SmoothKind::LeastSquares { q_mat, q_vec },
            lipschitz,
        })
    }

    /// Replace the computed Lipschitz bound (e.g. with a known tighter or
    /// looser constant).
    pub fn with_lipschitz(mut self, lipschitz: f64) -> Result<Self> {
        if lipschitz.is_nan() || lipschitz < 0.0 {
            return Err(Error::InvalidFunction(format!("lipschitz bound {lipschitz}")));
        }
        self.lipschitz = lipschitz;
        Ok(self)
    }

    pub fn kind(&self) -> &SmoothKind {
        &self.kind
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// The block dimension this function requires, if it fixes one.
    pub fn dim(&self) -> Option<usize> {
        match &self.kind {
            SmoothKind::Zero => None,
            SmoothKind::Linear { q } => Some(q.len()),
            SmoothKind::Quadratic { q, .. } => Some(q.len()),
            SmoothKind::LeastSquares { q_mat, .. } => Some(q_mat.ncols()),
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match &self.kind {
            SmoothKind::Zero => 0.0,
            SmoothKind::Linear { q } => dot(q, x),
            SmoothKind::Quadratic { p, q } => {
                let xv = DVector::from_column_slice(x);
                0.5 * xv.dot(&(p * &xv)) + dot(q, x)
            }
            SmoothKind::LeastSquares { q_mat, q_vec } => {
                let r = q_mat * DVector::from_column_slice(x) - DVector::from_column_slice(q_vec);
                r.norm_squared()
            }
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match &self.kind {
            SmoothKind::Zero => vec![0.0; x.len()],
            SmoothKind::Linear { q } => q.clone(),
            SmoothKind::Quadratic { p, q } => {
                let g = p * DVector::from_column_slice(x) + DVector::from_column_slice(q);
                g.as_slice().to_vec()
            }
            SmoothKind::LeastSquares { q_mat, q_vec } => {
                let r = q_mat * DVector::from_column_slice(x) - DVector::from_column_slice(q_vec);
                (q_mat.transpose() * r * 2.0).as_slice().to_vec()
            }
        }
    }

    /// Exact quadratic model `1/2 x^T H x + l^T x` (up to a constant).
    pub fn quadratic_model(&self, dim: usize) -> (DMatrix<f64>, Vec<f64>) {
        match &self.kind {
            SmoothKind::Zero => (DMatrix::zeros(dim, dim), vec![0.0; dim]),
            SmoothKind::Linear { q } => (DMatrix::zeros(dim, dim), q.clone()),
            SmoothKind::Quadratic { p, q } => (p.clone(), q.clone()),
            SmoothKind::LeastSquares { q_mat, q_vec } => {
                let h = q_mat.transpose() * q_mat * 2.0;
                let l = q_mat.transpose() * DVector::from_column_slice(q_vec) * -2.0;
                (h, l.as_slice().to_vec())
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().cloned().collect()).collect()
}

pub(crate) fn rows_to_matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, |x| x.len());
    if rows.iter().any(|x| x.len() != c) {
        return Err(Error::InvalidFunction(format!("ragged matrix {what}")));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum SmoothRepr {
    Zero,
    Linear {
        q: Vec<f64>,
    },
    Quadratic {
        p: Vec<Vec<f64>>,
        q: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lipschitz: Option<f64>,
    },
    LeastSquares {
        q_mat: Vec<Vec<f64>>,
        q_vec: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lipschitz: Option<f64>,
    },
}

impl TryFrom<SmoothRepr> for SmoothFn {
    type Error = Error;

    fn try_from(r: SmoothRepr) -> Result<Self> {
        let (f, l) = match r {
            SmoothRepr::Zero => (Self::zero(), None),
            SmoothRepr::Linear { q } => (Self::linear(q), None),
            SmoothRepr::Quadratic { p, q, lipschitz } => {
                (Self::quadratic(rows_to_matrix(&p, "P")?, q)?, lipschitz)
            }
            SmoothRepr::LeastSquares {
                q_mat,
                q_vec,
                lipschitz,
            } => (Self::least_squares(rows_to_matrix(&q_mat, "Q")?, q_vec)?, lipschitz),
        };
        match l {
            Some(l) => f.with_lipschitz(l),
            None => Ok(f),
        }
    }
}

impl From<SmoothFn> for SmoothRepr {
    fn from(f: SmoothFn) -> Self {
        match f.kind {
            SmoothKind::Zero => Self::Zero,
            SmoothKind::Linear { q } => Self::Linear { q },
            SmoothKind::Quadratic { p, q } => Self::Quadratic {
                p: matrix_to_rows(&p),
                q,
                lipschitz: Some(f.lipschitz),
            },
            SmoothKind::LeastSquares { q_mat, q_vec } => Self::LeastSquares {
                q_mat: matrix_to_rows(&q_mat),
                q_vec,
                lipschitz: Some(f.lipschitz),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    fn sample_functions(seed: u64) -> Vec<SmoothFn> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_matrix(&mut rng, 4, 3);
        let q: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        vec![
            SmoothFn::zero(),
            SmoothFn::linear(q.clone()),
            SmoothFn::quadratic(m.transpose() * &m, q.clone()).unwrap(),
            SmoothFn::least_squares(m, vec![0.5, -1.0, 2.0, 0.0]).unwrap(),
        ]
    }

    proptest! {
        #[test]
        fn gradient_matches_central_differences(seed in 0u64..1000, x in prop::collection::vec(-3.0..3.0f64, 3)) {
            for f in sample_functions(seed) {
                let g = f.gradient(&x);
                let h = 1e-5;
                for k in 0..3 {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[k] += h;
                    xm[k] -= h;
                    let fd = (f.value(&xp) - f.value(&xm)) / (2.0 * h);
                    prop_assert!((fd - g[k]).abs() <= 1e-6 * g[k].abs().max(1.0), "{:?}: {} vs {}", f.kind(), fd, g[k]);
                }
            }
        }

        #[test]
        fn lipschitz_bound_holds_on_pairs(seed in 0u64..1000,
                                         x in prop::collection::vec(-3.0..3.0f64, 3),
                                         y in prop::collection::vec(-3.0..3.0f64, 3)) {
            for f in sample_functions(seed) {
                let gx = f.gradient(&x);
                let gy = f.gradient(&y);
                let num: f64 = gx.iter().zip(&gy).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                let den: f64 = x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                if den > 1e-9 {
                    prop_assert!(num / den <= f.lipschitz() * (1.0 + 1e-9) + 1e-12);
                }
            }
        }
    }

    #[test]
    fn rejects_indefinite_and_asymmetric() {
        let p = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(SmoothFn::quadratic(p, vec![0.0; 2]).is_err());
        let p = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(SmoothFn::quadratic(p, vec![0.0; 2]).is_err());
    }

    #[test]
    fn quadratic_model_reproduces_least_squares() {
        let f = &sample_functions(7)[3];
        let (h, l) = f.quadratic_model(3);
        let x = [0.3, -0.2, 1.1];
        let xv = DVector::from_column_slice(&x);
        let g = &h * &xv + DVector::from_column_slice(&l);
        for (a, b) in g.iter().zip(f.gradient(&x)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn json_keeps_lipschitz_override() {
        let f = SmoothFn::diagonal_quadratic(&[2.0, 4.0]).unwrap().with_lipschitz(10.0).unwrap();
        let back: SmoothFn = serde_json::from_str(&serde_json::to_string(&f).unwrap()).unwrap();
        assert_eq!(back.lipschitz(), 10.0);
        assert_eq!(f.lipschitz(), 10.0);
        assert_eq!(SmoothFn::diagonal_quadratic(&[2.0, 4.0]).unwrap().lipschitz(), 4.0);
    }
}
