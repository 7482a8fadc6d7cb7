//! Dense helpers shared by the function library, contributions and the
//! ADMM block solvers.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Largest size for which symmetric spectra are computed by a full
/// eigendecomposition; bigger matrices fall back to power iteration.
pub const DENSE_EIGEN_LIMIT: usize = 512;

/// Largest eigenvalue of a symmetric positive semidefinite matrix.
pub fn lambda_max_psd(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    if n == 0 {
        return 0.0;
    }
    if n <= DENSE_EIGEN_LIMIT {
        let eig = SymmetricEigen::new(m.clone());
        return eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    }
    power_iteration(m, 100, 1e-8)
}

/// Power iteration on a symmetric PSD matrix from a fixed, deterministic
/// start vector.
pub fn power_iteration(m: &DMatrix<f64>, max_iters: usize, tol: f64) -> f64 {
    let n = m.nrows();
    if n == 0 {
        return 0.0;
    }
    let mut v = DVector::from_fn(n, |i, _| 1.0 + 0.1 * ((i as f64 + 1.0) * 0.618_033_988_75).fract());
    v /= v.norm();
    let mut lambda = 0.0;
    for _ in 0..max_iters {
        let w = m * &v;
        let next = v.dot(&w);
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v = w / norm;
        if (next - lambda).abs() <= tol * next.abs().max(1.0) {
            return next.max(norm);
        }
        lambda = next;
    }
    lambda
}

/// Smallest eigenvalue of the symmetric part of `m`.
pub fn lambda_min_sym(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    let sym = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Moore-Penrose pseudo-inverse with singular values below
/// `rel_cutoff * sigma_max` treated as zero.
pub fn pseudo_inverse(m: &DMatrix<f64>, rel_cutoff: f64) -> DMatrix<f64> {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return DMatrix::zeros(c, r);
    }
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    let cut = rel_cutoff * smax;
    let u = svd.u.as_ref().expect("svd computed with u");
    let vt = svd.v_t.as_ref().expect("svd computed with v_t");
    let mut out = DMatrix::zeros(c, r);
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cut && s > 0.0 {
            let col = vt.row(k).transpose();
            let row = u.column(k).transpose();
            out += (col * row) / s;
        }
    }
    out
}

/// Minimum-norm least-squares solution of `m x = b`.
pub fn min_norm_solution(m: &DMatrix<f64>, b: &DVector<f64>, rel_cutoff: f64) -> DVector<f64> {
    pseudo_inverse(m, rel_cutoff) * b
}

pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |a, x| a.max(x.abs()))
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
