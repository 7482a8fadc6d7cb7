use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Storage of a [`LinearMap`].
#[derive(Debug, Clone, PartialEq)]
pub enum MapKind {
    Identity,
    ScaledIdentity(f64),
    /// Row-major entries.
    Dense(Vec<f64>),
    /// Canonical triplets: sorted by (row, col), no duplicates, no explicit zeros.
    Sparse(Vec<(usize, usize, f64)>),
}

/// A linear operator `R^in_dim -> R^out_dim` used for block couplings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LinearMapRepr", into = "LinearMapRepr")]
pub struct LinearMap {
    kind: MapKind,
    out_dim: usize,
    in_dim: usize,
}

impl LinearMap {
    pub fn identity(dim: usize) -> Self {
        Self {
            kind: MapKind::Identity,
            out_dim: dim,
            in_dim: dim,
        }
    }

    pub fn scaled_identity(scale: f64, dim: usize) -> Self {
        Self {
            kind: MapKind::ScaledIdentity(scale),
            out_dim: dim,
            in_dim: dim,
        }
    }

    /// Row-major dense matrix.
    pub fn dense(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidMap("dimensions must be positive".into()));
        }
        if data.len() != rows * cols {
            return Err(Error::InvalidMap(format!(
                "dense map {rows}x{cols} given {} entries",
                data.len()
            )));
        }
        Ok(Self {
            kind: MapKind::Dense(data),
            out_dim: rows,
            in_dim: cols,
        })
    }

    pub fn from_matrix(m: &DMatrix<f64>) -> Result<Self> {
        let (r, c) = m.shape();
        let data = (0..r).flat_map(|i| (0..c).map(move |j| m[(i, j)])).collect();
        Self::dense(r, c, data)
    }

    /// Sparse map from triplets; duplicates are summed and zeros dropped.
    pub fn sparse(rows: usize, cols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidMap("dimensions must be positive".into()));
        }
        if let Some(&(r, c, _)) = triplets.iter().find(|&&(r, c, _)| r >= rows || c >= cols) {
            return Err(Error::InvalidMap(format!(
                "triplet ({r}, {c}) outside {rows}x{cols}"
            )));
        }
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut canon: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            match canon.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => canon.push((r, c, v)),
            }
        }
        canon.retain(|t| t.2 != 0.0);
        Ok(Self {
            kind: MapKind::Sparse(canon),
            out_dim: rows,
            in_dim: cols,
        })
    }

    /// `sign * [0 .. I .. 0]` picking slot `slot` of width `width` out of a
    /// vector made of `arity` consecutive slots.
    pub fn selector(slot: usize, width: usize, arity: usize, sign: f64) -> Self {
        let triplets = (0..width).map(|k| (k, slot * width + k, sign)).collect();
        Self::sparse(width, width * arity, triplets).expect("selector is in range")
    }

    pub fn kind(&self) -> &MapKind {
        &self.kind
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.out_dim];
        self.apply_add(x, 1.0, &mut out);
        out
    }

    pub fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.in_dim];
        self.apply_transpose_add(y, 1.0, &mut out);
        out
    }

    /// `out += alpha * M x`
    pub fn apply_add(&self, x: &[f64], alpha: f64, out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.in_dim);
        debug_assert_eq!(out.len(), self.out_dim);
        match &self.kind {
            MapKind::Identity => out.iter_mut().zip(x).for_each(|(o, v)| *o += alpha * v),
            MapKind::ScaledIdentity(s) => {
                let a = alpha * s;
                out.iter_mut().zip(x).for_each(|(o, v)| *o += a * v)
            }
            MapKind::Dense(data) => {
                for (i, o) in out.iter_mut().enumerate() {
                    let row = &data[i * self.in_dim..(i + 1) * self.in_dim];
                    *o += alpha * row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                }
            }
            MapKind::Sparse(t) => {
                for &(r, c, v) in t {
                    out[r] += alpha * v * x[c];
                }
            }
        }
    }

    /// `out += alpha * M^T y`
    pub fn apply_transpose_add(&self, y: &[f64], alpha: f64, out: &mut [f64]) {
        debug_assert_eq!(y.len(), self.out_dim);
        debug_assert_eq!(out.len(), self.in_dim);
        match &self.kind {
            MapKind::Identity | MapKind::ScaledIdentity(_) => self.apply_add(y, alpha, out),
            MapKind::Dense(data) => {
                for (i, yi) in y.iter().enumerate() {
                    let row = &data[i * self.in_dim..(i + 1) * self.in_dim];
                    let a = alpha * yi;
                    out.iter_mut().zip(row).for_each(|(o, m)| *o += a * m);
                }
            }
            MapKind::Sparse(t) => {
                for &(r, c, v) in t {
                    out[c] += alpha * v * y[r];
                }
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.out_dim, self.in_dim);
        match &self.kind {
            MapKind::Identity => m.fill_diagonal(1.0),
            MapKind::ScaledIdentity(s) => m.fill_diagonal(*s),
            MapKind::Dense(data) => {
                for i in 0..self.out_dim {
                    for j in 0..self.in_dim {
                        m[(i, j)] = data[i * self.in_dim + j];
                    }
                }
            }
            MapKind::Sparse(t) => {
                for &(r, c, v) in t {
                    m[(r, c)] += v;
                }
            }
        }
        m
    }

    /// `M^T M`
    pub fn gram(&self) -> DMatrix<f64> {
        match &self.kind {
            MapKind::Identity => DMatrix::identity(self.in_dim, self.in_dim),
            MapKind::ScaledIdentity(s) => DMatrix::identity(self.in_dim, self.in_dim) * (s * s),
            _ => {
                let d = self.to_dense();
                d.transpose() * d
            }
        }
    }

    pub fn frobenius_sq(&self) -> f64 {
        match &self.kind {
            MapKind::Identity => self.in_dim as f64,
            MapKind::ScaledIdentity(s) => s * s * self.in_dim as f64,
            MapKind::Dense(d) => d.iter().map(|v| v * v).sum(),
            MapKind::Sparse(t) => t.iter().map(|e| e.2 * e.2).sum(),
        }
    }

    pub fn nnz(&self) -> usize {
        match &self.kind {
            MapKind::Identity => self.in_dim,
            MapKind::ScaledIdentity(s) => {
                if *s == 0.0 {
                    0
                } else {
                    self.in_dim
                }
            }
            MapKind::Dense(d) => d.iter().filter(|v| **v != 0.0).count(),
            MapKind::Sparse(t) => t.len(),
        }
    }

    pub fn is_finite(&self) -> bool {
        match &self.kind {
            MapKind::Identity => true,
            MapKind::ScaledIdentity(s) => s.is_finite(),
            MapKind::Dense(d) => d.iter().all(|v| v.is_finite()),
            MapKind::Sparse(t) => t.iter().all(|e| e.2.is_finite()),
        }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let kind = match &self.kind {
            MapKind::Identity => MapKind::ScaledIdentity(alpha),
            MapKind::ScaledIdentity(s) => MapKind::ScaledIdentity(alpha * s),
            MapKind::Dense(d) => MapKind::Dense(d.iter().map(|v| alpha * v).collect()),
            MapKind::Sparse(t) => MapKind::Sparse(t.iter().map(|&(r, c, v)| (r, c, alpha * v)).collect()),
        };
        Self { kind, ..*self }
    }

    pub fn neg(&self) -> Self {
        self.scaled(-1.0)
    }

    /// Entry-wise sum of two maps with equal shapes.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.out_dim != other.out_dim || self.in_dim != other.in_dim {
            return Err(Error::InvalidMap(format!(
                "cannot add {}x{} and {}x{}",
                self.out_dim, self.in_dim, other.out_dim, other.in_dim
            )));
        }
        let mut t = self.triplets();
        t.extend(other.triplets());
        Self::sparse(self.out_dim, self.in_dim, t)
    }

    /// Vertical concatenation of maps sharing `in_dim`.
    pub fn vstack(maps: &[&LinearMap]) -> Result<Self> {
        let first = maps
            .first()
            .ok_or_else(|| Error::InvalidMap("vstack of nothing".into()))?;
        let cols = first.in_dim;
        let mut t = Vec::new();
        let mut offset = 0;
        for m in maps {
            if m.in_dim != cols {
                return Err(Error::InvalidMap(format!(
                    "vstack input dims {} and {}",
                    cols, m.in_dim
                )));
            }
            t.extend(m.triplets().into_iter().map(|(r, c, v)| (r + offset, c, v)));
            offset += m.out_dim;
        }
        Self::sparse(offset, cols, t)
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        match &self.kind {
            MapKind::Identity => (0..self.in_dim).map(|i| (i, i, 1.0)).collect(),
            MapKind::ScaledIdentity(s) => (0..self.in_dim).map(|i| (i, i, *s)).collect(),
            MapKind::Dense(d) => d
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(k, v)| (k / self.in_dim, k % self.in_dim, *v))
                .collect(),
            MapKind::Sparse(t) => t.clone(),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum LinearMapRepr {
    Identity {
        dim: usize,
    },
    ScaledIdentity {
        scale: f64,
        dim: usize,
    },
    Dense {
        rows: usize,
        cols: usize,
        data: Vec<Vec<f64>>,
    },
    Sparse {
        rows: usize,
        cols: usize,
        triplets: Vec<(usize, usize, f64)>,
    },
}

impl TryFrom<LinearMapRepr> for LinearMap {
    type Error = Error;

    fn try_from(r: LinearMapRepr) -> Result<Self> {
        match r {
            LinearMapRepr::Identity { dim } | LinearMapRepr::ScaledIdentity { dim, .. } if dim == 0 => {
                Err(Error::InvalidMap("identity of dimension 0".into()))
            }
            LinearMapRepr::Identity { dim } => Ok(Self::identity(dim)),
            LinearMapRepr::ScaledIdentity { scale, dim } => Ok(Self::scaled_identity(scale, dim)),
            LinearMapRepr::Dense { rows, cols, data } => {
                if data.len() != rows || data.iter().any(|row| row.len() != cols) {
                    return Err(Error::InvalidMap(format!("ragged dense map, declared {rows}x{cols}")));
                }
                Self::dense(rows, cols, data.into_iter().flatten().collect())
            }
            LinearMapRepr::Sparse { rows, cols, triplets } => Self::sparse(rows, cols, triplets),
        }
    }
}

impl From<LinearMap> for LinearMapRepr {
    fn from(m: LinearMap) -> Self {
        match m.kind {
            MapKind::Identity => Self::Identity { dim: m.in_dim },
            MapKind::ScaledIdentity(scale) => Self::ScaledIdentity { scale, dim: m.in_dim },
            MapKind::Dense(d) => Self::Dense {
                rows: m.out_dim,
                cols: m.in_dim,
                data: d.chunks(m.in_dim).map(|c| c.to_vec()).collect(),
            },
            MapKind::Sparse(triplets) => Self::Sparse {
                rows: m.out_dim,
                cols: m.in_dim,
                triplets,
            },
        }
    }
}
