//! Linear programs `min c^T x  s.t.  b_lo <= A x <= b_hi,  l <= x <= u` as
//! read from MPS files.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    /// `=`
    E,
    /// `<=`
    L,
    /// `>=`
    G,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sense {
    #[default]
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub name: String,
    pub kind: RowKind,
    pub rhs: f64,
    pub range: Option<f64>,
}

impl Row {
    /// `(b_lo, b_hi)` following the usual MPS RANGES table.
    pub fn bounds(&self) -> (f64, f64) {
        let inf = f64::INFINITY;
        match (self.kind, self.range) {
            (RowKind::E, None) => (self.rhs, self.rhs),
            (RowKind::E, Some(r)) if r >= 0.0 => (self.rhs, self.rhs + r),
            (RowKind::E, Some(r)) => (self.rhs + r, self.rhs),
            (RowKind::L, None) => (-inf, self.rhs),
            (RowKind::L, Some(r)) => (self.rhs - r.abs(), self.rhs),
            (RowKind::G, None) => (self.rhs, inf),
            (RowKind::G, Some(r)) => (self.rhs, self.rhs + r.abs()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpData {
    pub name: String,
    pub objective_name: String,
    pub sense: Sense,
    /// Constant term of the objective (minus the objective row's RHS).
    pub objective_offset: f64,
    pub columns: Vec<String>,
    pub rows: Vec<Row>,
    /// Nonzeros `(row, column, value)` in file order.
    pub entries: Vec<(usize, usize, f64)>,
    pub cost: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LpData {
    /// An LP from row-major dense data and explicit row bounds; equal bounds
    /// give `E` rows, a single finite bound `L`/`G`, two finite bounds a
    /// ranged `L` row.
    pub fn from_dense(
        a: &[Vec<f64>],
        cost: Vec<f64>,
        lower: Vec<f64>,
        upper: Vec<f64>,
        b_lo: &[f64],
        b_hi: &[f64],
    ) -> Result<Self> {
        let n = cost.len();
        if a.iter().any(|r| r.len() != n) || lower.len() != n || upper.len() != n || b_lo.len() != a.len() || b_hi.len() != a.len() {
            return Err(Error::Generator("inconsistent LP dimensions".into()));
        }
        let rows = b_lo
            .iter()
            .zip(b_hi)
            .enumerate()
            .map(|(i, (&lo, &hi))| {
                let (kind, rhs, range) = match (lo.is_finite(), hi.is_finite()) {
                    _ if lo == hi => (RowKind::E, lo, None),
                    (true, true) => (RowKind::L, hi, Some(hi - lo)),
                    (false, true) => (RowKind::L, hi, None),
                    (true, false) => (RowKind::G, lo, None),
                    (false, false) => return Err(Error::Generator(format!("row {i} is free"))),
                };
                Ok(Row { name: format!("R{}", i + 1), kind, rhs, range })
            })
            .collect::<Result<_>>()?;
        let entries = (0..n)
            .flat_map(|j| a.iter().enumerate().filter(move |(_, r)| r[j] != 0.0).map(move |(i, r)| (i, j, r[j])))
            .collect();
        Ok(Self {
            name: "LP".into(),
            objective_name: "COST".into(),
            sense: Sense::Minimize,
            objective_offset: 0.0,
            columns: (0..n).map(|j| format!("C{}", j + 1)).collect(),
            rows,
            entries,
            cost,
            lower,
            upper,
        })
    }

    pub fn row_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        self.rows.iter().map(Row::bounds).unzip()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; self.columns.len()]; self.rows.len()];
        for &(i, j, v) in &self.entries {
            a[i][j] += v;
        }
        a
    }

    /// `c^T x` plus the offset, in the file's sense.
    pub fn objective(&self, x: &[f64]) -> f64 {
        self.cost.iter().zip(x).map(|(c, x)| c * x).sum::<f64>() + self.objective_offset
    }

    /// Largest violation of the row and column bounds at `x`.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let mut ax = vec![0.0; self.rows.len()];
        for &(i, j, v) in &self.entries {
            ax[i] += v * x[j];
        }
        let (lo, hi) = self.row_bounds();
        let rows = ax.iter().zip(lo.iter().zip(&hi)).map(|(v, (l, h))| (l - v).max(v - h).max(0.0));
        let cols = x.iter().zip(self.lower.iter().zip(&self.upper)).map(|(v, (l, h))| (l - v).max(v - h).max(0.0));
        rows.chain(cols).fold(0.0, f64::max)
    }
}
