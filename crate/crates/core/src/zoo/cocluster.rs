//! Co-clustering of an LP's rows and columns into block constraints and block
//! variables.
//!
//! Columns start in clusters `0, 1, .., k-1, 0, 1, ..` and all rows in
//! cluster 0. Each pass moves every row to the column cluster holding most of
//! its nonzeros, then every column to the row cluster holding most of its
//! nonzeros; ties go to the smaller index and empty rows/columns stay put.

use std::collections::{BTreeMap, HashMap};

use super::lp::{LpData, Sense};
use crate::error::{Error, Result};
use crate::mbp::{Block, BlockConstraint, LinearMap, MultiblockProblem, ProxFn, SmoothFn, Term};

#[derive(Debug, Clone, PartialEq)]
pub struct Cocluster {
    pub row_cluster: Vec<usize>,
    pub col_cluster: Vec<usize>,
    /// Block id to the LP columns it holds, in order.
    pub block_columns: Vec<(String, Vec<usize>)>,
    pub problem: MultiblockProblem,
}

impl Cocluster {
    /// Collect the LP vector `x` from a solution of [`Self::problem`].
    pub fn lp_point(&self, solution: &HashMap<String, Vec<f64>>) -> Result<Vec<f64>> {
        let n = self.col_cluster.len();
        let mut x = vec![0.0; n];
        for (id, cols) in &self.block_columns {
            let v = solution.get(id).ok_or_else(|| Error::Vertices(vec![id.clone()]))?;
            for (&j, &val) in cols.iter().zip(v) {
                x[j] = val;
            }
        }
        Ok(x)
    }
}

fn argmax_low(counts: &[usize]) -> Option<usize> {
    let best = *counts.iter().max()?;
    (best > 0).then(|| counts.iter().position(|&c| c == best).unwrap())
}

/// Row and column cluster labels after `passes` alternating passes.
pub fn cocluster_labels(rows: usize, cols: usize, entries: &[(usize, usize, f64)], k: usize, passes: usize) -> (Vec<usize>, Vec<usize>) {
    let mut col: Vec<usize> = (0..cols).map(|j| j % k).collect();
    let mut row = vec![0; rows];
    let nz: Vec<(usize, usize)> = entries.iter().filter(|e| e.2 != 0.0).map(|e| (e.0, e.1)).collect();
    for _ in 0..passes {
        let mut counts = vec![vec![0; k]; rows];
        for &(i, j) in &nz {
            counts[i][col[j]] += 1;
        }
        for (i, c) in counts.iter().enumerate() {
            if let Some(best) = argmax_low(c) {
                row[i] = best;
            }
        }
        let mut counts = vec![vec![0; k]; cols];
        for &(i, j) in &nz {
            counts[j][row[i]] += 1;
        }
        for (j, c) in counts.iter().enumerate() {
            if let Some(best) = argmax_low(c) {
                col[j] = best;
            }
        }
    }
    (row, col)
}

/// Co-cluster `lp` and emit one block per nonempty column cluster
/// (`x{c}`: cost + box) and one block constraint per nonempty row cluster
/// (`C{r}`). A row cluster holding an inequality row gets a slack block
/// `s{r}` with box `[b_lo, b_hi]` over all its rows and reads
/// `sum A x - s = 0`; so does one touching a single column cluster, which
/// would otherwise not couple two blocks. Equality rows in a slacked cluster
/// get a degenerate box.
pub fn lp_cocluster(lp: &LpData, k: usize, passes: usize) -> Result<Cocluster> {
    let (m, n) = (lp.rows.len(), lp.columns.len());
    if k == 0 || passes == 0 {
        return Err(Error::Generator(format!("co-clustering needs k >= 1 and passes >= 1, got k={k}, passes={passes}")));
    }
    let (b_lo, b_hi) = lp.row_bounds();
    let mut row_nnz = vec![0; m];
    for &(i, _, v) in &lp.entries {
        if v != 0.0 {
            row_nnz[i] += 1;
        }
    }
    if n == 0 || row_nnz.iter().all(|&c| c == 0) {
        return Err(Error::Generator("co-clustering needs a nonempty constraint matrix".into()));
    }
    for i in (0..m).filter(|&i| row_nnz[i] == 0) {
        if b_lo[i] > 0.0 || b_hi[i] < 0.0 {
            return Err(Error::Generator(format!("empty row {} is infeasible", lp.rows[i].name)));
        }
        log::debug!("empty row {} dropped", lp.rows[i].name);
    }
    let (row_cluster, col_cluster) = cocluster_labels(m, n, &lp.entries, k, passes);
    let sign = if lp.sense == Sense::Maximize { -1.0 } else { 1.0 };

    let mut cols_of: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (j, &c) in col_cluster.iter().enumerate() {
        cols_of.entry(c).or_default().push(j);
    }
    let mut blocks = Vec::new();
    let mut block_columns = Vec::new();
    let mut local = vec![0; n];
    for (&c, cols) in &cols_of {
        let id = format!("x{}", c + 1);
        for (p, &j) in cols.iter().enumerate() {
            local[j] = p;
        }
        blocks.push(Block {
            id: id.clone(),
            dim: cols.len(),
            smooth: SmoothFn::linear(cols.iter().map(|&j| sign * lp.cost[j]).collect()),
            prox: ProxFn::box_indicator(cols.iter().map(|&j| lp.lower[j]).collect(), cols.iter().map(|&j| lp.upper[j]).collect())?,
        });
        block_columns.push((id, cols.clone()));
    }

    let mut rows_of: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in (0..m).filter(|&i| row_nnz[i] > 0) {
        rows_of.entry(row_cluster[i]).or_default().push(i);
    }
    let mut by_row: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
    for &(i, j, v) in &lp.entries {
        by_row[i].push((j, v));
    }
    let mut constraints = Vec::new();
    for (&r, rows) in &rows_of {
        let mut triplets: BTreeMap<usize, Vec<(usize, usize, f64)>> = BTreeMap::new();
        for (p, &i) in rows.iter().enumerate() {
            for &(j, v) in &by_row[i] {
                triplets.entry(col_cluster[j]).or_default().push((p, local[j], v));
            }
        }
        let mut terms = triplets
            .into_iter()
            .map(|(c, t)| {
                Ok(Term { block: format!("x{}", c + 1), map: LinearMap::sparse(rows.len(), cols_of[&c].len(), t)? })
            })
            .collect::<Result<Vec<_>>>()?;
        let inequality = rows.iter().any(|&i| b_lo[i] != b_hi[i]);
        let rhs = if inequality || terms.len() < 2 {
            let id = format!("s{}", r + 1);
            blocks.push(Block {
                id: id.clone(),
                dim: rows.len(),
                smooth: SmoothFn::zero(),
                prox: ProxFn::box_indicator(rows.iter().map(|&i| b_lo[i]).collect(), rows.iter().map(|&i| b_hi[i]).collect())?,
            });
            terms.push(Term { block: id, map: LinearMap::scaled_identity(-1.0, rows.len()) });
            vec![0.0; rows.len()]
        } else {
            rows.iter().map(|&i| b_lo[i]).collect()
        };
        constraints.push(BlockConstraint { id: format!("C{}", r + 1), terms, rhs });
    }
    let problem = MultiblockProblem { blocks, constraints };
    problem.ensure_valid()?;
    Ok(Cocluster { row_cluster, col_cluster, block_columns, problem })
}

#[derive(Debug, Clone)]
pub struct PlantedLp {
    pub lp: LpData,
    /// True block of every column.
    pub truth: Vec<usize>,
    /// A feasible point; even rows are equalities at it.
    pub point: Vec<f64>,
}

/// A block-diagonal LP with `sizes[b] = (rows, cols)` dense blocks placed
/// contiguously in the column order, rows shuffled. Column block sizes are
/// `1 mod k` so cyclic initialization leaves every block with a strict
/// majority in its own cluster.
pub fn planted_block_lp(k: usize, seed: u64) -> Result<PlantedLp> {
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    if k == 0 {
        return Err(Error::Generator("planted instance needs k >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sizes: Vec<(usize, usize)> = (0..k).map(|_| (rng.random_range(2..6), k * rng.random_range(1..4) + 1)).collect();
    let (m, n) = sizes.iter().fold((0, 0), |(a, b), s| (a + s.0, b + s.1));
    let mut perm: Vec<usize> = (0..m).collect();
    perm.shuffle(&mut rng);
    let mut a = vec![vec![0.0; n]; m];
    let mut truth = Vec::with_capacity(n);
    let (mut r0, mut c0) = (0, 0);
    for (b, &(rows, cols)) in sizes.iter().enumerate() {
        for i in r0..r0 + rows {
            for j in c0..c0 + cols {
                a[perm[i]][j] = rng.random_range(0.5..2.0);
            }
        }
        truth.extend(std::iter::repeat_n(b, cols));
        r0 += rows;
        c0 += cols;
    }
    let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    let ax: Vec<f64> = a.iter().map(|r| r.iter().zip(&x).map(|(p, q)| p * q).sum()).collect();
    let b_lo: Vec<f64> = ax.iter().enumerate().map(|(i, v)| if i % 2 == 0 { *v } else { v - 1.0 }).collect();
    let b_hi: Vec<f64> = ax.iter().map(|v| v + 1.0).enumerate().map(|(i, v)| if i % 2 == 0 { v - 1.0 } else { v }).collect();
    let cost = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let lp = LpData::from_dense(&a, cost, vec![0.0; n], vec![1.0; n], &b_lo, &b_hi)?;
    Ok(PlantedLp { lp, truth, point: x })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mbp::validate;

    /// Same partition up to relabeling.
    fn same_partition(a: &[usize], b: &[usize]) -> bool {
        let mut fwd = HashMap::new();
        let mut back = HashMap::new();
        a.iter().zip(b).all(|(x, y)| *fwd.entry(x).or_insert(y) == y && *back.entry(y).or_insert(x) == x)
    }

    #[test]
    fn planted_blocks_are_recovered() {
        for seed in 0..10 {
            let k = 2 + (seed as usize % 4);
            let p = planted_block_lp(k, seed).unwrap();
            let cc = lp_cocluster(&p.lp, k, 5).unwrap();
            assert!(same_partition(&cc.col_cluster, &p.truth), "seed {seed}");
            assert_eq!(cc.problem.constraints.len(), k);
            // Block diagonal: every block constraint touches one column block
            // and its slack.
            assert!(cc.problem.constraints.iter().all(|c| c.terms.len() == 2));
        }
    }

    #[test]
    fn ties_break_toward_smaller_clusters() {
        // Row 0 touches clusters 0 and 1 once each.
        let entries = [(0, 0, 1.0), (0, 1, 1.0)];
        let (row, col) = cocluster_labels(1, 2, &entries, 2, 1);
        assert_eq!(row, [0]);
        assert_eq!(col, [0, 0]);
    }

    #[test]
    fn empty_rows_and_columns_keep_their_clusters() {
        let entries = [(1, 1, 1.0), (1, 2, 1.0)];
        let (row, col) = cocluster_labels(2, 4, &entries, 3, 3);
        assert_eq!(row, [0, 1]);
        assert_eq!(col, [0, 1, 1, 0]);
    }

    #[test]
    fn single_cluster() {
        let cc = lp_cocluster(&planted_block_lp(3, 1).unwrap().lp, 1, 2).unwrap();
        assert!(cc.col_cluster.iter().all(|&c| c == 0));
        assert_eq!(cc.problem.constraints.len(), 1);
        let ids: Vec<&str> = cc.problem.blocks.iter().map(|b| b.id.as_str()).collect();
        assert_eq!(ids, ["x1", "s1"]);
    }

    #[test]
    fn equality_rows_get_point_slacks() {
        let inf = f64::INFINITY;
        let lp = LpData::from_dense(
            &[vec![1.0, 1.0, 0.0], vec![0.0, 1.0, 1.0]],
            vec![1.0, 2.0, 3.0],
            vec![0.0; 3],
            vec![inf; 3],
            &[2.0, 0.0],
            &[2.0, 5.0],
        )
        .unwrap();
        let cc = lp_cocluster(&lp, 2, 1).unwrap();
        assert!(validate(&cc.problem).is_empty());
        let slack = cc.problem.blocks.iter().find(|b| b.id.starts_with('s')).unwrap();
        let ProxFn::BoxIndicator { lower, upper } = &slack.prox else { panic!() };
        assert_eq!((lower.as_slice(), upper.as_slice()), (&[2.0, 0.0][..], &[2.0, 5.0][..]));

        // Equalities only. Rows 2 and 3 end up in cluster 2, which spans both
        // column blocks and needs no slack; row 1 alone touches block x1 and
        // gets a point slack.
        let a = [vec![1.0, 0.0, 1.0, 0.0], vec![0.0, 1.0, 0.0, 1.0], vec![1.0, 1.0, 0.0, 1.0]];
        let b = [1.0, 2.0, 3.0];
        let lp = LpData::from_dense(&a, vec![0.0; 4], vec![0.0; 4], vec![1.0; 4], &b, &b).unwrap();
        let cc = lp_cocluster(&lp, 2, 1).unwrap();
        assert_eq!(cc.row_cluster, [0, 1, 1]);
        assert_eq!(cc.col_cluster, [0, 1, 0, 1]);
        let ids: Vec<&str> = cc.problem.blocks.iter().map(|b| b.id.as_str()).collect();
        assert_eq!(ids, ["x1", "x2", "s1"]);
        assert_eq!(cc.problem.constraints[1].rhs, [2.0, 3.0]);
        let ProxFn::BoxIndicator { lower, upper } = &cc.problem.blocks[2].prox else { panic!() };
        assert_eq!((lower.as_slice(), upper.as_slice()), (&[1.0][..], &[1.0][..]));
    }

    #[test]
    fn reformulation_preserves_objective_and_feasibility() {
        let PlantedLp { lp, point: x, .. } = planted_block_lp(3, 7).unwrap();
        let cc = lp_cocluster(&lp, 3, 5).unwrap();
        assert!(lp.violation(&x) < 1e-12);
        let mut sol: HashMap<String, Vec<f64>> =
            cc.block_columns.iter().map(|(id, cols)| (id.clone(), cols.iter().map(|&j| x[j]).collect())).collect();
        assert_eq!(cc.lp_point(&sol).unwrap(), x);
        let a = lp.to_dense();
        for c in &cc.problem.constraints {
            let r = c.id[1..].parse::<usize>().unwrap() - 1;
            let rows: Vec<usize> = (0..a.len()).filter(|&i| cc.row_cluster[i] == r).collect();
            let s = format!("s{}", r + 1);
            sol.insert(s, rows.iter().map(|&i| a[i].iter().zip(&x).map(|(p, q)| p * q).sum()).collect());
        }
        let obj = crate::mbp::eval_objective(&cc.problem, &sol).unwrap();
        assert!((obj - lp.objective(&x)).abs() < 1e-12);
        // Pushing one coordinate outside its bounds makes the reformulation infinite.
        sol.get_mut("x1").unwrap()[0] = 2.0;
        assert_eq!(crate::mbp::eval_objective(&cc.problem, &sol).unwrap(), f64::INFINITY);
    }

    #[test]
    fn bad_inputs() {
        let lp = planted_block_lp(2, 0).unwrap().lp;
        assert!(lp_cocluster(&lp, 0, 1).is_err());
        assert!(lp_cocluster(&lp, 2, 0).is_err());
        let empty = LpData::from_dense(&[vec![0.0]], vec![1.0], vec![0.0], vec![1.0], &[0.0], &[1.0]).unwrap();
        assert!(lp_cocluster(&empty, 1, 1).is_err());
    }
}
