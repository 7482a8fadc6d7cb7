use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mbp::{LinearMap, ProxFn, SmoothFn};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub id: String,
    pub dim: usize,
    pub smooth: SmoothFn,
    pub prox: ProxFn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub block: String,
    pub map: LinearMap,
}

/// `sum_{i in S_k} A^k_i x_i = b^k`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockConstraint {
    pub id: String,
    pub terms: Vec<Term>,
    pub rhs: Vec<f64>,
}

impl BlockConstraint {
    /// Distinct block ids referenced, in first-appearance order.
    pub fn block_set(&self) -> Vec<&str> {
        let mut seen = BTreeSet::new();
        self.terms
            .iter()
            .filter(|t| seen.insert(t.block.as_str()))
            .map(|t| t.block.as_str())
            .collect()
    }
}

/// `min sum_i f_i(x_i) + g_i(x_i)` subject to sparse linear block constraints.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MultiblockProblem {
    pub blocks: Vec<Block>,
    pub constraints: Vec<BlockConstraint>,
}

impl MultiblockProblem {
    pub fn block_index(&self) -> HashMap<&str, usize> {
        self.blocks.iter().enumerate().map(|(i, b)| (b.id.as_str(), i)).collect()
    }

    pub fn block(&self, id: &str) -> Option<&Block> {
        self.blocks.iter().find(|b| b.id == id)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn to_json_file(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    /// Errors with every violation found by [`validate`].
    pub fn ensure_valid(&self) -> Result<()> {
        let v = validate(self);
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidProblem(v))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    DuplicateBlockId(String),
    DuplicateConstraintId(String),
    ZeroDimension(String),
    SmoothDimension { block: String, expected: usize, found: usize },
    ProxDimension { block: String, expected: usize, found: usize },
    UnknownBlock { constraint: String, block: String },
    TooFewBlocks { constraint: String, count: usize },
    EmptyRhs(String),
    MapOutDim { constraint: String, block: String, rhs_len: usize, out_dim: usize },
    MapInDim { constraint: String, block: String, block_dim: usize, in_dim: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::DuplicateBlockId(id) => write!(f, "duplicate block id {id}"),
            Self::DuplicateConstraintId(id) => write!(f, "duplicate constraint id {id}"),
            Self::ZeroDimension(id) => write!(f, "block {id} has dimension 0"),
            Self::SmoothDimension { block, expected, found } => {
                write!(f, "block {block}: smooth term has dimension {found}, block has {expected}")
            }
            Self::ProxDimension { block, expected, found } => {
                write!(f, "block {block}: prox term has dimension {found}, block has {expected}")
            }
            Self::UnknownBlock { constraint, block } => {
                write!(f, "constraint {constraint} references unknown block {block}")
            }
            Self::TooFewBlocks { constraint, count } => {
                write!(f, "constraint {constraint} couples {count} block(s); |S_k| >= 2 is required")
            }
            Self::EmptyRhs(c) => write!(f, "constraint {c} has an empty right-hand side"),
            Self::MapOutDim { constraint, block, rhs_len, out_dim } => write!(
                f,
                "constraint {constraint}, block {block}: map out_dim {out_dim} != rhs length {rhs_len}"
            ),
            Self::MapInDim { constraint, block, block_dim, in_dim } => write!(
                f,
                "constraint {constraint}, block {block}: map in_dim {in_dim} != block dim {block_dim}"
            ),
        }
    }
}

/// Every structural problem of `problem`; an empty list means valid.
pub fn validate(problem: &MultiblockProblem) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut dims: HashMap<&str, usize> = HashMap::new();
    for b in &problem.blocks {
        if dims.insert(b.id.as_str(), b.dim).is_some() {
            out.push(Violation::DuplicateBlockId(b.id.clone()));
        }
        if b.dim == 0 {
            out.push(Violation::ZeroDimension(b.id.clone()));
        }
        if let Some(d) = b.smooth.dim().filter(|d| *d != b.dim) {
            out.push(Violation::SmoothDimension { block: b.id.clone(), expected: b.dim, found: d });
        }
        if let Some(d) = b.prox.dim().filter(|d| *d != b.dim) {
            out.push(Violation::ProxDimension { block: b.id.clone(), expected: b.dim, found: d });
        }
    }
    let mut cids = BTreeSet::new();
    for c in &problem.constraints {
        if !cids.insert(c.id.as_str()) {
            out.push(Violation::DuplicateConstraintId(c.id.clone()));
        }
        if c.rhs.is_empty() {
            out.push(Violation::EmptyRhs(c.id.clone()));
        }
        let count = c.block_set().len();
        if count < 2 {
            out.push(Violation::TooFewBlocks { constraint: c.id.clone(), count });
        }
        for t in &c.terms {
            let Some(&dim) = dims.get(t.block.as_str()) else {
                out.push(Violation::UnknownBlock { constraint: c.id.clone(), block: t.block.clone() });
                continue;
            };
            if t.map.out_dim() != c.rhs.len() {
                out.push(Violation::MapOutDim {
                    constraint: c.id.clone(),
                    block: t.block.clone(),
                    rhs_len: c.rhs.len(),
                    out_dim: t.map.out_dim(),
                });
            }
            if t.map.in_dim() != dim {
                out.push(Violation::MapInDim {
                    constraint: c.id.clone(),
                    block: t.block.clone(),
                    block_dim: dim,
                    in_dim: t.map.in_dim(),
                });
            }
        }
    }
    out
}

/// `sum_i f_i(x_i) + g_i(x_i)`, summed in block-id order so the result does not
/// depend on how blocks are listed. Indicators make the value `+inf`.
pub fn eval_objective(problem: &MultiblockProblem, point: &HashMap<String, Vec<f64>>) -> Result<f64> {
    let mut blocks: Vec<&super::Block> = problem.blocks.iter().collect();
    blocks.sort_by(|a, b| a.id.cmp(&b.id));
    let mut total = 0.0;
    for b in blocks {
        let x = point
            .get(&b.id)
            .ok_or_else(|| Error::Vertices(vec![b.id.clone()]))?;
        crate::error::check_dim(|| format!("point for block {}", b.id), b.dim, x.len())?;
        total += b.smooth.value(x) + b.prox.value(x);
    }
    Ok(total)
}
