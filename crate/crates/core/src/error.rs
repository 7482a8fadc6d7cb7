use thiserror::Error;

use crate::mbp::Violation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension {
        context: String,
        expected: usize,
        found: usize,
    },

    #[error("invalid linear map: {0}")]
    InvalidMap(String),

    #[error("invalid function: {0}")]
    InvalidFunction(String),

    #[error("affine set {{x : Cx = d}} is empty (residual {residual:.3e})")]
    InconsistentAffine { residual: f64 },

    #[error("invalid problem ({} violation(s)): {}", .0.len(), join(.0))]
    InvalidProblem(Vec<Violation>),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("partition inconsistent with graph: {0}")]
    InvalidPartition(String),

    #[error("unknown or missing vertex ids: {}", .0.join(", "))]
    Vertices(Vec<String>),

    #[error("decision does not produce a bipartite graph: {0}")]
    NotBipartite(String),

    #[error("non-finite coupling data on vertex {0}")]
    NonFinite(String),

    #[error("block {block} has no closed-form exact update ({reason}); use the flip algorithm")]
    UnsupportedBlock { block: String, reason: String },

    #[error("block {0} has no finite Lipschitz bound")]
    InfiniteLipschitz(String),

    #[error("cannot eliminate auxiliary block {block}: {reason}")]
    NonEliminable { block: String, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{0}")]
    Generator(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn join(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

pub(crate) fn check_dim(context: impl FnOnce() -> String, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension {
            context: context(),
            expected,
            found,
        })
    }
}
