//! Automatic two-block reformulation of multiblock optimization problems.
//!
//! The pipeline is:
//!
//! 1. describe the model as a [`MultiblockProblem`](mbp::MultiblockProblem),
//! 2. build its coupling graph ([`graph::build_coupling_graph`]),
//! 3. make the graph bipartite by edge subdivision ([`bipartize`]),
//! 4. assemble the canonical two-block problem ([`reformulate::assemble`]),
//! 5. run parallel ADMM or doubly-linearized FLiP-ADMM on it ([`admm::solve`]).
//!
//! [`zoo`] holds instance generators and the MPS reader, and [`pipeline`]
//! strings the stages together for the command line front end.

pub mod admm;
pub mod bipartize;
pub mod error;
pub mod graph;
pub mod linalg;
pub mod mbp;
pub mod pipeline;
pub mod reformulate;
pub mod zoo;

pub use error::{Error, Result};
