//! Multiblock problem data model and the function library used by every
//! block subproblem.

mod linear_map;
mod problem;
mod prox;
mod smooth;
mod system;

pub use linear_map::{LinearMap, MapKind};
pub use problem::{eval_objective, validate, Block, BlockConstraint, MultiblockProblem, Term, Violation};
pub use prox::{AffineSet, ProxFn, EQUALITY_TOL};
pub use smooth::{SmoothFn, SmoothKind};
pub use system::{LinearRow, LinearSystem};
