//! Three-resistor triangle network: minimize dissipated power subject to
//! Kirchhoff's current law at each node.

use crate::error::{Error, Result};
use crate::mbp::{Block, BlockConstraint, LinearMap, MultiblockProblem, ProxFn, SmoothFn, Term};

/// Blocks `I1..I3` with `R_i I_i^2`, constraints `C1: I1 - I3 = J1`,
/// `C2: I2 - I1 = J2`, `C3: I3 - I2 = J3`.
pub fn gen_circuit(r: [f64; 3], j: [f64; 3]) -> Result<MultiblockProblem> {
    if r.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::Generator(format!("resistances must be positive, got {r:?}")));
    }
    let total: f64 = j.iter().sum();
    if total.abs() > 1e-12 * j.iter().map(|v| v.abs()).fold(1.0, f64::max) {
        return Err(Error::Generator(format!("injections must sum to zero, got {total}")));
    }
    let blocks = (0..3)
        .map(|i| {
            Ok(Block {
                id: format!("I{}", i + 1),
                dim: 1,
                smooth: SmoothFn::diagonal_quadratic(&[2.0 * r[i]])?,
                prox: ProxFn::Zero,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let kcl = |k: usize, plus: usize, minus: usize| BlockConstraint {
        id: format!("C{k}"),
        terms: vec![
            Term { block: format!("I{plus}"), map: LinearMap::identity(1) },
            Term { block: format!("I{minus}"), map: LinearMap::scaled_identity(-1.0, 1) },
        ],
        rhs: vec![j[k - 1]],
    };
    Ok(MultiblockProblem { blocks, constraints: vec![kcl(1, 1, 3), kcl(2, 2, 1), kcl(3, 3, 2)] })
}
