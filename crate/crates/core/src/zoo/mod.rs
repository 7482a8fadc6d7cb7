//! Instance generators for the experiment families and the MPS reader.

pub mod circuit;
pub mod cocluster;
pub mod consensus;
pub mod lp;
pub mod mps;
pub mod network_flow;
pub mod random;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::mbp::MultiblockProblem;
use consensus::ConsensusSpec;
use network_flow::NetworkFlowSpec;
use random::RandomQpSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConsensusForm {
    /// `x_i = x_j` per edge; the coupling graph is the communication graph.
    #[default]
    Direct,
    /// Every edge pre-split through an edge variable.
    Standard,
}

fn default_r() -> [f64; 3] {
    [1e-6, 1e2, 1e8]
}

fn default_j() -> [f64; 3] {
    [-50.0, 100.0, -50.0]
}

fn default_k() -> usize {
    4
}

fn default_passes() -> usize {
    5
}

/// One instance family and its parameters, tagged by `family` in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Circuit {
        #[serde(default = "default_r")]
        r: [f64; 3],
        #[serde(default = "default_j")]
        j: [f64; 3],
    },
    NetworkFlow(NetworkFlowSpec),
    ConsensusLs {
        #[serde(flatten)]
        spec: ConsensusSpec,
        #[serde(default)]
        form: ConsensusForm,
    },
    /// Co-clustered LP read from `mps`, or a planted block-diagonal LP with
    /// `k` blocks when no file is given.
    LpCocluster {
        #[serde(default)]
        mps: Option<PathBuf>,
        #[serde(default = "default_k")]
        k: usize,
        #[serde(default = "default_passes")]
        passes: usize,
    },
    RandomQp(RandomQpSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    #[serde(flatten)]
    pub family: Family,
    #[serde(default)]
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn new(family: Family, seed: u64) -> Self {
        Self { family, seed }
    }

    pub fn family_name(&self) -> &'static str {
        match self.family {
            Family::Circuit { .. } => "circuit",
            Family::NetworkFlow(_) => "network_flow",
            Family::ConsensusLs { .. } => "consensus_ls",
            Family::LpCocluster { .. } => "lp_cocluster",
            Family::RandomQp(_) => "random_qp",
        }
    }

    /// `{family}-s{seed}`, used to match runs across methods.
    pub fn instance_name(&self) -> String {
        match &self.family {
            Family::Circuit { .. } => "circuit".into(),
            Family::LpCocluster { mps: Some(p), .. } => {
                format!("lp_cocluster-{}", p.file_stem().map(|s| s.to_string_lossy()).unwrap_or_default())
            }
            _ => format!("{}-s{}", self.family_name(), self.seed),
        }
    }

    pub fn generate(&self) -> Result<MultiblockProblem> {
        let seed = self.seed;
        match &self.family {
            Family::Circuit { r, j } => circuit::gen_circuit(*r, *j),
            Family::NetworkFlow(spec) => Ok(network_flow::gen_network_flow(spec, seed)?.problem),
            Family::ConsensusLs { spec, form } => {
                let inst = consensus::gen_consensus_ls(spec, seed)?;
                Ok(match form {
                    ConsensusForm::Direct => inst.direct,
                    ConsensusForm::Standard => inst.standard,
                })
            }
            Family::LpCocluster { mps: Some(path), k, passes } => {
                Ok(cocluster::lp_cocluster(&mps::read_mps(path)?, *k, *passes)?.problem)
            }
            Family::LpCocluster { mps: None, k, passes } => {
                Ok(cocluster::lp_cocluster(&cocluster::planted_block_lp(*k, seed)?.lp, *k, *passes)?.problem)
            }
            Family::RandomQp(spec) => random::gen_random_qp(spec, seed),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_json_is_tagged_by_family() {
        let spec: GeneratorSpec = serde_json::from_str(r#"{"family": "network_flow", "node_count": 8, "arc_count": 12, "seed": 3}"#).unwrap();
        assert_eq!(spec.seed, 3);
        let Family::NetworkFlow(nf) = &spec.family else { panic!() };
        assert_eq!((nf.node_count, nf.arc_count, nf.capacity_range), (8, 12, (0.0, 40.0)));
        assert_eq!(spec.instance_name(), "network_flow-s3");
        assert_eq!(spec.generate().unwrap().blocks.len(), 12);

        let spec: GeneratorSpec = serde_json::from_str(r#"{"family": "consensus_ls", "agent_count": 6, "dims": [3, 4], "form": "standard"}"#).unwrap();
        let Family::ConsensusLs { spec: cs, form } = &spec.family else { panic!() };
        assert_eq!((cs.agent_count, cs.noise_std, *form), (6, 0.1, ConsensusForm::Standard));

        let spec: GeneratorSpec = serde_json::from_str(r#"{"family": "circuit"}"#).unwrap();
        assert_eq!(spec.family, Family::Circuit { r: default_r(), j: default_j() });
    }

    #[test]
    fn every_family_round_trips_and_generates() {
        let families = [
            Family::Circuit { r: default_r(), j: default_j() },
            Family::NetworkFlow(NetworkFlowSpec::default()),
            Family::ConsensusLs { spec: ConsensusSpec { agent_count: 6, dims: (3, 4), ..Default::default() }, form: ConsensusForm::Direct },
            Family::LpCocluster { mps: None, k: 3, passes: 5 },
            Family::RandomQp(RandomQpSpec::default()),
        ];
        for f in families {
            let spec = GeneratorSpec::new(f, 11);
            let json = serde_json::to_string(&spec).unwrap();
            assert_eq!(serde_json::from_str::<GeneratorSpec>(&json).unwrap(), spec);
            let p = spec.generate().unwrap();
            p.ensure_valid().unwrap();
            assert_eq!(p, spec.generate().unwrap(), "{} is not deterministic", spec.family_name());
        }
    }
}
