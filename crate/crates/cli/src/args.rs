use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{Map, Value};

use admm_forge_core::admm::{Algorithm, SolverConfig};
use admm_forge_core::bipartize::{Balance, ContributionMode};
use admm_forge_core::pipeline::{Method, MilpSettings, RunManifest};
use admm_forge_core::zoo::GeneratorSpec;

#[derive(Debug, Parser)]
#[command(name = "admm-forge", version, about = "Bipartize multiblock problems and solve them with two-block ADMM")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate an instance (problem JSON) from a family and seed.
    Generate(GenerateArgs),
    /// Build the coupling graph and report its metrics.
    Graph(GraphArgs),
    /// Bipartize the coupling graph; writes decision, bipartite graph, assignment and metrics.
    Bipartize(BipartizeArgs),
    /// Assemble the two-block problem from a decision file or a method.
    Assemble(AssembleArgs),
    /// Run the full pipeline; writes trace.csv, summary.json and manifest.json.
    Solve(SolveArgs),
    /// Re-run a saved manifest.
    Run(RunArgs),
    /// Aggregate run summaries per method into normalized CSV.
    Compare(CompareArgs),
    /// Write the bipartization MILP in CPLEX LP format.
    ExportMilp(ExportMilpArgs),
    /// Co-cluster an MPS file into a multiblock problem.
    Mps(MpsArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Basic,
    Bfs,
    Dfs,
    Milp,
    Import,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Basic => Method::Basic,
            MethodArg::Bfs => Method::Bfs,
            MethodArg::Dfs => Method::Dfs,
            MethodArg::Milp => Method::Milp,
            MethodArg::Import => Method::Import,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ContributionArg {
    Exact,
    Frobenius,
}

impl From<ContributionArg> for ContributionMode {
    fn from(c: ContributionArg) -> Self {
        match c {
            ContributionArg::Exact => ContributionMode::Exact,
            ContributionArg::Frobenius => ContributionMode::Frobenius,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlgorithmArg {
    Exact,
    Flip,
}

#[derive(Debug, Args)]
pub struct MethodArgs {
    #[arg(long, value_enum, default_value = "bfs")]
    method: MethodArg,
    /// Assignment file (`id<TAB>color`) for `--method import`.
    #[arg(long)]
    pub assignment: Option<PathBuf>,
    #[arg(long, default_value_t = 0.01)]
    pub milp_gap: f64,
    #[arg(long, default_value_t = 60.0)]
    pub milp_time_limit: f64,
    #[arg(long, value_enum, default_value = "frobenius")]
    pub contribution: ContributionArg,
    /// Weight of the MILP's soft side-balance penalty (off when absent).
    #[arg(long)]
    pub balance_weight: Option<f64>,
}

impl MethodArgs {
    pub fn method(&self) -> Method {
        self.method.into()
    }

    pub fn milp_settings(&self) -> MilpSettings {
        MilpSettings {
            gap: self.milp_gap,
            time_limit_s: self.milp_time_limit,
            contribution: self.contribution.into(),
            balance: self.balance_weight.map(|weight| Balance { weight, target: None }),
            ..Default::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    #[arg(long, default_value_t = 1.0)]
    pub rho: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iters: usize,
    #[arg(long, value_enum, default_value = "exact")]
    pub algorithm: AlgorithmArg,
    /// Safety factor on the linearized step, in (0, 1].
    #[arg(long, default_value_t = 1.0)]
    pub step_scale: f64,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// Trace every N-th iteration.
    #[arg(long, default_value_t = 1)]
    pub log_every: usize,
}

impl SolverArgs {
    pub fn config(&self) -> SolverConfig {
        SolverConfig {
            rho: self.rho,
            tol: self.tol,
            max_iters: self.max_iters,
            algorithm: match self.algorithm {
                AlgorithmArg::Exact => Algorithm::ExactAdmm,
                AlgorithmArg::Flip => Algorithm::FlipAdmm,
            },
            step_scale: self.step_scale,
            threads: self.threads,
            log_every: self.log_every,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Generator spec JSON (`{"family": ..., "seed": ..., ...}`).
    #[arg(long, conflicts_with = "family")]
    pub spec: Option<PathBuf>,
    /// circuit, network_flow, consensus_ls, lp_cocluster or random_qp.
    #[arg(long)]
    pub family: Option<String>,
    /// Family parameter override, `key=value` with a JSON value.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory for `<instance>.json` and `<instance>.spec.json`; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Builds a generator spec from a file or family name, `--set` overrides and
/// `--seed`.
pub fn build_spec(spec: Option<&PathBuf>, family: Option<&str>, sets: &[String], seed: Option<u64>) -> Result<GeneratorSpec> {
    let mut obj: Map<String, Value> = match (spec, family) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            match serde_json::from_str(&text)? {
                Value::Object(m) => m,
                _ => bail!("{} is not a JSON object", path.display()),
            }
        }
        (None, Some(f)) => Map::from_iter([("family".to_string(), Value::String(f.to_string()))]),
        (None, None) => bail!("either --spec or --family is required"),
    };
    for s in sets {
        let (k, v) = s.split_once('=').with_context(|| format!("--set expects KEY=VALUE, got '{s}'"))?;
        let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
        obj.insert(k.to_string(), value);
    }
    if let Some(seed) = seed {
        obj.insert("seed".into(), seed.into());
    }
    serde_json::from_value(Value::Object(obj)).context("invalid generator spec")
}

impl GenerateArgs {
    pub fn spec(&self) -> Result<GeneratorSpec> {
        build_spec(self.spec.as_ref(), self.family.as_deref(), &self.sets, self.seed)
    }
}

#[derive(Debug, Args)]
pub struct GraphArgs {
    pub problem: PathBuf,
    /// Directory for coupling_graph.json/.dot and graph_metrics.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BipartizeArgs {
    pub problem: PathBuf,
    #[command(flatten)]
    pub method: MethodArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AssembleArgs {
    pub problem: PathBuf,
    /// Decision JSON written by `bipartize`; overrides --method.
    #[arg(long)]
    pub decision: Option<PathBuf>,
    #[command(flatten)]
    pub method: MethodArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Problem JSON; alternatively use --generator or --family.
    pub problem: Option<PathBuf>,
    /// Generator spec JSON.
    #[arg(long, conflicts_with_all = ["problem", "family"])]
    pub generator: Option<PathBuf>,
    #[arg(long, conflicts_with = "problem")]
    pub family: Option<String>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub method: MethodArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl SolveArgs {
    pub fn manifest(&self) -> Result<RunManifest> {
        let generator = match (&self.problem, &self.generator, &self.family) {
            (Some(_), _, _) => None,
            (None, None, None) => bail!("a problem file, --generator or --family is required"),
            (None, g, f) => Some(build_spec(g.as_ref(), f.as_deref(), &self.sets, self.seed)?),
        };
        let m = RunManifest {
            input: self.problem.clone(),
            generator,
            method: self.method.method(),
            assignment: self.method.assignment.clone(),
            solver: self.solver.config(),
            milp: self.method.milp_settings(),
            out: self.out.clone(),
        };
        m.validate()?;
        Ok(m)
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    pub manifest: PathBuf,
    /// Overrides the manifest's output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(required = true)]
    pub summaries: Vec<PathBuf>,
    /// CSV path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportMilpArgs {
    pub problem: PathBuf,
    #[command(flatten)]
    pub method: MethodArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MpsArgs {
    pub file: PathBuf,
    #[arg(long, default_value_t = 4)]
    pub k: usize,
    #[arg(long, default_value_t = 5)]
    pub passes: usize,
    /// Problem JSON path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
