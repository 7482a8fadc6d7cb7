//! End-to-end runs: problem -> coupling graph -> bipartization -> two-block
//! problem -> ADMM, with partition and ADMM wall time kept apart, plus the
//! aggregation used to compare methods over an instance set.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::admm::{self, AdmmState, AdmmTrace, SolverConfig, Termination};
use crate::bipartize::{
    basic_decision, bfs_bipartize, build_milp, import_decision_file, materialize, solve_milp, Balance, BipartiteGraph,
    BipartizationDecision, ContributionMode, MilpObjective, MilpOptions, MilpStatus, Traversal,
};
use crate::error::{Error, Result};
use crate::graph::{build_coupling_graph, CouplingGraph, GraphMetrics};
use crate::mbp::MultiblockProblem;
use crate::reformulate::{assemble_problem, TwoBlockProblem};
use crate::zoo::GeneratorSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Basic,
    Bfs,
    Dfs,
    Milp,
    Import,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Basic, Method::Bfs, Method::Dfs, Method::Milp, Method::Import];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Basic => "basic",
            Method::Bfs => "bfs",
            Method::Dfs => "dfs",
            Method::Milp => "milp",
            Method::Import => "import",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown method '{s}' (basic, bfs, dfs, milp, import)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MilpSettings {
    pub gap: f64,
    pub time_limit_s: f64,
    pub contribution: ContributionMode,
    pub objective: MilpObjective,
    pub balance: Option<Balance>,
}

impl Default for MilpSettings {
    fn default() -> Self {
        let o = MilpOptions::default();
        Self {
            gap: o.rel_gap,
            time_limit_s: o.time_limit_s,
            contribution: ContributionMode::default(),
            objective: MilpObjective::default(),
            balance: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MilpReport {
    pub objective: f64,
    pub bound: f64,
    pub gap: f64,
    pub status: MilpStatus,
    pub nodes: u64,
}

#[derive(Debug, Clone)]
pub struct Partition {
    pub decision: BipartizationDecision,
    pub bipartite: BipartiteGraph,
    pub partition_time_s: f64,
    pub milp: Option<MilpReport>,
}

/// Bipartizes `graph` with `method`; the time covers deciding and
/// materializing.
pub fn partition(graph: &CouplingGraph, method: Method, milp: &MilpSettings, assignment: Option<&Path>) -> Result<Partition> {
    let start = Instant::now();
    let mut report = None;
    let decision = match method {
        Method::Basic => basic_decision(graph),
        Method::Bfs => bfs_bipartize(graph, Traversal::Bfs),
        Method::Dfs => bfs_bipartize(graph, Traversal::Dfs),
        Method::Milp => {
            let options = MilpOptions { rel_gap: milp.gap, time_limit_s: milp.time_limit_s, ..Default::default() };
            let model = build_milp(graph, milp.objective, milp.contribution, milp.balance, options)?;
            let sol = solve_milp(&model);
            report = Some(MilpReport { objective: sol.objective, bound: sol.bound, gap: sol.gap, status: sol.status, nodes: sol.nodes });
            sol.decision
        }
        Method::Import => {
            let path = assignment.ok_or_else(|| Error::Config("method import requires an assignment file".into()))?;
            import_decision_file(graph, path)?
        }
    };
    let bipartite = materialize(graph, &decision)?;
    Ok(Partition { decision, bipartite, partition_time_s: start.elapsed().as_secs_f64(), milp: report })
}

/// Everything needed to repeat a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorSpec>,
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assignment: Option<PathBuf>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub milp: MilpSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl RunManifest {
    pub fn validate(&self) -> Result<()> {
        if self.input.is_some() == self.generator.is_some() {
            return Err(Error::Config("exactly one of an input problem and a generator spec is required".into()));
        }
        if self.method == Method::Import && self.assignment.is_none() {
            return Err(Error::Config("method import requires an assignment file".into()));
        }
        self.solver.validate()
    }

    pub fn instance_name(&self) -> String {
        match (&self.input, &self.generator) {
            (Some(p), _) => p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
            (None, Some(g)) => g.instance_name(),
            (None, None) => String::new(),
        }
    }

    pub fn load_problem(&self) -> Result<MultiblockProblem> {
        match (&self.input, &self.generator) {
            (Some(p), None) => MultiblockProblem::from_json_file(p),
            (None, Some(g)) => g.generate(),
            _ => Err(Error::Config("exactly one of an input problem and a generator spec is required".into())),
        }
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn to_json_file(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub instance: String,
    pub method: Method,
    pub iterations: usize,
    pub partition_time_s: f64,
    pub admm_time_s: f64,
    pub total_time_s: f64,
    pub objective: f64,
    pub status: Termination,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub graph: GraphMetrics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub milp: Option<MilpReport>,
}

impl RunSummary {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn to_json_file(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub summary: RunSummary,
    pub partition: Partition,
    pub problem: TwoBlockProblem,
    pub state: AdmmState,
    pub trace: AdmmTrace,
}

/// Runs the whole pipeline. Non-convergence is not an error; it shows up
/// as the summary status.
pub fn run(manifest: &RunManifest) -> Result<RunOutcome> {
    manifest.validate()?;
    let total = Instant::now();
    let mbp = manifest.load_problem()?;
    mbp.ensure_valid()?;
    let graph = build_coupling_graph(&mbp)?;
    let partition = partition(&graph, manifest.method, &manifest.milp, manifest.assignment.as_deref())?;
    let problem = assemble_problem(&mbp, &partition.bipartite)?;
    let admm_start = Instant::now();
    let (state, trace) = admm::solve(&problem, &manifest.solver)?;
    let admm_time_s = admm_start.elapsed().as_secs_f64();
    let last = trace.last().cloned();
    let summary = RunSummary {
        instance: manifest.instance_name(),
        method: manifest.method,
        iterations: trace.iterations,
        partition_time_s: partition.partition_time_s,
        admm_time_s,
        total_time_s: total.elapsed().as_secs_f64(),
        objective: last.as_ref().map_or(f64::NAN, |e| e.objective),
        status: trace.termination,
        primal_residual: last.as_ref().map_or(f64::NAN, |e| e.primal_inf),
        dual_residual: last.as_ref().map_or(f64::NAN, |e| e.dual_inf),
        graph: partition.bipartite.metrics(),
        milp: partition.milp.clone(),
    };
    log::info!(
        "{} {}: {} after {} iterations, objective {:.6e}",
        summary.instance,
        summary.method,
        summary.status,
        summary.iterations,
        summary.objective
    );
    Ok(RunOutcome { summary, partition, problem, state, trace })
}

/// Per-method means over an instance set. `norm_*` divide by the largest
/// method mean; `stack_partition + stack_admm` splits `norm_total_time`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodAggregate {
    pub method: Method,
    pub runs: usize,
    pub converged: usize,
    pub mean_iterations: f64,
    pub mean_partition_time_s: f64,
    pub mean_admm_time_s: f64,
    pub mean_total_time_s: f64,
    pub mean_average_degree: f64,
    pub mean_balance_score: f64,
    pub norm_iterations: f64,
    pub norm_total_time: f64,
    pub stack_partition: f64,
    pub stack_admm: f64,
}

fn normalized(v: f64, max: f64) -> f64 {
    if max > 0.0 {
        v / max
    } else {
        1.0
    }
}

/// Aggregates summaries by method. Every method must cover the same
/// instances.
pub fn compare(summaries: &[RunSummary]) -> Result<Vec<MethodAggregate>> {
    if summaries.len() < 2 {
        return Err(Error::Config(format!("compare needs at least 2 summaries, got {}", summaries.len())));
    }
    let mut groups: BTreeMap<Method, Vec<&RunSummary>> = BTreeMap::new();
    for s in summaries {
        groups.entry(s.method).or_default().push(s);
    }
    let sets: Vec<(Method, BTreeSet<&str>)> =
        groups.iter().map(|(m, v)| (*m, v.iter().map(|s| s.instance.as_str()).collect())).collect();
    for (m, set) in &sets[1..] {
        if *set != sets[0].1 {
            let diff: Vec<&str> = set.symmetric_difference(&sets[0].1).copied().collect();
            return Err(Error::Config(format!(
                "instance sets differ between {} and {m}: {}",
                sets[0].0,
                diff.join(", ")
            )));
        }
    }
    let mean = |v: &[&RunSummary], f: &dyn Fn(&RunSummary) -> f64| v.iter().map(|s| f(s)).sum::<f64>() / v.len() as f64;
    let mut out: Vec<MethodAggregate> = groups
        .iter()
        .map(|(m, v)| MethodAggregate {
            method: *m,
            runs: v.len(),
            converged: v.iter().filter(|s| s.status == Termination::Converged).count(),
            mean_iterations: mean(v, &|s| s.iterations as f64),
            mean_partition_time_s: mean(v, &|s| s.partition_time_s),
            mean_admm_time_s: mean(v, &|s| s.admm_time_s),
            mean_total_time_s: mean(v, &|s| s.total_time_s),
            mean_average_degree: mean(v, &|s| s.graph.average_degree),
            mean_balance_score: mean(v, &|s| s.graph.balance_score.unwrap_or(f64::NAN)),
            norm_iterations: 0.0,
            norm_total_time: 0.0,
            stack_partition: 0.0,
            stack_admm: 0.0,
        })
        .collect();
    let max_it = out.iter().map(|a| a.mean_iterations).fold(0.0, f64::max);
    let max_t = out.iter().map(|a| a.mean_total_time_s).fold(0.0, f64::max);
    for a in &mut out {
        a.norm_iterations = normalized(a.mean_iterations, max_it);
        a.norm_total_time = normalized(a.mean_total_time_s, max_t);
        a.stack_partition = normalized(a.mean_partition_time_s, max_t);
        a.stack_admm = normalized(a.mean_admm_time_s, max_t);
    }
    Ok(out)
}

pub const COMPARE_HEADER: &str = "method,runs,converged,mean_iterations,mean_partition_time_s,mean_admm_time_s,mean_total_time_s,\
mean_average_degree,mean_balance_score,norm_iterations,norm_total_time,stack_partition,stack_admm";

pub fn write_compare_csv(rows: &[MethodAggregate], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "{COMPARE_HEADER}")?;
    for a in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            a.method,
            a.runs,
            a.converged,
            a.mean_iterations,
            a.mean_partition_time_s,
            a.mean_admm_time_s,
            a.mean_total_time_s,
            a.mean_average_degree,
            a.mean_balance_score,
            a.norm_iterations,
            a.norm_total_time,
            a.stack_partition,
            a.stack_admm
        )?;
    }
    Ok(())
}
