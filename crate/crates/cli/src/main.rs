//! `admm-forge`: generate instances, inspect coupling graphs, bipartize,
//! assemble two-block problems, run ADMM and compare methods.
//!
//! Verbosity comes from `ADMM_FORGE_LOG` (`error`, `warn`, `info`, `debug`,
//! or any `env_logger` filter).

mod args;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::Parser;

use admm_forge_core::bipartize::{build_milp, format_assignment, materialize, BipartizationDecision, DecisionFile};
use admm_forge_core::graph::build_coupling_graph;
use admm_forge_core::mbp::MultiblockProblem;
use admm_forge_core::pipeline::{self, RunManifest, RunSummary};
use admm_forge_core::reformulate::assemble_problem;
use admm_forge_core::zoo::mps;

use args::{Cli, Command};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ADMM_FORGE_LOG", "warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn out_dir(out: &Option<PathBuf>) -> Result<Option<&Path>> {
    if let Some(dir) = out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(out.as_deref())
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?).with_context(|| format!("writing {}", path.display()))
}

fn print_json(value: &impl serde::Serialize) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut stdout, value)?;
    writeln!(stdout)?;
    Ok(())
}

fn load_problem(path: &Path) -> Result<MultiblockProblem> {
    let p = MultiblockProblem::from_json_file(path).with_context(|| format!("reading problem {}", path.display()))?;
    p.ensure_valid()?;
    Ok(p)
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Generate(a) => {
            let spec = a.spec()?;
            let problem = spec.generate()?;
            match out_dir(&a.out)? {
                Some(dir) => {
                    let name = spec.instance_name();
                    problem.to_json_file(dir.join(format!("{name}.json")))?;
                    write_json(&dir.join(format!("{name}.spec.json")), &spec)?;
                    println!("{}", dir.join(format!("{name}.json")).display());
                }
                None => print_json(&problem)?,
            }
        }
        Command::Graph(a) => {
            let graph = build_coupling_graph(&load_problem(&a.problem)?)?;
            let metrics = graph.metrics(None)?;
            if let Some(dir) = out_dir(&a.out)? {
                graph.to_json_file(dir.join("coupling_graph.json"))?;
                fs::write(dir.join("coupling_graph.dot"), graph.to_dot())?;
                write_json(&dir.join("graph_metrics.json"), &metrics)?;
            }
            print_json(&metrics)?;
        }
        Command::Bipartize(a) => {
            let graph = build_coupling_graph(&load_problem(&a.problem)?)?;
            let part = pipeline::partition(&graph, a.method.method(), &a.method.milp_settings(), a.method.assignment.as_deref())?;
            let report = serde_json::json!({
                "method": a.method.method(),
                "partition_time_s": part.partition_time_s,
                "split_count": part.decision.split_count(),
                "metrics": part.bipartite.metrics(),
                "milp": part.milp,
            });
            if let Some(dir) = out_dir(&a.out)? {
                part.decision.to_file(&graph).write(dir.join("decision.json"))?;
                part.bipartite.to_json_file(dir.join("bipartite_graph.json"))?;
                fs::write(dir.join("bipartite_graph.dot"), part.bipartite.to_dot())?;
                fs::write(dir.join("assignment.tsv"), format_assignment(&graph, &part.decision.coloring))?;
                write_json(&dir.join("metrics.json"), &report)?;
            }
            print_json(&report)?;
        }
        Command::Assemble(a) => {
            let problem = load_problem(&a.problem)?;
            let graph = build_coupling_graph(&problem)?;
            let decision = match &a.decision {
                Some(path) => BipartizationDecision::from_file(&graph, &DecisionFile::read(path)?)?,
                None => pipeline::partition(&graph, a.method.method(), &a.method.milp_settings(), a.method.assignment.as_deref())?.decision,
            };
            let two = assemble_problem(&problem, &materialize(&graph, &decision)?)?.with_norm_bounds(a.method.contribution.into());
            match out_dir(&a.out)? {
                Some(dir) => {
                    two.to_json_file(dir.join("two_block.json"))?;
                    println!("{}", dir.join("two_block.json").display());
                }
                None => print_json(&two)?,
            }
        }
        Command::Solve(a) => {
            let manifest = a.manifest()?;
            run_manifest(&manifest)?;
        }
        Command::Run(a) => {
            let mut manifest = RunManifest::from_json_file(&a.manifest).with_context(|| format!("reading {}", a.manifest.display()))?;
            if a.out.is_some() {
                manifest.out = a.out;
            }
            run_manifest(&manifest)?;
        }
        Command::Compare(a) => {
            if a.summaries.len() < 2 {
                bail!("compare needs at least 2 summary files");
            }
            let summaries = a
                .summaries
                .iter()
                .map(|p| RunSummary::from_json_file(p).with_context(|| format!("reading summary {}", p.display())))
                .collect::<Result<Vec<_>>>()?;
            let rows = pipeline::compare(&summaries)?;
            match &a.out {
                Some(path) => pipeline::write_compare_csv(&rows, fs::File::create(path)?)?,
                None => pipeline::write_compare_csv(&rows, std::io::stdout().lock())?,
            }
        }
        Command::ExportMilp(a) => {
            let graph = build_coupling_graph(&load_problem(&a.problem)?)?;
            let s = a.method.milp_settings();
            let model = build_milp(&graph, s.objective, s.contribution, s.balance, Default::default())?;
            match &a.out {
                Some(path) => fs::write(path, model.to_lp())?,
                None => print!("{}", model.to_lp()),
            }
        }
        Command::Mps(a) => {
            let lp = mps::read_mps(&a.file).with_context(|| format!("reading {}", a.file.display()))?;
            let cc = admm_forge_core::zoo::cocluster::lp_cocluster(&lp, a.k, a.passes)?;
            match &a.out {
                Some(path) => cc.problem.to_json_file(path)?,
                None => print_json(&cc.problem)?,
            }
        }
    }
    Ok(())
}

fn run_manifest(manifest: &RunManifest) -> Result<()> {
    let out = pipeline::run(manifest)?;
    if let Some(dir) = out_dir(&manifest.out)? {
        manifest.to_json_file(dir.join("manifest.json"))?;
        out.trace.to_csv_file(dir.join("trace.csv"))?;
        out.summary.to_json_file(dir.join("summary.json"))?;
    }
    print_json(&out.summary)
}
