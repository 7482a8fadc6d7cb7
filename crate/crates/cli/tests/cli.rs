use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_admm-forge"));
    c.env_remove("ADMM_FORGE_LOG");
    c
}

fn run_ok(args: &[&str]) -> Output {
    let out = bin().args(args).output().unwrap();
    assert!(
        out.status.success(),
        "admm-forge {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json_stdout(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn read_json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn circuit(dir: &Path) -> PathBuf {
    run_ok(&["generate", "--family", "circuit", "--out", s(dir)]);
    dir.join("circuit.json")
}

#[test]
fn generate_and_graph_circuit() {
    let dir = tempfile::tempdir().unwrap();
    let p = circuit(dir.path());
    assert!(dir.path().join("circuit.spec.json").exists());
    let m = json_stdout(&run_ok(&["graph", s(&p), "--out", s(dir.path())]));
    assert_eq!((m["vertex_count"].as_u64(), m["edge_count"].as_u64()), (Some(3), Some(3)));
    assert_eq!(m["is_bipartite"], false);
    assert!(fs::read_to_string(dir.path().join("coupling_graph.dot")).unwrap().starts_with("graph"));
}

#[test]
fn generate_to_stdout_is_deterministic() {
    let a = run_ok(&["generate", "--family", "network_flow", "--set", "node_count=8", "--set", "arc_count=14", "--seed", "2"]);
    let b = run_ok(&["generate", "--family", "network_flow", "--set", "node_count=8", "--set", "arc_count=14", "--seed", "2"]);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(json_stdout(&a)["blocks"].as_array().unwrap().len(), 14);
}

#[test]
fn bipartize_bfs_splits_one_triangle_edge() {
    let dir = tempfile::tempdir().unwrap();
    let p = circuit(dir.path());
    let out = dir.path().join("bfs");
    let r = json_stdout(&run_ok(&["bipartize", s(&p), "--method", "bfs", "--out", s(&out)]));
    assert_eq!(r["split_count"], 1);
    assert_eq!(r["metrics"]["is_bipartite"], true);
    assert!(r["partition_time_s"].as_f64().unwrap() >= 0.0);
    for f in ["decision.json", "bipartite_graph.json", "bipartite_graph.dot", "assignment.tsv", "metrics.json"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let d = read_json(out.join("decision.json"));
    assert_eq!(d["coloring"].as_object().unwrap().len(), 3);
    let splits = d["edge_decisions"].as_object().unwrap().values().filter(|v| v[0] == 1).count();
    assert_eq!(splits, 1);
}

#[test]
fn milp_options_are_forwarded() {
    let dir = tempfile::tempdir().unwrap();
    let p = circuit(dir.path());
    let r = json_stdout(&run_ok(&["bipartize", s(&p), "--method", "milp", "--milp-gap", "0.2", "--milp-time-limit", "60"]));
    let milp = &r["milp"];
    assert!(milp["gap"].as_f64().unwrap() <= 0.2);
    assert!(milp["objective"].as_f64().unwrap() >= milp["bound"].as_f64().unwrap() - 1e-9);
    assert_eq!(r["metrics"]["is_bipartite"], true);
}

#[test]
fn assignment_file_round_trips_through_import() {
    let dir = tempfile::tempdir().unwrap();
    let p = circuit(dir.path());
    let out = dir.path().join("milp");
    run_ok(&["bipartize", s(&p), "--method", "milp", "--out", s(&out)]);
    let tsv = fs::read_to_string(out.join("assignment.tsv")).unwrap();
    assert!(tsv.starts_with('#'));
    assert!(tsv.lines().filter(|l| !l.starts_with('#')).all(|l| l.split('\t').count() == 2));

    let r = json_stdout(&run_ok(&[
        "bipartize", s(&p), "--method", "import", "--assignment", s(&out.join("assignment.tsv")), "--out", s(&dir.path().join("imp")),
    ]));
    assert_eq!(r["metrics"]["is_bipartite"], true);
    assert_eq!(read_json(dir.path().join("imp/decision.json")), read_json(out.join("decision.json")));

    // A hand-written file with comments and a degenerate all-one coloring.
    let hand = dir.path().join("ones.tsv");
    fs::write(&hand, "# constant model output\nI1\t1\nI2\t1\n\n# trailing\nI3\t1\n").unwrap();
    let r = json_stdout(&run_ok(&["bipartize", s(&p), "--method", "import", "--assignment", s(&hand)]));
    assert_eq!(r["split_count"], 3);
    assert_eq!(r["metrics"]["is_bipartite"], true);
}

#[test]
fn import_errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let p = circuit(dir.path());
    let missing = bin().args(["bipartize", s(&p), "--method", "import", "--assignment", "/nonexistent/f.tsv"]).output().unwrap();
    assert!(!missing.status.success());
    assert!(String::from_utf8_lossy(&missing.stderr).starts_with("error:"));

    let no_file = bin().args(["bipartize", s(&p), "--method", "import"]).output().unwrap();
    assert!(!no_file.status.success());

    let partial = dir.path().join("partial.tsv");
    fs::write(&partial, "I1\t0\nI2\t1\n").unwrap();
    let out = bin().args(["bipartize", s(&p), "--method", "import", "--assignment", s(&partial)]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("I3"));
}

#[test]
fn assemble_from_decision_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = circuit(dir.path());
    run_ok(&["bipartize", s(&p), "--method", "bfs", "--out", s(dir.path())]);
    run_ok(&["assemble", s(&p), "--decision", s(&dir.path().join("decision.json")), "--out", s(dir.path())]);
    let two = read_json(dir.path().join("two_block.json"));
    let blocks = two["left"].as_array().unwrap().len() + two["right"].as_array().unwrap().len();
    assert_eq!(blocks, 4);
    let mut bad = read_json(dir.path().join("decision.json"));
    bad["coloring"].as_object_mut().unwrap().remove("I1");
    fs::write(dir.path().join("bad.json"), bad.to_string()).unwrap();
    let out = bin().args(["assemble", s(&p), "--decision", s(&dir.path().join("bad.json"))]).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn solve_methods_agree_and_write_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.json");
    fs::write(
        dir.path().join("spec.json"),
        r#"{"family": "circuit", "r": [1.0, 2.0, 3.0], "j": [-1.0, 2.0, -1.0]}"#,
    )
    .unwrap();
    let problem = run_ok(&["generate", "--spec", s(&dir.path().join("spec.json"))]);
    fs::write(&p, &problem.stdout).unwrap();
    let mut objectives = Vec::new();
    for m in ["basic", "bfs", "milp"] {
        let out = dir.path().join(m);
        let sum = json_stdout(&run_ok(&["solve", s(&p), "--method", m, "--tol", "1e-8", "--out", s(&out)]));
        assert_eq!(sum["status"], "converged");
        for key in ["method", "iterations", "partition_time_s", "admm_time_s", "total_time_s", "objective", "status"] {
            assert!(sum.get(key).is_some(), "summary lacks {key}");
        }
        assert_eq!(read_json(out.join("summary.json")), sum);
        let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
        assert_eq!(trace.lines().next().unwrap(), "iter,primal_inf,dual_inf,objective,wall_time_s");
        assert_eq!(trace.lines().count() - 1, sum["iterations"].as_u64().unwrap() as usize);
        objectives.push(sum["objective"].as_f64().unwrap());
    }
    let spread = objectives.iter().cloned().fold(f64::MIN, f64::max) - objectives.iter().cloned().fold(f64::MAX, f64::min);
    assert!(spread < 1e-3, "{objectives:?}");
}

#[test]
fn solver_flags_reach_the_manifest_and_run_replays_it() {
    let dir = tempfile::tempdir().unwrap();
    let p = circuit(dir.path());
    let out = dir.path().join("run");
    let sum = json_stdout(&run_ok(&[
        "solve", s(&p), "--method", "bfs", "--rho", "100", "--tol", "1e-4", "--max-iters", "50000", "--log-every", "10", "--out", s(&out),
    ]));
    let man = read_json(out.join("manifest.json"));
    assert_eq!(man["solver"]["rho"], 100.0);
    assert_eq!(man["solver"]["tol"], 1e-4);
    assert_eq!(man["solver"]["max_iters"], 50000);
    let iters = sum["iterations"].as_u64().unwrap();
    assert!(iters <= 50000);
    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    let logged: Vec<u64> = trace.lines().skip(1).map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert!(logged.iter().all(|i| i % 10 == 0 || *i == iters));
    assert_eq!(*logged.last().unwrap(), iters);

    let replay = json_stdout(&run_ok(&["run", s(&out.join("manifest.json")), "--out", s(&dir.path().join("replay"))]));
    assert_eq!(replay["iterations"], sum["iterations"]);
    assert_eq!(replay["objective"], sum["objective"]);
}

#[test]
fn non_convergence_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let p = circuit(dir.path());
    let sum = json_stdout(&run_ok(&["solve", s(&p), "--method", "bfs", "--max-iters", "3"]));
    assert_eq!(sum["status"], "max_iters");
    assert_eq!(sum["iterations"], 3);
}

#[test]
fn consensus_seeds_compare_per_method() {
    let dir = tempfile::tempdir().unwrap();
    let mut summaries = Vec::new();
    for seed in 0..5 {
        for m in ["basic", "bfs"] {
            let out = dir.path().join(format!("{m}-{seed}"));
            run_ok(&[
                "solve", "--family", "consensus_ls", "--set", "agent_count=6", "--set", "dims=[4,3]", "--seed", &seed.to_string(),
                "--method", m, "--out", s(&out),
            ]);
            summaries.push(out.join("summary.json"));
        }
    }
    let mut args = vec!["compare".to_string()];
    args.extend(summaries.iter().map(|p| s(p).to_string()));
    args.extend(["--out".into(), s(&dir.path().join("cmp.csv")).into()]);
    run_ok(&args.iter().map(String::as_str).collect::<Vec<_>>());
    let csv = fs::read_to_string(dir.path().join("cmp.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    let header: Vec<&str> = lines[0].split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let rows: Vec<Vec<&str>> = lines[1..].iter().map(|l| l.split(',').collect()).collect();
    let norm: Vec<f64> = rows.iter().map(|r| r[col("norm_iterations")].parse().unwrap()).collect();
    assert!(norm.iter().any(|v| *v == 1.0) && norm.iter().all(|v| *v <= 1.0));
    assert!(rows.iter().all(|r| r[col("runs")] == "5"));

    // Dropping one bfs run makes the instance sets differ.
    let mut args = vec!["compare".to_string()];
    args.extend(summaries[..9].iter().map(|p| s(p).to_string()));
    let out = bin().args(&args).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("instance sets differ"));
}

#[test]
fn export_milp_and_mps() {
    let dir = tempfile::tempdir().unwrap();
    let p = circuit(dir.path());
    let lp = String::from_utf8(run_ok(&["export-milp", s(&p)]).stdout).unwrap();
    assert!(lp.contains("Minimize") && lp.contains("Subject To") && lp.trim_end().ends_with("End"));

    let mps = dir.path().join("tiny.mps");
    fs::write(
        &mps,
        "NAME T\nROWS\n N obj\n L r1\n E r2\nCOLUMNS\n x obj 1 r1 1\n y obj 1 r1 1\n y r2 1\n z obj -1 r2 1\nRHS\n rhs r1 4 r2 1\nENDATA\n",
    )
    .unwrap();
    let problem = json_stdout(&run_ok(&["mps", s(&mps), "--k", "2", "--passes", "3"]));
    assert!(!problem["blocks"].as_array().unwrap().is_empty());
    let bad = dir.path().join("bad.mps");
    fs::write(&bad, "NAME T\nCOLUMNS\n x obj 1\nENDATA\n").unwrap();
    let out = bin().args(["mps", s(&bad)]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("ROWS"));
}

#[test]
fn log_level_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let p = circuit(dir.path());
    let quiet = bin().args(["solve", s(&p), "--max-iters", "5"]).output().unwrap();
    assert!(quiet.stderr.is_empty());
    let loud = bin().args(["solve", s(&p), "--max-iters", "5"]).env("ADMM_FORGE_LOG", "debug").output().unwrap();
    assert!(String::from_utf8_lossy(&loud.stderr).contains("DEBUG"));
}

#[test]
fn bad_arguments_are_rejected() {
    assert!(!bin().args(["solve", "--method", "greedy", "x.json"]).output().unwrap().status.success());
    assert!(!bin().args(["solve", "/nonexistent.json"]).output().unwrap().status.success());
    assert!(!bin().args(["solve"]).output().unwrap().status.success());
    let dir = tempfile::tempdir().unwrap();
    let p = circuit(dir.path());
    let out = bin().args(["solve", s(&p), "--rho=-1"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("rho"));
}
