use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::*;
use crate::bipartize::{basic_decision, bfs_bipartize, decision_from_coloring, materialize, BipartizationDecision, Traversal};
use crate::graph::{build_coupling_graph, CouplingGraph};
use crate::mbp::{Block, BlockConstraint, LinearMap, MultiblockProblem, ProxFn, SmoothFn, Term};
use crate::reformulate::{assemble_problem, Coupling, Provenance, SideBlock};
use crate::zoo::circuit::gen_circuit;
use crate::zoo::random::{gen_random_qp, RandomQpSpec};

fn side(id: &str, dim: usize, smooth: SmoothFn, prox: ProxFn) -> SideBlock {
    SideBlock { id: id.into(), dim, smooth, prox, provenance: Provenance::Original { vertex: 0 } }
}

fn reformulate(p: &MultiblockProblem, d: impl FnOnce(&CouplingGraph) -> BipartizationDecision) -> TwoBlockProblem {
    let g = build_coupling_graph(p).unwrap();
    assemble_problem(p, &materialize(&g, &d(&g)).unwrap()).unwrap()
}

fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

const R: [f64; 3] = [1e-6, 1e2, 1e8];
const J: [f64; 3] = [-50.0, 100.0, -50.0];

/// Minimizer of `sum R_i I_i^2` under KCL: `I2 = I1 + J2`, `I3 = I1 - J1`
/// leave one free current, whose optimality condition is scalar.
fn circuit_oracle(r: [f64; 3], j: [f64; 3]) -> ([f64; 3], f64) {
    let i1 = (r[2] * j[0] - r[1] * j[1]) / (r[0] + r[1] + r[2]);
    let i = [i1, i1 + j[1], i1 - j[0]];
    (i, (0..3).map(|k| r[k] * i[k] * i[k]).sum())
}

fn circuit_split(k: usize, r: [f64; 3], j: [f64; 3]) -> TwoBlockProblem {
    let p = gen_circuit(r, j).unwrap();
    let coloring = match k {
        1 => vec![0, 1, 0],
        2 => vec![0, 0, 1],
        _ => vec![1, 0, 0],
    };
    reformulate(&p, |g| decision_from_coloring(g, coloring).unwrap())
}

fn currents(t: &TwoBlockProblem, s: &AdmmState) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (b, v) in t.left.iter().zip(&s.x).chain(t.right.iter().zip(&s.z)) {
        if let Some(k) = b.id.strip_prefix('I') {
            out[k.parse::<usize>().unwrap() - 1] = v[0];
        }
    }
    out
}

#[test]
fn config_validation() {
    assert!(SolverConfig::default().validate().is_ok());
    for bad in [
        SolverConfig { rho: 0.0, ..Default::default() },
        SolverConfig { tol: -1.0, ..Default::default() },
        SolverConfig { step_scale: 1.5, ..Default::default() },
        SolverConfig { step_scale: 0.0, ..Default::default() },
        SolverConfig { threads: 0, ..Default::default() },
        SolverConfig { max_iters: 0, ..Default::default() },
    ] {
        assert!(matches!(bad.validate(), Err(Error::Config(_))), "{bad:?}");
    }
}

#[test]
fn config_json_uses_snake_case_algorithms() {
    let c: SolverConfig = serde_json::from_str(r#"{"algorithm": "flip_admm", "rho": 10}"#).unwrap();
    assert_eq!(c.algorithm, Algorithm::FlipAdmm);
    assert_eq!(c.rho, 10.0);
    assert_eq!(c.tol, 1e-4);
}

#[test]
fn circuit_split_on_first_constraint_matches_the_oracle() {
    // Power is sensitive to KCL error through R3 = 1e8, so the run continues
    // past 1e-4 until the power comparison is meaningful.
    let t = circuit_split(1, R, J);
    let (state, trace) = solve(&t, &SolverConfig { rho: 1.0, tol: 1e-9, max_iters: 100_000, ..Default::default() }).unwrap();
    assert_eq!(trace.termination, Termination::Converged, "{:?}", trace.last());
    assert!(trace.entries.iter().any(|e| e.primal_inf.max(e.dual_inf) < 1e-4));
    let i = currents(&t, &state);
    assert!((i[0] - i[2] - J[0]).abs() < 1e-4);
    assert!((i[1] - i[0] - J[1]).abs() < 1e-4);
    assert!((i[2] - i[1] - J[2]).abs() < 1e-4);
    let (_, power) = circuit_oracle(R, J);
    let got: f64 = (0..3).map(|k| R[k] * i[k] * i[k]).sum();
    assert!((got - power).abs() <= 1e-6 * power, "{got} vs {power}");
    // The residual sum trends down: the last tenth is far below the first.
    let sums: Vec<f64> = trace.entries.iter().map(|e| e.primal_inf + e.dual_inf).collect();
    let n = sums.len();
    let head = sums[..n.div_ceil(10)].iter().cloned().fold(0.0, f64::max);
    let tail = sums[n - n.div_ceil(10)..].iter().cloned().fold(0.0, f64::max);
    assert!(tail < 1e-2 * head, "head {head} tail {tail}");
}

#[test]
fn circuit_zero_injection_stays_at_zero() {
    let t = circuit_split(2, [1.0, 2.0, 3.0], [0.0; 3]);
    let (state, trace) = solve(&t, &SolverConfig::default()).unwrap();
    assert_eq!(trace.termination, Termination::Converged);
    assert_eq!(trace.iterations, 1);
    assert!(state.x.iter().chain(&state.z).flatten().all(|v| *v == 0.0));
    assert_eq!(trace.last().unwrap().objective, 0.0);
}

#[test]
fn feasibility_problem_reaches_a_feasible_point() {
    let p = gen_random_qp(&RandomQpSpec { blocks: 5, constraints: 4, ..Default::default() }, 4).unwrap();
    let mut t = reformulate(&p, |g| bfs_bipartize(g, Traversal::Bfs));
    for b in t.left.iter_mut().chain(t.right.iter_mut()) {
        if !b.provenance.is_auxiliary() {
            b.smooth = SmoothFn::zero();
        }
    }
    let (state, trace) = solve(&t, &SolverConfig { tol: 1e-9, max_iters: 50_000, ..Default::default() }).unwrap();
    assert_eq!(trace.termination, Termination::Converged);
    let r = t.residual(&state.x, &state.z).unwrap().concat();
    assert!(linalg::inf_norm(&r) < 1e-9);
}

#[test]
fn residuals_vanish_at_a_fixed_point() {
    let t = circuit_split(1, [1.0, 2.0, 3.0], [1.0, -3.0, 2.0]);
    let admm = Admm::new(&t, &SolverConfig { tol: 1e-13, max_iters: 100_000, ..Default::default() }).unwrap();
    let (state, trace) = admm.run(AdmmState::zeros(&t)).unwrap();
    assert_eq!(trace.termination, Termination::Converged);
    let (p, d) = primal_dual_residuals(&t, &state, &state, 1.0).unwrap();
    assert!(p < 1e-12);
    assert_eq!(d, 0.0);
}

#[test]
fn zero_state_primal_residual_is_rhs_norm() {
    let p = gen_random_qp(&RandomQpSpec::default(), 8).unwrap();
    let t = reformulate(&p, basic_decision);
    let s = AdmmState::zeros(&t);
    let (pr, d) = primal_dual_residuals(&t, &s, &s, 2.0).unwrap();
    let b: Vec<f64> = t.couplings.iter().flat_map(|c| c.rhs.clone()).collect();
    assert_eq!(pr, linalg::inf_norm(&b));
    assert_eq!(d, 0.0);
}

#[test]
fn residuals_match_the_dense_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for seed in 0..10 {
        let p = gen_random_qp(&RandomQpSpec::default(), seed).unwrap();
        let t = reformulate(&p, |g| bfs_bipartize(g, Traversal::Dfs));
        let rand_state = |rng: &mut ChaCha8Rng| {
            let mut s = AdmmState::zeros(&t);
            for v in s.x.iter_mut().chain(s.z.iter_mut()).chain(s.lambda.iter_mut()) {
                v.iter_mut().for_each(|e| *e = rng.sample(StandardNormal));
            }
            s
        };
        let (prev, cur) = (rand_state(&mut rng), rand_state(&mut rng));
        let rho = 1.7;
        let (pr, du) = primal_dual_residuals(&t, &prev, &cur, rho).unwrap();
        let (a, b, rhs) = t.to_dense();
        let x = DVector::from_vec(cur.x.concat());
        let dz = DVector::from_vec(cur.z.concat()) - DVector::from_vec(prev.z.concat());
        let want_p = (&a * x + &b * DVector::from_vec(cur.z.concat()) - rhs).amax();
        let want_d = (a.transpose() * (&b * dz) * rho).amax();
        assert!((pr - want_p).abs() < 1e-10 * want_p.max(1.0));
        assert!((du - want_d).abs() < 1e-10 * want_d.max(1.0));
    }
}

#[test]
fn dual_update_is_rho_times_the_new_residual() {
    let p = gen_random_qp(&RandomQpSpec::default(), 12).unwrap();
    let t = reformulate(&p, |g| bfs_bipartize(g, Traversal::Bfs));
    for algorithm in [Algorithm::ExactAdmm, Algorithm::FlipAdmm] {
        let cfg = SolverConfig { rho: 3.0, algorithm, ..Default::default() };
        let admm = Admm::new(&t, &cfg).unwrap();
        let mut s = AdmmState::zeros(&t);
        for _ in 0..5 {
            let before = s.lambda.clone();
            admm.step(&mut s).unwrap();
            let r = t.residual(&s.x, &s.z).unwrap();
            for ((after, before), r) in s.lambda.iter().zip(&before).zip(&r) {
                for ((a, b), r) in after.iter().zip(before).zip(r) {
                    assert_eq!(*a, b + 3.0 * r);
                }
            }
        }
    }
}

#[test]
fn threads_do_not_change_the_trace() {
    let p = gen_random_qp(&RandomQpSpec { blocks: 12, constraints: 16, ..Default::default() }, 5).unwrap();
    let t = reformulate(&p, |g| bfs_bipartize(g, Traversal::Bfs));
    for algorithm in [Algorithm::ExactAdmm, Algorithm::FlipAdmm] {
        let cfg = SolverConfig { algorithm, max_iters: 300, ..Default::default() };
        let (s1, t1) = solve(&t, &cfg).unwrap();
        let (s4, t4) = solve(&t, &SolverConfig { threads: 4, ..cfg }).unwrap();
        assert_eq!(s1, s4);
        assert_eq!(t1.without_times(), t4.without_times());
    }
}

#[test]
fn exact_updates_are_block_optimal() {
    let p = gen_random_qp(&RandomQpSpec { blocks: 7, constraints: 9, hyper_prob: 0.5, ..Default::default() }, 31).unwrap();
    let t = reformulate(&p, |g| bfs_bipartize(g, Traversal::Bfs));
    assert!(t.right.iter().chain(&t.left).any(|b| matches!(b.prox, ProxFn::SumToConstantIndicator { .. })));
    let admm = Admm::new(&t, &SolverConfig { rho: 2.5, ..Default::default() }).unwrap();
    let mut s = AdmmState::zeros(&t);
    for k in 0..40 {
        let x = admm.update_side(true, &s.x, &s.z, &s.lambda);
        let z = admm.update_side(false, &x, &s.z, &s.lambda);
        if k % 10 == 0 {
            for (left, blocks) in [(true, &t.left), (false, &t.right)] {
                for (i, b) in blocks.iter().enumerate() {
                    // Gradient after the block's own update: x-blocks see the old z, z-blocks the new x.
                    let g = if left {
                        admm.lagrangian_gradient(true, i, &x, &s.z, &s.lambda)
                    } else {
                        admm.lagrangian_gradient(false, i, &x, &z, &s.lambda)
                    };
                    let projected = match &b.prox {
                        ProxFn::Zero => g,
                        ProxFn::SumToConstantIndicator { target, arity } => {
                            let m = target.len();
                            let mut g = g;
                            for c in 0..m {
                                let mean = (0..*arity).map(|s| g[s * m + c]).sum::<f64>() / *arity as f64;
                                (0..*arity).for_each(|s| g[s * m + c] -= mean);
                            }
                            g
                        }
                        other => panic!("unexpected prox {other:?}"),
                    };
                    let scale = 1.0 + linalg::inf_norm(&x.concat()) + linalg::inf_norm(&z.concat());
                    assert!(linalg::inf_norm(&projected) <= 1e-8 * scale, "block {} gradient {projected:?}", b.id);
                }
            }
        }
        admm.step(&mut s).unwrap();
    }
}

#[test]
fn box_blocks_satisfy_bound_optimality() {
    // min c x over [0, u] coupled by x1 + x2 - w = 0, w = 3 through a sub node.
    let x1 = side("x1", 1, SmoothFn::linear(vec![1.0]), ProxFn::box_indicator(vec![0.0], vec![2.0]).unwrap());
    let x2 = side("x2", 1, SmoothFn::linear(vec![3.0]), ProxFn::box_indicator(vec![0.0], vec![4.0]).unwrap());
    let y = side("y", 2, SmoothFn::zero(), ProxFn::sum_to_constant(vec![3.0], 2).unwrap());
    let t = TwoBlockProblem {
        left: vec![x1, x2],
        right: vec![y],
        couplings: vec![
            Coupling { id: "a".into(), left: 0, right: 0, a: LinearMap::identity(1), b: LinearMap::selector(0, 1, 2, -1.0), rhs: vec![0.0] },
            Coupling { id: "b".into(), left: 1, right: 0, a: LinearMap::identity(1), b: LinearMap::selector(1, 1, 2, -1.0), rhs: vec![0.0] },
        ],
        norm_bounds: (1.0, 1.0),
    };
    let (s, trace) = solve(&t, &SolverConfig { tol: 1e-8, max_iters: 20_000, ..Default::default() }).unwrap();
    assert_eq!(trace.termination, Termination::Converged);
    // Cheapest first: x1 at its cap, the rest on x2.
    assert!((s.x[0][0] - 2.0).abs() < 1e-6);
    assert!((s.x[1][0] - 1.0).abs() < 1e-6);
    assert!((trace.last().unwrap().objective - 5.0).abs() < 1e-6);
}

#[test]
fn unsupported_blocks_are_named() {
    let q = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
    let x = side("boxed", 2, SmoothFn::quadratic(q, vec![0.0; 2]).unwrap(), ProxFn::box_indicator(vec![0.0; 2], vec![1.0; 2]).unwrap());
    let z = side("free", 2, SmoothFn::zero(), ProxFn::Zero);
    let t = TwoBlockProblem {
        left: vec![x],
        right: vec![z],
        couplings: vec![Coupling {
            id: "c".into(),
            left: 0,
            right: 0,
            a: LinearMap::identity(2),
            b: LinearMap::scaled_identity(-1.0, 2),
            rhs: vec![0.0; 2],
        }],
        norm_bounds: (1.0, 1.0),
    };
    match solve(&t, &SolverConfig::default()) {
        Err(Error::UnsupportedBlock { block, .. }) => assert_eq!(block, "boxed"),
        other => panic!("expected unsupported block, got {other:?}"),
    }
    // The linearized variant handles it.
    let (_, trace) = solve(&t, &SolverConfig { algorithm: Algorithm::FlipAdmm, tol: 1e-6, ..Default::default() }).unwrap();
    assert_eq!(trace.termination, Termination::Converged);
}

#[test]
fn l1_blocks_soft_threshold() {
    // min |x| + 1/2 (z - 3)^2 s.t. x - z = 0 has optimum x = z = 2.
    let x = side("x", 1, SmoothFn::zero(), ProxFn::l1(1.0).unwrap());
    let z = side("z", 1, SmoothFn::quadratic(DMatrix::identity(1, 1), vec![-3.0]).unwrap(), ProxFn::Zero);
    let t = TwoBlockProblem {
        left: vec![x],
        right: vec![z],
        couplings: vec![Coupling {
            id: "c".into(),
            left: 0,
            right: 0,
            a: LinearMap::identity(1),
            b: LinearMap::scaled_identity(-1.0, 1),
            rhs: vec![0.0],
        }],
        norm_bounds: (1.0, 1.0),
    };
    for algorithm in [Algorithm::ExactAdmm, Algorithm::FlipAdmm] {
        let (s, trace) = solve(&t, &SolverConfig { algorithm, tol: 1e-10, ..Default::default() }).unwrap();
        assert_eq!(trace.termination, Termination::Converged);
        assert!((s.x[0][0] - 2.0).abs() < 1e-8 && (s.z[0][0] - 2.0).abs() < 1e-8, "{s:?}");
    }
}

#[test]
fn affine_blocks_with_curvature_use_the_kkt_system() {
    // min 1/2 x^T diag(1, 4) x s.t. x1 + x2 = 1, coupled to a free z by x - z = 0.
    let x = side(
        "x",
        2,
        SmoothFn::diagonal_quadratic(&[1.0, 4.0]).unwrap(),
        ProxFn::affine(DMatrix::from_row_slice(1, 2, &[1.0, 1.0]), vec![1.0]).unwrap(),
    );
    let z = side("z", 2, SmoothFn::zero(), ProxFn::Zero);
    let t = TwoBlockProblem {
        left: vec![x],
        right: vec![z],
        couplings: vec![Coupling {
            id: "c".into(),
            left: 0,
            right: 0,
            a: LinearMap::identity(2),
            b: LinearMap::scaled_identity(-1.0, 2),
            rhs: vec![0.0; 2],
        }],
        norm_bounds: (1.0, 1.0),
    };
    let (s, trace) = solve(&t, &SolverConfig { tol: 1e-10, ..Default::default() }).unwrap();
    assert_eq!(trace.termination, Termination::Converged);
    // x1 = 4 x2 and x1 + x2 = 1.
    assert!((s.x[0][0] - 0.8).abs() < 1e-8 && (s.x[0][1] - 0.2).abs() < 1e-8, "{s:?}");
}

#[test]
fn flip_step_is_a_gradient_step_for_unconstrained_quadratics() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let p = gen_random_qp(&RandomQpSpec { hyper_prob: 0.0, ..Default::default() }, 2).unwrap();
    let t = reformulate(&p, |g| bfs_bipartize(g, Traversal::Bfs));
    let cfg = SolverConfig { rho: 1.3, step_scale: 0.7, algorithm: Algorithm::FlipAdmm, ..Default::default() };
    let mut s = AdmmState::zeros(&t);
    for v in s.x.iter_mut().chain(s.z.iter_mut()).chain(s.lambda.iter_mut()) {
        v.iter_mut().for_each(|e| *e = rng.sample(StandardNormal));
    }
    let next = flip_step(&t, &s, &cfg).unwrap();
    // Dense oracle: x <- x - a_i (grad f + A^T (lambda + rho (Ax + Bz - b))) per block.
    let (a, b, rhs) = t.to_dense();
    let (cl, _) = t.block_norms(crate::bipartize::ContributionMode::Exact);
    let lam = DVector::from_vec(s.lambda.concat());
    let r = &a * DVector::from_vec(s.x.concat()) + &b * DVector::from_vec(s.z.concat()) - &rhs;
    let g_all = a.transpose() * (&lam + &r * cfg.rho);
    let mut off = 0;
    for (i, blk) in t.left.iter().enumerate() {
        let step = cfg.step_scale / (blk.smooth.lipschitz() + cfg.rho * cl[i] * cl[i]);
        let gf = blk.smooth.gradient(&s.x[i]);
        for k in 0..blk.dim {
            let want = s.x[i][k] - step * (gf[k] + g_all[off + k]);
            assert!((next.x[i][k] - want).abs() < 1e-10, "{} vs {want}", next.x[i][k]);
        }
        off += blk.dim;
    }
}

fn lonely_quadratic() -> TwoBlockProblem {
    TwoBlockProblem {
        left: vec![side("x", 1, SmoothFn::diagonal_quadratic(&[1.0]).unwrap(), ProxFn::Zero)],
        right: vec![],
        couplings: vec![],
        norm_bounds: (0.0, 0.0),
    }
}

#[test]
fn flip_with_unit_step_scale_jumps_to_the_minimizer() {
    // alpha = 1 / L = 1, so x <- x - x.
    let t = lonely_quadratic();
    let s = AdmmState { x: vec![vec![8.0]], z: vec![], lambda: vec![], iter: 0 };
    let cfg = SolverConfig { algorithm: Algorithm::FlipAdmm, ..Default::default() };
    assert_eq!(flip_step(&t, &s, &cfg).unwrap().x, vec![vec![0.0]]);
}

#[test]
fn flip_with_half_step_scale_halves_each_iteration() {
    let t = lonely_quadratic();
    let cfg = SolverConfig { algorithm: Algorithm::FlipAdmm, step_scale: 0.5, ..Default::default() };
    let mut s = AdmmState { x: vec![vec![8.0]], z: vec![], lambda: vec![], iter: 0 };
    for k in 1..=10 {
        s = flip_step(&t, &s, &cfg).unwrap();
        assert_eq!(s.x[0][0], 8.0 / f64::powi(2.0, k));
    }
}

#[test]
fn flip_rejects_infinite_lipschitz_bounds() {
    let mut t = lonely_quadratic();
    t.left[0].smooth = t.left[0].smooth.clone().with_lipschitz(f64::INFINITY).unwrap();
    let cfg = SolverConfig { algorithm: Algorithm::FlipAdmm, ..Default::default() };
    assert!(matches!(solve(&t, &cfg), Err(Error::InfiniteLipschitz(id)) if id == "x"));
}

/// Five agents on a ring, `min sum ||Q_i x_i - q_i||^2` with `x_i = x_j` on
/// every ring edge.
fn tiny_consensus(seed: u64) -> (MultiblockProblem, DVector<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (agents, dim, rows) = (5, 8, 6);
    let truth = DVector::from_vec((0..dim).map(|_| rng.sample(StandardNormal)).collect());
    let mut blocks = Vec::new();
    let (mut qtq, mut qtb) = (DMatrix::zeros(dim, dim), DVector::zeros(dim));
    for i in 0..agents {
        let q = gaussian(&mut rng, rows, dim);
        let noise = DVector::from_vec((0..rows).map(|_| 0.1 * rng.sample::<f64, _>(StandardNormal)).collect());
        let b = &q * &truth + noise;
        qtq += q.transpose() * &q;
        qtb += q.transpose() * &b;
        blocks.push(Block {
            id: format!("x{}", i + 1),
            dim,
            smooth: SmoothFn::least_squares(q, b.as_slice().to_vec()).unwrap(),
            prox: ProxFn::Zero,
        });
    }
    let constraints = (0..agents)
        .map(|i| {
            let j = (i + 1) % agents;
            let (a, b) = (i.min(j), i.max(j));
            BlockConstraint {
                id: format!("e{}_{}", a + 1, b + 1),
                terms: vec![
                    Term { block: format!("x{}", a + 1), map: LinearMap::identity(dim) },
                    Term { block: format!("x{}", b + 1), map: LinearMap::scaled_identity(-1.0, dim) },
                ],
                rhs: vec![0.0; dim],
            }
        })
        .collect();
    let oracle = qtq.cholesky().unwrap().solve(&qtb);
    (MultiblockProblem { blocks, constraints }, oracle)
}

#[test]
fn flip_solves_tiny_consensus_least_squares() {
    let (p, oracle) = tiny_consensus(1);
    let t = reformulate(&p, |g| bfs_bipartize(g, Traversal::Bfs));
    let cfg = SolverConfig { algorithm: Algorithm::FlipAdmm, tol: 1e-7, max_iters: 200_000, ..Default::default() };
    let (s, trace) = solve(&t, &cfg).unwrap();
    assert_eq!(trace.termination, Termination::Converged, "{:?}", trace.last());
    for (b, v) in t.left.iter().zip(&s.x).chain(t.right.iter().zip(&s.z)) {
        if b.provenance.is_auxiliary() {
            continue;
        }
        for (a, o) in v.iter().zip(oracle.iter()) {
            assert!((a - o).abs() < 1e-4, "{}: {a} vs {o}", b.id);
        }
    }
}

#[test]
fn reformulations_agree_on_the_optimum() {
    let tol = 1e-6;
    for seed in 0..5 {
        let p = gen_random_qp(&RandomQpSpec { blocks: 6, constraints: 5, ..Default::default() }, 40 + seed).unwrap();
        let mut objectives = Vec::new();
        for d in [basic_decision as fn(&CouplingGraph) -> BipartizationDecision, |g| bfs_bipartize(g, Traversal::Bfs)] {
            let t = reformulate(&p, d);
            let (_, trace) = solve(&t, &SolverConfig { tol, max_iters: 100_000, ..Default::default() }).unwrap();
            if trace.termination == Termination::Converged {
                objectives.push(trace.last().unwrap().objective);
            }
        }
        assert_eq!(objectives.len(), 2, "seed {seed}");
        assert!((objectives[0] - objectives[1]).abs() < 10.0 * tol * objectives[0].abs().max(1.0), "{objectives:?}");
    }
}

#[test]
fn stalls_are_detected() {
    // Inconsistent couplings: x = 0 and x = 1 through two free z blocks
    // that are pinned by an equality set.
    let x = side("x", 1, SmoothFn::zero(), ProxFn::Zero);
    let z = side("z", 2, SmoothFn::zero(), ProxFn::affine(DMatrix::identity(2, 2), vec![0.0, 1.0]).unwrap());
    let t = TwoBlockProblem {
        left: vec![x],
        right: vec![z],
        couplings: vec![
            Coupling { id: "a".into(), left: 0, right: 0, a: LinearMap::identity(1), b: LinearMap::selector(0, 1, 2, -1.0), rhs: vec![0.0] },
            Coupling { id: "b".into(), left: 0, right: 0, a: LinearMap::identity(1), b: LinearMap::selector(1, 1, 2, -1.0), rhs: vec![0.0] },
        ],
        norm_bounds: (1.0, 1.0),
    };
    let (_, trace) = solve(&t, &SolverConfig { max_iters: 100_000, log_every: 500, ..Default::default() }).unwrap();
    assert_eq!(trace.termination, Termination::Stalled);
    assert!(trace.iterations < 100_000);
}

#[test]
fn trace_is_logged_every_k_and_at_the_end() {
    let p = gen_random_qp(&RandomQpSpec::default(), 3).unwrap();
    let t = reformulate(&p, basic_decision);
    let (_, trace) = solve(&t, &SolverConfig { max_iters: 95, log_every: 10, tol: 1e-30, ..Default::default() }).unwrap();
    let iters: Vec<usize> = trace.entries.iter().map(|e| e.iter).collect();
    assert_eq!(iters, [10, 20, 30, 40, 50, 60, 70, 80, 90, 95]);
    assert_eq!(trace.termination, Termination::MaxIters);
    assert!(trace.entries.iter().all(|e| e.primal_inf >= 0.0 && e.dual_inf >= 0.0 && e.primal_l2 >= e.primal_inf));
    let mut csv = Vec::new();
    trace.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "iter,primal_inf,dual_inf,objective,wall_time_s");
    assert_eq!(lines.len(), 11);
    assert!(lines[1].starts_with("10,"));
    assert_eq!(lines[1].split(',').count(), 5);
}

#[test]
fn mismatched_states_are_rejected() {
    let t = lonely_quadratic();
    let admm = Admm::new(&t, &SolverConfig::default()).unwrap();
    let bad = AdmmState { x: vec![vec![0.0, 1.0]], z: vec![], lambda: vec![], iter: 0 };
    assert!(matches!(admm.run(bad), Err(Error::Dimension { .. })));
}
