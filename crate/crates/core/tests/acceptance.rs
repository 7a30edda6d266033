//! End-to-end acceptance criteria. Prints one PASS/FAIL line per criterion
//! and exits nonzero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;

use sparse_curriculum::dictionary::{match_up_to_signed_permutation, scale_snap, sparse_factor, FactorOptions};
use sparse_curriculum::harness::{build_tree, run_experiment, Curriculum, ExperimentConfig, ExperimentReport};
use sparse_curriculum::linalg;
use sparse_curriculum::model::{sample_training_coefficients, SparseVector, SubgaussianLaw};
use sparse_curriculum::rng;
use sparse_curriculum::sat::{reduce_1in3sat, solution_to_assignment, solve_1in3_exhaustive, SatInstance};
use sparse_curriculum::solvers::{solve_l0_brute, solve_l1, SolverOptions};
use sparse_curriculum::student::{LeafSolver, ScaleMode, TrainOptions};
use sparse_curriculum::teacher::{balanced_blocks, build_class_matrix, tree_size_bound};
use sparse_curriculum::verify::{
    check_split_global_optimality, check_split_independence, expectation_identity_test, nsp_check, rip_constant_brute,
    NspCertificate, NspMode, DEFAULT_BUDGET,
};
use sparse_curriculum::{BernoulliSubgaussianParams, DenseMatrix};

type Outcome = (bool, String);

fn gaussian(m: usize, n: usize, r: &mut rng::Rng) -> DenseMatrix {
    DenseMatrix::from_fn(m, n, |_, _| r.sample::<f64, _>(StandardNormal))
}

fn sat_equivalence() -> Outcome {
    let mut r = rng::seeded(101);
    let (mut agree, mut sat) = (0, 0);
    for _ in 0..100 {
        let n = r.random_range(3..=6);
        let clauses = r.random_range(1..=6);
        let inst = SatInstance::random(n, clauses, &mut r).expect("valid instance");
        let truth = solve_1in3_exhaustive(&inst).is_some();
        let prob = reduce_1in3sat(&inst);
        let found = solve_l0_brute(&prob.a, &prob.b, n, 1e-9).expect("within budget");
        let sparse = found.found().filter(|x| x.sparsity() == n);
        let decoded_ok = sparse.is_none_or(|x| {
            solution_to_assignment(x, n, 1e-6).is_some_and(|a| sparse_curriculum::sat::check_1in3_assignment(&inst, &a))
        });
        if truth == sparse.is_some() && decoded_ok {
            agree += 1;
        }
        sat += truth as usize;
    }
    (agree == 100, format!("{agree}/100 agree ({sat} satisfiable)"))
}

fn split_checks() -> Outcome {
    let mut r = rng::seeded(202);
    let mut failures = 0;
    for _ in 0..100 {
        let n = r.random_range(8..=12);
        let m = r.random_range(6..n);
        let a = gaussian(m, n, &mut r);
        let k = r.random_range(2..=m / 2);
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut r);
        let pairs: Vec<(usize, f64)> = idx[..k].iter().map(|&i| (i, r.random_range(0.5..2.0))).collect();
        let x = SparseVector::from_parts(n, &pairs, 0.0).expect("valid x");
        // Planted x must be the sparsest solution.
        let best = solve_l0_brute(&a, &(&a * x.to_dvector()), k, 1e-9).expect("budget");
        if best.found().map(|y| y.support().to_vec()) != Some(x.support().to_vec()) {
            failures += 1;
            continue;
        }
        let parts = r.random_range(1..=k);
        let mut owner: Vec<usize> = (0..k).map(|i| i % parts).collect();
        owner.shuffle(&mut r);
        let mut s = DenseMatrix::zeros(n, parts);
        for (&(i, v), &o) in pairs.iter().zip(&owner) {
            s[(i, o)] = v;
        }
        let ok = check_split_independence(&a, &s).unwrap_or(false)
            && check_split_global_optimality(&a, &s, DEFAULT_BUDGET).unwrap_or(false);
        failures += usize::from(!ok);
    }
    (failures == 0, format!("{failures} failures over 100 instances"))
}

fn construction_identity() -> Outcome {
    let (mut worst_x, mut worst_t, mut z_exact) = (0.0f64, 0.0f64, true);
    let params = BernoulliSubgaussianParams { distribution: SubgaussianLaw::Gaussian, ..Default::default() };
    for seed in 0..20u64 {
        let mut r = rng::seeded(300 + seed);
        let (m, n, leaves, per) = (16, 24, 4, 3);
        let a = gaussian(m, n, &mut r);
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut r);
        let pairs: Vec<(usize, f64)> = idx[..8].iter().map(|&i| (i, r.random_range(-2.0..2.0))).collect();
        let x = SparseVector::from_parts(n, &pairs, 0.0).expect("valid x");
        let pj = balanced_blocks(x.support(), leaves).expect("blocks");
        let pk: Vec<Vec<usize>> = (0..leaves).map(|l| (l * per..(l + 1) * per).collect()).collect();
        let cm = match build_class_matrix(&a, &x, &pj, &pk, leaves * per, &params, seed, 1.0) {
            Ok(c) => c,
            Err(e) => return (false, format!("seed {seed}: {e}")),
        };
        worst_x = worst_x.max((&cm.x * cm.coefficient() - x.to_dvector()).amax());
        let z = cm.z();
        z_exact &= z.transpose() * &z == DenseMatrix::identity(leaves, leaves);
        let mut s_unit = cm.s.clone();
        for mut c in s_unit.column_iter_mut() {
            c.normalize_mut();
        }
        let tas = cm.preconditioner.as_ref().expect("preconditioner") * &a * s_unit;
        worst_t = worst_t.max((tas.transpose() * &tas - DenseMatrix::identity(leaves, leaves)).amax());
    }
    (
        worst_x <= 1e-10 && z_exact && worst_t <= 1e-9,
        format!("max |X Z1 - x| = {worst_x:.1e}, Z^T Z = I exactly: {z_exact}, max |(TAS)^T TAS - I| = {worst_t:.1e}"),
    )
}

fn dictionary_recovery() -> Outcome {
    let (n, p, q) = (24, 16, 2000);
    let mut recovered = 0;
    for seed in 0..10u64 {
        let mut r = rng::seeded(400 + seed);
        let x = loop {
            let cand = DenseMatrix::from_fn(n, p, |_, _| match r.random_range(0..8) {
                0 => 1.0,
                1 => -1.0,
                _ => 0.0,
            });
            if linalg::numerical_rank(&cand, linalg::RANK_RTOL) == p && cand.column_iter().all(|c| c.amax() > 0.0) {
                break cand;
            }
        };
        let z = sample_training_coefficients(p, q, 4.0, seed).expect("coefficients");
        let y = &x * z;
        let Ok(f) = sparse_factor(&y, p, &FactorOptions::default(), seed) else { continue };
        let snapped = scale_snap(&f.x_bar, 0.5).matrix;
        recovered += usize::from(match_up_to_signed_permutation(&snapped, &x, 1e-9).matched.is_some());
    }
    (recovered >= 8, format!("{recovered}/10 seeds recovered"))
}

fn desk_config() -> ExperimentConfig {
    ExperimentConfig {
        label: "desk curriculum I".into(),
        curriculum: Curriculum::SatI,
        m: 24,
        n: 32,
        depth: 1,
        per_leaf_p: 14,
        t: 8,
        tbar: 4,
        q_samples: 1500,
        seeds: vec![0, 1, 2, 3, 4],
        grader_tol: 1e-4,
        scale: ScaleMode::Snap { threshold: 0.5 },
        leaf_solver: LeafSolver::Provided,
        solver: SolverOptions::default(),
        factor: TrainOptions::default().factor,
        coef_sparsity_limit: None,
        clause_ones: 3,
        match_tol: 1e-6,
    }
}

fn desk_curriculum(report: &ExperimentReport) -> Outcome {
    let root = report.row(0).expect("root row");
    let rank_ok = report
        .body
        .seeds
        .iter()
        .flat_map(|s| &s.nodes)
        .all(|n| n.rank_a_xchild.zip(n.p_child).is_none_or(|(r, p)| r < p));
    (
        root.recovered >= 3 && root.validate_fraction >= 0.5 && rank_ok,
        format!(
            "root recovered {}, validate_fraction {:.3}, rank(A X_child) {:.2} < p_child {}",
            root.recovered_tally(),
            root.validate_fraction,
            root.mean_rank_a_xchild.unwrap_or(f64::NAN),
            root.p_child.unwrap_or(0)
        ),
    )
}

fn l1_matches_l0() -> Outcome {
    let mut r = rng::seeded(606);
    let mut matched = 0;
    for _ in 0..100 {
        let a = gaussian(20, 40, &mut r) / 20f64.sqrt();
        let mut idx: Vec<usize> = (0..40).collect();
        idx.shuffle(&mut r);
        let x = DVector::from_fn(40, |i, _| {
            if i == idx[0] || i == idx[1] {
                r.random_range(0.5..2.0) * if r.random::<bool>() { 1.0 } else { -1.0 }
            } else {
                0.0
            }
        });
        let b = &a * &x;
        let l0 = solve_l0_brute(&a, &b, 2, 1e-9).expect("budget").into_found();
        let l1 = solve_l1(&a, &b, &SolverOptions::default());
        if let (Some(l0), Ok(l1)) = (l0, l1) {
            if (l0.to_dvector() - l1.to_dvector()).amax() <= 1e-4 {
                matched += 1;
            }
        }
    }
    (matched >= 95, format!("{matched}/100 instances match to 1e-4"))
}

fn rip_nsp_sanity() -> Outcome {
    let identity_zero =
        (1..=4).all(|t| rip_constant_brute(&DenseMatrix::identity(8, 8), t, DEFAULT_BUDGET).ok() == Some(0.0));
    let dup = DenseMatrix::from_row_slice(2, 3, &[1.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
    let dup_one = rip_constant_brute(&dup, 2, DEFAULT_BUDGET).ok() == Some(1.0);
    let mut r = rng::seeded(707);
    let (mut invariant, mut holds) = (0, 0);
    for i in 0..10 {
        let t = 1 + i % 2;
        let m = gaussian(6, 9, &mut r);
        let t_mat = loop {
            let c = gaussian(6, 6, &mut r);
            if linalg::condition_number(&c) < 1e4 {
                break c;
            }
        };
        let margin = |res: &sparse_curriculum::verify::NspResult| match res.certificate {
            NspCertificate::Exact { worst_margin, .. } => worst_margin,
            _ => f64::NAN,
        };
        let a = nsp_check(&m, t, NspMode::ExactSmall, DEFAULT_BUDGET).expect("exact");
        let b = nsp_check(&(t_mat * &m), t, NspMode::ExactSmall, DEFAULT_BUDGET).expect("exact");
        if a.holds == b.holds && (margin(&a) - margin(&b)).abs() < 1e-6 {
            invariant += 1;
        }
        holds += a.holds as usize;
    }
    (
        identity_zero && dup_one && invariant == 10,
        format!("delta_t(I) = 0: {identity_zero}, duplicated delta_2 = 1: {dup_one}, NSP invariant {invariant}/10 ({holds} hold)"),
    )
}

fn node_count_bound() -> Outcome {
    let mut detail = Vec::new();
    let mut ok = true;
    for depth in 1..=4usize {
        let leaves = 1usize << depth;
        let cfg = ExperimentConfig {
            curriculum: Curriculum::Gaussian { support: leaves },
            m: 40,
            n: 64,
            depth,
            per_leaf_p: 2,
            t: 4,
            tbar: 2,
            seeds: vec![depth as u64],
            ..desk_config()
        };
        let tree = match build_tree(&cfg, depth as u64) {
            Ok(t) => t,
            Err(e) => return (false, format!("depth {depth}: {e}")),
        };
        let nodes = tree.nodes.len() as u64;
        let bound = tree_size_bound(tree.x.sparsity() as u64, 2, 1.0, cfg.t as u64, cfg.tbar as u64).unwrap_or(0);
        ok &= nodes == (1 << (depth + 1)) - 1 && bound >= nodes;
        detail.push(format!("L={depth}: {nodes} <= {bound}"));
    }
    (ok, detail.join(", "))
}

fn expectation_identity() -> Outcome {
    let mut r = rng::seeded(909);
    let mut zs = Vec::new();
    for i in 0..5 {
        let (m, k, d) = (r.random_range(2..6), r.random_range(2..6), r.random_range(1..5));
        let a = gaussian(m, k, &mut r);
        let u = DVector::from_fn(d, |_, _| r.sample::<f64, _>(StandardNormal));
        let law = if i % 2 == 0 { SubgaussianLaw::Gaussian } else { SubgaussianLaw::Rademacher };
        match expectation_identity_test(&a, &u, 100_000, 900 + i, law) {
            Ok(e) => zs.push(e.z_score),
            Err(e) => return (false, e.to_string()),
        }
    }
    let ok = zs.iter().all(|z| z.abs() <= 4.0);
    (ok, format!("z-scores {:?}", zs.iter().map(|z| format!("{z:.2}")).collect::<Vec<_>>()))
}

fn reproducibility(first: &ExperimentReport) -> Outcome {
    let second = run_experiment(&desk_config()).expect("valid config");
    (
        first.content_hash == second.content_hash && first.body == second.body,
        format!("{} vs {}", &first.content_hash[..16], &second.content_hash[..16]),
    )
}

fn main() -> ExitCode {
    let mut all = true;
    let mut report = |n: usize, name: &str, limit: Option<Duration>, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let (ok, detail) = f();
        let took = start.elapsed();
        let in_time = limit.is_none_or(|l| took <= l);
        let pass = ok && in_time;
        all &= pass;
        let verdict = if pass { "PASS" } else { "FAIL" };
        println!("criterion {n:>2} {verdict} {name} ({:.1}s): {detail}", took.as_secs_f64());
    };
    report(1, "1-in-3-SAT equivalence", Some(Duration::from_secs(60)), &mut sat_equivalence);
    report(2, "split independence and optimality", None, &mut split_checks);
    report(3, "construction identity", None, &mut construction_identity);
    report(4, "dictionary recovery", Some(Duration::from_secs(300)), &mut dictionary_recovery);
    let mut desk = None;
    report(5, "desk-scale curriculum", Some(Duration::from_secs(900)), &mut || {
        let rep = run_experiment(&desk_config()).expect("valid config");
        let out = desk_curriculum(&rep);
        desk = Some(rep);
        out
    });
    report(6, "l1 matches l0", None, &mut l1_matches_l0);
    report(7, "RIP/NSP sanity", None, &mut rip_nsp_sanity);
    report(8, "node-count bound", None, &mut node_count_bound);
    report(9, "expectation identity", None, &mut expectation_identity);
    report(10, "report reproducibility", None, &mut || reproducibility(desk.as_ref().expect("criterion 5 ran")));
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
