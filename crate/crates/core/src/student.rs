//! The learning side: the grader, training of a single node from graded
//! solutions, and post-order training of a whole tree.

use std::collections::BTreeMap;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dictionary::{scale_rip, scale_snap, sparse_factor, FactorOptions};
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::DenseMatrix;
use crate::rng::{self, Purpose};
use crate::solvers::{solve_l0_brute, PriorL1Solver, SolverOptions};
use crate::teacher::{StudentSamples, StudentView};

/// `||A x - b||_inf <= tol * max(1, ||b||_inf)`.
pub fn grade(a: &DenseMatrix, x: &DVector<f64>, b: &DVector<f64>, tol: f64) -> bool {
    if a.ncols() != x.len() || a.nrows() != b.len() {
        return false;
    }
    linalg::inf_norm(&(a * x - b)) <= tol * linalg::inf_norm(b).max(1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleMode {
    Snap { threshold: f64 },
    Rip,
}

impl Default for ScaleMode {
    fn default() -> Self {
        ScaleMode::Snap { threshold: 0.5 }
    }
}

/// Solver used on leaves.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeafSolver {
    /// Exhaustive `l0` search up to `max_support`.
    Brute { max_support: usize, zero_tol: f64 },
    /// Solutions handed out by the teacher with the samples.
    #[default]
    Provided,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "state", content = "reason")]
pub enum NodeStatus {
    Trained,
    /// A child failed, so the node was skipped.
    Untrainable(String),
    Failed(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct NodeTrainingReport {
    pub node_id: usize,
    pub depth: usize,
    pub q_attempted: usize,
    pub q_graded_ok: usize,
    pub x_learned: Option<DenseMatrix>,
    /// Set by whoever holds the ground truth; the student leaves it false.
    pub matched: bool,
    pub validate_fraction: f64,
    pub status: NodeStatus,
}

impl NodeTrainingReport {
    fn skipped(node_id: usize, depth: usize, status: NodeStatus) -> Self {
        Self {
            node_id,
            depth,
            q_attempted: 0,
            q_graded_ok: 0,
            x_learned: None,
            matched: false,
            validate_fraction: 0.0,
            status,
        }
    }
}

/// Options for training one node.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainOptions {
    pub grader_tol: f64,
    pub scale: ScaleMode,
    pub factor: FactorOptions,
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            grader_tol: 1e-4,
            scale: ScaleMode::default(),
            factor: FactorOptions { fit_tol: None, ..FactorOptions::default() },
            seed: 0,
        }
    }
}

/// Solves every sample, keeps those that pass the grader (in sample order),
/// factorizes them into `p` columns and applies the scale rule.
pub fn train_node<F>(
    a: &DenseMatrix,
    samples: &StudentSamples,
    solve: F,
    p: usize,
    opts: &TrainOptions,
) -> Result<NodeTrainingReport>
where
    F: Fn(usize, &DVector<f64>) -> Option<DVector<f64>> + Sync,
{
    let q = samples.b.ncols();
    let solved: Vec<Option<DVector<f64>>> = (0..q)
        .into_par_iter()
        .map(|k| {
            let b = samples.b.column(k).into_owned();
            solve(k, &b).filter(|x| grade(a, x, &b, opts.grader_tol))
        })
        .collect();
    let survivors: Vec<DVector<f64>> = solved.into_iter().flatten().collect();
    let ok = survivors.len();
    if ok < p || ok == 0 {
        return Err(Error::InsufficientData { attempted: q, graded_ok: ok, required: p });
    }
    let y = DenseMatrix::from_columns(&survivors);
    let seed = rng::derive_seed(opts.seed, samples.node_id, Purpose::FactorInit);
    let f = sparse_factor(&y, p, &opts.factor, seed)?;
    let x_learned = match opts.scale {
        ScaleMode::Snap { threshold } => scale_snap(&f.x_bar, threshold).matrix,
        ScaleMode::Rip => scale_rip(&f.x_bar, a)?,
    };
    Ok(NodeTrainingReport {
        node_id: samples.node_id,
        depth: 0,
        q_attempted: q,
        q_graded_ok: ok,
        x_learned: Some(x_learned),
        matched: false,
        validate_fraction: ok as f64 / q as f64,
        status: NodeStatus::Trained,
    })
}

/// Leaf solve: exhaustive `l0` or the teacher's handed-out solution.
pub fn leaf_solver<'a>(
    a: &'a DenseMatrix,
    samples: &'a StudentSamples,
    leaf: LeafSolver,
) -> Result<impl Fn(usize, &DVector<f64>) -> Option<DVector<f64>> + Sync + 'a> {
    if leaf == LeafSolver::Provided && samples.solutions.is_none() {
        return Err(Error::Precondition(format!("leaf {} has no provided solutions", samples.node_id)));
    }
    Ok(move |k: usize, b: &DVector<f64>| match leaf {
        LeafSolver::Brute { max_support, zero_tol } => solve_l0_brute(a, b, max_support.min(a.ncols()), zero_tol)
            .ok()
            .and_then(|o| o.into_found())
            .map(|x| x.to_dvector()),
        LeafSolver::Provided => samples.solutions.as_ref().map(|s| s.column(k).into_owned()),
    })
}

/// Internal-node solve: `l1` with the concatenated child prior, accepted only
/// when the coefficient has at most `coef_limit` nonzeros.
pub fn prior_solver(
    a: &DenseMatrix,
    x_children: DenseMatrix,
    opts: SolverOptions,
    coef_limit: Option<usize>,
) -> Result<impl Fn(usize, &DVector<f64>) -> Option<DVector<f64>> + Sync> {
    let solver = PriorL1Solver::new(a, x_children, opts)?;
    Ok(move |_k: usize, b: &DVector<f64>| {
        let (z, _) = solver.solve(b).ok()?;
        if coef_limit.is_some_and(|lim| z.sparsity() > lim) {
            return None;
        }
        Some(solver.prior() * z.to_dvector())
    })
}

/// Options for training a whole tree.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeTrainOptions {
    pub leaf: LeafSolver,
    pub solver: SolverOptions,
    pub train: TrainOptions,
    /// Largest coefficient sparsity accepted at internal nodes.
    pub coef_sparsity_limit: Option<usize>,
}

/// Trains every node children-first. Leaves use the leaf solver; internal
/// nodes use `l1` with the prior `[X_j1 X_j2]` of learned child matrices. A
/// failed child marks its parent untrainable without stopping the traversal.
pub fn tree_train(view: &StudentView, opts: &TreeTrainOptions) -> Result<BTreeMap<usize, NodeTrainingReport>> {
    let mut reports: BTreeMap<usize, NodeTrainingReport> = BTreeMap::new();
    for id in view.post_order()? {
        let node = view.node(id)?;
        let report = match (node.children, &node.samples) {
            (_, None) => NodeTrainingReport::skipped(id, node.depth, NodeStatus::Failed("no samples".into())),
            (None, Some(samples)) => {
                let run = leaf_solver(&view.a, samples, opts.leaf)
                    .and_then(|solve| train_node(&view.a, samples, solve, node.p, &opts.train));
                finish(run, id, node.depth)
            }
            (Some((l, r)), Some(samples)) => {
                let learned = |c: usize| reports.get(&c).and_then(|rep| rep.x_learned.clone());
                match (learned(l), learned(r)) {
                    (Some(xl), Some(xr)) => {
                        let mut concat = DenseMatrix::zeros(xl.nrows(), xl.ncols() + xr.ncols());
                        concat.columns_mut(0, xl.ncols()).copy_from(&xl);
                        concat.columns_mut(xl.ncols(), xr.ncols()).copy_from(&xr);
                        let run = prior_solver(&view.a, concat, opts.solver, opts.coef_sparsity_limit)
                            .and_then(|solve| train_node(&view.a, samples, solve, node.p, &opts.train));
                        finish(run, id, node.depth)
                    }
                    _ => NodeTrainingReport::skipped(
                        id,
                        node.depth,
                        NodeStatus::Untrainable(format!("child {l} or {r} has no learned matrix")),
                    ),
                }
            }
        };
        reports.insert(id, report);
    }
    Ok(reports)
}

fn finish(run: Result<NodeTrainingReport>, id: usize, depth: usize) -> NodeTrainingReport {
    match run {
        Ok(mut r) => {
            r.depth = depth;
            r
        }
        Err(e) => {
            log::warn!("node {id}: {e}");
            let mut r = NodeTrainingReport::skipped(id, depth, NodeStatus::Failed(e.to_string()));
            if let Error::InsufficientData { attempted, graded_ok, .. } = e {
                r.q_attempted = attempted;
                r.q_graded_ok = graded_ok;
                r.validate_fraction = if attempted > 0 { graded_ok as f64 / attempted as f64 } else { 0.0 };
            }
            r
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::match_up_to_signed_permutation;
    use crate::teacher::{build_sat_curriculum, emit_training_samples, SatCurriculumDims, SatVariant};

    #[test]
    fn grade_examples() {
        let a = DenseMatrix::identity(3, 3);
        let b = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        assert!(grade(&a, &b, &b, 1e-12));
        let mut x = b.clone();
        x[1] += 10.0 * 1e-4 * 3.0;
        assert!(!grade(&a, &x, &b, 1e-4));
        assert!(grade(&a, &x, &b, 1e-2));
    }

    fn small_tree(seed: u64) -> crate::teacher::CurriculumTree {
        let dims = SatCurriculumDims { m: 16, n: 20, depth: 1, per_leaf_p: 6, tbar: 2, clause_ones: 3 };
        build_sat_curriculum(SatVariant::I, dims, seed).unwrap()
    }

    #[test]
    fn oracle_solver_recovers_leaf() {
        for seed in 0..5 {
            let tree = small_tree(seed);
            let set = emit_training_samples(&tree, 1, 400, seed).unwrap();
            let samples = set.student(true);
            let solve = leaf_solver(&tree.a, &samples, LeafSolver::Provided).unwrap();
            let rep = train_node(&tree.a, &samples, solve, 6, &TrainOptions { seed, ..Default::default() }).unwrap();
            assert_eq!(rep.q_graded_ok, 400);
            assert_eq!(rep.validate_fraction, 1.0);
            let truth = scale_snap(&tree.nodes[1].x_true, 0.5).matrix;
            let m = match_up_to_signed_permutation(rep.x_learned.as_ref().unwrap(), &truth, 1e-9);
            assert!(m.matched.is_some(), "seed {seed}");
        }
    }

    #[test]
    fn all_failures_is_insufficient_data() {
        let tree = small_tree(1);
        let set = emit_training_samples(&tree, 1, 30, 1).unwrap();
        let samples = set.student(false);
        let err = train_node(&tree.a, &samples, |_, _| None, 6, &TrainOptions::default()).unwrap_err();
        assert!(matches!(err, Error::InsufficientData { attempted: 30, graded_ok: 0, required: 6 }));
    }

    #[test]
    fn missing_child_marks_parent_untrainable() {
        let tree = small_tree(2);
        let sets: Vec<_> = (0..3).map(|id| emit_training_samples(&tree, id, 60, 2).unwrap()).collect();
        let mut view = tree.student_view(&sets, true);
        view.nodes[2].samples.as_mut().unwrap().solutions = None;
        let reports = tree_train(&view, &TreeTrainOptions::default()).unwrap();
        assert_eq!(reports[&1].status, NodeStatus::Trained);
        assert!(matches!(reports[&2].status, NodeStatus::Failed(_)));
        assert!(matches!(reports[&0].status, NodeStatus::Untrainable(_)));
    }

    #[test]
    fn depth_zero_tree_equals_train_node() {
        let tree = small_tree(3);
        let set = emit_training_samples(&tree, 1, 200, 3).unwrap();
        let mut view = tree.student_view(std::slice::from_ref(&set), true);
        let leaf = view.nodes.remove(1);
        view.nodes = vec![crate::teacher::StudentNode { id: 1, children: None, ..leaf }];
        view.root_id = 1;
        let opts = TreeTrainOptions::default();
        let reports = tree_train(&view, &opts).unwrap();
        let samples = set.student(true);
        let direct =
            train_node(&tree.a, &samples, leaf_solver(&tree.a, &samples, opts.leaf).unwrap(), 6, &opts.train).unwrap();
        assert_eq!(reports[&1].x_learned, direct.x_learned);
        assert_eq!(reports[&1].q_graded_ok, direct.q_graded_ok);
    }
}
