//! Experiment configuration, seeded end-to-end runs (teacher, samples,
//! student, matching) and depth-wise reports.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rand::seq::index::sample as sample_indices;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dictionary::{match_up_to_signed_permutation, scale_snap, FactorOptions};
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{sample_bernoulli_subgaussian, BernoulliSubgaussianParams, SparseVector, SubgaussianLaw};
use crate::rng::{self, Purpose};
use crate::solvers::SolverOptions;
use crate::student::{tree_train, LeafSolver, NodeStatus, ScaleMode, TrainOptions, TreeTrainOptions};
use crate::teacher::{
    build_curriculum_tree, build_sat_curriculum, emit_training_samples, CurriculumTree, SatCurriculumDims, SatVariant,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Curriculum {
    #[serde(rename = "sat_i")]
    SatI,
    #[serde(rename = "sat_ii")]
    SatII,
    #[serde(rename = "sat_iii")]
    SatIII { blocks: usize },
    /// Gaussian `A` scaled by `1/sqrt m` and a random `support`-sparse `x`.
    Gaussian { support: usize },
}

fn default_clause_ones() -> usize {
    3
}
fn default_match_tol() -> f64 {
    1e-6
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Echoed verbatim in reports.
    pub label: String,
    pub curriculum: Curriculum,
    pub m: usize,
    pub n: usize,
    pub depth: usize,
    pub per_leaf_p: usize,
    pub t: usize,
    pub tbar: usize,
    pub q_samples: usize,
    pub seeds: Vec<u64>,
    pub grader_tol: f64,
    #[serde(default)]
    pub scale: ScaleMode,
    #[serde(default)]
    pub leaf_solver: LeafSolver,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default = "training_factor")]
    pub factor: FactorOptions,
    /// Defaults to `floor(sqrt 2 * t)`.
    #[serde(default)]
    pub coef_sparsity_limit: Option<usize>,
    #[serde(default = "default_clause_ones")]
    pub clause_ones: usize,
    #[serde(default = "default_match_tol")]
    pub match_tol: f64,
}

fn training_factor() -> FactorOptions {
    TrainOptions::default().factor
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Parameter(msg));
        if self.seeds.is_empty() {
            return bad("seeds must be nonempty".into());
        }
        if self.tbar == 0 || self.t < self.tbar {
            return bad(format!("need t >= tbar >= 1, got t = {}, tbar = {}", self.t, self.tbar));
        }
        if self.t != 2 * self.tbar {
            return bad(format!(
                "trees recombine pairs of children, so t must be 2 tbar; got {} and {}",
                self.t, self.tbar
            ));
        }
        if self.m == 0 || self.n == 0 || self.depth == 0 || self.per_leaf_p == 0 || self.q_samples == 0 {
            return bad("m, n, depth, per_leaf_p and q_samples must be positive".into());
        }
        if [self.grader_tol, self.match_tol].iter().any(|v| v.is_nan() || *v <= 0.0) {
            return bad("tolerances must be positive".into());
        }
        if let Curriculum::Gaussian { support } = self.curriculum {
            if support < 1 << self.depth || support > self.n {
                return bad(format!("support {support} must lie in 2^depth..=n"));
            }
        }
        self.solver.validate()
    }

    pub fn coef_limit(&self) -> usize {
        self.coef_sparsity_limit.unwrap_or((std::f64::consts::SQRT_2 * self.t as f64).floor() as usize)
    }

    pub fn tree_train_options(&self, seed: u64) -> TreeTrainOptions {
        TreeTrainOptions {
            leaf: self.leaf_solver,
            solver: self.solver,
            train: TrainOptions { grader_tol: self.grader_tol, scale: self.scale, factor: self.factor, seed },
            coef_sparsity_limit: Some(self.coef_limit()),
        }
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("config serializes"))
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Builds the teacher's tree for one seed.
pub fn build_tree(cfg: &ExperimentConfig, seed: u64) -> Result<CurriculumTree> {
    let dims = SatCurriculumDims {
        m: cfg.m,
        n: cfg.n,
        depth: cfg.depth,
        per_leaf_p: cfg.per_leaf_p,
        tbar: cfg.tbar,
        clause_ones: cfg.clause_ones,
    };
    match cfg.curriculum {
        Curriculum::SatI => build_sat_curriculum(SatVariant::I, dims, seed),
        Curriculum::SatII => build_sat_curriculum(SatVariant::II, dims, seed),
        Curriculum::SatIII { blocks } => build_sat_curriculum(SatVariant::III { blocks }, dims, seed),
        Curriculum::Gaussian { support } => {
            let params = BernoulliSubgaussianParams { distribution: SubgaussianLaw::Gaussian, ..Default::default() };
            let a =
                sample_bernoulli_subgaussian(cfg.m, cfg.n, &params, rng::derive_seed(seed, 0, Purpose::ProblemMatrix))?
                    / (cfg.m as f64).sqrt();
            let mut r = rng::stream(seed, 0, Purpose::Solution);
            let mut idx = sample_indices(&mut r, cfg.n, support).into_vec();
            idx.sort_unstable();
            let pairs: Vec<(usize, f64)> =
                idx.into_iter().map(|i| (i, if r.random::<bool>() { 1.0 } else { -1.0 })).collect();
            let x = SparseVector::from_parts(cfg.n, &pairs, 0.0)?;
            build_curriculum_tree(&a, &x, cfg.depth, cfg.per_leaf_p, cfg.t, &params, seed, 1.0)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeOutcome {
    pub node_id: usize,
    pub depth: usize,
    pub p: usize,
    /// Columns of the true `A X_child`; `None` on leaves.
    pub p_child: Option<usize>,
    pub rank_a_xchild: Option<usize>,
    pub q_attempted: usize,
    pub q_graded_ok: usize,
    pub validate_fraction: f64,
    pub matched: bool,
    pub status: NodeStatus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub seed: u64,
    /// Set when the seed failed before training.
    pub error: Option<String>,
    pub nodes: Vec<NodeOutcome>,
    pub warnings: Vec<String>,
}

impl SeedOutcome {
    pub fn root_matched(&self) -> bool {
        self.nodes.iter().any(|n| n.depth == 0 && n.matched)
    }
}

/// Aggregate over all nodes of one depth and all seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthRow {
    pub depth: usize,
    pub m: usize,
    pub n: usize,
    pub p_child: Option<usize>,
    pub mean_rank_a_xchild: Option<f64>,
    pub q_samples: usize,
    pub validate_fraction: f64,
    pub recovered: usize,
    pub total: usize,
}

impl DepthRow {
    pub fn recovered_tally(&self) -> String {
        format!("{}/{}", self.recovered, self.total)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub unix_time: u64,
    pub wall_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportBody {
    pub label: String,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub rows: Vec<DepthRow>,
    pub seeds: Vec<SeedOutcome>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    #[serde(flatten)]
    pub body: ReportBody,
    /// SHA-256 of `body`; metadata is excluded.
    pub content_hash: String,
    pub metadata: RunMetadata,
}

impl ExperimentReport {
    pub fn failed_seeds(&self) -> usize {
        self.body.seeds.iter().filter(|s| s.error.is_some()).count()
    }

    pub fn row(&self, depth: usize) -> Option<&DepthRow> {
        self.body.rows.iter().find(|r| r.depth == depth)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "label",
            "depth",
            "m",
            "n",
            "p_child",
            "rank_a_xchild",
            "q_samples",
            "validate_fraction",
            "recovered",
        ])
        .map_err(csv_err)?;
        for r in &self.body.rows {
            let opt = |v: Option<String>| v.unwrap_or_default();
            w.write_record([
                self.body.label.clone(),
                r.depth.to_string(),
                r.m.to_string(),
                r.n.to_string(),
                opt(r.p_child.map(|v| v.to_string())),
                opt(r.mean_rank_a_xchild.map(|v| format!("{v:.2}"))),
                r.q_samples.to_string(),
                format!("{:.4}", r.validate_fraction),
                r.recovered_tally(),
            ])
            .map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
        Ok(String::from_utf8(bytes).expect("csv is utf-8"))
    }

    /// Writes `report.json` or `report.csv` into `dir`.
    pub fn write(&self, dir: &Path, format: ReportFormat) -> Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let (name, text) = match format {
            ReportFormat::Json => ("report.json", self.to_json()),
            ReportFormat::Csv => ("report.csv", self.to_csv()?),
        };
        let path = dir.join(name);
        std::fs::write(&path, text)?;
        Ok(path)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Json,
    Csv,
}

/// Teacher, samples, student and matching for one seed.
pub fn run_seed(cfg: &ExperimentConfig, seed: u64) -> SeedOutcome {
    match run_seed_inner(cfg, seed) {
        Ok(out) => out,
        Err(e) => {
            log::warn!("seed {seed}: {e}");
            SeedOutcome { seed, error: Some(e.to_string()), nodes: Vec::new(), warnings: Vec::new() }
        }
    }
}

fn run_seed_inner(cfg: &ExperimentConfig, seed: u64) -> Result<SeedOutcome> {
    let tree = build_tree(cfg, seed)?;
    let sets = tree
        .post_order()
        .into_iter()
        .map(|id| emit_training_samples(&tree, id, cfg.q_samples, seed))
        .collect::<Result<Vec<_>>>()?;
    let view = tree.student_view(&sets, cfg.leaf_solver == LeafSolver::Provided);
    let reports = tree_train(&view, &cfg.tree_train_options(seed))?;
    let threshold = match cfg.scale {
        ScaleMode::Snap { threshold } => threshold,
        ScaleMode::Rip => 0.5,
    };
    let mut nodes = Vec::with_capacity(reports.len());
    for (&id, rep) in &reports {
        let node = tree.node(id)?;
        let child = tree.child_concat(id);
        let matched = rep.x_learned.as_ref().is_some_and(|x| {
            let learned = scale_snap(x, threshold).matrix;
            let truth = scale_snap(&node.x_true, threshold).matrix;
            match_up_to_signed_permutation(&learned, &truth, cfg.match_tol).matched.is_some()
        });
        nodes.push(NodeOutcome {
            node_id: id,
            depth: node.depth,
            p: node.p(),
            p_child: child.as_ref().map(|c| c.ncols()),
            rank_a_xchild: child.map(|c| linalg::numerical_rank(&(&tree.a * c), linalg::RANK_RTOL)),
            q_attempted: rep.q_attempted,
            q_graded_ok: rep.q_graded_ok,
            validate_fraction: rep.validate_fraction,
            matched,
            status: rep.status.clone(),
        });
    }
    Ok(SeedOutcome { seed, error: None, nodes, warnings: tree.warnings.clone() })
}

fn aggregate(cfg: &ExperimentConfig, seeds: &[SeedOutcome]) -> Vec<DepthRow> {
    (0..=cfg.depth)
        .map(|depth| {
            let nodes: Vec<&NodeOutcome> =
                seeds.iter().flat_map(|s| s.nodes.iter()).filter(|n| n.depth == depth).collect();
            let per_seed = 1usize << depth;
            let failed = seeds.iter().filter(|s| s.error.is_some()).count();
            let ranks: Vec<f64> = nodes.iter().filter_map(|n| n.rank_a_xchild).map(|r| r as f64).collect();
            let mean = |v: &[f64]| if v.is_empty() { None } else { Some(v.iter().sum::<f64>() / v.len() as f64) };
            let vf: Vec<f64> = nodes.iter().map(|n| n.validate_fraction).collect();
            DepthRow {
                depth,
                m: cfg.m,
                n: cfg.n,
                p_child: nodes.iter().find_map(|n| n.p_child),
                mean_rank_a_xchild: mean(&ranks),
                q_samples: cfg.q_samples,
                validate_fraction: mean(&vf).unwrap_or(0.0),
                recovered: nodes.iter().filter(|n| n.matched).count(),
                total: nodes.len() + failed * per_seed,
            }
        })
        .collect()
}

/// Runs every seed (in parallel, aggregated in seed order) and builds the
/// depth-wise report. Failed seeds are recorded and count as unrecovered.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let start = Instant::now();
    let seeds: Vec<SeedOutcome> = cfg.seeds.par_iter().map(|&s| run_seed(cfg, s)).collect();
    let rows = aggregate(cfg, &seeds);
    let body = ReportBody { label: cfg.label.clone(), config_hash: cfg.hash(), config: cfg.clone(), rows, seeds };
    let content_hash = sha256_hex(&serde_json::to_vec(&body)?);
    let unix_time = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    Ok(ExperimentReport {
        body,
        content_hash,
        metadata: RunMetadata { unix_time, wall_seconds: start.elapsed().as_secs_f64() },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            label: "small".into(),
            curriculum: Curriculum::SatI,
            m: 16,
            n: 20,
            depth: 1,
            per_leaf_p: 6,
            t: 4,
            tbar: 2,
            q_samples: 300,
            seeds: vec![0, 1],
            grader_tol: 1e-4,
            scale: ScaleMode::default(),
            leaf_solver: LeafSolver::Provided,
            solver: SolverOptions::default(),
            factor: training_factor(),
            coef_sparsity_limit: None,
            clause_ones: 3,
            match_tol: 1e-6,
        }
    }

    #[test]
    fn validation() {
        let ok = small_config();
        assert!(ok.validate().is_ok());
        assert_eq!(ok.coef_limit(), 5);
        for bad in [
            ExperimentConfig { seeds: vec![], ..ok.clone() },
            ExperimentConfig { t: 1, ..ok.clone() },
            ExperimentConfig { t: 6, ..ok.clone() },
            ExperimentConfig { tbar: 0, ..ok.clone() },
            ExperimentConfig { grader_tol: 0.0, ..ok.clone() },
            ExperimentConfig { curriculum: Curriculum::Gaussian { support: 1 }, ..ok.clone() },
        ] {
            assert!(matches!(bad.validate(), Err(Error::Parameter(_))), "{bad:?}");
        }
    }

    #[test]
    fn config_json_round_trip_with_defaults() {
        let text = r#"{"label":"x","curriculum":{"kind":"sat_iii","blocks":2},"m":24,"n":32,"depth":1,
            "per_leaf_p":4,"t":4,"tbar":2,"q_samples":10,"seeds":[3],"grader_tol":1e-3}"#;
        let cfg: ExperimentConfig = serde_json::from_str(text).unwrap();
        assert_eq!(cfg.curriculum, Curriculum::SatIII { blocks: 2 });
        assert_eq!(cfg.leaf_solver, LeafSolver::Provided);
        assert_eq!(cfg.factor.fit_tol, None);
        let back: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn report_fields_are_consistent() {
        let cfg = small_config();
        let rep = run_experiment(&cfg).unwrap();
        assert_eq!(rep.body.rows.len(), 2);
        assert_eq!(rep.failed_seeds(), 0);
        for row in &rep.body.rows {
            assert!(row.recovered <= row.total);
            assert_eq!(row.total, cfg.seeds.len() << row.depth);
            assert!((0.0..=1.0).contains(&row.validate_fraction));
        }
        let root = rep.row(0).unwrap();
        assert_eq!(root.p_child, Some(12));
        assert!(root.mean_rank_a_xchild.unwrap() <= 12.0);
        assert!(rep.row(1).unwrap().p_child.is_none());
        let csv = rep.to_csv().unwrap();
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.lines().nth(1).unwrap().starts_with("small,0,16,20,12,"));
    }

    #[test]
    fn gaussian_curriculum_builds() {
        let cfg = ExperimentConfig {
            curriculum: Curriculum::Gaussian { support: 4 },
            m: 12,
            n: 24,
            per_leaf_p: 3,
            q_samples: 120,
            seeds: vec![5],
            ..small_config()
        };
        let tree = build_tree(&cfg, 5).unwrap();
        assert_eq!(tree.nodes.len(), 3);
        tree.check_invariants(1e-9).unwrap();
    }

    #[test]
    fn failed_seed_is_recorded() {
        // Too few rows for the identity block: construction fails.
        let cfg = ExperimentConfig { m: 3, n: 20, seeds: vec![0], ..small_config() };
        let rep = run_experiment(&cfg).unwrap();
        assert_eq!(rep.failed_seeds(), 1);
        assert_eq!(rep.row(0).unwrap().total, 1);
        assert_eq!(rep.row(0).unwrap().recovered, 0);
    }
}
