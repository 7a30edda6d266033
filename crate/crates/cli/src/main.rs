use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use sparse_curriculum::harness::{build_tree, run_experiment, ExperimentConfig, ReportFormat};
use sparse_curriculum::io::{read_matrix, write_matrix};
use sparse_curriculum::sat::{reduce_1in3sat, solve_1in3_brute, solve_1in3_exhaustive, SatInstance};
use sparse_curriculum::student::{tree_train, LeafSolver, NodeStatus};
use sparse_curriculum::teacher::{
    emit_training_samples, read_student_view, tree_size_bound, write_student_view, write_teacher,
};
use sparse_curriculum::verify::{
    check_split_global_optimality, check_split_independence, nsp_check, rip_constant_brute, NspMode, DEFAULT_BUDGET,
};
use sparse_curriculum::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_PARTIAL: u8 = 3;
const EXIT_HARD: u8 = 4;

#[derive(Parser)]
#[command(name = "spcurr", version, about = "Sparse-solution curricula: teacher, student, verifiers and experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seeds.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Input instance: a student manifest, a matrix CSV or a 1-in-3-SAT file.
    #[arg(long, global = true)]
    instance: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Build a curriculum tree and write the teacher files.
    GenTree,
    /// Build a tree, emit samples and write teacher and student files.
    GenSamples,
    /// Train a tree from a student manifest (`--instance`) with the
    /// training options of `--config`.
    Train,
    /// RIP, NSP and split checks on a matrix CSV (`--instance`).
    Verify,
    /// Write the linear system of a 1-in-3-SAT instance.
    SatReduce,
    /// Decide a 1-in-3-SAT instance through its sparse reduction.
    SatSolve,
    /// Run a seeded experiment and write the depth-wise report.
    Experiment,
    /// Node-count bound for a learnable tree.
    Bound,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug)]
enum Failure {
    Config(anyhow::Error),
    Hard(anyhow::Error),
}

impl Failure {
    fn config(msg: impl std::fmt::Display) -> Self {
        Failure::Config(anyhow!("{msg}"))
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast_ref::<Error>() {
            Some(Error::Parameter(_) | Error::Domain(_) | Error::Parse(_) | Error::Json(_)) => Failure::Config(e),
            _ => Failure::Hard(e),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

type Outcome = Result<bool, Failure>;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VerifyConfig {
    #[serde(default)]
    rip_orders: Vec<usize>,
    #[serde(default)]
    nsp_order: Option<usize>,
    #[serde(default = "exact_mode")]
    nsp_mode: NspMode,
    /// Split matrix `S` checked against the instance, relative to the config.
    #[serde(default)]
    split: Option<PathBuf>,
    #[serde(default = "default_budget")]
    budget: u128,
}

fn exact_mode() -> NspMode {
    NspMode::ExactSmall
}
fn default_budget() -> u128 {
    DEFAULT_BUDGET
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoundConfig {
    s0: u64,
    gamma: u64,
    c: f64,
    t: u64,
    tbar: u64,
}

fn read_json<T: serde::de::DeserializeOwned>(path: Option<&Path>) -> Result<T, Failure> {
    let path = path.ok_or_else(|| Failure::config("--config is required"))?;
    let text = std::fs::read_to_string(path).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))
}

fn experiment_config(cli: &Cli) -> Result<ExperimentConfig, Failure> {
    let mut cfg: ExperimentConfig = read_json(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.seeds = vec![seed];
    }
    cfg.validate().map_err(|e| Failure::Config(e.into()))?;
    Ok(cfg)
}

fn required<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, Failure> {
    p.as_deref().ok_or_else(|| Failure::config(format!("{flag} is required")))
}

/// Prints `value` as JSON, or as `key,value` rows for scalar fields in CSV mode.
fn emit(cli: &Cli, value: &Value) {
    match cli.format {
        Format::Json => println!("{}", serde_json::to_string_pretty(value).expect("json")),
        Format::Csv => {
            println!("key,value");
            if let Value::Object(map) = value {
                for (k, v) in map {
                    let cell = match v {
                        Value::String(s) => s.clone(),
                        other => other.to_string(),
                    };
                    println!("{k},\"{}\"", cell.replace('"', "\"\""));
                }
            }
        }
    }
}

fn gen_tree(cli: &Cli) -> Outcome {
    let cfg = experiment_config(cli)?;
    let out = required(&cli.out, "--out")?;
    let seed = cfg.seeds[0];
    let tree = build_tree(&cfg, seed)?;
    let path = write_teacher(out, &tree, &[])?;
    emit(cli, &json!({ "seed": seed, "nodes": tree.nodes.len(), "teacher": path, "warnings": tree.warnings }));
    Ok(true)
}

fn gen_samples(cli: &Cli) -> Outcome {
    let cfg = experiment_config(cli)?;
    let out = required(&cli.out, "--out")?;
    let seed = cfg.seeds[0];
    let tree = build_tree(&cfg, seed)?;
    let sets = tree
        .post_order()
        .into_iter()
        .map(|id| emit_training_samples(&tree, id, cfg.q_samples, seed))
        .collect::<Result<Vec<_>, _>>()?;
    let teacher = write_teacher(&out.join("teacher"), &tree, &sets)?;
    let view = tree.student_view(&sets, cfg.leaf_solver == LeafSolver::Provided);
    let student = write_student_view(&out.join("student"), &view)?;
    emit(
        cli,
        &json!({ "seed": seed, "nodes": tree.nodes.len(), "q_samples": cfg.q_samples, "teacher": teacher, "student": student }),
    );
    Ok(true)
}

fn train(cli: &Cli) -> Outcome {
    let instance = required(&cli.instance, "--instance")?;
    let cfg = experiment_config(cli)?;
    let seed = cfg.seeds[0];
    let opts = cfg.tree_train_options(seed);
    let view = read_student_view(instance).with_context(|| format!("reading {}", instance.display()))?;
    let start = Instant::now();
    let reports = tree_train(&view, &opts)?;
    let wall = start.elapsed().as_secs_f64();
    let mut nodes = Vec::new();
    for r in reports.values() {
        if let (Some(dir), Some(x)) = (&cli.out, &r.x_learned) {
            write_matrix(&dir.join("learned").join(format!("node_{}_X.csv", r.node_id)), x)?;
        }
        nodes.push(json!({
            "node_id": r.node_id,
            "depth": r.depth,
            "q_attempted": r.q_attempted,
            "q_graded_ok": r.q_graded_ok,
            "validate_fraction": r.validate_fraction,
            "status": r.status,
        }));
    }
    let all_trained = reports.values().all(|r| r.status == NodeStatus::Trained);
    let report = json!({
        "nodes": nodes,
        "metadata": { "seed": seed, "grader_tol": cfg.grader_tol, "wall_seconds": wall },
    });
    if let Some(dir) = &cli.out {
        std::fs::create_dir_all(dir).context("creating output directory")?;
        std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(&report).expect("json"))
            .context("writing report")?;
    }
    match cli.format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&report).expect("json")),
        Format::Csv => {
            println!("node_id,depth,q_attempted,q_graded_ok,validate_fraction,trained");
            for r in reports.values() {
                println!(
                    "{},{},{},{},{:.4},{}",
                    r.node_id,
                    r.depth,
                    r.q_attempted,
                    r.q_graded_ok,
                    r.validate_fraction,
                    r.status == NodeStatus::Trained
                );
            }
        }
    }
    Ok(all_trained)
}

fn verify(cli: &Cli) -> Outcome {
    let cfg: VerifyConfig = read_json(cli.config.as_deref())?;
    let instance = required(&cli.instance, "--instance")?;
    let m = read_matrix(instance)?;
    let mut out = serde_json::Map::new();
    for &t in &cfg.rip_orders {
        out.insert(format!("rip_delta_{t}"), json!(rip_constant_brute(&m, t, cfg.budget)?));
    }
    if let Some(t) = cfg.nsp_order {
        let res = nsp_check(&m, t, cfg.nsp_mode, cfg.budget)?;
        out.insert("nsp_holds".into(), json!(res.holds));
        out.insert("nsp_certificate".into(), serde_json::to_value(&res.certificate).expect("json"));
    }
    if let Some(split) = &cfg.split {
        let base = cli.config.as_deref().and_then(Path::parent).unwrap_or(Path::new("."));
        let s = read_matrix(&base.join(split))?;
        out.insert("split_independent".into(), json!(check_split_independence(&m, &s)?));
        out.insert("split_globally_optimal".into(), json!(check_split_global_optimality(&m, &s, cfg.budget)?));
    }
    emit(cli, &Value::Object(out));
    Ok(true)
}

fn sat_instance(cli: &Cli) -> Result<SatInstance, Failure> {
    let path = required(&cli.instance, "--instance")?;
    let text = std::fs::read_to_string(path).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    SatInstance::parse(&text).map_err(|e| Failure::Config(e.into()))
}

fn sat_reduce(cli: &Cli) -> Outcome {
    let inst = sat_instance(cli)?;
    let prob = reduce_1in3sat(&inst);
    let mut summary = json!({ "rows": prob.a.nrows(), "cols": prob.a.ncols(), "sparsity_target": inst.n_vars() });
    if let Some(dir) = &cli.out {
        let b = sparse_curriculum::DenseMatrix::from_column_slice(prob.b.len(), 1, prob.b.as_slice());
        write_matrix(&dir.join("A.csv"), &prob.a)?;
        write_matrix(&dir.join("b.csv"), &b)?;
        summary["a"] = json!(dir.join("A.csv"));
        summary["b"] = json!(dir.join("b.csv"));
    }
    emit(cli, &summary);
    Ok(true)
}

fn sat_solve(cli: &Cli) -> Outcome {
    let inst = sat_instance(cli)?;
    let found = solve_1in3_brute(&inst)?;
    let exhaustive = solve_1in3_exhaustive(&inst).is_some();
    let assignment = found.as_ref().map(|a| a.iter().map(|&v| u8::from(v)).collect::<Vec<_>>());
    emit(
        cli,
        &json!({ "satisfiable": found.is_some(), "assignment": assignment, "agrees_with_enumeration": exhaustive == found.is_some() }),
    );
    Ok(true)
}

fn experiment(cli: &Cli) -> Outcome {
    let cfg = experiment_config(cli)?;
    let report = run_experiment(&cfg)?;
    let format = match cli.format {
        Format::Json => ReportFormat::Json,
        Format::Csv => ReportFormat::Csv,
    };
    match &cli.out {
        Some(dir) => {
            let path = report.write(dir, format)?;
            if format == ReportFormat::Csv {
                report.write(dir, ReportFormat::Json)?;
            }
            eprintln!("wrote {}", path.display());
        }
        None => match format {
            ReportFormat::Json => println!("{}", report.to_json()),
            ReportFormat::Csv => print!("{}", report.to_csv()?),
        },
    }
    Ok(report.failed_seeds() == 0)
}

fn bound(cli: &Cli) -> Outcome {
    let cfg: BoundConfig = read_json(cli.config.as_deref())?;
    let value = tree_size_bound(cfg.s0, cfg.gamma, cfg.c, cfg.t, cfg.tbar)?;
    emit(cli, &json!({ "bound": value }));
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let run = match cli.command {
        Command::GenTree => gen_tree(&cli),
        Command::GenSamples => gen_samples(&cli),
        Command::Train => train(&cli),
        Command::Verify => verify(&cli),
        Command::SatReduce => sat_reduce(&cli),
        Command::SatSolve => sat_solve(&cli),
        Command::Experiment => experiment(&cli),
        Command::Bound => bound(&cli),
    };
    match run {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_PARTIAL),
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e:#}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Hard(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_HARD)
        }
    }
}
