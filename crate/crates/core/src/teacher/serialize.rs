//! JSON manifests with CSV matrices. The teacher manifest holds everything;
//! the student manifest references `A` and the right-hand sides only (plus
//! handed-out leaf solutions).

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ClassMatrix, ClassNode, CurriculumKind, CurriculumTree, SamplingRule, StudentSamples, TrainingSet};
use crate::error::{Error, Result};
use crate::io::{read_matrix, write_matrix};
use crate::model::{DenseMatrix, SparseVector};

pub const TEACHER_FILE: &str = "tree.teacher.json";
pub const STUDENT_FILE: &str = "tree.student.json";

#[derive(Serialize, Deserialize)]
struct TeacherManifest {
    kind: CurriculumKind,
    depth: usize,
    per_leaf_p: usize,
    t: usize,
    tbar: usize,
    gamma: usize,
    root_id: usize,
    partition_j: Vec<Vec<usize>>,
    partition_k: Vec<Vec<usize>>,
    x: SparseVector,
    sampling: SamplingRule,
    warnings: Vec<String>,
    a: String,
    x_full: String,
    class: Option<ClassEntry>,
    nodes: Vec<NodeEntry>,
    samples: Vec<SampleEntry>,
}

#[derive(Serialize, Deserialize)]
struct ClassEntry {
    s: String,
    z_columns: Vec<usize>,
    preconditioner: Option<String>,
    d: Vec<f64>,
    warnings: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct NodeEntry {
    id: usize,
    children: Option<(usize, usize)>,
    depth: usize,
    k_set: Vec<usize>,
    leaves: Vec<usize>,
    s_bound: usize,
    x_true: String,
    w: String,
}

#[derive(Serialize, Deserialize)]
struct SampleEntry {
    node_id: usize,
    seed: u64,
    b: String,
    z: Option<String>,
    x: Option<String>,
}

fn put(dir: &Path, rel: String, m: &DenseMatrix) -> Result<String> {
    write_matrix(&dir.join(&rel), m)?;
    Ok(rel)
}

fn get(dir: &Path, rel: &str) -> Result<DenseMatrix> {
    read_matrix(&dir.join(rel))
}

fn sample_paths(id: usize) -> (String, String, String) {
    (format!("samples/node_{id}_b.csv"), format!("samples/node_{id}_z.csv"), format!("samples/node_{id}_x.csv"))
}

/// Writes `tree.teacher.json` plus `matrices/` and `samples/` under `dir`.
pub fn write_teacher(dir: &Path, tree: &CurriculumTree, sets: &[TrainingSet]) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let class = match &tree.class {
        Some(c) => Some(ClassEntry {
            s: put(dir, "matrices/S.csv".into(), &c.s)?,
            z_columns: c.z_columns.clone(),
            preconditioner: c.preconditioner.as_ref().map(|t| put(dir, "matrices/T.csv".into(), t)).transpose()?,
            d: c.d.clone(),
            warnings: c.warnings.clone(),
        }),
        None => None,
    };
    let nodes = tree
        .nodes
        .iter()
        .map(|n| {
            Ok(NodeEntry {
                id: n.id,
                children: n.children,
                depth: n.depth,
                k_set: n.k_set.clone(),
                leaves: n.leaves.clone(),
                s_bound: n.s_bound,
                x_true: put(dir, format!("matrices/node_{}_X.csv", n.id), &n.x_true)?,
                w: put(dir, format!("matrices/node_{}_W.csv", n.id), &n.w)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let samples = sets
        .iter()
        .map(|s| {
            let (bp, zp, xp) = sample_paths(s.node_id);
            Ok(SampleEntry {
                node_id: s.node_id,
                seed: s.seed,
                b: put(dir, bp, &s.b)?,
                z: s.z_true.as_ref().map(|z| put(dir, zp, z)).transpose()?,
                x: s.x_true.as_ref().map(|x| put(dir, xp, x)).transpose()?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = TeacherManifest {
        kind: tree.kind,
        depth: tree.depth,
        per_leaf_p: tree.per_leaf_p,
        t: tree.t,
        tbar: tree.tbar,
        gamma: tree.gamma,
        root_id: tree.root_id,
        partition_j: tree.partition_j.clone(),
        partition_k: tree.partition_k.clone(),
        x: tree.x.clone(),
        sampling: tree.sampling,
        warnings: tree.warnings.clone(),
        a: put(dir, "matrices/A.csv".into(), &tree.a)?,
        x_full: put(dir, "matrices/X.csv".into(), &tree.x_full)?,
        class,
        nodes,
        samples,
    };
    let path = dir.join(TEACHER_FILE);
    fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(path)
}

/// Reads a teacher manifest and the training sets it references.
pub fn read_teacher(path: &Path) -> Result<(CurriculumTree, Vec<TrainingSet>)> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let m: TeacherManifest = serde_json::from_str(&fs::read_to_string(path)?)?;
    let x_full = get(dir, &m.x_full)?;
    let class = match m.class {
        Some(c) => Some(ClassMatrix {
            x: x_full.clone(),
            s: get(dir, &c.s)?,
            z_columns: c.z_columns,
            preconditioner: c.preconditioner.map(|p| get(dir, &p)).transpose()?,
            d: c.d,
            warnings: c.warnings,
        }),
        None => None,
    };
    let nodes = m
        .nodes
        .into_iter()
        .map(|n| {
            Ok(ClassNode {
                id: n.id,
                children: n.children,
                depth: n.depth,
                k_set: n.k_set,
                leaves: n.leaves,
                x_true: get(dir, &n.x_true)?,
                w: get(dir, &n.w)?,
                s_bound: n.s_bound,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let sets = m
        .samples
        .into_iter()
        .map(|s| {
            Ok(TrainingSet {
                node_id: s.node_id,
                seed: s.seed,
                b: get(dir, &s.b)?,
                z_true: s.z.map(|p| get(dir, &p)).transpose()?,
                x_true: s.x.map(|p| get(dir, &p)).transpose()?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let tree = CurriculumTree {
        kind: m.kind,
        nodes,
        root_id: m.root_id,
        depth: m.depth,
        per_leaf_p: m.per_leaf_p,
        a: get(dir, &m.a)?,
        x: m.x,
        t: m.t,
        tbar: m.tbar,
        gamma: m.gamma,
        partition_j: m.partition_j,
        partition_k: m.partition_k,
        class,
        x_full,
        sampling: m.sampling,
        warnings: m.warnings,
    };
    Ok((tree, sets))
}

/// Node as the student sees it: shape and samples, no ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct StudentNode {
    pub id: usize,
    pub children: Option<(usize, usize)>,
    pub depth: usize,
    pub p: usize,
    pub samples: Option<StudentSamples>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudentView {
    pub a: DenseMatrix,
    pub root_id: usize,
    pub nodes: Vec<StudentNode>,
}

impl StudentView {
    pub fn node(&self, id: usize) -> Result<&StudentNode> {
        self.nodes.iter().find(|n| n.id == id).ok_or_else(|| Error::Parameter(format!("student view has no node {id}")))
    }

    /// Ids with children before parents.
    pub fn post_order(&self) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![(self.root_id, false)];
        while let Some((id, expanded)) = stack.pop() {
            let node = self.node(id)?;
            match (node.children, expanded) {
                (Some((l, r)), false) => {
                    stack.push((id, true));
                    stack.push((r, false));
                    stack.push((l, false));
                }
                _ => out.push(id),
            }
        }
        Ok(out)
    }
}

impl CurriculumTree {
    /// Student-visible slice of the tree. Leaf solutions are attached when
    /// `provide_leaf_solutions` is set.
    pub fn student_view(&self, sets: &[TrainingSet], provide_leaf_solutions: bool) -> StudentView {
        let nodes = self
            .nodes
            .iter()
            .map(|n| StudentNode {
                id: n.id,
                children: n.children,
                depth: n.depth,
                p: n.p(),
                samples: sets
                    .iter()
                    .find(|s| s.node_id == n.id)
                    .map(|s| s.student(provide_leaf_solutions && n.is_leaf())),
            })
            .collect();
        StudentView { a: self.a.clone(), root_id: self.root_id, nodes }
    }
}

#[derive(Serialize, Deserialize)]
struct StudentManifest {
    root_id: usize,
    a: String,
    nodes: Vec<StudentNodeEntry>,
}

#[derive(Serialize, Deserialize)]
struct StudentNodeEntry {
    id: usize,
    children: Option<(usize, usize)>,
    depth: usize,
    p: usize,
    b: Option<String>,
    solutions: Option<String>,
}

/// Writes `tree.student.json`, `matrices/A.csv` and the student sample files.
pub fn write_student_view(dir: &Path, view: &StudentView) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let nodes = view
        .nodes
        .iter()
        .map(|n| {
            let (bp, _, xp) = sample_paths(n.id);
            let (b, solutions) = match &n.samples {
                Some(s) => (Some(put(dir, bp, &s.b)?), s.solutions.as_ref().map(|x| put(dir, xp, x)).transpose()?),
                None => (None, None),
            };
            Ok(StudentNodeEntry { id: n.id, children: n.children, depth: n.depth, p: n.p, b, solutions })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = StudentManifest { root_id: view.root_id, a: put(dir, "matrices/A.csv".into(), &view.a)?, nodes };
    let path = dir.join(STUDENT_FILE);
    fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(path)
}

pub fn read_student_view(path: &Path) -> Result<StudentView> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let m: StudentManifest = serde_json::from_str(&fs::read_to_string(path)?)?;
    let nodes = m
        .nodes
        .into_iter()
        .map(|n| {
            let samples = match n.b {
                Some(b) => Some(StudentSamples {
                    node_id: n.id,
                    b: get(dir, &b)?,
                    solutions: n.solutions.map(|p| get(dir, &p)).transpose()?,
                }),
                None => None,
            };
            Ok(StudentNode { id: n.id, children: n.children, depth: n.depth, p: n.p, samples })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StudentView { a: get(dir, &m.a)?, root_id: m.root_id, nodes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::teacher::{build_sat_curriculum, emit_training_samples, SatCurriculumDims, SatVariant};

    #[test]
    fn teacher_and_student_round_trip() {
        let dims = SatCurriculumDims { m: 12, n: 16, depth: 1, per_leaf_p: 4, tbar: 2, clause_ones: 3 };
        let tree = build_sat_curriculum(SatVariant::II, dims, 7).unwrap();
        let sets: Vec<_> = (0..3).map(|id| emit_training_samples(&tree, id, 20, 1).unwrap()).collect();
        let dir = tempfile::tempdir().unwrap();
        let tp = write_teacher(dir.path(), &tree, &sets).unwrap();
        let (back, back_sets) = read_teacher(&tp).unwrap();
        assert_eq!(back.a, tree.a);
        assert_eq!(back.x_full, tree.x_full);
        assert_eq!(back_sets, sets);
        for (a, b) in back.nodes.iter().zip(&tree.nodes) {
            assert_eq!(a.x_true, b.x_true);
            assert_eq!(a.w, b.w);
        }
        back.check_invariants(1e-10).unwrap();

        let view = tree.student_view(&sets, true);
        let sp = write_student_view(dir.path(), &view).unwrap();
        assert_eq!(read_student_view(&sp).unwrap(), view);
        assert_eq!(view.post_order().unwrap(), vec![1, 2, 0]);
        let text = std::fs::read_to_string(&sp).unwrap();
        assert!(!text.contains("_z.csv") && !text.contains("node_0_x"));
        assert!(view.node(0).unwrap().samples.as_ref().unwrap().solutions.is_none());
        assert!(view.node(1).unwrap().samples.as_ref().unwrap().solutions.is_some());
    }
}
