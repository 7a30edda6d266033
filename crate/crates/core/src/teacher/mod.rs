//! Teacher side: learnable curriculum trees built from a designated solution,
//! per-node training samples, and the node-count bound.

mod construct;
mod samples;
mod sat_curricula;
mod serialize;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{sparsity, BernoulliSubgaussianParams, DenseMatrix, SparseVector};

pub use construct::{build_class_matrix, orthogonalizing_preconditioner, split_support, ClassMatrix};
pub use samples::{emit_training_samples, StudentSamples, TrainingSet};
pub use sat_curricula::{build_sat_curriculum, identity_block_matrix, SatCurriculumDims, SatVariant};
pub use serialize::{
    read_student_view, read_teacher, write_student_view, write_teacher, StudentNode, StudentView, STUDENT_FILE,
    TEACHER_FILE,
};

/// Node of a curriculum tree. Ids follow heap order: root 0, children
/// `2i + 1` and `2i + 2`.
#[derive(Clone, Debug)]
pub struct ClassNode {
    pub id: usize,
    pub children: Option<(usize, usize)>,
    pub depth: usize,
    /// Indices into `[p_total]` covered by this node.
    pub k_set: Vec<usize>,
    /// Leaf blocks covered by this node.
    pub leaves: Vec<usize>,
    pub x_true: DenseMatrix,
    pub w: DenseMatrix,
    pub s_bound: usize,
}

impl ClassNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }

    pub fn p(&self) -> usize {
        self.x_true.ncols()
    }

    /// `sqrt(#leaves) e_0`: maps onto the designated solution restricted to
    /// the covered blocks.
    pub fn canonical_coefficient(&self) -> DVector<f64> {
        let mut z = DVector::zeros(self.p());
        z[0] = (self.leaves.len() as f64).sqrt();
        z
    }
}

/// Sample constraint for a curriculum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SamplingRule {
    /// Coefficients drawn i.i.d. at rate `tbar / 2P`.
    Free,
    /// At most one nonzero per block column; node column 0 spans every block,
    /// column `k > 0` lies in block `k / block_cols`.
    OnePerBlock { block_cols: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CurriculumKind {
    Generic,
    SatI,
    SatII,
    SatIII { blocks: usize },
}

#[derive(Clone, Debug)]
pub struct CurriculumTree {
    pub kind: CurriculumKind,
    pub nodes: Vec<ClassNode>,
    pub root_id: usize,
    pub depth: usize,
    pub per_leaf_p: usize,
    pub a: DenseMatrix,
    pub x: SparseVector,
    pub t: usize,
    pub tbar: usize,
    pub gamma: usize,
    pub partition_j: Vec<Vec<usize>>,
    pub partition_k: Vec<Vec<usize>>,
    pub class: Option<ClassMatrix>,
    pub x_full: DenseMatrix,
    pub sampling: SamplingRule,
    pub warnings: Vec<String>,
}

pub fn leaf_id(depth: usize, leaf: usize) -> usize {
    (1usize << depth) - 1 + leaf
}

/// Contiguous balanced split of `items` into `parts` blocks; the last block
/// absorbs the remainder.
pub fn balanced_blocks(items: &[usize], parts: usize) -> Result<Vec<Vec<usize>>> {
    if parts == 0 || items.len() < parts {
        return Err(Error::Parameter(format!("cannot split {} items into {parts} nonempty blocks", items.len())));
    }
    let size = items.len() / parts;
    Ok((0..parts)
        .map(|l| {
            let end = if l + 1 == parts { items.len() } else { (l + 1) * size };
            items[l * size..end].to_vec()
        })
        .collect())
}

impl CurriculumTree {
    /// Assembles nodes from the full class matrix `x_full` (`n x 2^L P`),
    /// whose leaf `l` occupies columns `[l P, (l + 1) P)`.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn assemble(
        kind: CurriculumKind,
        a: DenseMatrix,
        x: SparseVector,
        x_full: DenseMatrix,
        depth: usize,
        per_leaf_p: usize,
        tbar: usize,
        partition_j: Vec<Vec<usize>>,
        class: Option<ClassMatrix>,
        sampling: SamplingRule,
        warnings: Vec<String>,
    ) -> Result<Self> {
        let leaves = 1usize << depth;
        let p_total = leaves * per_leaf_p;
        if x_full.ncols() != p_total {
            return Err(Error::Parameter(format!("class matrix has {} columns, expected {p_total}", x_full.ncols())));
        }
        let partition_k: Vec<Vec<usize>> =
            (0..leaves).map(|l| (l * per_leaf_p..(l + 1) * per_leaf_p).collect()).collect();
        let leaf_bound = (0..p_total).map(|k| sparsity(x_full.column(k).as_slice(), 0.0)).max().unwrap_or(0);
        let count = (1usize << (depth + 1)) - 1;
        let mut nodes = Vec::with_capacity(count);
        for id in 0..count {
            let d = usize::BITS as usize - 1 - (id + 1).leading_zeros() as usize;
            let span = 1usize << (depth - d);
            let first = (id + 1 - (1 << d)) * span;
            let covered: Vec<usize> = (first..first + span).collect();
            let mut w = DenseMatrix::zeros(p_total, per_leaf_p);
            let scale = 1.0 / (span as f64).sqrt();
            for &l in &covered {
                for c in 0..per_leaf_p {
                    w[(l * per_leaf_p + c, c)] = scale;
                }
            }
            let x_true = &x_full * &w;
            let k_set = covered.iter().flat_map(|&l| partition_k[l].iter().copied()).collect();
            let children = (d < depth).then_some((2 * id + 1, 2 * id + 2));
            nodes.push(ClassNode {
                id,
                children,
                depth: d,
                k_set,
                leaves: covered,
                x_true,
                w,
                s_bound: span * leaf_bound,
            });
        }
        let t = 2 * tbar;
        Ok(Self {
            kind,
            nodes,
            root_id: 0,
            depth,
            per_leaf_p,
            a,
            x,
            t,
            tbar,
            gamma: 2,
            partition_j,
            partition_k,
            class,
            x_full,
            sampling,
            warnings,
        })
    }

    pub fn node(&self, id: usize) -> Result<&ClassNode> {
        self.nodes.get(id).ok_or_else(|| Error::Parameter(format!("no node with id {id}")))
    }

    pub fn root(&self) -> &ClassNode {
        &self.nodes[self.root_id]
    }

    /// Ids in post order (children before parents).
    pub fn post_order(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.nodes.len());
        fn visit(tree: &CurriculumTree, id: usize, out: &mut Vec<usize>) {
            if let Some((l, r)) = tree.nodes[id].children {
                visit(tree, l, out);
                visit(tree, r, out);
            }
            out.push(id);
        }
        visit(self, self.root_id, &mut out);
        out
    }

    /// `[X_j1 X_j2]` for an internal node, from the teacher's matrices.
    pub fn child_concat(&self, id: usize) -> Option<DenseMatrix> {
        let (l, r) = self.nodes.get(id)?.children?;
        let (xl, xr) = (&self.nodes[l].x_true, &self.nodes[r].x_true);
        let mut out = DenseMatrix::zeros(xl.nrows(), xl.ncols() + xr.ncols());
        out.columns_mut(0, xl.ncols()).copy_from(xl);
        out.columns_mut(xl.ncols(), xr.ncols()).copy_from(xr);
        Some(out)
    }

    /// Structural self-check: isometries, recombination identity, sparsity
    /// bookkeeping and root reconstruction.
    pub fn check_invariants(&self, tol: f64) -> Result<()> {
        let fail = |msg: String| Err(Error::Construction { block: 0, reason: msg });
        if self.t < self.tbar {
            return fail(format!("t = {} below tbar = {}", self.t, self.tbar));
        }
        for node in &self.nodes {
            let p = node.p();
            if (node.w.transpose() * &node.w - DenseMatrix::identity(p, p)).amax() > tol {
                return fail(format!("node {} has a non-isometric W", node.id));
            }
            if (&self.x_full * &node.w - &node.x_true).amax() > tol {
                return fail(format!("node {} breaks X_i = X W_i", node.id));
            }
            for col in node.x_true.column_iter() {
                if sparsity(col.as_slice(), 0.0) > node.s_bound {
                    return fail(format!("node {} column exceeds sparsity bound {}", node.id, node.s_bound));
                }
            }
            if let Some((l, r)) = node.children {
                let (cl, cr) = (&self.nodes[l], &self.nodes[r]);
                let mut union: Vec<usize> = cl.k_set.iter().chain(&cr.k_set).copied().collect();
                union.sort_unstable();
                let mut own = node.k_set.clone();
                own.sort_unstable();
                if union != own || cl.k_set.iter().any(|k| cr.k_set.contains(k)) {
                    return fail(format!("node {} K set is not the disjoint union of its children", node.id));
                }
                for child in [cl, cr] {
                    if node.s_bound * self.tbar > child.s_bound * self.t {
                        return fail(format!("sparsity bookkeeping fails between {} and {}", node.id, child.id));
                    }
                }
            }
        }
        let root = self.root();
        let recon = &root.x_true * root.canonical_coefficient();
        if (recon - self.x.to_dvector()).amax() > tol {
            return fail("root does not reproduce x".into());
        }
        Ok(())
    }
}

/// Learnable binary tree of depth `depth >= 1` for a given `A` and `x`: the
/// support of `x` is split into `2^depth` balanced blocks, leaves take the
/// matching column blocks of the class matrix and parents recombine their
/// children with `(1/sqrt 2)[I; I]`.
#[allow(clippy::too_many_arguments)]
pub fn build_curriculum_tree(
    a: &DenseMatrix,
    x: &SparseVector,
    depth: usize,
    per_leaf_p: usize,
    t: usize,
    params: &BernoulliSubgaussianParams,
    seed: u64,
    c: f64,
) -> Result<CurriculumTree> {
    if depth == 0 || depth > 20 {
        return Err(Error::Parameter(format!("depth {depth} must lie in 1..=20")));
    }
    if t < 2 || !t.is_multiple_of(2) {
        return Err(Error::Parameter(format!("t = {t} must be even and at least 2 so that t / tbar = 2")));
    }
    if per_leaf_p == 0 {
        return Err(Error::Parameter("per_leaf_p must be positive".into()));
    }
    let leaves = 1usize << depth;
    let partition_j = balanced_blocks(x.support(), leaves)
        .map_err(|_| Error::Partition(format!("support of size {} cannot fill {leaves} blocks", x.sparsity())))?;
    let p = leaves * per_leaf_p;
    let partition_k: Vec<Vec<usize>> = (0..leaves).map(|l| (l * per_leaf_p..(l + 1) * per_leaf_p).collect()).collect();
    let class = build_class_matrix(a, x, &partition_j, &partition_k, p, params, seed, c)?;
    let warnings = class.warnings.clone();
    CurriculumTree::assemble(
        CurriculumKind::Generic,
        a.clone(),
        x.clone(),
        class.x.clone(),
        depth,
        per_leaf_p,
        t / 2,
        partition_j,
        Some(class),
        SamplingRule::Free,
        warnings,
    )
}

/// `ceil(gamma * s0^(ln gamma / ln(c t / tbar)))`.
pub fn tree_size_bound(s0: u64, gamma: u64, c: f64, t: u64, tbar: u64) -> Result<u64> {
    if s0 == 0 || gamma < 2 || tbar == 0 {
        return Err(Error::Parameter(format!("need s0 >= 1, gamma >= 2, tbar >= 1; got {s0}, {gamma}, {tbar}")));
    }
    let ratio = c * t as f64 / tbar as f64;
    if ratio <= 1.0 || !ratio.is_finite() {
        return Err(Error::Domain(format!("c t / tbar = {ratio} must exceed 1")));
    }
    let g = gamma as f64;
    let value = g * (s0 as f64).powf(g.ln() / ratio.ln());
    if !value.is_finite() || value > u64::MAX as f64 {
        return Err(Error::Domain(format!("bound {value} does not fit")));
    }
    Ok((value - 1e-9).ceil() as u64)
}
