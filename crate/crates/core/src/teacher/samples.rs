use super::{CurriculumTree, SamplingRule};
use crate::error::Result;
use crate::model::{coefficient_params, coefficient_sample_warnings, sample_bernoulli_subgaussian_with, DenseMatrix};
use crate::rng::{self, Purpose};

/// Training problems for one node. Columns of `b` are right-hand sides;
/// `z_true` and `x_true` stay with the teacher.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSet {
    pub node_id: usize,
    pub seed: u64,
    pub b: DenseMatrix,
    pub z_true: Option<DenseMatrix>,
    pub x_true: Option<DenseMatrix>,
}

/// The part of a training set the student may see.
#[derive(Clone, Debug, PartialEq)]
pub struct StudentSamples {
    pub node_id: usize,
    pub b: DenseMatrix,
    /// Solutions handed out by the teacher (leaf nodes only).
    pub solutions: Option<DenseMatrix>,
}

impl TrainingSet {
    pub fn q(&self) -> usize {
        self.b.ncols()
    }

    pub fn b_list(&self) -> impl Iterator<Item = nalgebra::DVector<f64>> + '_ {
        self.b.column_iter().map(|c| c.into_owned())
    }

    pub fn student(&self, provide_solutions: bool) -> StudentSamples {
        StudentSamples {
            node_id: self.node_id,
            b: self.b.clone(),
            solutions: if provide_solutions { self.x_true.clone() } else { None },
        }
    }
}

/// `b_l = A X_true z_l` with `z_l` restricted Bernoulli-Rademacher at rate
/// `tbar / 2P`, thinned to one nonzero per block column when required.
pub fn emit_training_samples(tree: &CurriculumTree, node_id: usize, q: usize, seed: u64) -> Result<TrainingSet> {
    let node = tree.node(node_id)?;
    let p = node.p();
    let params = coefficient_params(p, tree.tbar as f64)?;
    for w in coefficient_sample_warnings(p, q, tree.tbar as f64) {
        log::warn!("node {node_id}: {w}");
    }
    let mut rng = rng::stream(seed, node_id, Purpose::Samples);
    let mut z = sample_bernoulli_subgaussian_with(p, q, &params, &mut rng);
    if let SamplingRule::OnePerBlock { block_cols } = tree.sampling {
        let blocks = p.div_ceil(block_cols);
        for mut col in z.column_iter_mut() {
            let mut used = vec![false; blocks];
            for k in 0..p {
                if col[k] == 0.0 {
                    continue;
                }
                let mine: Vec<usize> = if k == 0 { (0..blocks).collect() } else { vec![k / block_cols] };
                if mine.iter().any(|&b| used[b]) {
                    col[k] = 0.0;
                } else {
                    mine.into_iter().for_each(|b| used[b] = true);
                }
            }
        }
    }
    let x = &node.x_true * &z;
    let b = &tree.a * &x;
    Ok(TrainingSet { node_id, seed, b, z_true: Some(z), x_true: Some(x) })
}
