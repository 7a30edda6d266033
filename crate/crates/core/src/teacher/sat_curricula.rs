use rand::seq::index::sample;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::construct::assemble;
use super::{balanced_blocks, CurriculumKind, CurriculumTree, SamplingRule};
use crate::error::{Error, Result};
use crate::model::{DenseMatrix, SparseVector};
use crate::rng::{self, Purpose, Rng};

/// Layout of a curriculum over the identity-block model class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SatVariant {
    /// Contiguous row blocks, a `{0,1}` deterministic column and `+-1` fill.
    I,
    /// Blocks follow `(i, i + n/2)` pairs; every column has at most one
    /// nonzero per pair.
    II,
    /// Pairs grouped into `blocks` block columns; samples use at most one
    /// column per block.
    III { blocks: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SatCurriculumDims {
    pub m: usize,
    pub n: usize,
    pub depth: usize,
    pub per_leaf_p: usize,
    pub tbar: usize,
    /// Ones per clause row of the upper block.
    pub clause_ones: usize,
}

/// `[[A11 A12], [I I]]` with `m - n/2` clause rows holding `clause_ones`
/// random ones each.
pub fn identity_block_matrix(m: usize, n: usize, clause_ones: usize, rng: &mut Rng) -> Result<DenseMatrix> {
    if n == 0 || !n.is_multiple_of(2) {
        return Err(Error::Parameter(format!("n = {n} must be positive and even")));
    }
    let h = n / 2;
    if m < h {
        return Err(Error::Parameter(format!("m = {m} is below n/2 = {h}")));
    }
    if clause_ones == 0 || clause_ones > n {
        return Err(Error::Parameter(format!("clause_ones = {clause_ones} must lie in 1..={n}")));
    }
    let mut a = DenseMatrix::zeros(m, n);
    let clauses = m - h;
    for r in 0..clauses {
        for j in sample(rng, n, clause_ones) {
            a[(r, j)] = 1.0;
        }
    }
    for i in 0..h {
        a[(clauses + i, i)] = 1.0;
        a[(clauses + i, h + i)] = 1.0;
    }
    Ok(a)
}

fn sign(rng: &mut Rng) -> f64 {
    if rng.random_bool(0.5) {
        1.0
    } else {
        -1.0
    }
}

/// Fills a random column with one `+-1` per pair, on a random side.
fn fill_pairs(col: &mut [f64], pairs: &[usize], h: usize, rng: &mut Rng) {
    for &i in pairs {
        let row = if rng.random_bool(0.5) { i } else { i + h };
        col[row] = sign(rng);
    }
}

/// Rows (or pairs) filled by each column of one leaf.
type LeafFill = Vec<Vec<usize>>;

/// Curriculum tree over a random identity-block matrix.
pub fn build_sat_curriculum(variant: SatVariant, dims: SatCurriculumDims, seed: u64) -> Result<CurriculumTree> {
    let SatCurriculumDims { m, n, depth, per_leaf_p, tbar, clause_ones } = dims;
    if depth == 0 || depth > 16 {
        return Err(Error::Parameter(format!("depth {depth} must lie in 1..=16")));
    }
    if per_leaf_p == 0 || tbar == 0 {
        return Err(Error::Parameter("per_leaf_p and tbar must be positive".into()));
    }
    let a = identity_block_matrix(m, n, clause_ones, &mut rng::stream(seed, 0, Purpose::ProblemMatrix))?;
    let h = n / 2;
    let q = 1usize << depth;
    let p = q * per_leaf_p;
    let mut sol_rng = rng::stream(seed, 0, Purpose::Solution);
    let mut fill_rng = rng::stream(seed, 0, Purpose::BlockRandom);
    let pairs: Vec<usize> = (0..h).collect();
    let both = |g: &[usize]| -> Vec<usize> { g.iter().copied().chain(g.iter().map(|&i| i + h)).collect() };

    // Per leaf: J block, and for each leaf column the pairs (or rows) it fills.
    let (partition_j, x, column_pairs, sampling): (Vec<Vec<usize>>, Vec<f64>, Vec<LeafFill>, SamplingRule) =
        match variant {
            SatVariant::I => {
                let rows: Vec<usize> = (0..n).collect();
                let jb = balanced_blocks(&rows, q)?;
                let x = loop {
                    let x: Vec<f64> = (0..n).map(|_| if sol_rng.random_bool(0.5) { 1.0 } else { 0.0 }).collect();
                    if jb.iter().all(|b| b.iter().any(|&i| x[i] != 0.0)) {
                        break x;
                    }
                };
                let cols = jb.iter().map(|b| vec![b.clone(); per_leaf_p]).collect();
                (jb, x, cols, SamplingRule::Free)
            }
            SatVariant::II => {
                let groups = balanced_blocks(&pairs, q)?;
                let x = pair_solution(h, &mut sol_rng);
                let jb = groups.iter().map(|g| both(g)).collect();
                let cols = groups.iter().map(|g| vec![g.clone(); per_leaf_p]).collect();
                (jb, x, cols, SamplingRule::Free)
            }
            SatVariant::III { blocks } => {
                if blocks == 0 || per_leaf_p % blocks != 0 {
                    return Err(Error::Parameter(format!(
                        "per_leaf_p = {per_leaf_p} must be a multiple of blocks = {blocks}"
                    )));
                }
                if h < blocks * q {
                    return Err(Error::Parameter(format!("{h} pairs cannot fill {blocks} blocks for {q} leaves")));
                }
                let c = per_leaf_p / blocks;
                let hb = balanced_blocks(&pairs, blocks)?;
                // shares[b][l]: pairs of block b owned by leaf l.
                let shares: Vec<Vec<Vec<usize>>> = hb.iter().map(|g| balanced_blocks(g, q)).collect::<Result<_>>()?;
                let x = pair_solution(h, &mut sol_rng);
                let mut jb = Vec::with_capacity(q);
                let mut cols = Vec::with_capacity(q);
                for l in 0..q {
                    let own: Vec<usize> = shares.iter().flat_map(|s| s[l].iter().copied()).collect();
                    let mut j = both(&own);
                    j.sort_unstable();
                    jb.push(j);
                    let leaf_cols: Vec<Vec<usize>> =
                        (0..per_leaf_p).map(|k| if k == 0 { own.clone() } else { shares[k / c][l].clone() }).collect();
                    cols.push(leaf_cols);
                }
                (jb, x, cols, SamplingRule::OnePerBlock { block_cols: c })
            }
        };

    let paired = !matches!(variant, SatVariant::I);
    let mut s = DenseMatrix::zeros(n, q);
    for (l, block) in partition_j.iter().enumerate() {
        for &i in block {
            s[(i, l)] = x[i];
        }
    }
    let mut dr = DenseMatrix::zeros(n, p);
    for (l, leaf_fill) in column_pairs.iter().enumerate() {
        for (k, fill) in leaf_fill.iter().enumerate().skip(1) {
            let col = dr.column_mut(l * per_leaf_p + k);
            let slice = col.data.into_slice_mut();
            if paired {
                fill_pairs(slice, fill, h, &mut fill_rng);
            } else {
                for &i in fill {
                    slice[i] = sign(&mut fill_rng);
                }
            }
        }
    }
    let z_columns: Vec<usize> = (0..q).map(|l| l * per_leaf_p).collect();
    let x_full = assemble(&s, &z_columns, &dr);
    let kind = match variant {
        SatVariant::I => CurriculumKind::SatI,
        SatVariant::II => CurriculumKind::SatII,
        SatVariant::III { blocks } => CurriculumKind::SatIII { blocks },
    };
    let class = super::ClassMatrix {
        x: x_full.clone(),
        s,
        z_columns,
        preconditioner: None,
        d: vec![1.0; n],
        warnings: Vec::new(),
    };
    CurriculumTree::assemble(
        kind,
        a,
        SparseVector::from_dense(&x, 0.0),
        x_full,
        depth,
        per_leaf_p,
        tbar,
        partition_j,
        Some(class),
        sampling,
        Vec::new(),
    )
}

/// `(y, 1 - y)` with `y` uniform in `{0,1}^h`.
fn pair_solution(h: usize, rng: &mut Rng) -> Vec<f64> {
    let y: Vec<f64> = (0..h).map(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 }).collect();
    y.iter().copied().chain(y.iter().map(|v| 1.0 - v)).collect()
}
