use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{stable_rank, BernoulliSubgaussianParams, DenseMatrix, SparseVector};
use crate::rng::{self, Purpose};

/// Splits `x` into columns `S_l = x` restricted to `J_l`, so that `S 1 = x`.
pub fn split_support(x: &SparseVector, partition_j: &[Vec<usize>]) -> Result<DenseMatrix> {
    let n = x.dim();
    let owner = block_owner(n, partition_j)?;
    if let Some(&i) = x.support().iter().find(|&&i| owner[i].is_none()) {
        return Err(Error::Partition(format!("support index {i} is not covered by any block")));
    }
    let mut s = DenseMatrix::zeros(n, partition_j.len());
    for (&i, &v) in x.support().iter().zip(x.values()) {
        if let Some(l) = owner[i] {
            s[(i, l)] = v;
        }
    }
    Ok(s)
}

/// Block index owning each row, checking disjointness and bounds.
pub(crate) fn block_owner(n: usize, blocks: &[Vec<usize>]) -> Result<Vec<Option<usize>>> {
    let mut owner = vec![None; n];
    for (l, block) in blocks.iter().enumerate() {
        for &i in block {
            if i >= n {
                return Err(Error::Partition(format!("block {l} index {i} out of range {n}")));
            }
            if let Some(prev) = owner[i] {
                return Err(Error::Partition(format!("index {i} lies in blocks {prev} and {l}")));
            }
            owner[i] = Some(l);
        }
    }
    Ok(owner)
}

/// `T = D U^T` with `M = U Sigma V^T` (full U) and
/// `D^{-1} = diag(sigma_1, ..., sigma_q, sigma_q, ..., sigma_q)`, so that
/// `T M` has orthonormal columns and `kappa(T) = kappa(M)`.
pub fn orthogonalizing_preconditioner(m: &DenseMatrix) -> Result<DenseMatrix> {
    let (rows, q) = m.shape();
    if q == 0 || rows < q {
        return Err(Error::RankDeficient { measured: rows.min(q), required: q });
    }
    let rank = linalg::numerical_rank(m, linalg::RANK_RTOL);
    if rank < q {
        return Err(Error::RankDeficient { measured: rank, required: q });
    }
    let (u, sigma) = linalg::full_left_svd(m);
    let fill = sigma[q - 1];
    let mut t = u.transpose();
    for (i, mut row) in t.row_iter_mut().enumerate() {
        row /= if i < q { sigma[i] } else { fill };
    }
    Ok(t)
}

/// Teacher-side class matrix and its ingredients.
#[derive(Clone, Debug)]
pub struct ClassMatrix {
    pub x: DenseMatrix,
    pub s: DenseMatrix,
    /// Indices `k_l` of the unit-basis columns of `Z`.
    pub z_columns: Vec<usize>,
    pub preconditioner: Option<DenseMatrix>,
    /// Diagonal of `D`.
    pub d: Vec<f64>,
    pub warnings: Vec<String>,
}

impl ClassMatrix {
    /// `Z` as a dense `p x q` matrix.
    pub fn z(&self) -> DenseMatrix {
        let mut z = DenseMatrix::zeros(self.x.ncols(), self.z_columns.len());
        for (l, &k) in self.z_columns.iter().enumerate() {
            z[(k, l)] = 1.0;
        }
        z
    }

    /// `Z 1`, the coefficient with `X Z 1 = x`.
    pub fn coefficient(&self) -> DVector<f64> {
        let mut z = DVector::zeros(self.x.ncols());
        for &k in &self.z_columns {
            z[k] = 1.0;
        }
        z
    }
}

/// `S Z^T + D R (I - Z Z^T)` for unit-basis `Z` given by its column indices.
pub(crate) fn assemble(s: &DenseMatrix, z_columns: &[usize], dr: &DenseMatrix) -> DenseMatrix {
    let p = dr.ncols();
    let mut z = DenseMatrix::zeros(p, z_columns.len());
    for (l, &k) in z_columns.iter().enumerate() {
        z[(k, l)] = 1.0;
    }
    let proj = DenseMatrix::identity(p, p) - &z * z.transpose();
    s * z.transpose() + dr * proj
}

pub(crate) fn check_k_partition(p: usize, partition_k: &[Vec<usize>]) -> Result<()> {
    let owner = block_owner(p, partition_k)?;
    if let Some(k) = owner.iter().position(Option::is_none) {
        return Err(Error::Partition(format!("column {k} of [p] is in no K block")));
    }
    if let Some(l) = partition_k.iter().position(Vec::is_empty) {
        return Err(Error::Partition(format!("K block {l} is empty")));
    }
    Ok(())
}

/// Builds `X = S Z^T + D R (I - Z Z^T)` with `Z = [e_{k_1} ...]` (`k_l` the
/// first index of `K_l`), `T` preconditioning `A S` with unit-norm columns,
/// `D_j = 1 / ||(T A)_{.J}||_F` on each block and `R` i.i.d. unit-variance
/// entries on matched `[J_l, K_l]` blocks.
#[allow(clippy::too_many_arguments)]
pub fn build_class_matrix(
    a: &DenseMatrix,
    x: &SparseVector,
    partition_j: &[Vec<usize>],
    partition_k: &[Vec<usize>],
    p: usize,
    params: &BernoulliSubgaussianParams,
    seed: u64,
    c: f64,
) -> Result<ClassMatrix> {
    let (m, n) = a.shape();
    if x.dim() != n {
        return Err(Error::Parameter(format!("x has dimension {}, A has {n} columns", x.dim())));
    }
    if partition_j.len() != partition_k.len() || partition_j.is_empty() {
        return Err(Error::Partition(format!(
            "need matching nonempty J and K partitions, got {} and {}",
            partition_j.len(),
            partition_k.len()
        )));
    }
    check_k_partition(p, partition_k)?;
    let s = split_support(x, partition_j)?;
    let q = s.ncols();
    if let Some(l) = (0..q).find(|&l| s.column(l).iter().all(|&v| v == 0.0)) {
        return Err(Error::Partition(format!("block {l} carries no entry of x")));
    }
    let mut s_unit = s.clone();
    for mut col in s_unit.column_iter_mut() {
        let nrm = col.norm();
        col /= nrm;
    }
    let as_unit = a * &s_unit;
    let rank = if m >= q { linalg::numerical_rank(&as_unit, linalg::RANK_RTOL) } else { m };
    if rank < q {
        let block = first_dependent_column(&as_unit);
        return Err(Error::Construction { block, reason: format!("A S has rank {rank} < {q}") });
    }
    let t = orthogonalizing_preconditioner(&as_unit)?;
    let ta = &t * a;
    let mut d = vec![0.0; n];
    for block in partition_j {
        let fro = block.iter().map(|&j| ta.column(j).norm_squared()).sum::<f64>().sqrt();
        for &j in block {
            d[j] = if fro > 0.0 { 1.0 / fro } else { 0.0 };
        }
    }
    let unit = BernoulliSubgaussianParams { theta: 1.0, nu2: 1.0, ..*params };
    let mut rng = rng::stream(seed, 0, Purpose::BlockRandom);
    let mut dr = DenseMatrix::zeros(n, p);
    for (jb, kb) in partition_j.iter().zip(partition_k) {
        for &k in kb {
            for &j in jb {
                dr[(j, k)] = d[j] * unit.distribution.draw(&mut rng);
            }
        }
    }
    let z_columns: Vec<usize> = partition_k.iter().map(|kb| *kb.iter().min().unwrap_or(&0)).collect();
    let xm = assemble(&s, &z_columns, &dr);
    let warnings = premise_warnings(a, &(a * &s), partition_j, partition_k, p, c);
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(ClassMatrix { x: xm, s, z_columns, preconditioner: Some(t), d, warnings })
}

fn first_dependent_column(m: &DenseMatrix) -> usize {
    for l in 0..m.ncols() {
        let sub = m.columns(0, l + 1).into_owned();
        if linalg::numerical_rank(&sub, linalg::RANK_RTOL) < l + 1 {
            return l;
        }
    }
    m.ncols()
}

/// Stable-rank premise `min_J srank(A_J) >= t kappa(AS) (L + ln(c p / t))`
/// with unit constants, `t` the largest block size and `L = log2 q`.
fn premise_warnings(
    a: &DenseMatrix,
    a_s: &DenseMatrix,
    partition_j: &[Vec<usize>],
    partition_k: &[Vec<usize>],
    p: usize,
    c: f64,
) -> Vec<String> {
    let q = partition_j.len();
    let depth = (q as f64).log2();
    let t = partition_k.iter().map(Vec::len).max().unwrap_or(1) as f64;
    let kappa = linalg::condition_number(a_s);
    let min_srank = partition_j
        .iter()
        .filter_map(|jb| stable_rank(&linalg::select_columns(a, jb)).ok())
        .fold(f64::INFINITY, f64::min);
    let need = t * kappa * (depth + (c * p as f64 / t).max(1.0).ln());
    if min_srank < need {
        vec![format!("stable-rank premise not met: min_J srank(A_J) = {min_srank:.3} < {need:.3}")]
    } else {
        Vec::new()
    }
}
