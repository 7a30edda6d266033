//! Sparse factorization `Y ~ X_bar Z_bar` by `l4`-norm maximization over the
//! orthogonal group, plus scaling rules and signed-permutation matching.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::DenseMatrix;
use crate::rng::{self, Purpose};

/// Whitened data `Yw = P Y` with `Yw Yw^T = q I` and the left inverse of `P`.
#[derive(Clone, Debug)]
pub struct Whitening {
    pub yw: DenseMatrix,
    pub inverse: DenseMatrix,
}

/// Projects `Y` (n x q) onto its top-`p` left singular subspace and rescales
/// to `Yw Yw^T = q I`. When `n == p` the symmetric (ZCA) form is used, so
/// already-white data comes back unchanged.
pub fn whiten(y: &DenseMatrix, p: usize) -> Result<Whitening> {
    let (n, q) = y.shape();
    if p == 0 || p > n {
        return Err(Error::Parameter(format!("dictionary size {p} must lie in 1..={n}")));
    }
    let measured = if q == 0 { 0 } else { linalg::numerical_rank(y, linalg::RANK_RTOL) };
    if measured < p {
        return Err(Error::RankDeficient { measured, required: p });
    }
    let svd = linalg::svd_sorted(y);
    let sq = (q as f64).sqrt();
    let up = svd.u.columns(0, p).into_owned();
    let inv_sig = DenseMatrix::from_diagonal(&nalgebra::DVector::from_fn(p, |i, _| sq / svd.sigma[i]));
    let sig = DenseMatrix::from_diagonal(&nalgebra::DVector::from_fn(p, |i, _| svd.sigma[i] / sq));
    let (pre, inverse) = if n == p {
        (&up * &inv_sig * up.transpose(), &up * &sig * up.transpose())
    } else {
        (&inv_sig * up.transpose(), &up * &sig)
    };
    Ok(Whitening { yw: pre * y, inverse })
}

/// Orthogonal maximizer estimate with its objective trace.
#[derive(Clone, Debug)]
pub struct L4Result {
    pub u: DenseMatrix,
    pub iterations: usize,
    /// `||U_k Yw||_4^4 / q` at the start and after every iteration.
    pub objective_trace: Vec<f64>,
}

/// `||U Yw||_4^4 / q`.
pub fn l4_objective(u: &DenseMatrix, yw: &DenseMatrix) -> f64 {
    let q = yw.ncols().max(1) as f64;
    (u * yw).iter().map(|v| v.powi(4)).sum::<f64>() / q
}

/// `l4` fixed point from a seeded random orthogonal start.
pub fn l4_maximize(yw: &DenseMatrix, iters: usize, tol: f64, seed: u64) -> Result<L4Result> {
    let mut rng = rng::stream(seed, 0, Purpose::FactorInit);
    let u0 = linalg::random_orthogonal(yw.nrows(), &mut rng);
    l4_maximize_from(yw, u0, iters, tol)
}

/// Iterates `U <- Polar((U Yw)^{o3} Yw^T)` until `||U_{k+1} - U_k||_F <= tol`.
pub fn l4_maximize_from(yw: &DenseMatrix, u0: DenseMatrix, iters: usize, tol: f64) -> Result<L4Result> {
    let p = yw.nrows();
    if u0.shape() != (p, p) {
        return Err(Error::Parameter(format!("start must be {p} x {p}")));
    }
    let mut u = u0;
    let mut trace = vec![l4_objective(&u, yw)];
    let mut iterations = 0;
    for _ in 0..iters {
        let cube = (&u * yw).map(|v| v * v * v);
        let g = cube * yw.transpose();
        let next = linalg::polar_factor(&g)
            .ok_or_else(|| Error::Degenerate("polar factor of a zero or non-finite matrix".into()))?;
        let step = (&next - &u).norm();
        u = next;
        iterations += 1;
        trace.push(l4_objective(&u, yw));
        if step <= tol {
            break;
        }
    }
    Ok(L4Result { u, iterations, objective_trace: trace })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FactorOptions {
    pub iters: usize,
    pub tol: f64,
    /// Relative Frobenius fit required on success; `None` skips the check.
    pub fit_tol: Option<f64>,
}

impl Default for FactorOptions {
    fn default() -> Self {
        Self { iters: 1000, tol: 1e-10, fit_tol: Some(1e-6) }
    }
}

#[derive(Clone, Debug)]
pub struct FactorizationResult {
    pub x_bar: DenseMatrix,
    pub z_bar: DenseMatrix,
    pub iterations: usize,
    pub objective_trace: Vec<f64>,
}

/// Factorizes `Y` into an `n x p` dictionary and `p x q` codes.
pub fn sparse_factor(y: &DenseMatrix, p: usize, opts: &FactorOptions, seed: u64) -> Result<FactorizationResult> {
    let w = whiten(y, p)?;
    let l4 = l4_maximize(&w.yw, opts.iters, opts.tol, seed)?;
    let z_bar = &l4.u * &w.yw;
    let x_bar = &w.inverse * l4.u.transpose();
    if let Some(fit_tol) = opts.fit_tol {
        let residual = (y - &x_bar * &z_bar).norm() / y.norm().max(f64::MIN_POSITIVE);
        if residual > fit_tol {
            return Err(Error::PoorFit { residual, tol: fit_tol });
        }
    }
    Ok(FactorizationResult { x_bar, z_bar, iterations: l4.iterations, objective_trace: l4.objective_trace })
}

/// Snapped dictionary; `zero_columns` lists columns that were entirely zero.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapped {
    pub matrix: DenseMatrix,
    pub zero_columns: Vec<usize>,
}

/// Normalizes each column by its largest magnitude and maps entries to
/// `sign(e)` when `|e| >= threshold`, else 0.
pub fn scale_snap(x_bar: &DenseMatrix, threshold: f64) -> Snapped {
    let mut matrix = DenseMatrix::zeros(x_bar.nrows(), x_bar.ncols());
    let mut zero_columns = Vec::new();
    for (j, col) in x_bar.column_iter().enumerate() {
        let peak = col.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if peak == 0.0 {
            zero_columns.push(j);
            continue;
        }
        for (i, v) in col.iter().enumerate() {
            let e = v / peak;
            if e.abs() >= threshold {
                matrix[(i, j)] = e.signum();
            }
        }
    }
    if !zero_columns.is_empty() {
        log::warn!("snap found zero columns {zero_columns:?}");
    }
    Snapped { matrix, zero_columns }
}

/// Uniform rescaling by `sqrt(n) / ||A||_F`, with `n` the row count of `x_bar`.
pub fn scale_rip(x_bar: &DenseMatrix, a: &DenseMatrix) -> Result<DenseMatrix> {
    let fro = a.norm();
    if fro == 0.0 {
        return Err(Error::Domain("scale_rip needs a nonzero A".into()));
    }
    Ok(x_bar * ((x_bar.nrows() as f64).sqrt() / fro))
}

/// Column correspondence `X_hat[:, perm[j]] ~ signs[j] * X_true[:, j]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignedPermutation {
    pub perm: Vec<usize>,
    pub signs: Vec<f64>,
    pub max_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatchOutcome {
    pub matched: Option<SignedPermutation>,
    /// Largest unit-normalized `inf`-norm error over the greedy pairs.
    pub max_error: f64,
}

fn unit_columns(m: &DenseMatrix) -> DenseMatrix {
    let mut out = m.clone();
    for mut c in out.column_iter_mut() {
        let n = c.norm();
        if n > 0.0 {
            c /= n;
        }
    }
    out
}

/// Greedy assignment by largest `|cos|`, then an `inf`-norm check of each pair
/// after unit normalization. Approximate: it is not an optimal assignment.
pub fn match_up_to_signed_permutation(x_hat: &DenseMatrix, x_true: &DenseMatrix, tol: f64) -> MatchOutcome {
    if x_hat.shape() != x_true.shape() {
        return MatchOutcome { matched: None, max_error: f64::INFINITY };
    }
    let p = x_true.ncols();
    let h = unit_columns(x_hat);
    let t = unit_columns(x_true);
    let cos = h.transpose() * &t;
    let mut pairs: Vec<(usize, usize)> = (0..p).flat_map(|i| (0..p).map(move |j| (i, j))).collect();
    pairs.sort_by(|a, b| cos[*b].abs().total_cmp(&cos[*a].abs()).then(a.cmp(b)));
    let mut used_hat = vec![false; p];
    let mut perm = vec![usize::MAX; p];
    let mut signs = vec![1.0; p];
    for (i, j) in pairs {
        if used_hat[i] || perm[j] != usize::MAX {
            continue;
        }
        used_hat[i] = true;
        perm[j] = i;
        signs[j] = if cos[(i, j)] < 0.0 { -1.0 } else { 1.0 };
    }
    let mut max_error: f64 = 0.0;
    for j in 0..p {
        let diff = h.column(perm[j]) - t.column(j) * signs[j];
        max_error = max_error.max(diff.amax());
    }
    let matched = (max_error <= tol).then_some(SignedPermutation { perm, signs, max_error });
    MatchOutcome { matched, max_error }
}
