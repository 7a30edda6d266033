//! Dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::rng::Rng;

/// Relative singular-value threshold used for rank and independence decisions.
pub const RANK_RTOL: f64 = 1e-10;

/// Thin SVD with singular values sorted in decreasing order.
pub struct SortedSvd {
    pub u: DMatrix<f64>,
    pub sigma: Vec<f64>,
    pub v: DMatrix<f64>,
}

pub fn svd_sorted(m: &DMatrix<f64>) -> SortedSvd {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sigma = order.iter().map(|&i| svd.singular_values[i]).collect();
    let u = DMatrix::from_fn(u.nrows(), order.len(), |r, c| u[(r, order[c])]);
    let v = DMatrix::from_fn(v_t.ncols(), order.len(), |r, c| v_t[(order[c], r)]);
    SortedSvd { u, sigma, v }
}

pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Number of singular values above `rtol * sigma_max`.
pub fn numerical_rank(m: &DMatrix<f64>, rtol: f64) -> usize {
    let s = singular_values(m);
    match s.first() {
        Some(&top) if top > 0.0 => s.iter().filter(|&&v| v > rtol * top).count(),
        _ => 0,
    }
}

/// Condition number sigma_max / sigma_min over the thin spectrum.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

/// Full left singular basis of an `m x k` matrix with `k <= m`: returns the
/// `m x m` orthogonal U (columns ordered by decreasing singular value, the
/// trailing `m - k` spanning the orthogonal complement) and the `k` values.
pub fn full_left_svd(m: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let rows = m.nrows();
    let k = m.ncols();
    let mut padded = DMatrix::zeros(rows, rows.max(k));
    padded.view_mut((0, 0), (rows, k)).copy_from(m);
    let svd = svd_sorted(&padded);
    let sigma = svd.sigma[..k.min(rows)].to_vec();
    (svd.u, sigma)
}

/// Orthonormal basis of ker(a) as columns.
pub fn null_space(a: &DMatrix<f64>, rtol: f64) -> DMatrix<f64> {
    let (m, n) = a.shape();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    // Pad to a square (or tall) matrix so the SVD returns a complete V.
    let rows = m.max(n);
    let mut padded = DMatrix::zeros(rows, n);
    padded.view_mut((0, 0), (m, n)).copy_from(a);
    let svd = svd_sorted(&padded);
    let top = svd.sigma.first().copied().unwrap_or(0.0);
    let cut = if top > 0.0 { rtol * top } else { f64::INFINITY };
    let keep: Vec<usize> = (0..n).filter(|&i| svd.sigma[i] <= cut || svd.sigma[i].is_nan() || top == 0.0).collect();
    DMatrix::from_fn(n, keep.len(), |r, c| svd.v[(r, keep[c])])
}

/// Minimum-norm least-squares solution of `a x ~ b`.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    if a.ncols() == 0 {
        return DVector::zeros(0);
    }
    pinv(a) * b
}

/// Moore-Penrose pseudo-inverse with a relative cutoff of 1e-12.
pub fn pinv(a: &DMatrix<f64>) -> DMatrix<f64> {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return DMatrix::zeros(n, m);
    }
    let svd = svd_sorted(a);
    let top = svd.sigma.first().copied().unwrap_or(0.0);
    let mut out = DMatrix::zeros(n, m);
    for (i, &s) in svd.sigma.iter().enumerate() {
        if top > 0.0 && s > 1e-12 * top {
            let vi = svd.v.column(i);
            let ui = svd.u.column(i);
            out += (vi / s) * ui.transpose();
        }
    }
    out
}

/// Columns of `m` selected by `idx`, in order.
pub fn select_columns(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), idx.len(), |r, c| m[(r, idx[c])])
}

pub fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

pub fn l1_norm(v: &DVector<f64>) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

/// Haar-distributed orthogonal matrix from the QR of a gaussian matrix.
pub fn random_orthogonal(p: usize, rng: &mut Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(p, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..p {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Orthogonal polar factor `U V^T` of a square matrix. `None` for the zero
/// matrix. Zero singular values are completed by the full SVD bases.
pub fn polar_factor(g: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if g.iter().all(|&x| x == 0.0) || g.iter().any(|x| !x.is_finite()) {
        return None;
    }
    let svd = g.clone().svd(true, true);
    Some(svd.u? * svd.v_t?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_space_of_row_vector() {
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let n = null_space(&a, RANK_RTOL);
        assert_eq!(n.shape(), (2, 1));
        assert!((n[(0, 0)] + n[(1, 0)]).abs() < 1e-12);
        assert!((n.column(0).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn null_space_of_identity_is_empty() {
        assert_eq!(null_space(&DMatrix::identity(3, 3), RANK_RTOL).ncols(), 0);
    }

    #[test]
    fn full_left_svd_completes_basis() {
        let m = DMatrix::from_row_slice(4, 2, &[2.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        let (u, s) = full_left_svd(&m);
        assert_eq!(u.shape(), (4, 4));
        assert_eq!(s, vec![2.0, 1.0]);
        assert!((u.transpose() * &u - DMatrix::identity(4, 4)).norm() < 1e-12);
    }

    #[test]
    fn polar_of_zero_is_none() {
        assert!(polar_factor(&DMatrix::zeros(3, 3)).is_none());
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let u = polar_factor(&g).unwrap();
        assert!((u.transpose() * &u - DMatrix::identity(2, 2)).norm() < 1e-12);
    }
}
