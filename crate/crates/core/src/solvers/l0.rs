use itertools::Itertools;
use nalgebra::DVector;

use super::feasible;
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{DenseMatrix, SparseVector};

/// Result of an exhaustive support search.
#[derive(Clone, Debug, PartialEq)]
pub enum L0Outcome {
    Found(SparseVector),
    NoSolutionInBudget { max_support: usize },
}

impl L0Outcome {
    pub fn found(&self) -> Option<&SparseVector> {
        match self {
            L0Outcome::Found(x) => Some(x),
            L0Outcome::NoSolutionInBudget { .. } => None,
        }
    }

    pub fn into_found(self) -> Option<SparseVector> {
        match self {
            L0Outcome::Found(x) => Some(x),
            L0Outcome::NoSolutionInBudget { .. } => None,
        }
    }
}

/// Number of supports of size `0..=k` among `n` columns.
pub fn support_count(n: usize, k: usize) -> u128 {
    let mut total: u128 = 0;
    let mut binom: u128 = 1;
    for s in 0..=k.min(n) {
        total += binom;
        binom = binom * (n - s) as u128 / (s + 1) as u128;
    }
    total
}

/// Sparsest solution of `A x = b` by scanning supports of size 0, 1, 2, ...
/// in lexicographic order and fitting least squares on each. A support is
/// feasible when `||A x - b||_inf <= zero_tol * max(1, ||b||_inf)`. The
/// first feasible support wins.
pub fn solve_l0_brute(a: &DenseMatrix, b: &DVector<f64>, max_support: usize, zero_tol: f64) -> Result<L0Outcome> {
    let (m, n) = a.shape();
    if b.len() != m {
        return Err(Error::Parameter(format!("b has length {}, expected {m}", b.len())));
    }
    if max_support > n {
        return Err(Error::Parameter(format!("max_support {max_support} exceeds n = {n}")));
    }
    let tol = zero_tol.max(1e-12);
    if feasible(a, &DVector::zeros(n), b, tol) {
        return Ok(L0Outcome::Found(SparseVector::zeros(n, zero_tol)));
    }
    for size in 1..=max_support {
        for support in (0..n).combinations(size) {
            let sub = linalg::select_columns(a, &support);
            let xs = linalg::lstsq(&sub, b);
            if linalg::inf_norm(&(&sub * &xs - b)) <= tol * linalg::inf_norm(b).max(1.0) {
                let pairs: Vec<(usize, f64)> = support.iter().copied().zip(xs.iter().copied()).collect();
                return Ok(L0Outcome::Found(SparseVector::from_parts(n, &pairs, zero_tol)?));
            }
        }
    }
    Ok(L0Outcome::NoSolutionInBudget { max_support })
}
