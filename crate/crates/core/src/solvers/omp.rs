use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{DenseMatrix, SparseVector};

/// Output of orthogonal matching pursuit with a prior dictionary.
#[derive(Clone, Debug)]
pub struct OmpResult {
    pub z: SparseVector,
    pub x: SparseVector,
    /// `||A X z - b||_2` before the first step and after each step.
    pub residual_history: Vec<f64>,
}

/// Greedy pursuit over the columns of `A X`: select
/// `argmax_j |(A X)_j^T (A X z - b)|` (smallest index on ties) among unused
/// columns, refit least squares on the selected set, and stop after
/// `max_steps` selections or once the residual falls below `res_tol`.
pub fn omp_prior(
    a: &DenseMatrix,
    x_prior: &DenseMatrix,
    b: &DVector<f64>,
    max_steps: usize,
    res_tol: f64,
    zero_tol: f64,
) -> Result<OmpResult> {
    if a.ncols() != x_prior.nrows() || a.nrows() != b.len() {
        return Err(Error::Parameter("dimension mismatch in OMP inputs".into()));
    }
    let ax = a * x_prior;
    let p = ax.ncols();
    if let Some(j) = (0..p).find(|&j| ax.column(j).norm() == 0.0) {
        return Err(Error::Precondition(format!("column {j} of A X is zero")));
    }
    let mut selected: Vec<usize> = Vec::new();
    let mut z = DVector::zeros(p);
    let mut residual = b.clone();
    let mut history = vec![residual.norm()];
    let scale = b.norm().max(1.0);

    while selected.len() < max_steps.min(p) && residual.norm() > res_tol {
        let mut best: Option<(usize, f64)> = None;
        for j in (0..p).filter(|j| !selected.contains(j)) {
            let c = ax.column(j).dot(&residual).abs();
            if best.is_none_or(|(_, bc)| c > bc) {
                best = Some((j, c));
            }
        }
        let Some((j, c)) = best else { break };
        if c <= 1e-14 * scale {
            break;
        }
        selected.push(j);
        let sub = linalg::select_columns(&ax, &selected);
        let coef = linalg::lstsq(&sub, b);
        z.fill(0.0);
        for (&i, v) in selected.iter().zip(coef.iter()) {
            z[i] = *v;
        }
        residual = b - &sub * coef;
        history.push(residual.norm());
    }
    let x = x_prior * &z;
    Ok(OmpResult {
        z: SparseVector::from_dense(z.as_slice(), zero_tol),
        x: SparseVector::from_dense(x.as_slice(), zero_tol),
        residual_history: history,
    })
}
