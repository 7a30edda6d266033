use nalgebra::DVector;

use super::{feasible, kernel_basis, SolverOptions, FEASIBILITY_TOL};
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{DenseMatrix, SparseVector};

/// `min ||x||_1 s.t. A x = b` for a fixed `A`, reusable across right-hand sides.
///
/// Writes `x = x0 + N v` with `x0 = pinv(A) b` and `N` an orthonormal kernel
/// basis, then runs normalized subgradient descent on `v`.
#[derive(Clone, Debug)]
pub struct KernelL1Solver {
    a: DenseMatrix,
    pinv: DenseMatrix,
    basis: DenseMatrix,
    opts: SolverOptions,
}

impl KernelL1Solver {
    pub fn new(a: DenseMatrix, opts: SolverOptions) -> Result<Self> {
        opts.validate()?;
        let pinv = linalg::pinv(&a);
        let basis = kernel_basis(&a);
        Ok(Self { a, pinv, basis, opts })
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.a
    }

    pub fn kernel_dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn options(&self) -> &SolverOptions {
        &self.opts
    }

    /// Sparse minimizer, thresholded at `zero_tol` when that keeps it feasible.
    pub fn solve(&self, b: &DVector<f64>) -> Result<SparseVector> {
        let x = self.solve_dense(b)?;
        let sv = SparseVector::from_dense(x.as_slice(), self.opts.zero_tol);
        if feasible(&self.a, &sv.to_dvector(), b, FEASIBILITY_TOL) {
            Ok(sv)
        } else {
            Ok(SparseVector::from_dense(x.as_slice(), 0.0))
        }
    }

    /// Dense minimizer without thresholding.
    pub fn solve_dense(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        let m = self.a.nrows();
        if b.len() != m {
            return Err(Error::Parameter(format!("b has length {}, expected {m}", b.len())));
        }
        let x0 = &self.pinv * b;
        let residual = super::residual_inf(&self.a, &x0, b);
        if residual > FEASIBILITY_TOL * linalg::inf_norm(b).max(1.0) {
            return Err(Error::Infeasible { residual });
        }
        let best = self.descend(x0);
        if !self.opts.polish {
            return Ok(best);
        }
        Ok(self.polish(&best, b).unwrap_or(best))
    }

    fn descend(&self, x0: DVector<f64>) -> DVector<f64> {
        let k = self.basis.ncols();
        let n = x0.len();
        let scale = x0.norm();
        if k == 0 || scale == 0.0 {
            return x0;
        }
        let o = &self.opts;
        let mut x = x0;
        let mut best = x.clone();
        let mut best_f = linalg::l1_norm(&x);
        let mut step = o.step_size * scale;
        let floor = o.min_step * scale;
        let mut since_improved = 0usize;
        let mut sign = vec![0.0; n];
        let mut g = vec![0.0; k];
        let nb = self.basis.as_slice();

        for _ in 0..o.max_iters {
            for (s, xi) in sign.iter_mut().zip(x.iter()) {
                *s = if *xi > 0.0 {
                    1.0
                } else if *xi < 0.0 {
                    -1.0
                } else {
                    0.0
                };
            }
            let mut gnorm2 = 0.0;
            for (j, gj) in g.iter_mut().enumerate() {
                let col = &nb[j * n..(j + 1) * n];
                *gj = col.iter().zip(&sign).map(|(c, s)| c * s).sum();
                gnorm2 += *gj * *gj;
            }
            let gnorm = gnorm2.sqrt();
            if gnorm <= o.grad_tol {
                break;
            }
            let t = step / gnorm;
            for (j, gj) in g.iter().enumerate() {
                let col = &nb[j * n..(j + 1) * n];
                let c = t * gj;
                for (xi, ni) in x.iter_mut().zip(col) {
                    *xi -= c * ni;
                }
            }
            let f = linalg::l1_norm(&x);
            if f < best_f - 1e-15 * (1.0 + best_f) {
                best_f = f;
                best.copy_from(&x);
                since_improved = 0;
            } else {
                since_improved += 1;
                if since_improved >= o.stall_iters {
                    step *= 0.5;
                    if step < floor {
                        break;
                    }
                    x.copy_from(&best);
                    since_improved = 0;
                }
            }
        }
        best
    }

    /// Refits least squares on the top-k entries of the iterate, smallest k
    /// first, and accepts the first feasible fit whose `l1` norm is no larger.
    fn polish(&self, x: &DVector<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
        let n = x.len();
        let f = linalg::l1_norm(x);
        let peak = linalg::inf_norm(x);
        let mut order: Vec<usize> = (0..n).filter(|&i| x[i].abs() > 1e-12 * peak).collect();
        order.sort_by(|&i, &j| x[j].abs().total_cmp(&x[i].abs()).then(i.cmp(&j)));
        let max_k = order.len().min(self.a.nrows());
        for k in 1..=max_k {
            let support = &order[..k];
            let sub = linalg::select_columns(&self.a, support);
            let xs = linalg::lstsq(&sub, b);
            if linalg::inf_norm(&(&sub * &xs - b)) > FEASIBILITY_TOL * linalg::inf_norm(b).max(1.0) {
                continue;
            }
            let l1: f64 = xs.iter().map(|v| v.abs()).sum();
            if l1 <= f * (1.0 + 1e-6) + 1e-12 {
                let mut out = DVector::zeros(n);
                for (&i, v) in support.iter().zip(xs.iter()) {
                    out[i] = *v;
                }
                return Some(out);
            }
        }
        None
    }
}

/// One-shot `min ||x||_1 s.t. A x = b`.
pub fn solve_l1(a: &DenseMatrix, b: &DVector<f64>, opts: &SolverOptions) -> Result<SparseVector> {
    KernelL1Solver::new(a.clone(), *opts)?.solve(b)
}

/// `min ||z||_1 s.t. A X z = b`, returning `(z, X z)`.
#[derive(Clone, Debug)]
pub struct PriorL1Solver {
    x_prior: DenseMatrix,
    inner: KernelL1Solver,
}

impl PriorL1Solver {
    pub fn new(a: &DenseMatrix, x_prior: DenseMatrix, opts: SolverOptions) -> Result<Self> {
        if a.ncols() != x_prior.nrows() {
            return Err(Error::Parameter(format!(
                "A has {} columns but prior has {} rows",
                a.ncols(),
                x_prior.nrows()
            )));
        }
        let inner = KernelL1Solver::new(a * &x_prior, opts)?;
        Ok(Self { x_prior, inner })
    }

    pub fn prior(&self) -> &DenseMatrix {
        &self.x_prior
    }

    pub fn solve(&self, b: &DVector<f64>) -> Result<(SparseVector, SparseVector)> {
        let z = self.inner.solve(b)?;
        let x = &self.x_prior * z.to_dvector();
        let zero_tol = self.inner.opts.zero_tol;
        let x_sparse = SparseVector::from_dense(x.as_slice(), zero_tol);
        Ok((z, x_sparse))
    }
}

/// One-shot `l1` with prior.
pub fn solve_l1_prior(
    a: &DenseMatrix,
    x_prior: &DenseMatrix,
    b: &DVector<f64>,
    opts: &SolverOptions,
) -> Result<(SparseVector, SparseVector)> {
    PriorL1Solver::new(a, x_prior.clone(), *opts)?.solve(b)
}
