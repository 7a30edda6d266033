//! Sparse solvers: brute-force `l0` (leaf oracle), `l1` by subgradient
//! descent in the kernel, `l1` with a prior dictionary, and OMP with prior.

mod l0;
mod l1;
mod omp;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::linalg;
use crate::model::DenseMatrix;

pub use l0::{solve_l0_brute, support_count, L0Outcome};
pub use l1::{solve_l1, solve_l1_prior, KernelL1Solver, PriorL1Solver};
pub use omp::{omp_prior, OmpResult};

/// Feasibility tolerance for returned solutions, relative to `max(1, ||b||_inf)`.
pub const FEASIBILITY_TOL: f64 = 1e-8;

/// Options for the kernel subgradient `l1` solver.
///
/// The initial step is `step_size * ||x0||_2` along the normalized subgradient
/// (the kernel basis is orthonormal, so its Lipschitz constant is 1). The step
/// is halved whenever the best objective has not improved for `stall_iters`
/// iterations; the run stops once it falls below `min_step * ||x0||_2`, the
/// subgradient norm drops below `grad_tol`, or `max_iters` is reached.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub max_iters: usize,
    pub step_size: f64,
    pub grad_tol: f64,
    pub zero_tol: f64,
    pub stall_iters: usize,
    pub min_step: f64,
    pub polish: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iters: 20_000,
            step_size: 0.1,
            grad_tol: 1e-12,
            zero_tol: 1e-6,
            stall_iters: 100,
            min_step: 1e-10,
            polish: true,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> crate::Result<()> {
        let ok = self.max_iters >= 1
            && self.step_size > 0.0
            && self.step_size.is_finite()
            && self.grad_tol > 0.0
            && self.min_step > 0.0
            && self.zero_tol >= 0.0
            && self.zero_tol.is_finite()
            && self.stall_iters >= 1;
        if ok {
            Ok(())
        } else {
            Err(crate::Error::Parameter(format!("invalid solver options {self:?}")))
        }
    }
}

/// Orthonormal basis of ker(A); zero columns when the kernel is trivial.
pub fn kernel_basis(a: &DenseMatrix) -> DenseMatrix {
    linalg::null_space(a, linalg::RANK_RTOL)
}

pub(crate) fn feasible(a: &DenseMatrix, x: &DVector<f64>, b: &DVector<f64>, rtol: f64) -> bool {
    residual_inf(a, x, b) <= rtol * linalg::inf_norm(b).max(1.0)
}

pub(crate) fn residual_inf(a: &DenseMatrix, x: &DVector<f64>, b: &DVector<f64>) -> f64 {
    linalg::inf_norm(&(a * x - b))
}
