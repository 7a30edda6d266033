//! Curriculum learning of sparse solutions to underdetermined linear systems.
//!
//! A teacher builds trees of tractable `l0`-minimization classes `x = X z`
//! around a designated solution and emits right-hand sides; a student learns
//! each class matrix `X` bottom-up from solvable samples by sparse
//! factorization. A 1-in-3-SAT reduction supplies verifiable hard instances.
//!
//! Modules:
//! - [`model`]: matrices, sparse vectors, Bernoulli-Subgaussian samplers
//! - [`solvers`]: brute-force `l0`, kernel `l1`, `l1` with prior, OMP with prior
//! - [`dictionary`]: whitening, `l4` maximization, scaling and matching
//! - [`teacher`]: class-matrix construction, curriculum trees, samples
//! - [`sat`]: 1-in-3-SAT instances and their reduction
//! - [`student`]: node and tree training with the grader
//! - [`verify`]: RIP/NSP and split checkers
//! - [`harness`]: experiment configuration, orchestration and reports

pub mod dictionary;
pub mod error;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod model;
pub mod rng;
pub mod sat;
pub mod solvers;
pub mod student;
pub mod teacher;
pub mod verify;

pub use error::{Error, Result};
pub use model::{BernoulliSubgaussianParams, DenseMatrix, ProblemInstance, SparseVector, SubgaussianLaw};
