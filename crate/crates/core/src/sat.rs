//! 1-in-3-SAT instances, their reduction to `l0` problems, and translation of
//! sparse solutions back to assignments.

use std::fmt::Write as _;

use nalgebra::DVector;
use rand::seq::index::sample;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{sparsity, DenseMatrix, ProblemInstance, SparseVector};
use crate::rng::Rng;
use crate::solvers::solve_l0_brute;

/// Threshold for reading 0/1 values off a solution.
pub const ASSIGNMENT_ZERO_TOL: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Literal {
    pub var: usize,
    pub positive: bool,
}

impl Literal {
    pub fn pos(var: usize) -> Self {
        Self { var, positive: true }
    }

    pub fn neg(var: usize) -> Self {
        Self { var, positive: false }
    }

    pub fn eval(self, assignment: &[bool]) -> bool {
        assignment[self.var] == self.positive
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SatInstance {
    n_vars: usize,
    clauses: Vec<[Literal; 3]>,
}

impl SatInstance {
    pub fn new(n_vars: usize, clauses: Vec<[Literal; 3]>) -> Result<Self> {
        for (k, c) in clauses.iter().enumerate() {
            if let Some(l) = c.iter().find(|l| l.var >= n_vars) {
                return Err(Error::Parameter(format!("clause {k} uses variable {} of {n_vars}", l.var)));
            }
        }
        Ok(Self { n_vars, clauses })
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn clauses(&self) -> &[[Literal; 3]] {
        &self.clauses
    }

    /// Parses `p 1in3 <n_vars> <n_clauses>` followed by clauses of three
    /// signed 1-based literals terminated by `0`. Lines starting with `c` are
    /// comments.
    pub fn parse(text: &str) -> Result<Self> {
        let mut header: Option<(usize, usize)> = None;
        let mut clauses = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('c') {
                continue;
            }
            let err = |msg: &str| Error::Parse(format!("line {}: {msg}", ln + 1));
            if line.starts_with('p') {
                let parts: Vec<&str> = line.split_whitespace().collect();
                if parts.len() != 4 || parts[1] != "1in3" || header.is_some() {
                    return Err(err("expected a single header `p 1in3 <vars> <clauses>`"));
                }
                let n = parts[2].parse().map_err(|_| err("bad variable count"))?;
                let m = parts[3].parse().map_err(|_| err("bad clause count"))?;
                header = Some((n, m));
                continue;
            }
            let (n_vars, _) = header.ok_or_else(|| err("clause before header"))?;
            let nums: Vec<i64> = line
                .split_whitespace()
                .map(|t| t.parse::<i64>().map_err(|_| err("non-integer literal")))
                .collect::<Result<_>>()?;
            if nums.len() != 4 || nums[3] != 0 {
                return Err(err("clause needs three literals and a terminating 0"));
            }
            let mut lits = [Literal::pos(0); 3];
            for (slot, &v) in lits.iter_mut().zip(&nums[..3]) {
                let var = v.unsigned_abs() as usize;
                if v == 0 || var > n_vars {
                    return Err(err("literal out of range"));
                }
                *slot = Literal { var: var - 1, positive: v > 0 };
            }
            clauses.push(lits);
        }
        let (n_vars, n_clauses) = header.ok_or_else(|| Error::Parse("missing header".into()))?;
        if clauses.len() != n_clauses {
            return Err(Error::Parse(format!("header announces {n_clauses} clauses, found {}", clauses.len())));
        }
        Self::new(n_vars, clauses)
    }

    pub fn to_dimacs(&self) -> String {
        let mut out = format!("p 1in3 {} {}\n", self.n_vars, self.clauses.len());
        for c in &self.clauses {
            for l in c {
                let v = l.var as i64 + 1;
                let _ = write!(out, "{} ", if l.positive { v } else { -v });
            }
            out.push_str("0\n");
        }
        out
    }

    /// Random instance; clauses use three distinct variables when
    /// `n_vars >= 3`.
    pub fn random(n_vars: usize, n_clauses: usize, rng: &mut Rng) -> Result<Self> {
        if n_vars == 0 && n_clauses > 0 {
            return Err(Error::Parameter("clauses need at least one variable".into()));
        }
        let clauses = (0..n_clauses)
            .map(|_| {
                let vars: Vec<usize> = if n_vars >= 3 {
                    sample(rng, n_vars, 3).into_vec()
                } else {
                    (0..3).map(|_| rng.random_range(0..n_vars)).collect()
                };
                let mut c = [Literal::pos(0); 3];
                for (slot, v) in c.iter_mut().zip(vars) {
                    *slot = Literal { var: v, positive: rng.random_bool(0.5) };
                }
                c
            })
            .collect();
        Self::new(n_vars, clauses)
    }
}

/// `A = [[C D], [I I]]` with clause rows counting positive (`C`) and negated
/// (`D`) literal occurrences, and `b = 1`.
pub fn reduce_1in3sat(inst: &SatInstance) -> ProblemInstance {
    let n = inst.n_vars;
    let m = inst.clauses.len();
    let mut a = DenseMatrix::zeros(m + n, 2 * n);
    for (k, clause) in inst.clauses.iter().enumerate() {
        for l in clause {
            let col = if l.positive { l.var } else { n + l.var };
            a[(k, col)] += 1.0;
        }
    }
    for i in 0..n {
        a[(m + i, i)] = 1.0;
        a[(m + i, n + i)] = 1.0;
    }
    let b = DVector::from_element(m + n, 1.0);
    ProblemInstance::new(a, b, None).expect("reduction has consistent dimensions")
}

pub fn check_1in3_assignment(inst: &SatInstance, assignment: &[bool]) -> bool {
    assignment.len() == inst.n_vars && inst.clauses.iter().all(|c| c.iter().filter(|l| l.eval(assignment)).count() == 1)
}

/// Reads `y` off `x = (y, z)` when `x` is `n`-sparse with exactly one of
/// `(y_i, z_i)` equal to 1 and the other 0 for every `i`.
pub fn solution_to_assignment(x: &SparseVector, n_vars: usize, zero_tol: f64) -> Option<Vec<bool>> {
    if x.dim() != 2 * n_vars {
        return None;
    }
    let dense = x.to_dense();
    if sparsity(&dense, zero_tol) != n_vars {
        return None;
    }
    (0..n_vars)
        .map(|i| {
            let (y, z) = (dense[i], dense[n_vars + i]);
            let one = |v: f64| (v - 1.0).abs() <= zero_tol;
            let zero = |v: f64| v.abs() <= zero_tol;
            if one(y) && zero(z) {
                Some(true)
            } else if zero(y) && one(z) {
                Some(false)
            } else {
                None
            }
        })
        .collect()
}

/// `||x||_0 == ||b_lower||_0`, which certifies global `l0` optimality for the
/// identity-block model class.
pub fn is_global_l0_by_identity_block(x: &SparseVector, b_lower: &DVector<f64>) -> bool {
    x.sparsity() == sparsity(b_lower.as_slice(), x.zero_tol())
}

/// Decides the instance by searching for an `n`-sparse solution of the
/// reduction.
pub fn solve_1in3_brute(inst: &SatInstance) -> Result<Option<Vec<bool>>> {
    let prob = reduce_1in3sat(inst);
    let found = solve_l0_brute(&prob.a, &prob.b, inst.n_vars, 1e-9)?;
    Ok(found
        .found()
        .filter(|x| x.sparsity() == inst.n_vars)
        .and_then(|x| solution_to_assignment(x, inst.n_vars, ASSIGNMENT_ZERO_TOL)))
}

/// Decides the instance by enumerating all assignments.
pub fn solve_1in3_exhaustive(inst: &SatInstance) -> Option<Vec<bool>> {
    let n = inst.n_vars;
    (0u64..1 << n)
        .map(|mask| (0..n).map(|i| mask >> i & 1 == 1).collect::<Vec<bool>>())
        .find(|a| check_1in3_assignment(inst, a))
}
