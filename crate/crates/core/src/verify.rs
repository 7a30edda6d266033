//! Structural checks on matrices and splits of sparse solutions, plus a Monte
//! Carlo test of `E ||A R u||^2 = ||A||_F^2 ||u||^2`.

use itertools::Itertools;
use microlp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem};
use nalgebra::{DVector, SymmetricEigen};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{sparsity, DenseMatrix, SubgaussianLaw};
use crate::rng::{self, Purpose};
use crate::solvers::{kernel_basis, solve_l0_brute, support_count};

/// Default enumeration budget for the exhaustive checks.
pub const DEFAULT_BUDGET: u128 = 2_000_000;

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Eigenvalues of a symmetric matrix, exact for diagonal and 2 x 2 inputs.
fn sym_eigenvalues(g: &DenseMatrix) -> Vec<f64> {
    let k = g.nrows();
    let diagonal = (0..k).all(|i| (0..k).all(|j| i == j || g[(i, j)] == 0.0));
    if diagonal {
        return (0..k).map(|i| g[(i, i)]).collect();
    }
    if k == 2 {
        let (a, b, d) = (g[(0, 0)], g[(0, 1)], g[(1, 1)]);
        let mid = 0.5 * (a + d);
        let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
        return vec![mid - rad, mid + rad];
    }
    SymmetricEigen::new(g.clone()).eigenvalues.iter().copied().collect()
}

/// `delta_t = max_S max |lambda - 1|` over eigenvalues of `M_S^T M_S`,
/// `|S| = t`.
pub fn rip_constant_brute(m: &DenseMatrix, t: usize, budget: u128) -> Result<f64> {
    let p = m.ncols();
    let t = t.min(p);
    if t == 0 {
        return Ok(0.0);
    }
    let count = binomial(p, t);
    if count > budget {
        return Err(Error::Budget { count, budget });
    }
    let gram = m.transpose() * m;
    let mut delta: f64 = 0.0;
    for support in (0..p).combinations(t) {
        let g = DenseMatrix::from_fn(t, t, |i, j| gram[(support[i], support[j])]);
        for lam in sym_eigenvalues(&g) {
            delta = delta.max((lam - 1.0).abs());
        }
    }
    Ok(delta)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NspMode {
    ExactSmall,
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NspCertificate {
    /// `ker M = {0}`.
    TrivialKernel,
    /// Largest `||v_S||_1 - ||v_Sc||_1` with `||v_S||_1 = 1` over all supports
    /// and sign patterns; the property holds when it is negative.
    Exact { worst_margin: f64, support: Vec<usize>, signs: Vec<f64> },
    /// A kernel vector concentrating on `support`.
    Violation { v: Vec<f64>, support: Vec<usize> },
    /// Monte Carlo found nothing; this is not a proof.
    NoCounterexampleFound { samples: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NspResult {
    pub holds: bool,
    pub certificate: NspCertificate,
}

const NSP_TOL: f64 = 1e-9;

/// Null space property of order `t`: `||v_S||_1 < ||v_Sc||_1` for every
/// nonzero kernel vector and every `|S| <= t`.
pub fn nsp_check(m: &DenseMatrix, t: usize, mode: NspMode, budget: u128) -> Result<NspResult> {
    let p = m.ncols();
    let n = kernel_basis(m);
    let k = n.ncols();
    if k == 0 {
        return Ok(NspResult { holds: true, certificate: NspCertificate::TrivialKernel });
    }
    let t = t.min(p);
    match mode {
        NspMode::ExactSmall => {
            if k > 12 || p > 20 {
                return Err(Error::Precondition(format!(
                    "exact mode needs kernel dim <= 12 and p <= 20, got {k}, {p}"
                )));
            }
            let count = binomial(p, t).saturating_mul(1u128 << t);
            if count > budget {
                return Err(Error::Budget { count, budget });
            }
            let mut worst = (f64::NEG_INFINITY, Vec::new(), Vec::new());
            for support in (0..p).combinations(t) {
                for pattern in 0u32..(1 << t) {
                    let signs: Vec<f64> = (0..t).map(|i| if pattern >> i & 1 == 1 { -1.0 } else { 1.0 }).collect();
                    if let Some(off) = min_off_support_mass(&n, &support, &signs) {
                        let margin = 1.0 - off;
                        if margin > worst.0 {
                            worst = (margin, support.clone(), signs);
                        }
                    }
                }
            }
            let (worst_margin, support, signs) = worst;
            Ok(NspResult {
                holds: worst_margin < -NSP_TOL,
                certificate: NspCertificate::Exact { worst_margin, support, signs },
            })
        }
        NspMode::MonteCarlo { samples, seed } => {
            let mut r = rng::stream(seed, 0, Purpose::MonteCarlo);
            for _ in 0..samples {
                let g = DVector::from_fn(k, |_, _| r.sample::<f64, _>(StandardNormal));
                let v = &n * g;
                let mut order: Vec<usize> = (0..p).collect();
                order.sort_by(|&i, &j| v[j].abs().total_cmp(&v[i].abs()));
                let on: f64 = order[..t].iter().map(|&i| v[i].abs()).sum();
                let off: f64 = order[t..].iter().map(|&i| v[i].abs()).sum();
                if on >= off {
                    let mut support = order[..t].to_vec();
                    support.sort_unstable();
                    return Ok(NspResult {
                        holds: false,
                        certificate: NspCertificate::Violation { v: v.iter().copied().collect(), support },
                    });
                }
            }
            Ok(NspResult { holds: true, certificate: NspCertificate::NoCounterexampleFound { samples } })
        }
    }
}

/// `min ||v_Sc||_1` over `v = N w` with `sign(v_S) = signs` and
/// `sum signs_i v_i = 1`; `None` if no such kernel vector exists.
fn min_off_support_mass(n: &DenseMatrix, support: &[usize], signs: &[f64]) -> Option<f64> {
    let (p, k) = n.shape();
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let w: Vec<_> = (0..k).map(|_| lp.add_var(0.0, (f64::NEG_INFINITY, f64::INFINITY))).collect();
    let row = |i: usize, scale: f64| -> LinearExpr {
        let mut e = LinearExpr::empty();
        for (j, &wj) in w.iter().enumerate() {
            e.add(wj, scale * n[(i, j)]);
        }
        e
    };
    let mut norm = vec![0.0; k];
    for (&i, &s) in support.iter().zip(signs) {
        lp.add_constraint(row(i, s), ComparisonOp::Ge, 0.0);
        for (j, c) in norm.iter_mut().enumerate() {
            *c += s * n[(i, j)];
        }
    }
    lp.add_constraint(w.iter().copied().zip(norm).collect::<Vec<_>>().as_slice(), ComparisonOp::Eq, 1.0);
    for i in (0..p).filter(|i| !support.contains(i)) {
        let u = lp.add_var(1.0, (0.0, f64::INFINITY));
        for s in [1.0, -1.0] {
            let mut e = row(i, s);
            e.add(u, 1.0);
            lp.add_constraint(e, ComparisonOp::Ge, 0.0);
        }
    }
    lp.solve().ok().map(|sol| sol.objective())
}

fn check_disjoint(s: &DenseMatrix) -> Result<()> {
    for i in 0..s.nrows() {
        let hits = s.row(i).iter().filter(|v| **v != 0.0).count();
        if hits > 1 {
            return Err(Error::Precondition(format!("row {i} is shared by {hits} split columns")));
        }
    }
    Ok(())
}

/// Whether `A S` has full column rank, for `S` with disjoint column supports.
pub fn check_split_independence(a: &DenseMatrix, s: &DenseMatrix) -> Result<bool> {
    check_disjoint(s)?;
    let a_s = a * s;
    Ok(linalg::numerical_rank(&a_s, linalg::RANK_RTOL) == s.ncols())
}

/// Whether every column `S_k` is a sparsest solution of `A x = A S_k`.
pub fn check_split_global_optimality(a: &DenseMatrix, s: &DenseMatrix, budget: u128) -> Result<bool> {
    check_disjoint(s)?;
    let n = a.ncols();
    for col in s.column_iter() {
        let k = sparsity(col.as_slice(), 0.0);
        let count = support_count(n, k);
        if count > budget {
            return Err(Error::Budget { count, budget });
        }
        let b = a * col;
        let found = solve_l0_brute(a, &b, k, 1e-9)?;
        match found.found() {
            Some(x) if x.sparsity() == k => {}
            _ => return Ok(false),
        }
    }
    Ok(true)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpectationTest {
    pub empirical: f64,
    pub expected: f64,
    pub z_score: f64,
}

/// Monte Carlo estimate of `E ||A R u||^2` for `R` with i.i.d. mean-zero,
/// unit-variance entries, compared with `||A||_F^2 ||u||^2`.
pub fn expectation_identity_test(
    a: &DenseMatrix,
    u: &DVector<f64>,
    trials: usize,
    seed: u64,
    law: SubgaussianLaw,
) -> Result<ExpectationTest> {
    if trials < 100 {
        return Err(Error::Parameter(format!("need at least 100 trials, got {trials}")));
    }
    let (k, d) = (a.ncols(), u.len());
    let expected = a.norm_squared() * u.norm_squared();
    let mut r = rng::stream(seed, 0, Purpose::MonteCarlo);
    let mut rmat = DenseMatrix::zeros(k, d);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..trials {
        for v in rmat.iter_mut() {
            *v = law.draw(&mut r);
        }
        let val = (a * (&rmat * u)).norm_squared();
        sum += val;
        sum_sq += val * val;
    }
    let nt = trials as f64;
    let empirical = sum / nt;
    let var = ((sum_sq - nt * empirical * empirical) / (nt - 1.0)).max(0.0);
    let se = (var / nt).sqrt();
    let diff = empirical - expected;
    let z_score = if se > 0.0 {
        diff / se
    } else if diff.abs() <= 1e-12 * expected.max(1.0) {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    };
    Ok(ExpectationTest { empirical, expected, z_score })
}
