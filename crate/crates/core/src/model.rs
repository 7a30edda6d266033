//! Domain types, random-matrix samplers and basic diagnostics.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::rng::{self, Rng};

/// Real matrix carrier for A, X, Y, Z, R and W.
pub type DenseMatrix = DMatrix<f64>;

/// Default threshold for classifying numerical zeros.
pub const DEFAULT_ZERO_TOL: f64 = 1e-6;

/// Number of entries with `|v_i| > zero_tol` (strict).
pub fn sparsity(v: &[f64], zero_tol: f64) -> usize {
    v.iter().filter(|x| x.abs() > zero_tol).count()
}

/// Sparse vector: sorted support, aligned values and the threshold used to
/// decide which entries count as nonzero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    dim: usize,
    support: Vec<usize>,
    values: Vec<f64>,
    zero_tol: f64,
}

impl SparseVector {
    pub fn zeros(dim: usize, zero_tol: f64) -> Self {
        Self { dim, support: Vec::new(), values: Vec::new(), zero_tol }
    }

    /// Keep the entries with `|x_i| > zero_tol`; everything else becomes an exact zero.
    pub fn from_dense(x: &[f64], zero_tol: f64) -> Self {
        let (support, values) = x.iter().enumerate().filter(|(_, v)| v.abs() > zero_tol).map(|(i, &v)| (i, v)).unzip();
        Self { dim: x.len(), support, values, zero_tol }
    }

    pub fn from_parts(dim: usize, pairs: &[(usize, f64)], zero_tol: f64) -> Result<Self> {
        let mut dense = vec![0.0; dim];
        let mut seen = vec![false; dim];
        for &(i, v) in pairs {
            if i >= dim || seen[i] {
                return Err(Error::Parameter(format!("bad support index {i} for dimension {dim}")));
            }
            seen[i] = true;
            dense[i] = v;
        }
        Ok(Self::from_dense(&dense, zero_tol))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn zero_tol(&self) -> f64 {
        self.zero_tol
    }

    pub fn sparsity(&self) -> usize {
        self.support.len()
    }

    pub fn get(&self, i: usize) -> f64 {
        match self.support.binary_search(&i) {
            Ok(k) => self.values[k],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (&i, &v) in self.support.iter().zip(&self.values) {
            out[i] = v;
        }
        out
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_vec(self.to_dense())
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Subgaussian law for the nonzero entries of a Bernoulli-Subgaussian matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SubgaussianLaw {
    Gaussian,
    #[default]
    Rademacher,
}

impl SubgaussianLaw {
    /// Draw with unit variance.
    pub fn draw(self, rng: &mut Rng) -> f64 {
        match self {
            SubgaussianLaw::Gaussian => rng.sample(StandardNormal),
            SubgaussianLaw::Rademacher => {
                if rng.random_bool(0.5) {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }

    /// E|R| for a unit-variance draw.
    pub fn mean_abs(self) -> f64 {
        match self {
            SubgaussianLaw::Gaussian => (2.0 / std::f64::consts::PI).sqrt(),
            SubgaussianLaw::Rademacher => 1.0,
        }
    }
}

/// Parameters of the (restricted) Bernoulli-Subgaussian model: each entry is
/// `Omega * R` with `Omega ~ Bernoulli(theta)` and `R = nu * (unit law)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BernoulliSubgaussianParams {
    pub theta: f64,
    pub nu2: f64,
    pub psi2_bound: f64,
    pub restricted: bool,
    pub distribution: SubgaussianLaw,
}

impl Default for BernoulliSubgaussianParams {
    fn default() -> Self {
        Self { theta: 1.0, nu2: 1.0, psi2_bound: 1.0, restricted: true, distribution: SubgaussianLaw::Rademacher }
    }
}

impl BernoulliSubgaussianParams {
    pub fn restricted_rademacher(theta: f64) -> Self {
        Self { theta, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(Error::Parameter(format!("theta {} outside (0, 1]", self.theta)));
        }
        if !(self.nu2 > 0.0 && self.nu2.is_finite()) {
            return Err(Error::Parameter(format!("variance {} must be positive", self.nu2)));
        }
        if self.restricted {
            // P(R = 0) = 0 holds for both laws; check E|R| in [1/10, 1] and E R^2 <= 1.
            let nu = self.nu2.sqrt();
            let mean_abs = nu * self.distribution.mean_abs();
            if self.nu2 > 1.0 || !(0.1..=1.0).contains(&mean_abs) {
                return Err(Error::Parameter(format!(
                    "restricted model needs E R^2 <= 1 and E|R| in [0.1, 1]; got E R^2 = {}, E|R| = {mean_abs}",
                    self.nu2
                )));
            }
        }
        Ok(())
    }
}

/// `rows x cols` matrix with i.i.d. entries `Omega_jk * R_jk`.
pub fn sample_bernoulli_subgaussian(
    rows: usize,
    cols: usize,
    params: &BernoulliSubgaussianParams,
    seed: u64,
) -> Result<DenseMatrix> {
    params.validate()?;
    let mut rng = rng::seeded(seed);
    Ok(sample_bernoulli_subgaussian_with(rows, cols, params, &mut rng))
}

pub(crate) fn sample_bernoulli_subgaussian_with(
    rows: usize,
    cols: usize,
    params: &BernoulliSubgaussianParams,
    rng: &mut Rng,
) -> DenseMatrix {
    let nu = params.nu2.sqrt();
    // Column-major fill so a column is a contiguous draw sequence.
    let mut m = DenseMatrix::zeros(rows, cols);
    for c in 0..cols {
        for r in 0..rows {
            if params.theta >= 1.0 || rng.random_bool(params.theta) {
                m[(r, c)] = nu * params.distribution.draw(rng);
            }
        }
    }
    m
}

/// Training coefficients: a `p x q` restricted Bernoulli-Rademacher matrix with
/// rate `tbar / (2p)`, so columns have expected sparsity `tbar / 2`.
pub fn sample_training_coefficients(p: usize, q: usize, tbar: f64, seed: u64) -> Result<DenseMatrix> {
    let params = coefficient_params(p, tbar)?;
    for w in coefficient_sample_warnings(p, q, tbar) {
        log::warn!("{w}");
    }
    sample_bernoulli_subgaussian(p, q, &params, seed)
}

pub(crate) fn coefficient_params(p: usize, tbar: f64) -> Result<BernoulliSubgaussianParams> {
    if p == 0 {
        return Err(Error::Parameter("p must be positive".into()));
    }
    if tbar.is_nan() || tbar <= 0.0 || tbar > 2.0 * p as f64 {
        return Err(Error::Parameter(format!("tbar {tbar} must lie in (0, 2p = {}]", 2 * p)));
    }
    let params = BernoulliSubgaussianParams::restricted_rademacher(tbar / (2.0 * p as f64));
    params.validate()?;
    Ok(params)
}

/// Sample-size and rate checks for the training model (with unit constants).
/// Reported, never enforced.
pub fn coefficient_sample_warnings(p: usize, q: usize, tbar: f64) -> Vec<String> {
    let mut out = Vec::new();
    let pf = p as f64;
    if (q as f64) <= pf * pf {
        out.push(format!("q = {q} samples does not exceed p^2 = {}", p * p));
    }
    if tbar < 2.0 {
        out.push(format!("tbar = {tbar} below 2 (rate tbar/p < 2/p)"));
    }
    if tbar / pf > 1.0 / pf.sqrt() {
        out.push(format!("tbar/p = {} exceeds 1/sqrt(p) = {}", tbar / pf, 1.0 / pf.sqrt()));
    }
    if tbar < (q.max(1) as f64).ln() {
        out.push(format!("tbar = {tbar} below log q = {:.3}", (q.max(1) as f64).ln()));
    }
    out
}

/// `||M||_F^2 / ||M||_2^2`.
pub fn stable_rank(m: &DenseMatrix) -> Result<f64> {
    let top = linalg::spectral_norm(m);
    if top == 0.0 {
        return Err(Error::Domain("stable rank of the zero matrix".into()));
    }
    Ok(m.norm_squared() / (top * top))
}

/// Linear system `A x = b` with an optional known solution.
#[derive(Clone, Debug)]
pub struct ProblemInstance {
    pub a: DenseMatrix,
    pub b: DVector<f64>,
    pub known_solution: Option<SparseVector>,
}

impl ProblemInstance {
    pub fn new(a: DenseMatrix, b: DVector<f64>, known_solution: Option<SparseVector>) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(Error::Parameter(format!("A has {} rows but b has length {}", a.nrows(), b.len())));
        }
        if let Some(x) = &known_solution {
            if x.dim() != a.ncols() {
                return Err(Error::Parameter("known solution has wrong dimension".into()));
            }
            let r = &a * x.to_dvector() - &b;
            let scale = linalg::inf_norm(&b).max(1.0);
            if linalg::inf_norm(&r) > 1e-9 * scale {
                return Err(Error::Parameter("known solution does not solve the system".into()));
            }
        }
        Ok(Self { a, b, known_solution })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sparsity_examples() {
        assert_eq!(sparsity(&[1.0, 0.0, -2.0], 0.0), 2);
        assert_eq!(sparsity(&[1e-8, 0.0], 1e-6), 0);
        assert_eq!(sparsity(&[0.5, 0.5, 0.5], 0.5), 0);
    }

    #[test]
    fn bernoulli_rate_window() {
        let p = BernoulliSubgaussianParams::restricted_rademacher(0.01);
        let m = sample_bernoulli_subgaussian(1000, 1000, &p, 1).unwrap();
        let frac = m.iter().filter(|&&v| v != 0.0).count() as f64 / 1e6;
        assert!((0.007..=0.013).contains(&frac), "{frac}");
    }

    #[test]
    fn dense_rademacher_is_pm_one() {
        let p = BernoulliSubgaussianParams::restricted_rademacher(1.0);
        let m = sample_bernoulli_subgaussian(2, 2, &p, 7).unwrap();
        assert!(m.iter().all(|&v| v == 1.0 || v == -1.0));
        // E|R| = 1 exactly for rademacher
        let mean_abs = m.iter().map(|v| v.abs()).sum::<f64>() / 4.0;
        assert_eq!(mean_abs, 1.0);
    }

    #[test]
    fn sampler_is_deterministic() {
        let p = BernoulliSubgaussianParams { distribution: SubgaussianLaw::Gaussian, ..Default::default() };
        let a = sample_bernoulli_subgaussian(5, 7, &p, 11).unwrap();
        let b = sample_bernoulli_subgaussian(5, 7, &p, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_params_rejected() {
        let bad = BernoulliSubgaussianParams { theta: 0.0, ..Default::default() };
        assert!(matches!(bad.validate(), Err(Error::Parameter(_))));
        let unnormalized =
            BernoulliSubgaussianParams { nu2: 4.0, distribution: SubgaussianLaw::Gaussian, ..Default::default() };
        assert!(matches!(unnormalized.validate(), Err(Error::Parameter(_))));
    }

    #[test]
    fn coefficient_column_sparsity() {
        let z = sample_training_coefficients(100, 4000, 8.0, 3).unwrap();
        let mean = z.column_iter().map(|c| sparsity(c.as_slice(), 0.0)).sum::<usize>() as f64 / 4000.0;
        assert!((3.0..=5.0).contains(&mean), "{mean}");
        let dense = sample_training_coefficients(4, 1, 8.0, 0).unwrap();
        assert_eq!(sparsity(dense.as_slice(), 0.0), 4);
        assert!(matches!(sample_training_coefficients(4, 1, 9.0, 0), Err(Error::Parameter(_))));
    }

    #[test]
    fn small_sample_warning() {
        assert!(coefficient_sample_warnings(10, 100, 4.0).iter().any(|w| w.contains("p^2")));
        assert!(!coefficient_sample_warnings(10, 101, 4.0).iter().any(|w| w.contains("p^2")));
    }

    #[test]
    fn stable_rank_examples() {
        assert!((stable_rank(&DenseMatrix::identity(5, 5)).unwrap() - 5.0).abs() < 1e-12);
        let u = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let v = DVector::from_vec(vec![-1.0, 0.5]);
        assert!((stable_rank(&(&u * v.transpose())).unwrap() - 1.0).abs() < 1e-12);
        let d = DenseMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0]));
        assert!((stable_rank(&d).unwrap() - 1.25).abs() < 1e-12);
        assert!(matches!(stable_rank(&DenseMatrix::zeros(2, 2)), Err(Error::Domain(_))));
    }

    proptest! {
        #[test]
        fn stable_rank_bounded_by_rank(entries in proptest::collection::vec(-3.0f64..3.0, 12)) {
            let m = DenseMatrix::from_vec(3, 4, entries);
            prop_assume!(linalg::spectral_norm(&m) > 1e-6);
            let sr = stable_rank(&m).unwrap();
            let rank = linalg::numerical_rank(&m, 1e-12) as f64;
            prop_assert!(sr >= 1.0 - 1e-9 && sr <= rank + 1e-9);
        }

        #[test]
        fn sparse_round_trip(x in proptest::collection::vec(prop_oneof![Just(0.0), -2.0f64..2.0], 0..20), tol in 0.0f64..0.5) {
            let sv = SparseVector::from_dense(&x, tol);
            let again = SparseVector::from_dense(&sv.to_dense(), tol);
            prop_assert_eq!(&sv, &again);
            prop_assert!(sv.support().windows(2).all(|w| w[0] < w[1]));
            prop_assert!(sv.values().iter().all(|v| v.abs() > tol));
            prop_assert_eq!(sv.sparsity(), sparsity(&x, tol));
        }
    }
}
