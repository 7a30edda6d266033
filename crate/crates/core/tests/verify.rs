use proptest::prelude::*;
use rand::Rng as _;
use rand_distr::StandardNormal;

use sparse_curriculum::rng;
use sparse_curriculum::verify::{nsp_check, rip_constant_brute, NspMode, DEFAULT_BUDGET};
use sparse_curriculum::DenseMatrix;

fn unit_columns(m: &mut DenseMatrix) {
    for mut c in m.column_iter_mut() {
        c.normalize_mut();
    }
}

fn max_coherence(m: &DenseMatrix) -> (f64, usize, usize) {
    let mut best = (0.0, 0, 0);
    for i in 0..m.ncols() {
        for j in i + 1..m.ncols() {
            let c = m.column(i).dot(&m.column(j)).abs();
            if c > best.0 {
                best = (c, i, j);
            }
        }
    }
    best
}

/// Unit columns pushed apart until the largest coherence is below `target`.
fn incoherent(m: usize, n: usize, target: f64, seed: u64) -> DenseMatrix {
    let mut r = rng::seeded(seed);
    let mut a = DenseMatrix::from_fn(m, n, |_, _| r.sample::<f64, _>(StandardNormal));
    unit_columns(&mut a);
    for _ in 0..20_000 {
        let (mu, i, j) = max_coherence(&a);
        if mu < target {
            return a;
        }
        let s = a.column(i).dot(&a.column(j)).signum();
        let (ci, cj) = (a.column(i).into_owned(), a.column(j).into_owned());
        a.set_column(i, &(&ci - &cj * (0.1 * s)));
        a.set_column(j, &(&cj - &ci * (0.1 * s)));
        unit_columns(&mut a);
    }
    panic!("coherence reduction did not converge");
}

#[test]
fn small_rip_constant_gives_nsp() {
    for seed in 0..5 {
        let a = incoherent(8, 12, 0.3, seed);
        let delta2 = rip_constant_brute(&a, 2, DEFAULT_BUDGET).unwrap();
        assert!(delta2 < 1.0 / 3.0, "seed {seed}: {delta2}");
        let res = nsp_check(&a, 1, NspMode::ExactSmall, DEFAULT_BUDGET).unwrap();
        assert!(res.holds, "seed {seed}: {:?}", res.certificate);
        let mc = nsp_check(&a, 1, NspMode::MonteCarlo { samples: 2000, seed }, DEFAULT_BUDGET).unwrap();
        assert!(mc.holds);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn monte_carlo_violations_are_real(seed in 0u64..10_000) {
        let mut r = rng::seeded(seed);
        let a = DenseMatrix::from_fn(3, 6, |_, _| r.sample::<f64, _>(StandardNormal));
        let exact = nsp_check(&a, 2, NspMode::ExactSmall, DEFAULT_BUDGET).unwrap();
        let mc = nsp_check(&a, 2, NspMode::MonteCarlo { samples: 500, seed }, DEFAULT_BUDGET).unwrap();
        // Monte Carlo can only miss violations, never invent them.
        if !mc.holds {
            prop_assert!(!exact.holds);
        }
    }

    #[test]
    fn rip_is_monotone_in_order(seed in 0u64..10_000) {
        let mut r = rng::seeded(seed);
        let a = DenseMatrix::from_fn(6, 9, |_, _| r.sample::<f64, _>(StandardNormal)) / 6f64.sqrt();
        let d: Vec<f64> = (1..=4).map(|t| rip_constant_brute(&a, t, DEFAULT_BUDGET).unwrap()).collect();
        prop_assert!(d.windows(2).all(|w| w[0] <= w[1] + 1e-12), "{d:?}");
    }
}
