use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;

use sparse_curriculum::rng;
use sparse_curriculum::solvers::{omp_prior, solve_l0_brute, solve_l1_prior, SolverOptions};
use sparse_curriculum::DenseMatrix;

fn gaussian(m: usize, n: usize, r: &mut rng::Rng) -> DenseMatrix {
    DenseMatrix::from_fn(m, n, |_, _| r.sample::<f64, _>(StandardNormal)) / (m as f64).sqrt()
}

#[test]
fn omp_recovers_two_sparse_coefficients() {
    let mut r = rng::seeded(11);
    for _ in 0..10 {
        let a = gaussian(20, 30, &mut r);
        let x = gaussian(30, 24, &mut r) * 30f64.sqrt();
        let mut idx: Vec<usize> = (0..24).collect();
        idx.shuffle(&mut r);
        let mut z = DVector::zeros(24);
        z[idx[0]] = 1.5;
        z[idx[1]] = -0.8;
        let b = &a * &x * &z;
        let brute = solve_l0_brute(&(&a * &x), &b, 2, 1e-9).unwrap().into_found().unwrap();
        let mut want = brute.support().to_vec();
        want.sort_unstable();
        let mut planted = vec![idx[0], idx[1]];
        planted.sort_unstable();
        assert_eq!(want, planted);
        let out = omp_prior(&a, &x, &b, 5, 1e-10, 1e-9).unwrap();
        assert_eq!(out.z.support(), planted.as_slice());
        assert!((out.z.to_dvector() - &z).amax() < 1e-8);
    }
}

#[test]
fn omp_zero_rhs_is_empty() {
    let mut r = rng::seeded(12);
    let a = gaussian(6, 8, &mut r);
    let out = omp_prior(&a, &DenseMatrix::identity(8, 8), &DVector::zeros(6), 4, 1e-12, 1e-9).unwrap();
    assert_eq!(out.z.sparsity(), 0);
    assert_eq!(out.x.sparsity(), 0);
}

#[test]
fn prior_l1_picks_unit_coefficient() {
    let mut r = rng::seeded(13);
    for _ in 0..5 {
        let a = gaussian(16, 24, &mut r);
        let x = gaussian(24, 10, &mut r);
        let ax = &a * &x;
        for k in [0, 4, 9] {
            let b = ax.column(k).into_owned();
            let l0 = solve_l0_brute(&ax, &b, 1, 1e-9).unwrap().into_found().unwrap();
            assert_eq!(l0.support(), &[k]);
            let (z, xs) = solve_l1_prior(&a, &x, &b, &SolverOptions::default()).unwrap();
            let mut e = DVector::zeros(10);
            e[k] = 1.0;
            assert!((z.to_dvector() - e).amax() < 1e-8);
            assert!((xs.to_dvector() - x.column(k)).amax() < 1e-8);
        }
        let (z, xs) = solve_l1_prior(&a, &x, &DVector::zeros(16), &SolverOptions::default()).unwrap();
        assert_eq!((z.sparsity(), xs.sparsity()), (0, 0));
    }
}
