mod common;

use adiabat::linalg;
use adiabat::metrics::{bures_distance, density_distance, fidelity, rotate, trace_distance};
use adiabat::spectral::{DensityMatrix, DensityProfile};
use faer::{c64, Mat};
use proptest::prelude::*;

/// `(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2` through explicit matrix square roots.
fn fidelity_by_square_roots(rho: &DensityMatrix, sigma: &DensityMatrix) -> f64 {
    let (w, v) = linalg::eigh(rho.matrix()).unwrap();
    let root_w: Vec<f64> = w.iter().map(|x| x.max(0.0).sqrt()).collect();
    let sqrt_rho = linalg::weighted_projector_sum(&root_w, v.as_ref());
    let inner = &sqrt_rho * sigma.matrix() * &sqrt_rho;
    let lam = linalg::eigvalsh(inner.as_ref()).unwrap();
    lam.iter().map(|x| x.max(0.0).sqrt()).sum::<f64>().powi(2)
}

fn dims() -> impl Strategy<Value = (u64, usize)> {
    (any::<u64>(), 2usize..7)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn distances_are_symmetric_bounded_and_nonnegative((seed, dim) in dims()) {
        let mut rng = common::rng(seed);
        let x = common::random_state(&mut rng, dim);
        let y = common::random_state(&mut rng, dim);
        for f in [bures_distance, trace_distance] {
            let (xy, yx) = (f(&x, &y).unwrap(), f(&y, &x).unwrap());
            prop_assert!(xy.value >= 0.0 && xy.value <= xy.max());
            prop_assert!((xy.value - yx.value).abs() < 1e-10);
        }
    }

    #[test]
    fn triangle_inequality((seed, dim) in dims()) {
        let mut rng = common::rng(seed);
        let x = common::random_state(&mut rng, dim);
        let y = common::random_state(&mut rng, dim);
        let z = common::random_state(&mut rng, dim);
        for f in [bures_distance, trace_distance] {
            let xz = f(&x, &z).unwrap().value;
            let via = f(&x, &y).unwrap().value + f(&y, &z).unwrap().value;
            prop_assert!(xz <= via + 1e-9, "{xz} > {via}");
        }
    }

    #[test]
    fn density_distance_axioms(seed in any::<u64>(), sites in 2usize..8) {
        let mut rng = common::rng(seed);
        let n = sites;
        let a = common::random_profile(&mut rng, sites, n);
        let b = common::random_profile(&mut rng, sites, n);
        let c = common::random_profile(&mut rng, sites, n);
        let ab = density_distance(&a, &b).unwrap().value;
        prop_assert!((0.0..=2.0).contains(&ab));
        prop_assert!((ab - density_distance(&b, &a).unwrap().value).abs() < 1e-10);
        prop_assert!(density_distance(&a, &a).unwrap().value < 1e-12);
        let ac = density_distance(&a, &c).unwrap().value;
        let bc = density_distance(&b, &c).unwrap().value;
        prop_assert!(ac <= ab + bc + 1e-9);
    }

    #[test]
    fn bures_trace_bounds((seed, dim) in dims()) {
        let mut rng = common::rng(seed);
        let x = common::random_state(&mut rng, dim);
        let y = common::random_state(&mut rng, dim);
        let db = bures_distance(&x, &y).unwrap().value;
        let dt = trace_distance(&x, &y).unwrap().value;
        let f = (1.0 - db * db / 2.0).powi(2);
        prop_assert!(1.0 - f.sqrt() <= dt + 1e-9);
        prop_assert!(dt <= (1.0 - f).sqrt() + 1e-9);
    }

    #[test]
    fn unitary_invariance((seed, dim) in dims()) {
        let mut rng = common::rng(seed);
        let x = common::random_state(&mut rng, dim);
        let y = common::random_state(&mut rng, dim);
        let u = common::random_unitary(&mut rng, dim);
        let (ux, uy) = (rotate(&x, u.as_ref()).unwrap(), rotate(&y, u.as_ref()).unwrap());
        for f in [bures_distance, trace_distance] {
            let before = f(&x, &y).unwrap().value;
            let after = f(&ux, &uy).unwrap().value;
            prop_assert!((before - after).abs() < 1e-9);
        }
    }

    #[test]
    fn fidelity_matches_square_root_route((seed, dim) in dims()) {
        let mut rng = common::rng(seed);
        let x = common::random_density(&mut rng, dim, dim);
        let y = common::random_density(&mut rng, dim, dim);
        let f = fidelity(&x, &y).unwrap();
        prop_assert!((f - fidelity_by_square_roots(&x, &y)).abs() < 1e-9);
    }

    #[test]
    fn commuting_states_reduce_to_classical(seed in any::<u64>(), dim in 2usize..8) {
        let mut rng = common::rng(seed);
        let draw = |rng: &mut rand_chacha::ChaCha8Rng| {
            let p: Vec<f64> = (0..dim).map(|_| rand::Rng::gen_range(rng, 0.0..1.0)).collect();
            let s: f64 = p.iter().sum();
            p.into_iter().map(|x| x / s).collect::<Vec<_>>()
        };
        let (p, q) = (draw(&mut rng), draw(&mut rng));
        let u = common::random_unitary(&mut rng, dim);
        let rho = rotate(&DensityMatrix::diagonal(&p).unwrap(), u.as_ref()).unwrap();
        let sigma = rotate(&DensityMatrix::diagonal(&q).unwrap(), u.as_ref()).unwrap();
        let classical_f: f64 = p.iter().zip(&q).map(|(a, b)| (a * b).sqrt()).sum::<f64>().powi(2);
        let classical_t: f64 = 0.5 * p.iter().zip(&q).map(|(a, b)| (a - b).abs()).sum::<f64>();
        prop_assert!((fidelity(&rho, &sigma).unwrap() - classical_f).abs() < 1e-9);
        prop_assert!((trace_distance(&rho, &sigma).unwrap().value - classical_t).abs() < 1e-9);
    }

    #[test]
    fn pure_state_fidelity_is_overlap(seed in any::<u64>(), dim in 2usize..8) {
        let mut rng = common::rng(seed);
        let a = common::random_vector(&mut rng, dim);
        let b = common::random_vector(&mut rng, dim);
        let overlap: c64 = a.iter().zip(&b).map(|(x, y)| x.conj() * y).sum();
        let (ra, rb) = (DensityMatrix::pure(&a).unwrap(), DensityMatrix::pure(&b).unwrap());
        let f = fidelity(&ra, &rb).unwrap();
        prop_assert!((f - overlap.norm_sqr()).abs() < 1e-10);
        let dt = trace_distance(&ra, &rb).unwrap().value;
        prop_assert!((dt - (1.0 - overlap.norm_sqr()).sqrt()).abs() < 1e-9);
    }
}

#[test]
fn self_distance_vanishes_for_rank_deficient_states() {
    let mut rng = common::rng(17);
    for dim in [2, 5, 36] {
        for rank in [1, 2, dim] {
            let x = common::random_density(&mut rng, dim, rank);
            assert!(bures_distance(&x, &x).unwrap().value < 1e-12);
            assert!(trace_distance(&x, &x).unwrap().value < 1e-12);
        }
    }
}

#[test]
fn maximally_mixed_vs_pure() {
    let dim = 4;
    let mixed = DensityMatrix::maximally_mixed(dim);
    let mut psi = vec![c64::new(0.0, 0.0); dim];
    psi[2] = c64::new(1.0, 0.0);
    let pure = DensityMatrix::pure(&psi).unwrap();
    assert!((fidelity(&mixed, &pure).unwrap() - 0.25).abs() < 1e-12);
    // sqrt(2 (1 - sqrt F)) with F = 1/4
    assert!((bures_distance(&mixed, &pure).unwrap().value - 1.0).abs() < 1e-12);
    assert!((trace_distance(&mixed, &pure).unwrap().value - 0.75).abs() < 1e-12);
}

#[test]
fn mismatched_inputs_are_rejected() {
    let a = DensityMatrix::maximally_mixed(3);
    let b = DensityMatrix::maximally_mixed(4);
    assert!(bures_distance(&a, &b).is_err());
    assert!(trace_distance(&a, &b).is_err());
    let p = DensityProfile::new(vec![1.0, 1.0], 2).unwrap();
    let q = DensityProfile::new(vec![1.0, 1.0, 0.0], 2).unwrap();
    let r = DensityProfile::new(vec![1.0, 0.0, 0.0], 1).unwrap();
    assert!(density_distance(&p, &q).is_err());
    assert!(density_distance(&q, &r).is_err());
    let u = Mat::<c64>::identity(3, 3);
    assert!(rotate(&b, u.as_ref()).is_err());
}

#[test]
fn self_distance_vanishes_for_graded_weights() {
    // Weights spanning far below rounding, as in low-temperature Gibbs states.
    let mut rng = common::rng(18);
    let dim = 60;
    let mut w: Vec<f64> = (0..dim).map(|k| (-(k as f64)).exp()).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    let u = common::random_unitary(&mut rng, dim);
    let x = rotate(&DensityMatrix::diagonal(&w).unwrap(), u.as_ref()).unwrap();
    assert!(bures_distance(&x, &x).unwrap().value < 1e-12);
}
