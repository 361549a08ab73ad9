#![allow(dead_code)]

use adiabat::linalg::{self, HermitianOperator};
use adiabat::spectral::{DensityMatrix, DensityProfile};
use faer::{c64, Mat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn entry(rng: &mut ChaCha8Rng) -> c64 {
    c64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

/// `G G^dagger / Tr` for a `dim x rank` matrix with uniform complex entries.
pub fn random_density(rng: &mut ChaCha8Rng, dim: usize, rank: usize) -> DensityMatrix {
    let g = Mat::from_fn(dim, rank, |_, _| entry(rng));
    let mut m = &g * g.adjoint();
    let tr: f64 = (0..dim).map(|k| m[(k, k)].re).sum();
    m = Mat::from_fn(dim, dim, |i, j| m[(i, j)] / tr);
    linalg::hermitize(&mut m);
    DensityMatrix::new(m).unwrap()
}

/// Rank drawn uniformly from `1..=dim`.
pub fn random_state(rng: &mut ChaCha8Rng, dim: usize) -> DensityMatrix {
    let rank = rng.gen_range(1..=dim);
    random_density(rng, dim, rank)
}

pub fn random_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<c64> {
    let v: Vec<c64> = (0..dim).map(|_| entry(rng)).collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / norm).collect()
}

pub fn random_hermitian(rng: &mut ChaCha8Rng, dim: usize) -> HermitianOperator {
    let a = Mat::from_fn(dim, dim, |_, _| entry(rng));
    let mut h = Mat::from_fn(dim, dim, |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5);
    linalg::hermitize(&mut h);
    HermitianOperator::new(h).unwrap()
}

pub fn random_unitary(rng: &mut ChaCha8Rng, dim: usize) -> Mat<c64> {
    let h = random_hermitian(rng, dim);
    linalg::expm_hermitian(h.matrix(), 3.0).unwrap()
}

/// Convex mixture of random configurations with `n_particles` fermions on
/// `n_sites` spinful sites.
pub fn random_profile(rng: &mut ChaCha8Rng, n_sites: usize, n_particles: usize) -> DensityProfile {
    let terms = rng.gen_range(1..=4);
    let weights: Vec<f64> = (0..terms).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let mut occ = vec![0.0; n_sites];
    for w in weights {
        let mut config = vec![0usize; n_sites];
        let mut placed = 0;
        while placed < n_particles {
            let i = rng.gen_range(0..n_sites);
            if config[i] < 2 {
                config[i] += 1;
                placed += 1;
            }
        }
        for (o, c) in occ.iter_mut().zip(config) {
            *o += w / total * c as f64;
        }
    }
    DensityProfile::new(occ, n_particles).unwrap()
}

pub fn trace_norm_diff(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
    adiabat::metrics::trace_distance(a, b).unwrap().value
}
