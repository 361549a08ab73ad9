//! Distances between quantum states and between site-density profiles.

use faer::Mat;

use crate::error::{Error, Result};
use crate::linalg::{self, c64};
use crate::spectral::{DensityMatrix, DensityProfile};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MetricKind {
    Bures,
    Trace,
    Density,
}

impl MetricKind {
    pub const ALL: [MetricKind; 3] = [MetricKind::Bures, MetricKind::Trace, MetricKind::Density];

    /// Largest value the metric can take between normalised arguments.
    pub fn max(self) -> f64 {
        match self {
            MetricKind::Bures => std::f64::consts::SQRT_2,
            MetricKind::Trace => 1.0,
            MetricKind::Density => 2.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Bures => "bures",
            MetricKind::Trace => "trace",
            MetricKind::Density => "density",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricValue {
    pub value: f64,
    pub kind: MetricKind,
}

impl MetricValue {
    fn new(kind: MetricKind, value: f64) -> Result<Self> {
        let max = kind.max();
        if !(value >= 0.0 && value <= max * (1.0 + 1e-10)) {
            return Err(Error::numerical(format!(
                "{} distance {value} outside [0, {max}]",
                kind.name()
            )));
        }
        Ok(Self {
            value: value.min(max),
            kind,
        })
    }

    pub fn max(&self) -> f64 {
        self.kind.max()
    }
}

fn check_dims(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<()> {
    if rho.dim() != sigma.dim() {
        return Err(Error::domain(format!(
            "states have different dimensions ({} and {})",
            rho.dim(),
            sigma.dim()
        )));
    }
    Ok(())
}

/// `sqrt(W_rho)` factor `V diag(sqrt w)` of a state's mixture.
fn purification(rho: &DensityMatrix) -> Mat<c64> {
    let mix = rho.mixture();
    Mat::from_fn(mix.vectors.nrows(), mix.vectors.ncols(), |i, j| {
        mix.vectors[(i, j)] * mix.weights[j].sqrt()
    })
}

/// Nuclear norm of `W_rho^dagger W_sigma`, which equals
/// `Tr sqrt(sqrt(rho) sigma sqrt(rho))`.
fn root_fidelity(w_rho: &Mat<c64>, w_sigma: &Mat<c64>) -> Result<f64> {
    let block = w_rho.adjoint() * w_sigma;
    Ok(linalg::singular_values(block.as_ref())?.iter().sum())
}

fn root_fidelity_symmetric(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    check_dims(rho, sigma)?;
    let (a, b) = (purification(rho), purification(sigma));
    let mut root = root_fidelity(&a, &b)?;
    let swapped = root_fidelity(&b, &a)?;
    if (root - swapped).abs() > 1e-12 {
        root = 0.5 * (root + swapped);
    }
    if root > 1.0 + 1e-8 {
        return Err(Error::numerical(format!("fidelity root {root} exceeds 1")));
    }
    Ok(root.clamp(0.0, 1.0))
}

/// Uhlmann fidelity `(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2` in `[0, 1]`.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    Ok(root_fidelity_symmetric(rho, sigma)?.powi(2))
}

/// `D_B = sqrt(2 (1 - sqrt F))`.
///
/// Near `F = 1` the closed form loses all digits below ~1e-8, so there the
/// distance is evaluated as the residual of optimally aligned
/// purifications, which has no cancellation.
pub fn bures_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<MetricValue> {
    let root = root_fidelity_symmetric(rho, sigma)?;
    if 1.0 - root > 1e-6 {
        return MetricValue::new(MetricKind::Bures, (2.0 * (1.0 - root)).sqrt());
    }
    let (a, b) = (purification(rho), purification(sigma));
    let block = a.adjoint() * &b;
    let svd = block
        .thin_svd()
        .map_err(|e| Error::numerical(format!("SVD failed: {e:?}")))?;
    let (p, q) = (svd.U(), svd.V());
    // D_B^2 = |W_r P - W_s Q|^2 + |W_r (1 - P P^dagger)|^2 + |W_s (1 - Q Q^dagger)|^2
    let aligned = (&a * p - &b * q).norm_l2();
    let rest_a = (&a - &a * p * p.adjoint()).norm_l2();
    let rest_b = (&b - &b * q * q.adjoint()).norm_l2();
    let d = (aligned * aligned + rest_a * rest_a + rest_b * rest_b).sqrt();
    // Mixture weights below rounding leave singular directions the SVD cannot
    // resolve, each adding O(w) to D_B^2. 1 - sqrt F <= D_T bounds that.
    let bound = (2.0 * trace_distance(rho, sigma)?.value).sqrt();
    MetricValue::new(MetricKind::Bures, d.min(bound))
}

/// `D_T = 1/2 sum |lambda_k(rho - sigma)|`.
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<MetricValue> {
    check_dims(rho, sigma)?;
    let mut diff = rho.matrix() - sigma.matrix();
    linalg::hermitize(&mut diff);
    let ev = linalg::eigvalsh(diff.as_ref())?;
    let d = 0.5 * ev.iter().map(|l| l.abs()).sum::<f64>();
    MetricValue::new(MetricKind::Trace, d)
}

/// `D_n = (1 / N) sum_i |n1_i - n2_i|` with `N` the particle number.
pub fn density_distance(n1: &DensityProfile, n2: &DensityProfile) -> Result<MetricValue> {
    if n1.n_sites() != n2.n_sites() {
        return Err(Error::domain(format!(
            "profiles have {} and {} sites",
            n1.n_sites(),
            n2.n_sites()
        )));
    }
    if n1.n_particles != n2.n_particles {
        return Err(Error::domain(format!(
            "profiles have {} and {} particles",
            n1.n_particles, n2.n_particles
        )));
    }
    if n1.n_particles == 0 {
        return Err(Error::domain("density distance needs at least one particle"));
    }
    let sum: f64 = n1
        .occupations
        .iter()
        .zip(&n2.occupations)
        .map(|(a, b)| (a - b).abs())
        .sum();
    MetricValue::new(MetricKind::Density, sum / n1.n_particles as f64)
}

/// `U rho U^dagger` for a unitary `u`.
pub fn rotate(rho: &DensityMatrix, u: faer::MatRef<'_, c64>) -> Result<DensityMatrix> {
    let dim = rho.dim();
    if u.nrows() != dim || u.ncols() != dim {
        return Err(Error::domain(format!(
            "{}x{} rotation applied to a state of dimension {dim}",
            u.nrows(),
            u.ncols()
        )));
    }
    let mix = rho.mixture();
    let vectors = u * &mix.vectors;
    DensityMatrix::from_mixture(&mix.weights, vectors.as_ref())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: &[f64]) -> DensityMatrix {
        DensityMatrix::diagonal(v).unwrap()
    }

    #[test]
    fn commuting_examples() {
        let (a, b) = (p(&[1.0, 0.0]), p(&[0.5, 0.5]));
        assert!((fidelity(&a, &b).unwrap() - 0.5).abs() < 1e-12);
        let db = bures_distance(&a, &b).unwrap().value;
        assert!((db - (2.0 - 2f64.sqrt()).sqrt()).abs() < 1e-12);
        assert!((trace_distance(&a, &b).unwrap().value - 0.5).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_pure_states_are_maximal() {
        let (a, b) = (p(&[1.0, 0.0]), p(&[0.0, 1.0]));
        assert_eq!(fidelity(&a, &b).unwrap(), 0.0);
        assert!((bures_distance(&a, &b).unwrap().value - 2f64.sqrt()).abs() < 1e-10);
        assert!((trace_distance(&a, &b).unwrap().value - 1.0).abs() < 1e-10);
    }

    #[test]
    fn density_examples() {
        let prof = |v: Vec<f64>| DensityProfile::new(v, 2).unwrap();
        let d = |a, b| density_distance(&prof(a), &prof(b)).unwrap().value;
        assert_eq!(d(vec![1.0, 1.0], vec![1.0, 1.0]), 0.0);
        assert!((d(vec![2.0, 0.0], vec![0.0, 2.0]) - 2.0).abs() < 1e-10);
        assert!((d(vec![1.0, 1.0], vec![1.5, 0.5]) - 0.5).abs() < 1e-12);
        let three = DensityProfile::new(vec![1.0, 1.0, 1.0], 3).unwrap();
        assert!(density_distance(&prof(vec![1.0, 1.0]), &three).is_err());
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let (a, b) = (p(&[1.0, 0.0]), p(&[0.5, 0.25, 0.25]));
        assert!(matches!(fidelity(&a, &b), Err(Error::Domain(_))));
        assert!(trace_distance(&a, &b).is_err());
    }
}
