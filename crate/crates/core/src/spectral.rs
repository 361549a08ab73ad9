//! Instantaneous spectra, thermal states and the frozen-population
//! adiabatic reference.

use std::ops::Range;

use faer::{Mat, MatRef};

use crate::error::{Error, Result};
use crate::linalg::{self, c64, HermitianOperator};

/// Eigenvalues below this are treated as numerical noise around zero.
pub const PSD_TOL: f64 = 1e-10;

/// Default trace tolerance for density matrices.
pub const TRACE_TOL: f64 = 1e-12;

/// Eigen-decomposition of `H(t)`, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct SpectrumSnapshot {
    pub t: f64,
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Mat<c64>,
}

impl SpectrumSnapshot {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn ground_energy(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// Groups of degenerate levels at [`default_degeneracy_tol`].
    pub fn groups(&self) -> Vec<Range<usize>> {
        degenerate_groups(&self.eigenvalues, default_degeneracy_tol(&self.eigenvalues))
    }
}

pub fn diagonalize(h: &HermitianOperator, t: f64) -> Result<SpectrumSnapshot> {
    let m = h.matrix();
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let z = m[(i, j)];
            if !(z.re.is_finite() && z.im.is_finite()) {
                return Err(Error::numerical("Hamiltonian has non-finite entries"));
            }
        }
    }
    let (eigenvalues, eigenvectors) = linalg::eigh(m)?;
    if eigenvalues.iter().any(|e| !e.is_finite()) {
        return Err(Error::numerical("eigensolver returned non-finite eigenvalues"));
    }
    Ok(SpectrumSnapshot {
        t,
        eigenvalues,
        eigenvectors,
    })
}

/// `1e-8 * max(1, max |E|)`.
pub fn default_degeneracy_tol(eigenvalues: &[f64]) -> f64 {
    let emax = eigenvalues.iter().fold(0.0f64, |a, e| a.max(e.abs()));
    1e-8 * emax.max(1.0)
}

/// Splits an ascending spectrum into contiguous groups whose consecutive
/// gaps are at most `tol`. Chaining is transitive, so a group can be wider
/// than `tol`. Gaps equal to `tol` up to rounding of the differences
/// (relative 1e-9) still join.
pub fn degenerate_groups(eigenvalues: &[f64], tol: f64) -> Vec<Range<usize>> {
    let mut groups = Vec::new();
    if eigenvalues.is_empty() {
        return groups;
    }
    let mut start = 0;
    for k in 1..eigenvalues.len() {
        if eigenvalues[k] - eigenvalues[k - 1] > tol * (1.0 + 1e-9) {
            groups.push(start..k);
            start = k;
        }
    }
    groups.push(start..eigenvalues.len());
    groups
}

/// Boltzmann populations of the `t = 0` levels.
#[derive(Clone, Debug, PartialEq)]
pub struct ThermalWeights {
    pub temperature: f64,
    pub weights: Vec<f64>,
}

impl ThermalWeights {
    /// Weights `exp(-(E_j - E_0) / kT) / Z`; at `kT = 0`, equal weights
    /// over the degenerate ground group.
    pub fn new(eigenvalues: &[f64], temperature: f64) -> Result<Self> {
        if !(temperature >= 0.0) || temperature.is_infinite() {
            return Err(Error::domain(format!(
                "temperature must be finite and non-negative, got {temperature}"
            )));
        }
        if eigenvalues.is_empty() {
            return Err(Error::domain("empty spectrum"));
        }
        let e0 = eigenvalues[0];
        let mut weights: Vec<f64> = if temperature == 0.0 {
            let ground = degenerate_groups(eigenvalues, default_degeneracy_tol(eigenvalues))
                .remove(0);
            (0..eigenvalues.len())
                .map(|j| if ground.contains(&j) { 1.0 } else { 0.0 })
                .collect()
        } else {
            eigenvalues
                .iter()
                .map(|e| (-(e - e0) / temperature).exp())
                .collect()
        };
        let z: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= z;
        }
        Ok(Self {
            temperature,
            weights,
        })
    }

    pub fn from_snapshot(snapshot: &SpectrumSnapshot, temperature: f64) -> Result<Self> {
        Self::new(&snapshot.eigenvalues, temperature)
    }

    /// Number of levels with non-zero weight.
    pub fn populated(&self) -> usize {
        self.weights.iter().filter(|&&w| w > 0.0).count()
    }
}

/// Eigen-decomposed form of a density matrix: `sum_k w_k |v_k><v_k|` with
/// strictly positive weights and orthonormal columns.
#[derive(Clone, Debug)]
pub struct Mixture {
    pub weights: Vec<f64>,
    pub vectors: Mat<c64>,
}

/// Hermitian, positive semidefinite, unit-trace operator.
///
/// Every constructor stores the spectral decomposition alongside the dense
/// matrix, since fidelities and distances need it anyway.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    matrix: Mat<c64>,
    mixture: Mixture,
}

impl DensityMatrix {
    /// Validates a dense matrix (Hermitian to 1e-12, eigenvalues above
    /// `-1e-10`, unit trace to 1e-12).
    pub fn new(matrix: Mat<c64>) -> Result<Self> {
        Self::with_trace_tol(matrix, TRACE_TOL)
    }

    fn with_trace_tol(matrix: Mat<c64>, trace_tol: f64) -> Result<Self> {
        let op = HermitianOperator::new(matrix)?;
        let trace: f64 = op.diagonal_values().iter().sum();
        if (trace - 1.0).abs() > trace_tol {
            return Err(Error::domain(format!(
                "density matrix trace is {trace}, expected 1"
            )));
        }
        let (values, vectors) = linalg::eigh(op.matrix())?;
        if let Some(&min) = values.first() {
            if min < -PSD_TOL {
                return Err(Error::domain(format!(
                    "density matrix has negative eigenvalue {min:e}"
                )));
            }
        }
        let mixture = prune(&values, vectors.as_ref());
        Ok(Self {
            matrix: op.into_matrix(),
            mixture,
        })
    }

    /// `sum_k w_k |v_k><v_k|`. Weights must be non-negative and sum to one;
    /// columns must be orthonormal to 1e-8.
    pub fn from_mixture(weights: &[f64], vectors: MatRef<'_, c64>) -> Result<Self> {
        if weights.len() != vectors.ncols() {
            return Err(Error::domain(format!(
                "{} weights for {} vectors",
                weights.len(),
                vectors.ncols()
            )));
        }
        if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(Error::domain("mixture weights must be finite and non-negative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::domain(format!("mixture weights sum to {total}, expected 1")));
        }
        let mixture = prune(weights, vectors);
        let gram = mixture.vectors.adjoint() * &mixture.vectors;
        let k = gram.nrows();
        let dev = (&gram - Mat::<c64>::identity(k, k)).norm_l2();
        if dev > 1e-8 {
            return Err(Error::domain(format!(
                "mixture vectors are not orthonormal (deviation {dev:e})"
            )));
        }
        let matrix = linalg::weighted_projector_sum(&mixture.weights, mixture.vectors.as_ref());
        Ok(Self { matrix, mixture })
    }

    /// `|psi><psi|` for a normalised vector.
    pub fn pure(psi: &[c64]) -> Result<Self> {
        let v = Mat::from_fn(psi.len(), 1, |i, _| psi[i]);
        Self::from_mixture(&[1.0], v.as_ref())
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self::diagonal(&vec![1.0 / dim as f64; dim]).expect("uniform weights are valid")
    }

    /// Diagonal state with populations `p` in the sector basis.
    pub fn diagonal(p: &[f64]) -> Result<Self> {
        let n = p.len();
        Self::from_mixture(p, Mat::<c64>::identity(n, n).as_ref())
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> MatRef<'_, c64> {
        self.matrix.as_ref()
    }

    pub fn mixture(&self) -> &Mixture {
        &self.mixture
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.matrix[(i, i)].re).sum()
    }

    /// `Tr rho^2`.
    pub fn purity(&self) -> f64 {
        self.mixture.weights.iter().map(|w| w * w).sum()
    }

    /// All eigenvalues, ascending, including the zeros dropped from the
    /// mixture.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev = vec![0.0; self.dim() - self.mixture.weights.len()];
        ev.extend_from_slice(&self.mixture.weights);
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    /// Populations `<k|rho|k>` in the sector basis.
    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.matrix[(i, i)].re).collect()
    }
}

/// Keeps columns with positive weight; clamps tiny negative values away.
fn prune(weights: &[f64], vectors: MatRef<'_, c64>) -> Mixture {
    let keep: Vec<usize> = (0..weights.len()).filter(|&k| weights[k] > 0.0).collect();
    Mixture {
        weights: keep.iter().map(|&k| weights[k]).collect(),
        vectors: Mat::from_fn(vectors.nrows(), keep.len(), |i, j| vectors[(i, keep[j])]),
    }
}

/// Gibbs state of the snapshot's Hamiltonian.
pub fn thermal_state(snapshot: &SpectrumSnapshot, temperature: f64) -> Result<DensityMatrix> {
    let weights = ThermalWeights::from_snapshot(snapshot, temperature)?;
    adiabatic_reference(snapshot, &weights)
}

/// `rho_Th(t) = sum_j p_j |psi_j(t)><psi_j(t)|` with the frozen `t = 0`
/// populations carried on the instantaneous eigenvectors.
pub fn adiabatic_reference(
    snapshot: &SpectrumSnapshot,
    weights: &ThermalWeights,
) -> Result<DensityMatrix> {
    if weights.weights.len() != snapshot.dim() {
        return Err(Error::domain(format!(
            "{} thermal weights for a spectrum of dimension {}",
            weights.weights.len(),
            snapshot.dim()
        )));
    }
    DensityMatrix::from_mixture(&weights.weights, snapshot.eigenvectors.as_ref())
}

/// Site occupations `n_i = Tr(rho n_i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityProfile {
    pub occupations: Vec<f64>,
    pub n_particles: usize,
}

impl DensityProfile {
    /// Validates `0 <= n_i <= 2` and `sum n_i = n_particles` to 1e-10.
    pub fn new(occupations: Vec<f64>, n_particles: usize) -> Result<Self> {
        if occupations
            .iter()
            .any(|&n| !(n >= -1e-10 && n <= 2.0 + 1e-10))
        {
            return Err(Error::domain("site occupations must lie in [0, 2]"));
        }
        let total: f64 = occupations.iter().sum();
        if (total - n_particles as f64).abs() > 1e-10 {
            return Err(Error::domain(format!(
                "occupations sum to {total}, expected {n_particles}"
            )));
        }
        Ok(Self {
            occupations,
            n_particles,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.occupations.len()
    }
}

pub fn site_density(
    rho: &DensityMatrix,
    occupation_ops: &[HermitianOperator],
) -> Result<DensityProfile> {
    let dim = rho.dim();
    let m = rho.matrix();
    let mut occupations = Vec::with_capacity(occupation_ops.len());
    for op in occupation_ops {
        if op.dim() != dim {
            return Err(Error::domain(format!(
                "occupation operator has dimension {}, state has {dim}",
                op.dim()
            )));
        }
        let n = if op.is_diagonal() {
            (0..dim).map(|k| op.matrix()[(k, k)].re * m[(k, k)].re).sum()
        } else {
            let prod = m * op.matrix();
            (0..dim).map(|k| prod[(k, k)].re).sum()
        };
        occupations.push(n);
    }
    let total: f64 = occupations.iter().sum();
    let n_particles = total.round();
    if (total - n_particles).abs() > 1e-8 || n_particles < 0.0 {
        return Err(Error::domain(format!(
            "occupation operators do not sum to a fixed particle number (total {total})"
        )));
    }
    Ok(DensityProfile {
        occupations,
        n_particles: n_particles as usize,
    })
}
