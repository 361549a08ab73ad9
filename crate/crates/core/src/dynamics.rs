//! Closed-system evolution under the ramped Hamiltonian.
//!
//! Each step applies `exp(-i H(t + h/2) h)`, the midpoint (second-order
//! Magnus) propagator. Steps are laid out per output interval: full steps
//! of `dt` followed by one shortened step that lands exactly on the next
//! output time.

use faer::{Mat, MatRef};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{self, c64};
use crate::model::{DriveProtocol, HubbardChain, HubbardParams};
use crate::spectral::{diagonalize, DensityMatrix, ThermalWeights};

/// Integrator identifier recorded in outputs.
pub const SCHEME: &str = "midpoint-exponential";

/// Output points used when none are requested.
pub const DEFAULT_OUTPUT_POINTS: usize = 500;

#[derive(Clone, Debug, PartialEq)]
pub struct PropagationConfig {
    pub dt: f64,
    /// Ascending, starting at 0 and ending at `tau`.
    pub output_times: Vec<f64>,
}

impl PropagationConfig {
    /// `min(tau, 10) / 1000`.
    pub fn default_dt(tau: f64) -> f64 {
        tau.min(10.0) / 1000.0
    }

    pub fn default_for(tau: f64) -> Result<Self> {
        Self::uniform(tau, Self::default_dt(tau), DEFAULT_OUTPUT_POINTS)
    }

    /// `points` equally spaced output times over `[0, tau]`.
    pub fn uniform(tau: f64, dt: f64, points: usize) -> Result<Self> {
        if points < 2 {
            return Err(Error::domain(format!(
                "need at least 2 output points, got {points}"
            )));
        }
        let last = (points - 1) as f64;
        let output_times = (0..points)
            .map(|k| if k + 1 == points { tau } else { tau * k as f64 / last })
            .collect();
        let config = Self { dt, output_times };
        config.validate(tau)?;
        Ok(config)
    }

    pub fn validate(&self, tau: f64) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= tau) {
            return Err(Error::domain(format!(
                "dt must lie in (0, tau = {tau}], got {}",
                self.dt
            )));
        }
        let times = &self.output_times;
        let slack = 1e-12 * tau;
        if times.is_empty() || times[0].abs() > slack || (times[times.len() - 1] - tau).abs() > slack {
            return Err(Error::domain("output times must start at 0 and end at tau"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::domain("output times must be strictly ascending"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryMetadata {
    pub n_sites: usize,
    pub interaction: f64,
    /// `None` when the initial state was not a thermal state.
    pub temperature: Option<f64>,
    pub tau: f64,
    pub dt: f64,
}

#[derive(Clone, Debug)]
pub struct StateTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    pub metadata: TrajectoryMetadata,
}

/// Step sequence `(start, length)` covering `[t0, t1]`, `t1 > t0`.
fn step_plan(t0: f64, t1: f64, dt: f64) -> Vec<(f64, f64)> {
    let span = t1 - t0;
    let full = ((span / dt) * (1.0 + 1e-12)).floor() as usize;
    let mut plan: Vec<(f64, f64)> = (0..full).map(|k| (t0 + k as f64 * dt, dt)).collect();
    let covered = full as f64 * dt;
    let rest = span - covered;
    if rest > 1e-12 * span.max(dt) {
        plan.push((t0 + covered, rest));
    } else if let Some(last) = plan.last_mut() {
        // absorb rounding so the plan ends exactly on t1
        last.1 = t1 - last.0;
    }
    plan
}

/// Applies the midpoint propagator of one chain and drive to row-major
/// blocks of state vectors.
pub struct Propagator<'a> {
    chain: &'a HubbardChain,
    drive: DriveProtocol,
}

impl<'a> Propagator<'a> {
    pub fn new(chain: &'a HubbardChain, drive: DriveProtocol) -> Self {
        Self { chain, drive }
    }

    /// One step of length `h` starting at `t`; a negative `h` undoes the
    /// forward step that ends at `t`.
    pub fn step(&self, t: f64, h: f64, block: &mut [c64], width: usize) -> Result<()> {
        let mid = t + 0.5 * h;
        self.chain
            .sparse_hamiltonian(&self.drive, mid)
            .expm_apply(h, block, width)
    }

    /// Evolves `block` from `t0` to `t1` (either direction). Backward
    /// evolution retraces the forward step plan in reverse, so it inverts
    /// a forward run exactly up to rounding.
    pub fn advance(&self, t0: f64, t1: f64, dt: f64, block: &mut [c64], width: usize) -> Result<()> {
        if t1 == t0 {
            return Ok(());
        }
        if t1 > t0 {
            for (s, h) in step_plan(t0, t1, dt) {
                self.step(s, h, block, width)?;
            }
        } else {
            for (s, h) in step_plan(t1, t0, dt).into_iter().rev() {
                self.step(s + h, -h, block, width)?;
            }
        }
        Ok(())
    }

    /// `advance` over independent column chunks in parallel.
    pub fn advance_chunks(
        &self,
        t0: f64,
        t1: f64,
        dt: f64,
        chunks: &mut [(Vec<c64>, usize)],
    ) -> Result<()> {
        chunks
            .par_iter_mut()
            .map(|(block, width)| self.advance(t0, t1, dt, block, *width))
            .collect::<Result<Vec<()>>>()
            .map(|_| ())
    }
}

fn metadata(params: &HubbardParams, drive: &DriveProtocol, config: &PropagationConfig, temperature: Option<f64>) -> TrajectoryMetadata {
    TrajectoryMetadata {
        n_sites: params.n_sites,
        interaction: params.interaction,
        temperature,
        tau: drive.tau,
        dt: config.dt,
    }
}

/// Evolves the full density matrix, `rho -> U rho U^dagger`, and reports it
/// at every output time.
pub fn propagate(
    rho0: &DensityMatrix,
    params: &HubbardParams,
    drive: &DriveProtocol,
    config: &PropagationConfig,
) -> Result<StateTrajectory> {
    config.validate(drive.tau)?;
    let chain = HubbardChain::new(params.clone())?;
    let n = chain.dim();
    if rho0.dim() != n {
        return Err(Error::domain(format!(
            "initial state has dimension {}, sector has {n}",
            rho0.dim()
        )));
    }
    let prop = Propagator::new(&chain, *drive);
    let mut rho = rho0.matrix().to_owned();
    let mut states = Vec::with_capacity(config.output_times.len());
    states.push(rho0.clone());
    for w in config.output_times.windows(2) {
        // U rho, then U (U rho)^dagger = U rho U^dagger
        let mut block = linalg::to_row_major(rho.as_ref());
        prop.advance(w[0], w[1], config.dt, &mut block, n)?;
        let half = linalg::from_row_major(&block, n, n);
        let mut block = linalg::to_row_major(half.adjoint().to_owned().as_ref());
        prop.advance(w[0], w[1], config.dt, &mut block, n)?;
        rho = linalg::from_row_major(&block, n, n);
        linalg::hermitize(&mut rho);
        states.push(DensityMatrix::new(rho.clone())?);
    }
    Ok(StateTrajectory {
        times: config.output_times.clone(),
        states,
        metadata: metadata(params, drive, config, None),
    })
}

/// Evolves every populated `t = 0` eigenvector and reassembles
/// `rho(t) = sum_j p_j |phi_j(t)><phi_j(t)|` at each output time, handing
/// each state to `visit` instead of storing it.
pub fn evolve_eigenbasis_with<F>(
    weights: &ThermalWeights,
    chain: &HubbardChain,
    drive: &DriveProtocol,
    config: &PropagationConfig,
    mut visit: F,
) -> Result<()>
where
    F: FnMut(f64, &DensityMatrix) -> Result<()>,
{
    config.validate(drive.tau)?;
    let n = chain.dim();
    if weights.weights.len() != n {
        return Err(Error::domain(format!(
            "{} thermal weights for a sector of dimension {n}",
            weights.weights.len()
        )));
    }
    let snapshot = diagonalize(&chain.hamiltonian(drive, 0.0), 0.0)?;
    let populated: Vec<usize> = (0..n).filter(|&j| weights.weights[j] > 0.0).collect();
    let p: Vec<f64> = populated.iter().map(|&j| weights.weights[j]).collect();

    let threads = rayon::current_num_threads().max(1);
    let per_chunk = populated.len().div_ceil(threads).max(1);
    let mut chunks: Vec<(Vec<c64>, usize)> = populated
        .chunks(per_chunk)
        .map(|cols| {
            let m = Mat::from_fn(n, cols.len(), |i, k| snapshot.eigenvectors[(i, cols[k])]);
            (linalg::to_row_major(m.as_ref()), cols.len())
        })
        .collect();

    let prop = Propagator::new(chain, *drive);
    let times = &config.output_times;
    for (k, &t) in times.iter().enumerate() {
        if k > 0 {
            prop.advance_chunks(times[k - 1], t, config.dt, &mut chunks)?;
        }
        let vectors = assemble(&chunks, n, populated.len());
        visit(t, &DensityMatrix::from_mixture(&p, vectors.as_ref())?)?;
    }
    Ok(())
}

fn assemble(chunks: &[(Vec<c64>, usize)], n: usize, total: usize) -> Mat<c64> {
    let mut out = Mat::<c64>::zeros(n, total);
    let mut offset = 0;
    for (block, width) in chunks {
        for i in 0..n {
            for j in 0..*width {
                out[(i, offset + j)] = block[i * width + j];
            }
        }
        offset += width;
    }
    out
}

/// Collecting form of [`evolve_eigenbasis_with`]. Stores one dense state
/// per output time, so prefer the visitor for large sectors.
pub fn evolve_eigenbasis(
    weights: &ThermalWeights,
    params: &HubbardParams,
    drive: &DriveProtocol,
    config: &PropagationConfig,
) -> Result<StateTrajectory> {
    let chain = HubbardChain::new(params.clone())?;
    let mut states = Vec::with_capacity(config.output_times.len());
    evolve_eigenbasis_with(weights, &chain, drive, config, |_, rho| {
        states.push(rho.clone());
        Ok(())
    })?;
    Ok(StateTrajectory {
        times: config.output_times.clone(),
        states,
        metadata: metadata(params, drive, config, Some(weights.temperature)),
    })
}

/// Evolves a block of column vectors forward over `[0, tau]` and back again,
/// returning the recovered block. Used to check time-reversal consistency.
pub fn round_trip(
    chain: &HubbardChain,
    drive: &DriveProtocol,
    dt: f64,
    vectors: MatRef<'_, c64>,
) -> Result<Mat<c64>> {
    let width = vectors.ncols();
    let mut block = linalg::to_row_major(vectors);
    let prop = Propagator::new(chain, *drive);
    prop.advance(0.0, drive.tau, dt, &mut block, width)?;
    prop.advance(drive.tau, 0.0, dt, &mut block, width)?;
    Ok(linalg::from_row_major(&block, vectors.nrows(), width))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::thermal_state;

    #[test]
    fn step_plan_lands_on_endpoints() {
        let plan = step_plan(0.0, 1.0, 0.3);
        assert_eq!(plan.len(), 4);
        let (s, h) = plan[3];
        assert!((s + h - 1.0).abs() < 1e-15);
        assert!((h - 0.1).abs() < 1e-12);
        let exact = step_plan(0.0, 1.0, 0.25);
        assert_eq!(exact.len(), 4);
        assert_eq!(exact[3].0 + exact[3].1, 1.0);
    }

    #[test]
    fn config_validation() {
        assert!(PropagationConfig::uniform(1.0, 0.0, 10).is_err());
        assert!(PropagationConfig::uniform(1.0, 2.0, 10).is_err());
        assert!(PropagationConfig::uniform(1.0, 0.01, 1).is_err());
        let c = PropagationConfig::default_for(50.0).unwrap();
        assert_eq!(c.output_times.len(), 500);
        assert_eq!(c.dt, 0.01);
        assert_eq!(*c.output_times.last().unwrap(), 50.0);
    }

    #[test]
    fn stationary_dynamics_keeps_eigenpopulations() {
        let params = HubbardParams::half_filled(2, 5.0).unwrap();
        let drive = DriveProtocol::with_amplitudes(0.5, 0.0, 2.0, Default::default()).unwrap();
        let chain = HubbardChain::new(params.clone()).unwrap();
        let snap = diagonalize(&chain.hamiltonian(&drive, 0.0), 0.0).unwrap();
        let psi: Vec<c64> = (0..4)
            .map(|i| (snap.eigenvectors[(i, 0)] + snap.eigenvectors[(i, 2)]) * 0.5f64.sqrt())
            .collect();
        let rho0 = DensityMatrix::pure(&psi).unwrap();
        let config = PropagationConfig::uniform(2.0, 0.01, 5).unwrap();
        let traj = propagate(&rho0, &params, &drive, &config).unwrap();
        for rho in &traj.states {
            for k in 0..4 {
                let v = snap.eigenvectors.col(k);
                let pop = (v.adjoint() * rho.matrix() * v).re;
                let expected = if k == 0 || k == 2 { 0.5 } else { 0.0 };
                assert!((pop - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_weight_matches_pure_propagation() {
        let params = HubbardParams::half_filled(2, 5.0).unwrap();
        let drive = DriveProtocol::new(0.5).unwrap();
        let chain = HubbardChain::new(params.clone()).unwrap();
        let snap = diagonalize(&chain.hamiltonian(&drive, 0.0), 0.0).unwrap();
        let weights = ThermalWeights::from_snapshot(&snap, 0.0).unwrap();
        let config = PropagationConfig::uniform(0.5, 0.0005, 11).unwrap();
        let a = evolve_eigenbasis(&weights, &params, &drive, &config).unwrap();
        let rho0 = thermal_state(&snap, 0.0).unwrap();
        let b = propagate(&rho0, &params, &drive, &config).unwrap();
        for (x, y) in a.states.iter().zip(&b.states) {
            assert!((x.matrix() - y.matrix()).norm_max() < 1e-12);
        }
    }
}
