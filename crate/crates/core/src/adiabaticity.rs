//! Adiabatic criterion, adiabatic-line fit, thresholds and verdicts.

use faer::Mat;

use crate::error::{Error, Result};
use crate::linalg::{self, c64, HermitianOperator};
use crate::dynamics::{evolve_eigenbasis_with, PropagationConfig};
use crate::metrics::{bures_distance, density_distance, trace_distance, MetricKind};
use crate::model::{DriveProtocol, HubbardChain};
use crate::spectral::{
    adiabatic_reference, default_degeneracy_tol, degenerate_groups, diagonalize, site_density,
    DensityMatrix, DensityProfile, SpectrumSnapshot, ThermalWeights,
};

/// Multiplier applied to every threshold for the lenient verdict.
pub const VERDICT_SLACK: f64 = 1.1;

/// Largest reference-state Bures distance admitted into the gradient fit,
/// as a fraction of the Bures maximum.
pub const FIT_CAP_FRACTION: f64 = 2.0 / 3.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TqacConfig {
    /// Levels within `s * kT` of the ground energy act as initial states.
    pub s: f64,
    /// Optional cap `s' * kT` on the final states; `None` admits all.
    pub s_prime: Option<f64>,
    pub temperature: f64,
    /// `None` selects [`default_degeneracy_tol`] per snapshot.
    pub degeneracy_tol: Option<f64>,
}

impl TqacConfig {
    pub fn new(temperature: f64) -> Result<Self> {
        let c = Self {
            s: 1.0,
            s_prime: None,
            temperature,
            degeneracy_tol: None,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s >= 1.0) || !self.s.is_finite() {
            return Err(Error::domain(format!("s must be at least 1, got {}", self.s)));
        }
        if let Some(sp) = self.s_prime {
            if !(sp > self.s) || !sp.is_finite() {
                return Err(Error::domain(format!(
                    "s' must exceed s = {}, got {sp}",
                    self.s
                )));
            }
        }
        if !(self.temperature >= 0.0) || !self.temperature.is_finite() {
            return Err(Error::domain(format!(
                "temperature must be finite and non-negative, got {}",
                self.temperature
            )));
        }
        if let Some(tol) = self.degeneracy_tol {
            if !(tol > 0.0) {
                return Err(Error::domain("degeneracy tolerance must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpsilonValue {
    pub value: f64,
    /// No admissible `(n, m)` pair existed; `value` is then 0.
    pub no_pairs: bool,
}

/// `max |P_m Hdot P_n|_2 / (E_m - E_n)^2` over admissible group pairs.
///
/// At zero temperature the only initial group is the ground group.
pub fn tqac_epsilon(
    snapshot: &SpectrumSnapshot,
    hdot: &HermitianOperator,
    config: &TqacConfig,
) -> Result<EpsilonValue> {
    config.validate()?;
    let dim = snapshot.dim();
    if hdot.dim() != dim {
        return Err(Error::domain(format!(
            "Hdot has dimension {}, spectrum has {dim}",
            hdot.dim()
        )));
    }
    let e = &snapshot.eigenvalues;
    let tol = config
        .degeneracy_tol
        .unwrap_or_else(|| default_degeneracy_tol(e));
    let groups = degenerate_groups(e, tol);
    if groups.len() < 2 {
        return Err(Error::domain(
            "criterion undefined: all levels form one degenerate group",
        ));
    }
    let e0 = e[0];
    let kt = config.temperature;
    let initial: Vec<usize> = (0..groups.len())
        .filter(|&g| {
            if kt == 0.0 {
                g == 0
            } else {
                e[groups[g].start] - e0 <= config.s * kt
            }
        })
        .collect();
    let admitted = |g: usize| match config.s_prime {
        Some(sp) if kt > 0.0 => e[groups[g].start] - e0 <= sp * kt,
        _ => true,
    };
    let mean = |g: usize| {
        let r = &groups[g];
        e[r.clone()].iter().sum::<f64>() / r.len() as f64
    };

    // Columns of Hdot V restricted to the initial groups, projected on all levels.
    let v = &snapshot.eigenvectors;
    let cols: Vec<usize> = initial.iter().flat_map(|&g| groups[g].clone()).collect();
    let hv = if hdot.is_diagonal() {
        let d = hdot.diagonal_values();
        Mat::from_fn(dim, cols.len(), |i, k| v[(i, cols[k])] * d[i])
    } else {
        let vn = Mat::from_fn(dim, cols.len(), |i, k| v[(i, cols[k])]);
        hdot.matrix() * &vn
    };
    let g = v.adjoint() * &hv;

    let mut best = 0.0f64;
    let mut any = false;
    let mut offset = 0;
    for &n in &initial {
        let rn = groups[n].clone();
        let en = mean(n);
        for m in (0..groups.len()).filter(|&m| m != n && admitted(m)) {
            any = true;
            let rm = groups[m].clone();
            let norm = if rm.len() == 1 && rn.len() == 1 {
                g[(rm.start, offset)].norm()
            } else {
                let block = Mat::<c64>::from_fn(rm.len(), rn.len(), |i, j| {
                    g[(rm.start + i, offset + j)]
                });
                linalg::singular_values(block.as_ref())?[0]
            };
            let gap = mean(m) - en;
            best = best.max(norm / (gap * gap));
        }
        offset += rn.len();
    }
    Ok(EpsilonValue {
        value: best,
        no_pairs: !any,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Thresholds {
    pub gradient: f64,
    pub delta_rho: f64,
    pub delta_trace: f64,
    pub delta_n: f64,
}

impl Thresholds {
    /// `Delta_rho = sqrt(2) / 10`, `Delta_T = 1 / 10`, `Delta_n = m Delta_rho`.
    pub fn from_gradient(m: f64) -> Result<Self> {
        if !(m > 0.0) || !m.is_finite() {
            return Err(Error::domain(format!("gradient must be positive, got {m}")));
        }
        let delta_rho = MetricKind::Bures.max() / 10.0;
        Ok(Self {
            gradient: m,
            delta_rho,
            delta_trace: MetricKind::Trace.max() / 10.0,
            delta_n: m * delta_rho,
        })
    }

    pub fn for_metric(&self, kind: MetricKind) -> f64 {
        match kind {
            MetricKind::Bures => self.delta_rho,
            MetricKind::Trace => self.delta_trace,
            MetricKind::Density => self.delta_n,
        }
    }
}

/// How reference-state samples are chosen for the gradient fit.
#[derive(Clone, Debug, PartialEq)]
pub enum FitSampling {
    /// Two or three sample times, as fractions of `tau`. A sample whose
    /// Bures distance reaches the cap is an error.
    Times(Vec<f64>),
    /// `points` equally spaced fractions `k / points`, `k = 1..=points`,
    /// with no cap. This traces the whole adiabatic line.
    Dense { points: usize },
}

impl Default for FitSampling {
    fn default() -> Self {
        FitSampling::Dense { points: 100 }
    }
}

impl FitSampling {
    pub fn fractions(&self) -> Result<Vec<f64>> {
        match self {
            FitSampling::Times(ts) => {
                if !(2..=3).contains(&ts.len()) {
                    return Err(Error::domain(format!(
                        "gradient fit takes 2 or 3 sample times, got {}",
                        ts.len()
                    )));
                }
                if ts.iter().any(|&f| !(f > 0.0 && f <= 1.0)) {
                    return Err(Error::domain(
                        "sample times must be fractions of tau in (0, 1]",
                    ));
                }
                Ok(ts.clone())
            }
            FitSampling::Dense { points } => {
                if *points < 2 {
                    return Err(Error::domain("dense fit needs at least 2 points"));
                }
                Ok((1..=*points).map(|k| k as f64 / *points as f64).collect())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdiabaticLineFit {
    pub gradient: f64,
    /// `(t / tau, D_B, D_n)` for each sample.
    pub samples: Vec<(f64, f64, f64)>,
    /// Root-mean-square residual of `D_n - m D_B`.
    pub fit_residual: f64,
}

impl AdiabaticLineFit {
    /// Least squares through the origin over `(x, y)` points.
    pub fn through_origin(samples: Vec<(f64, f64, f64)>) -> Result<Self> {
        let sxx: f64 = samples.iter().map(|s| s.1 * s.1).sum();
        let sxy: f64 = samples.iter().map(|s| s.1 * s.2).sum();
        if !(sxx > 0.0) {
            return Err(Error::domain(
                "all sampled reference states coincide with the initial one; pick later times",
            ));
        }
        let gradient = sxy / sxx;
        if !(gradient > 0.0) {
            return Err(Error::numerical(format!(
                "fitted gradient {gradient} is not positive"
            )));
        }
        let fit_residual = (samples
            .iter()
            .map(|s| (s.2 - gradient * s.1).powi(2))
            .sum::<f64>()
            / samples.len() as f64)
            .sqrt();
        Ok(Self {
            gradient,
            samples,
            fit_residual,
        })
    }

    pub fn thresholds(&self) -> Result<Thresholds> {
        Thresholds::from_gradient(self.gradient)
    }
}

/// Reference-state data shared by the fit and the diagnostics.
pub struct ReferenceFamily<'a> {
    chain: &'a HubbardChain,
    drive: DriveProtocol,
    pub weights: ThermalWeights,
    pub rho0: DensityMatrix,
    pub n0: DensityProfile,
    occupations: Vec<HermitianOperator>,
}

impl<'a> ReferenceFamily<'a> {
    pub fn new(chain: &'a HubbardChain, drive: &DriveProtocol, temperature: f64) -> Result<Self> {
        let snap0 = diagonalize(&chain.hamiltonian(drive, 0.0), 0.0)?;
        let weights = ThermalWeights::from_snapshot(&snap0, temperature)?;
        let rho0 = adiabatic_reference(&snap0, &weights)?;
        let occupations = chain.occupation_operators();
        let n0 = site_density(&rho0, &occupations)?;
        Ok(Self {
            chain,
            drive: *drive,
            weights,
            rho0,
            n0,
            occupations,
        })
    }

    pub fn chain(&self) -> &HubbardChain {
        self.chain
    }

    pub fn drive(&self) -> &DriveProtocol {
        &self.drive
    }

    pub fn occupations(&self) -> &[HermitianOperator] {
        &self.occupations
    }

    pub fn snapshot(&self, t: f64) -> Result<SpectrumSnapshot> {
        diagonalize(&self.chain.hamiltonian(&self.drive, t), t)
    }

    pub fn reference(&self, snapshot: &SpectrumSnapshot) -> Result<DensityMatrix> {
        adiabatic_reference(snapshot, &self.weights)
    }

    /// `(D_B, D_n)` between the initial and the time-`t` reference states.
    pub fn line_point(&self, t: f64) -> Result<(f64, f64)> {
        let rho = self.reference(&self.snapshot(t)?)?;
        let n = site_density(&rho, &self.occupations)?;
        Ok((
            bures_distance(&self.rho0, &rho)?.value,
            density_distance(&self.n0, &n)?.value,
        ))
    }
}

/// Gradient of the adiabatic line `D_n = m D_B` traced by the reference
/// states (ground state at `kT = 0`, frozen thermal populations otherwise).
pub fn fit_adiabatic_line(
    chain: &HubbardChain,
    drive: &DriveProtocol,
    temperature: f64,
    sampling: &FitSampling,
) -> Result<AdiabaticLineFit> {
    let fractions = sampling.fractions()?;
    let family = ReferenceFamily::new(chain, drive, temperature)?;
    let cap = FIT_CAP_FRACTION * MetricKind::Bures.max();
    let mut samples = Vec::with_capacity(fractions.len());
    for f in fractions {
        let (x, y) = family.line_point(f * drive.tau)?;
        if matches!(sampling, FitSampling::Times(_)) && x >= cap {
            return Err(Error::domain(format!(
                "reference Bures distance {x:.4} at t/tau = {f} exceeds the fit cap {cap:.4}; \
                 choose earlier sample times"
            )));
        }
        samples.push((f, x, y));
    }
    AdiabaticLineFit::through_origin(samples)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ThresholdFlags {
    pub bures_above: bool,
    pub trace_above: bool,
    pub density_above: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiagnosticPoint {
    pub t_over_tau: f64,
    pub epsilon: f64,
    pub epsilon_no_pairs: bool,
    pub d_bures: f64,
    pub d_trace: f64,
    pub d_density: f64,
    pub flags: ThresholdFlags,
}

impl DiagnosticPoint {
    pub fn distance(&self, kind: MetricKind) -> f64 {
        match kind {
            MetricKind::Bures => self.d_bures,
            MetricKind::Trace => self.d_trace,
            MetricKind::Density => self.d_density,
        }
    }
}

/// Per-output-time diagnostics with threshold flags.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticSeries {
    pub thresholds: Thresholds,
    pub points: Vec<DiagnosticPoint>,
}

impl DiagnosticSeries {
    pub fn new(thresholds: Thresholds) -> Self {
        Self {
            thresholds,
            points: Vec::new(),
        }
    }

    /// Appends a record; flags are derived from the stored thresholds.
    pub fn push(&mut self, t_over_tau: f64, epsilon: EpsilonValue, d_bures: f64, d_trace: f64, d_density: f64) {
        let th = &self.thresholds;
        self.points.push(DiagnosticPoint {
            t_over_tau,
            epsilon: epsilon.value,
            epsilon_no_pairs: epsilon.no_pairs,
            d_bures,
            d_trace,
            d_density,
            flags: ThresholdFlags {
                bures_above: d_bures > th.delta_rho,
                trace_above: d_trace > th.delta_trace,
                density_above: d_density > th.delta_n,
            },
        });
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.t_over_tau).collect()
    }

    pub fn values(&self, kind: MetricKind) -> Vec<f64> {
        self.points.iter().map(|p| p.distance(kind)).collect()
    }

    pub fn epsilons(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.epsilon).collect()
    }
}

/// Evolves the reference initial state and records `epsilon`, the three
/// distances to the adiabatic reference, and threshold flags at every
/// output time.
pub fn diagnose(
    family: &ReferenceFamily<'_>,
    tqac: &TqacConfig,
    config: &PropagationConfig,
    thresholds: Thresholds,
) -> Result<DiagnosticSeries> {
    let hdot = family.chain.time_derivative(&family.drive);
    let tau = family.drive.tau;
    let mut series = DiagnosticSeries::new(thresholds);
    evolve_eigenbasis_with(&family.weights, family.chain, &family.drive, config, |t, rho| {
        let snap = family.snapshot(t)?;
        let reference = family.reference(&snap)?;
        let eps = tqac_epsilon(&snap, &hdot, tqac)?;
        let db = bures_distance(&reference, rho)?.value;
        let dt = trace_distance(&reference, rho)?.value;
        let n_ref = site_density(&reference, &family.occupations)?;
        let n = site_density(rho, &family.occupations)?;
        let dn = density_distance(&n_ref, &n)?.value;
        series.push(t / tau, eps, db, dt, dn);
        Ok(())
    })?;
    Ok(series)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricVerdict {
    pub kind: MetricKind,
    pub threshold: f64,
    /// Distance never exceeds the threshold.
    pub adiabatic: bool,
    /// Distance never exceeds `VERDICT_SLACK` times the threshold.
    pub adiabatic_with_slack: bool,
    /// First `t / tau` with the distance above the threshold.
    pub first_violation: Option<f64>,
    pub max_distance: f64,
    pub max_at: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Classification {
    pub verdicts: [MetricVerdict; 3],
}

impl Classification {
    pub fn verdict(&self, kind: MetricKind) -> &MetricVerdict {
        self.verdicts.iter().find(|v| v.kind == kind).expect("one verdict per metric")
    }
}

pub fn classify(series: &DiagnosticSeries, thresholds: &Thresholds) -> Classification {
    let verdict = |kind: MetricKind| {
        let threshold = thresholds.for_metric(kind);
        let mut v = MetricVerdict {
            kind,
            threshold,
            adiabatic: true,
            adiabatic_with_slack: true,
            first_violation: None,
            max_distance: 0.0,
            max_at: 0.0,
        };
        for p in &series.points {
            let d = p.distance(kind);
            if d > threshold {
                v.adiabatic = false;
                v.first_violation.get_or_insert(p.t_over_tau);
            }
            if d > VERDICT_SLACK * threshold {
                v.adiabatic_with_slack = false;
            }
            if d > v.max_distance {
                v.max_distance = d;
                v.max_at = p.t_over_tau;
            }
        }
        v
    };
    Classification {
        verdicts: MetricKind::ALL.map(verdict),
    }
}

/// Minimum number of samples `detect_steps` needs inside its window.
pub const MIN_STEP_SAMPLES: usize = 200;

#[derive(Clone, Debug, PartialEq)]
pub struct StepReport {
    pub count: usize,
    /// `D_B(end) - D_B(start)` over the window.
    pub rise: f64,
    /// `(start, end)` in `t / tau` of every detected step.
    pub steps: Vec<(f64, f64)>,
}

/// Counts rises of the Bures distance inside `window` (in `t / tau`).
///
/// The series is smoothed with a centred 5-sample moving average and
/// differenced; a step is a maximal run of samples where the derivative
/// exceeds three times its median over the window.
pub fn detect_steps(series: &DiagnosticSeries, window: (f64, f64)) -> Result<StepReport> {
    let (a, b) = window;
    let pts: Vec<&DiagnosticPoint> = series
        .points
        .iter()
        .filter(|p| p.t_over_tau >= a && p.t_over_tau <= b)
        .collect();
    if pts.len() < MIN_STEP_SAMPLES {
        return Err(Error::domain(format!(
            "step detection needs at least {MIN_STEP_SAMPLES} samples in [{a}, {b}], got {}",
            pts.len()
        )));
    }
    let t: Vec<f64> = pts.iter().map(|p| p.t_over_tau).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.d_bures).collect();
    let smooth = moving_average(&y, 2);
    let deriv: Vec<f64> = (0..t.len() - 1)
        .map(|k| (smooth[k + 1] - smooth[k]) / (t[k + 1] - t[k]))
        .collect();
    let mut sorted = deriv.clone();
    sorted.sort_by(|x, y| x.total_cmp(y));
    let mid = sorted.len() / 2;
    let median = if sorted.len() % 2 == 0 {
        0.5 * (sorted[mid - 1] + sorted[mid])
    } else {
        sorted[mid]
    };
    let cut = (3.0 * median).max(0.0);

    let mut steps = Vec::new();
    let mut open: Option<usize> = None;
    for (k, &d) in deriv.iter().enumerate() {
        match (d > cut, open) {
            (true, None) => open = Some(k),
            (false, Some(s)) => {
                steps.push((t[s], t[k]));
                open = None;
            }
            _ => {}
        }
    }
    if let Some(s) = open {
        steps.push((t[s], t[t.len() - 1]));
    }
    Ok(StepReport {
        count: steps.len(),
        rise: y[y.len() - 1] - y[0],
        steps,
    })
}

/// Centred moving average with half-width `h`, shrinking at the edges.
fn moving_average(y: &[f64], h: usize) -> Vec<f64> {
    (0..y.len())
        .map(|k| {
            let lo = k.saturating_sub(h);
            let hi = (k + h + 1).min(y.len());
            y[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}
