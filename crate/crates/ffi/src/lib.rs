//! C ABI over the `adiabat` library.
//!
//! Every fallible function returns an [`AdiabatStatus`]; on failure the
//! message is available from [`adiabat_last_error`] on the same thread.
//! Complex matrices cross the boundary as row-major arrays of interleaved
//! `(re, im)` doubles, `2 * dim * dim` values long.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use adiabat::adiabaticity::{
    diagnose, fit_adiabatic_line, tqac_epsilon, FitSampling, ReferenceFamily, Thresholds,
    TqacConfig,
};
use adiabat::dynamics::PropagationConfig;
use adiabat::linalg::eigvalsh;
use adiabat::metrics::{bures_distance, density_distance, trace_distance};
use adiabat::model::{DriveProtocol, HubbardChain, HubbardParams, SiteConvention};
use adiabat::scenario::{run_scenario, ScenarioConfig};
use adiabat::spectral::{DensityMatrix, DensityProfile};
use adiabat::Error;
use faer::{c64, Mat};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AdiabatStatus {
    Ok = 0,
    Domain = 1,
    Numerical = 2,
    Config = 3,
    Io = 4,
    NullPointer = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AdiabatConvention {
    Symmetric = 0,
    Literal = 1,
}

/// Thresholds derived from an adiabatic-line gradient.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AdiabatThresholds {
    pub gradient: f64,
    pub delta_rho: f64,
    pub delta_trace: f64,
    pub delta_n: f64,
}

/// Opaque handle: a half-filled chain together with its drive.
pub struct AdiabatChain {
    chain: HubbardChain,
    drive: DriveProtocol,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(e: &Error) -> AdiabatStatus {
    match e.root() {
        Error::Domain(_) => AdiabatStatus::Domain,
        Error::Numerical(_) => AdiabatStatus::Numerical,
        Error::Config(_) => AdiabatStatus::Config,
        Error::Io { .. } => AdiabatStatus::Io,
        Error::Scenario { .. } => unreachable!("root strips scenario context"),
    }
}

enum Failure {
    Lib(Error),
    Null(&'static str),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard<F>(f: F) -> AdiabatStatus
where
    F: FnOnce() -> Result<(), Failure>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AdiabatStatus::Ok,
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer passed for `{what}`"));
            AdiabatStatus::NullPointer
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            AdiabatStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(what))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &'static str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn density(p: *const f64, dim: usize, what: &'static str) -> Result<DensityMatrix, Failure> {
    let raw = slice(p, 2 * dim * dim, what)?;
    let m = Mat::from_fn(dim, dim, |i, j| {
        let k = 2 * (i * dim + j);
        c64::new(raw[k], raw[k + 1])
    });
    Ok(DensityMatrix::new(m)?)
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn adiabat_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Builds a half-filled chain of `n_sites` sites with interaction `u` (in J)
/// and the default ramp over `tau` (in 1/J). Release with
/// [`adiabat_chain_free`].
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle pointer.
#[no_mangle]
pub unsafe extern "C" fn adiabat_chain_new(
    n_sites: usize,
    u: f64,
    tau: f64,
    convention: AdiabatConvention,
    out: *mut *mut AdiabatChain,
) -> AdiabatStatus {
    guard(|| {
        let slot = self::out(out, "out")?;
        *slot = ptr::null_mut();
        let chain = HubbardChain::new(HubbardParams::half_filled(n_sites, u)?)?;
        let convention = match convention {
            AdiabatConvention::Symmetric => SiteConvention::Symmetric,
            AdiabatConvention::Literal => SiteConvention::Literal,
        };
        let drive = DriveProtocol::with_amplitudes(
            DriveProtocol::DEFAULT_MU0,
            DriveProtocol::DEFAULT_MU_TAU,
            tau,
            convention,
        )?;
        *slot = Box::into_raw(Box::new(AdiabatChain { chain, drive }));
        Ok(())
    })
}

/// # Safety
/// `chain` must come from [`adiabat_chain_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn adiabat_chain_free(chain: *mut AdiabatChain) {
    if !chain.is_null() {
        drop(Box::from_raw(chain));
    }
}

/// Sector dimension, or 0 for a null handle.
///
/// # Safety
/// `chain` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn adiabat_chain_dim(chain: *const AdiabatChain) -> usize {
    chain.as_ref().map_or(0, |c| c.chain.dim())
}

/// Writes the lowest `len` eigenvalues of `H(t)` into `out`, ascending.
///
/// # Safety
/// `chain` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn adiabat_chain_spectrum(
    chain: *const AdiabatChain,
    t: f64,
    out: *mut f64,
    len: usize,
) -> AdiabatStatus {
    guard(|| {
        let c = deref(chain, "chain")?;
        let dest = slice_mut(out, len, "out")?;
        if len > c.chain.dim() {
            return Err(Error::Domain(format!(
                "{len} levels requested from a sector of dimension {}",
                c.chain.dim()
            ))
            .into());
        }
        let ev = eigvalsh(c.chain.hamiltonian(&c.drive, t).matrix())?;
        dest.copy_from_slice(&ev[..len]);
        Ok(())
    })
}

/// Gradient of the adiabatic line at temperature `kt` (in J), from the
/// default dense fit.
///
/// # Safety
/// `chain` must be a live handle and `gradient` writable.
#[no_mangle]
pub unsafe extern "C" fn adiabat_chain_gradient(
    chain: *const AdiabatChain,
    kt: f64,
    gradient: *mut f64,
) -> AdiabatStatus {
    guard(|| {
        let c = deref(chain, "chain")?;
        let dest = out(gradient, "gradient")?;
        *dest = fit_adiabatic_line(&c.chain, &c.drive, kt, &FitSampling::default())?.gradient;
        Ok(())
    })
}

/// Finite-temperature adiabatic criterion at time `t`, with `s = 1` and no
/// cap on final levels.
///
/// # Safety
/// `chain` must be a live handle and `epsilon` writable.
#[no_mangle]
pub unsafe extern "C" fn adiabat_chain_epsilon(
    chain: *const AdiabatChain,
    t: f64,
    kt: f64,
    epsilon: *mut f64,
) -> AdiabatStatus {
    guard(|| {
        let c = deref(chain, "chain")?;
        let dest = out(epsilon, "epsilon")?;
        let family = ReferenceFamily::new(&c.chain, &c.drive, kt)?;
        let snap = family.snapshot(t)?;
        let hdot = c.chain.time_derivative(&c.drive);
        *dest = tqac_epsilon(&snap, &hdot, &TqacConfig::new(kt)?)?.value;
        Ok(())
    })
}

/// Evolves the reference state over `points` uniform output times and
/// writes `t / tau`, the Bures distance to the adiabatic reference, the
/// density distance, and epsilon. Each array must hold `points` doubles;
/// any of them may be null to skip it.
///
/// # Safety
/// `chain` must be a live handle; non-null arrays must hold `points` doubles.
#[no_mangle]
pub unsafe extern "C" fn adiabat_chain_diagnose(
    chain: *const AdiabatChain,
    kt: f64,
    gradient: f64,
    points: usize,
    t_over_tau: *mut f64,
    d_bures: *mut f64,
    d_density: *mut f64,
    epsilon: *mut f64,
) -> AdiabatStatus {
    guard(|| {
        let c = deref(chain, "chain")?;
        let tau = c.drive.tau;
        let config = PropagationConfig::uniform(tau, PropagationConfig::default_dt(tau), points)?;
        let family = ReferenceFamily::new(&c.chain, &c.drive, kt)?;
        let thresholds = Thresholds::from_gradient(gradient)?;
        let series = diagnose(&family, &TqacConfig::new(kt)?, &config, thresholds)?;
        let columns: [(*mut f64, Vec<f64>); 4] = [
            (t_over_tau, series.times()),
            (d_bures, series.points.iter().map(|p| p.d_bures).collect()),
            (d_density, series.points.iter().map(|p| p.d_density).collect()),
            (epsilon, series.epsilons()),
        ];
        for (dest, values) in columns {
            if !dest.is_null() {
                std::slice::from_raw_parts_mut(dest, points).copy_from_slice(&values);
            }
        }
        Ok(())
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn adiabat_thresholds(gradient: f64, out: *mut AdiabatThresholds) -> AdiabatStatus {
    guard(|| {
        let dest = self::out(out, "out")?;
        let t = Thresholds::from_gradient(gradient)?;
        *dest = AdiabatThresholds {
            gradient: t.gradient,
            delta_rho: t.delta_rho,
            delta_trace: t.delta_trace,
            delta_n: t.delta_n,
        };
        Ok(())
    })
}

/// Bures distance between two `dim x dim` density matrices.
///
/// # Safety
/// `rho` and `sigma` must hold `2 * dim * dim` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn adiabat_bures_distance(
    rho: *const f64,
    sigma: *const f64,
    dim: usize,
    out: *mut f64,
) -> AdiabatStatus {
    guard(|| {
        let dest = self::out(out, "out")?;
        let (a, b) = (density(rho, dim, "rho")?, density(sigma, dim, "sigma")?);
        *dest = bures_distance(&a, &b)?.value;
        Ok(())
    })
}

/// Trace distance between two `dim x dim` density matrices.
///
/// # Safety
/// As [`adiabat_bures_distance`].
#[no_mangle]
pub unsafe extern "C" fn adiabat_trace_distance(
    rho: *const f64,
    sigma: *const f64,
    dim: usize,
    out: *mut f64,
) -> AdiabatStatus {
    guard(|| {
        let dest = self::out(out, "out")?;
        let (a, b) = (density(rho, dim, "rho")?, density(sigma, dim, "sigma")?);
        *dest = trace_distance(&a, &b)?.value;
        Ok(())
    })
}

/// Density distance between two site-occupation profiles of `n_sites`
/// entries holding `n_particles` particles.
///
/// # Safety
/// `n1` and `n2` must hold `n_sites` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn adiabat_density_distance(
    n1: *const f64,
    n2: *const f64,
    n_sites: usize,
    n_particles: usize,
    out: *mut f64,
) -> AdiabatStatus {
    guard(|| {
        let dest = self::out(out, "out")?;
        let a = DensityProfile::new(slice(n1, n_sites, "n1")?.to_vec(), n_particles)?;
        let b = DensityProfile::new(slice(n2, n_sites, "n2")?.to_vec(), n_particles)?;
        *dest = density_distance(&a, &b)?.value;
        Ok(())
    })
}

/// Runs the scenario described by a TOML file and writes its output bundle.
/// `gradient` may be null.
///
/// # Safety
/// `config_path` must be a nul-terminated UTF-8 path.
#[no_mangle]
pub unsafe extern "C" fn adiabat_run_scenario(
    config_path: *const c_char,
    gradient: *mut f64,
) -> AdiabatStatus {
    guard(|| {
        if config_path.is_null() {
            return Err(Failure::Null("config_path"));
        }
        let path = CStr::from_ptr(config_path)
            .to_str()
            .map_err(|_| Error::Config("config path is not UTF-8".into()))?;
        let config = ScenarioConfig::load(Path::new(path))?;
        let output = run_scenario(&config)?;
        if let Some(dest) = gradient.as_mut() {
            *dest = output.fit.gradient;
        }
        Ok(())
    })
}
