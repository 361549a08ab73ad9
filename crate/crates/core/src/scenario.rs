//! Scenario configuration, single runs, sweeps and CSV output.
//!
//! Configuration files are flat TOML with the physical unit in every key
//! name. See `docs/formats.md` for the file layouts.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adiabaticity::{
    classify, diagnose, fit_adiabatic_line, AdiabaticLineFit, Classification, DiagnosticSeries,
    FitSampling, ReferenceFamily, Thresholds, TqacConfig,
};
use crate::dynamics::{PropagationConfig, SCHEME};
use crate::error::{Error, Result};
use crate::linalg::eigvalsh;
use crate::metrics::MetricKind;
use crate::model::{DriveProtocol, HubbardChain, HubbardParams, SiteConvention};

/// Largest chain a scenario may request.
pub const MAX_SCENARIO_SITES: usize = 8;

pub const DIAGNOSTICS_SCHEMA: &str = "adiabat-diagnostics/v1";
pub const SPECTRUM_SCHEMA: &str = "adiabat-spectrum/v1";
pub const FIT_SCHEMA: &str = "adiabat-fit/v1";
pub const SUMMARY_SCHEMA: &str = "adiabat-summary/v1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Label used for output naming; derived from the physics when absent.
    pub name: Option<String>,
    pub n_sites: usize,
    /// Spin populations; half filling when absent.
    pub n_up: Option<usize>,
    pub n_down: Option<usize>,
    pub interaction_u_over_j: f64,
    pub temperature_kbt_over_j: f64,
    pub tau_times_j: f64,
    /// Defaults to `min(tau, 10) / 1000`.
    pub dt_times_j: Option<f64>,
    pub mu0_over_j: f64,
    pub mu_tau_over_j: f64,
    pub site_convention: SiteConvention,
    pub output_points: usize,
    pub tqac_s: f64,
    pub tqac_s_prime: Option<f64>,
    /// Two or three fit samples in units of `tau`; a dense curve fit is
    /// used when absent.
    pub fit_sample_times_over_tau: Option<Vec<f64>>,
    pub fit_dense_points: usize,
    /// Levels written to the spectrum file; 0 disables it.
    pub spectrum_levels: usize,
    pub output_dir: PathBuf,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            name: None,
            n_sites: 6,
            n_up: None,
            n_down: None,
            interaction_u_over_j: 0.0,
            temperature_kbt_over_j: 0.0,
            tau_times_j: 50.0,
            dt_times_j: None,
            mu0_over_j: DriveProtocol::DEFAULT_MU0,
            mu_tau_over_j: DriveProtocol::DEFAULT_MU_TAU,
            site_convention: SiteConvention::default(),
            output_points: crate::dynamics::DEFAULT_OUTPUT_POINTS,
            tqac_s: 1.0,
            tqac_s_prime: None,
            fit_sample_times_over_tau: None,
            fit_dense_points: 100,
            spectrum_levels: 20,
            output_dir: PathBuf::from("out"),
        }
    }
}

fn config_error(e: impl std::fmt::Display) -> Error {
    Error::Config(e.to_string())
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(config_error)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sites == 0 || self.n_sites > MAX_SCENARIO_SITES {
            return Err(Error::Config(format!(
                "n_sites must be in 1..={MAX_SCENARIO_SITES}, got {}",
                self.n_sites
            )));
        }
        self.params()?;
        self.drive()?;
        self.propagation()?;
        self.tqac()?;
        self.fit_sampling().fractions()?;
        Ok(())
    }

    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            format!(
                "N{}_U{}_kT{}_tau{}",
                self.n_sites,
                self.interaction_u_over_j,
                self.temperature_kbt_over_j,
                self.tau_times_j
            )
        })
    }

    pub fn params(&self) -> Result<HubbardParams> {
        let half = self.n_sites / 2;
        match (self.n_up, self.n_down) {
            (None, None) => HubbardParams::half_filled(self.n_sites, self.interaction_u_over_j),
            (up, down) => HubbardParams::new(
                self.n_sites,
                1.0,
                self.interaction_u_over_j,
                up.unwrap_or(half),
                down.unwrap_or(half),
            ),
        }
    }

    pub fn drive(&self) -> Result<DriveProtocol> {
        DriveProtocol::with_amplitudes(
            self.mu0_over_j,
            self.mu_tau_over_j,
            self.tau_times_j,
            self.site_convention,
        )
    }

    pub fn dt(&self) -> f64 {
        self.dt_times_j
            .unwrap_or_else(|| PropagationConfig::default_dt(self.tau_times_j))
    }

    pub fn propagation(&self) -> Result<PropagationConfig> {
        PropagationConfig::uniform(self.tau_times_j, self.dt(), self.output_points)
    }

    pub fn tqac(&self) -> Result<TqacConfig> {
        let c = TqacConfig {
            s: self.tqac_s,
            s_prime: self.tqac_s_prime,
            temperature: self.temperature_kbt_over_j,
            degeneracy_tol: None,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn fit_sampling(&self) -> FitSampling {
        match &self.fit_sample_times_over_tau {
            Some(ts) => FitSampling::Times(ts.clone()),
            None => FitSampling::Dense {
                points: self.fit_dense_points,
            },
        }
    }
}

/// Formats a float with at most 12 significant digits, using the shortest
/// representation that round-trips the rounded value.
pub fn format_float(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
    let s = format!("{rounded:?}");
    if s == "-0.0" {
        "0.0".to_string()
    } else {
        s
    }
}

fn format_opt(x: Option<f64>) -> String {
    x.map(format_float).unwrap_or_default()
}

/// Writes `# schema=...` followed by CSV records to `path`.
fn write_csv(path: &Path, schema: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let io = |e: std::io::Error| Error::io(path, e);
    let mut buf = format!("# schema={schema}\n").into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        let csv_err = |e: csv::Error| Error::io(path, std::io::Error::other(e));
        w.write_record(header).map_err(csv_err)?;
        for row in rows {
            w.write_record(row).map_err(csv_err)?;
        }
        w.flush().map_err(io)?;
    }
    fs::write(path, buf).map_err(io)
}

/// Everything a scenario run produces.
#[derive(Clone, Debug)]
pub struct ScenarioOutput {
    pub label: String,
    pub config: ScenarioConfig,
    pub fit: AdiabaticLineFit,
    pub thresholds: Thresholds,
    pub series: DiagnosticSeries,
    pub classification: Classification,
    pub spectrum: Option<SpectrumTable>,
    pub files: Vec<PathBuf>,
}

/// Rows of `(t / tau, lowest k eigenvalues)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumTable {
    pub levels: usize,
    pub rows: Vec<(f64, Vec<f64>)>,
}

/// Lowest `k_levels` eigenvalues of `H(t)` on the scenario's output grid.
pub fn export_spectrum(config: &ScenarioConfig, k_levels: usize) -> Result<SpectrumTable> {
    let chain = HubbardChain::new(config.params()?)?;
    let drive = config.drive()?;
    if k_levels == 0 || k_levels > chain.dim() {
        return Err(Error::domain(format!(
            "spectrum levels must be in 1..={}, got {k_levels}",
            chain.dim()
        )));
    }
    let grid = config.propagation()?;
    let rows = grid
        .output_times
        .iter()
        .map(|&t| {
            let ev = eigvalsh(chain.hamiltonian(&drive, t).matrix())?;
            Ok((t / drive.tau, ev[..k_levels].to_vec()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SpectrumTable {
        levels: k_levels,
        rows,
    })
}

pub fn write_spectrum(path: &Path, table: &SpectrumTable) -> Result<()> {
    let mut header = vec!["t_over_tau".to_string()];
    header.extend((0..table.levels).map(|k| format!("e{k}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = table
        .rows
        .iter()
        .map(|(t, ev)| {
            std::iter::once(format_float(*t))
                .chain(ev.iter().map(|&e| format_float(e)))
                .collect()
        })
        .collect();
    write_csv(path, SPECTRUM_SCHEMA, &header, &rows)
}

pub fn write_diagnostics(path: &Path, series: &DiagnosticSeries) -> Result<()> {
    let header = [
        "t_over_tau",
        "epsilon",
        "epsilon_no_pairs",
        "d_bures",
        "d_trace",
        "d_density",
        "bures_above",
        "trace_above",
        "density_above",
    ];
    let flag = |b: bool| if b { "1" } else { "0" }.to_string();
    let rows: Vec<Vec<String>> = series
        .points
        .iter()
        .map(|p| {
            vec![
                format_float(p.t_over_tau),
                format_float(p.epsilon),
                flag(p.epsilon_no_pairs),
                format_float(p.d_bures),
                format_float(p.d_trace),
                format_float(p.d_density),
                flag(p.flags.bures_above),
                flag(p.flags.trace_above),
                flag(p.flags.density_above),
            ]
        })
        .collect();
    write_csv(path, DIAGNOSTICS_SCHEMA, &header, &rows)
}

pub fn write_fit(path: &Path, fit: &AdiabaticLineFit) -> Result<()> {
    let header = ["t_over_tau", "d_bures", "d_density", "gradient", "fit_residual"];
    let rows: Vec<Vec<String>> = fit
        .samples
        .iter()
        .map(|&(t, x, y)| {
            vec![
                format_float(t),
                format_float(x),
                format_float(y),
                format_float(fit.gradient),
                format_float(fit.fit_residual),
            ]
        })
        .collect();
    write_csv(path, FIT_SCHEMA, &header, &rows)
}

/// One line of a run summary or sweep table.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub label: String,
    pub temperature: f64,
    pub interaction: f64,
    pub n_sites: usize,
    pub tau: f64,
    pub gradient: Option<f64>,
    pub thresholds: Option<Thresholds>,
    pub classification: Option<Classification>,
    pub epsilon_max: Option<(f64, f64)>,
    pub error: Option<String>,
}

impl SummaryRow {
    fn blank(config: &ScenarioConfig) -> Self {
        Self {
            label: config.label(),
            temperature: config.temperature_kbt_over_j,
            interaction: config.interaction_u_over_j,
            n_sites: config.n_sites,
            tau: config.tau_times_j,
            gradient: None,
            thresholds: None,
            classification: None,
            epsilon_max: None,
            error: None,
        }
    }

    fn from_output(out: &ScenarioOutput) -> Self {
        let mut row = Self::blank(&out.config);
        row.gradient = Some(out.fit.gradient);
        row.thresholds = Some(out.thresholds);
        row.classification = Some(out.classification.clone());
        row.epsilon_max = out
            .series
            .points
            .iter()
            .map(|p| (p.epsilon, p.t_over_tau))
            .fold(None, |best: Option<(f64, f64)>, cur| match best {
                Some(b) if b.0 >= cur.0 => Some(b),
                _ => Some(cur),
            });
        row
    }

    fn header() -> Vec<String> {
        let mut h: Vec<String> = ["label", "k_bt", "u", "n", "tau", "gradient", "delta_rho", "delta_trace", "delta_n"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        for kind in MetricKind::ALL {
            for col in ["adiabatic", "adiabatic_slack", "first_violation", "max", "max_at"] {
                h.push(format!("{}_{col}", kind.name()));
            }
        }
        h.extend(["epsilon_max", "epsilon_max_at", "error"].map(String::from));
        h
    }

    fn record(&self) -> Vec<String> {
        let mut r = vec![
            self.label.clone(),
            format_float(self.temperature),
            format_float(self.interaction),
            self.n_sites.to_string(),
            format_float(self.tau),
            format_opt(self.gradient),
            format_opt(self.thresholds.map(|t| t.delta_rho)),
            format_opt(self.thresholds.map(|t| t.delta_trace)),
            format_opt(self.thresholds.map(|t| t.delta_n)),
        ];
        for kind in MetricKind::ALL {
            match &self.classification {
                Some(c) => {
                    let v = c.verdict(kind);
                    r.push((v.adiabatic as u8).to_string());
                    r.push((v.adiabatic_with_slack as u8).to_string());
                    r.push(format_opt(v.first_violation));
                    r.push(format_float(v.max_distance));
                    r.push(format_float(v.max_at));
                }
                None => r.extend(std::iter::repeat_n(String::new(), 5)),
            }
        }
        r.push(format_opt(self.epsilon_max.map(|e| e.0)));
        r.push(format_opt(self.epsilon_max.map(|e| e.1)));
        r.push(self.error.clone().unwrap_or_default());
        r
    }
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let header = SummaryRow::header();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let records: Vec<Vec<String>> = rows.iter().map(SummaryRow::record).collect();
    write_csv(path, SUMMARY_SCHEMA, &header, &records)
}

/// Gradient fit only, without dynamics.
pub fn fit_scenario(config: &ScenarioConfig) -> Result<AdiabaticLineFit> {
    let run = || {
        config.validate()?;
        let chain = HubbardChain::new(config.params()?)?;
        fit_adiabatic_line(
            &chain,
            &config.drive()?,
            config.temperature_kbt_over_j,
            &config.fit_sampling(),
        )
    };
    run().map_err(|e| e.in_scenario(&config.label()))
}

fn simulate(config: &ScenarioConfig) -> Result<ScenarioOutput> {
    config.validate()?;
    let chain = HubbardChain::new(config.params()?)?;
    let drive = config.drive()?;
    let kt = config.temperature_kbt_over_j;
    log::info!("{}: fitting adiabatic line", config.label());
    let fit = fit_adiabatic_line(&chain, &drive, kt, &config.fit_sampling())?;
    let thresholds = fit.thresholds()?;
    log::info!(
        "{}: m = {:.6}, propagating with dt = {} ({SCHEME})",
        config.label(),
        fit.gradient,
        config.dt()
    );
    let family = ReferenceFamily::new(&chain, &drive, kt)?;
    let series = diagnose(&family, &config.tqac()?, &config.propagation()?, thresholds)?;
    let classification = classify(&series, &thresholds);
    let spectrum = if config.spectrum_levels > 0 {
        Some(export_spectrum(config, config.spectrum_levels.min(chain.dim()))?)
    } else {
        None
    };
    Ok(ScenarioOutput {
        label: config.label(),
        config: config.clone(),
        fit,
        thresholds,
        series,
        classification,
        spectrum,
        files: Vec::new(),
    })
}

fn write_bundle(out: &mut ScenarioOutput, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut pending: Vec<(PathBuf, Box<dyn Fn(&Path) -> Result<()> + '_>)> = vec![
        (dir.join("diagnostics.csv"), Box::new(|p: &Path| write_diagnostics(p, &out.series))),
        (dir.join("fit.csv"), Box::new(|p: &Path| write_fit(p, &out.fit))),
        (
            dir.join("summary.csv"),
            Box::new(|p: &Path| write_summary(p, &[SummaryRow::from_output(out)])),
        ),
    ];
    if let Some(table) = &out.spectrum {
        pending.push((dir.join("spectrum.csv"), Box::new(move |p: &Path| write_spectrum(p, table))));
    }
    let mut written = Vec::new();
    for (path, write) in pending {
        if let Err(e) = write(&path) {
            for done in written.iter().chain(std::iter::once(&path)) {
                let _ = fs::remove_file(done);
            }
            return Err(e);
        }
        written.push(path);
    }
    out.files = written;
    Ok(())
}

/// Full pipeline: fit, propagate, diagnose, classify, and write the bundle
/// (`diagnostics.csv`, `fit.csv`, `summary.csv`, `spectrum.csv`) into
/// `config.output_dir`. On failure no partial files are left behind.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioOutput> {
    let label = config.label();
    let mut out = simulate(config).map_err(|e| e.in_scenario(&label))?;
    write_bundle(&mut out, &config.output_dir).map_err(|e| e.in_scenario(&label))?;
    Ok(out)
}

/// Axes of a sweep; each empty axis falls back to the base value.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepGrid {
    pub temperature_kbt_over_j: Vec<f64>,
    pub interaction_u_over_j: Vec<f64>,
    pub n_sites: Vec<usize>,
    pub tau_times_j: Vec<f64>,
}

impl SweepGrid {
    /// `kT in {0, 0.2, 2.5}`, `U in {0, 5, 10}`, `N in {2, 4, 6}`.
    pub fn reference() -> Self {
        Self {
            temperature_kbt_over_j: vec![0.0, 0.2, 2.5],
            interaction_u_over_j: vec![0.0, 5.0, 10.0],
            n_sites: vec![2, 4, 6],
            tau_times_j: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub base: ScenarioConfig,
    pub grid: SweepGrid,
    /// Concurrent scenarios; all available threads when absent.
    pub jobs: Option<usize>,
    /// Skip the dynamics and report gradients only.
    pub fit_only: bool,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            base: ScenarioConfig::default(),
            grid: SweepGrid::reference(),
            jobs: None,
            fit_only: false,
        }
    }
}

impl SweepSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(config_error)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// Cartesian product ordered by temperature, then `U`, then `N`, then
    /// `tau` (innermost). Each scenario writes into its own subdirectory
    /// of the base output directory.
    pub fn expand(&self) -> Vec<ScenarioConfig> {
        let b = &self.base;
        let or = |v: &Vec<f64>, d: f64| if v.is_empty() { vec![d] } else { v.clone() };
        let temps = or(&self.grid.temperature_kbt_over_j, b.temperature_kbt_over_j);
        let us = or(&self.grid.interaction_u_over_j, b.interaction_u_over_j);
        let taus = or(&self.grid.tau_times_j, b.tau_times_j);
        let ns = if self.grid.n_sites.is_empty() {
            vec![b.n_sites]
        } else {
            self.grid.n_sites.clone()
        };
        let mut out = Vec::new();
        for &kt in &temps {
            for &u in &us {
                for &n in &ns {
                    for &tau in &taus {
                        let mut c = b.clone();
                        c.name = None;
                        c.temperature_kbt_over_j = kt;
                        c.interaction_u_over_j = u;
                        c.n_sites = n;
                        c.tau_times_j = tau;
                        c.output_dir = b.output_dir.join(c.label());
                        out.push(c);
                    }
                }
            }
        }
        out
    }
}

/// Runs every scenario (at most `jobs` at once) and returns one row per
/// scenario in input order. Failures are recorded in the row's error
/// column and do not stop the sweep.
pub fn run_sweep(configs: &[ScenarioConfig], jobs: Option<usize>, fit_only: bool) -> Result<Vec<SummaryRow>> {
    use rayon::prelude::*;
    if configs.is_empty() {
        return Err(Error::domain("sweep contains no scenarios"));
    }
    let one = |c: &ScenarioConfig| -> SummaryRow {
        if fit_only {
            let mut row = SummaryRow::blank(c);
            match fit_scenario(c) {
                Ok(fit) => {
                    row.gradient = Some(fit.gradient);
                    row.thresholds = fit.thresholds().ok();
                }
                Err(e) => row.error = Some(e.to_string()),
            }
            row
        } else {
            match run_scenario(c) {
                Ok(out) => SummaryRow::from_output(&out),
                Err(e) => {
                    let mut row = SummaryRow::blank(c);
                    row.error = Some(e.to_string());
                    row
                }
            }
        }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| configs.par_iter().map(one).collect()))
}

/// Runs a sweep spec and writes `sweep.csv` into the base output directory.
pub fn run_sweep_spec(spec: &SweepSpec) -> Result<(Vec<SummaryRow>, PathBuf)> {
    let configs = spec.expand();
    let rows = run_sweep(&configs, spec.jobs, spec.fit_only)?;
    let dir = &spec.base.output_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join("sweep.csv");
    write_summary(&path, &rows)?;
    Ok((rows, path))
}
