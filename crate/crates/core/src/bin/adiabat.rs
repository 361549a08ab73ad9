use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use adiabat::model::SiteConvention;
use adiabat::scenario::{
    export_spectrum, fit_scenario, format_float, run_scenario, run_sweep_spec, write_fit,
    write_spectrum, ScenarioConfig, SweepSpec,
};
use adiabat::Result;

/// Adiabaticity diagnostics for driven Hubbard chains.
#[derive(Parser)]
#[command(name = "adiabat", version)]
struct Cli {
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its diagnostics bundle.
    Run(ScenarioArgs),
    /// Run a grid of scenarios described by a sweep file.
    Sweep {
        grid: PathBuf,
        /// Concurrent scenarios.
        #[arg(long)]
        jobs: Option<usize>,
        /// Fit gradients only, skipping the dynamics.
        #[arg(long)]
        fit_only: bool,
        #[arg(long, env = "ADIABAT_OUTPUT_DIR")]
        output_dir: Option<PathBuf>,
    },
    /// Write the lowest instantaneous eigenvalues over the ramp.
    Spectrum {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Number of levels; defaults to the config's spectrum_levels.
        #[arg(long)]
        levels: Option<usize>,
    },
    /// Fit the adiabatic-line gradient only.
    Fit(ScenarioArgs),
}

/// Scenario file plus per-field overrides.
#[derive(Args)]
struct ScenarioArgs {
    /// Scenario TOML file; defaults apply when omitted.
    #[arg(short, long)]
    config: Option<PathBuf>,
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    n_sites: Option<usize>,
    #[arg(long)]
    n_up: Option<usize>,
    #[arg(long)]
    n_down: Option<usize>,
    #[arg(long)]
    interaction_u_over_j: Option<f64>,
    #[arg(long)]
    temperature_kbt_over_j: Option<f64>,
    #[arg(long)]
    tau_times_j: Option<f64>,
    #[arg(long)]
    dt_times_j: Option<f64>,
    #[arg(long)]
    mu0_over_j: Option<f64>,
    #[arg(long)]
    mu_tau_over_j: Option<f64>,
    /// `symmetric` or `literal`.
    #[arg(long, value_parser = parse_convention)]
    site_convention: Option<SiteConvention>,
    #[arg(long)]
    output_points: Option<usize>,
    #[arg(long)]
    tqac_s: Option<f64>,
    #[arg(long)]
    tqac_s_prime: Option<f64>,
    /// Comma-separated fractions of tau, e.g. `0.1,0.2`.
    #[arg(long, value_delimiter = ',')]
    fit_sample_times_over_tau: Option<Vec<f64>>,
    #[arg(long)]
    fit_dense_points: Option<usize>,
    #[arg(long)]
    spectrum_levels: Option<usize>,
    #[arg(long, env = "ADIABAT_OUTPUT_DIR")]
    output_dir: Option<PathBuf>,
}

fn parse_convention(s: &str) -> std::result::Result<SiteConvention, String> {
    match s {
        "symmetric" => Ok(SiteConvention::Symmetric),
        "literal" => Ok(SiteConvention::Literal),
        other => Err(format!("unknown site convention `{other}`")),
    }
}

impl ScenarioArgs {
    fn resolve(self) -> Result<ScenarioConfig> {
        let mut c = match &self.config {
            Some(path) => ScenarioConfig::load(path)?,
            None => ScenarioConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field { c.$field = v; }
            )*};
        }
        macro_rules! set_opt {
            ($($field:ident),*) => {$(
                if self.$field.is_some() { c.$field = self.$field; }
            )*};
        }
        set!(
            n_sites,
            interaction_u_over_j,
            temperature_kbt_over_j,
            tau_times_j,
            mu0_over_j,
            mu_tau_over_j,
            site_convention,
            output_points,
            tqac_s,
            fit_dense_points,
            spectrum_levels,
            output_dir
        );
        set_opt!(name, n_up, n_down, dt_times_j, tqac_s_prime, fit_sample_times_over_tau);
        c.validate()?;
        Ok(c)
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Run(args) => {
            let config = args.resolve()?;
            let out = run_scenario(&config)?;
            println!("{}: m = {}", out.label, format_float(out.fit.gradient));
            for v in &out.classification.verdicts {
                println!(
                    "  {:<8} max {:<16} threshold {:<16} adiabatic {} (with slack {})",
                    v.kind.name(),
                    format_float(v.max_distance),
                    format_float(v.threshold),
                    v.adiabatic,
                    v.adiabatic_with_slack
                );
            }
            for f in &out.files {
                println!("  wrote {}", f.display());
            }
        }
        Command::Sweep {
            grid,
            jobs,
            fit_only,
            output_dir,
        } => {
            let mut spec = SweepSpec::load(&grid)?;
            if let Some(dir) = output_dir {
                spec.base.output_dir = dir;
            }
            if jobs.is_some() {
                spec.jobs = jobs;
            }
            spec.fit_only |= fit_only;
            let (rows, path) = run_sweep_spec(&spec)?;
            let failed = rows.iter().filter(|r| r.error.is_some()).count();
            println!(
                "{} scenarios ({failed} failed), summary in {}",
                rows.len(),
                path.display()
            );
        }
        Command::Spectrum { scenario, levels } => {
            let config = scenario.resolve()?;
            let table = export_spectrum(&config, levels.unwrap_or(config.spectrum_levels))?;
            std::fs::create_dir_all(&config.output_dir)
                .map_err(|e| adiabat::Error::Io { path: config.output_dir.clone(), source: e })?;
            let path = config.output_dir.join("spectrum.csv");
            write_spectrum(&path, &table)?;
            println!("wrote {}", path.display());
        }
        Command::Fit(args) => {
            let config = args.resolve()?;
            let fit = fit_scenario(&config)?;
            std::fs::create_dir_all(&config.output_dir)
                .map_err(|e| adiabat::Error::Io { path: config.output_dir.clone(), source: e })?;
            let path = config.output_dir.join("fit.csv");
            write_fit(&path, &fit)?;
            println!(
                "{}: m = {} (rms residual {}), wrote {}",
                config.label(),
                format_float(fit.gradient),
                format_float(fit.fit_residual),
                path.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
