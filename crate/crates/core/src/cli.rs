//! Command-line front end: configuration files, the `modes`, `simulate` and
//! `mc` commands, and CSV output.
//!
//! Numbers are written in the shortest form that parses back to the same
//! `f64`, so every file round-trips exactly. Files are written to a
//! temporary name in the output directory and renamed when complete.

use crate::config::{
    validate_config, ConfigError, ModelConfig, NumericsConfig, PhysicalConfig, StochasticConfig,
};
use crate::integrate::{integrate, IntegrationError};
use crate::modal::{solve_basis, BasisError};
use crate::rom::{assemble_system, AssemblyError};
use crate::uncertainty::ensemble::{
    nominal_basis, run_ensemble, EnsembleError, EnsembleOptions, EnsembleResult,
};
use crate::uncertainty::stats::{mean_envelope, pdf_estimate, phase_mean, StatsError};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;
use thiserror::Error;

/// Probability mass inside the envelope band (1% and 99% quantiles).
pub const ENVELOPE_COVERAGE: f64 = 0.98;
/// Grid points of the end-displacement density.
pub const PDF_GRID_POINTS: usize = 512;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: line {line}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("modal basis: {0}")]
    Basis(#[from] BasisError),
    #[error("assembly: {0}")]
    Assembly(#[from] AssemblyError),
    #[error("integration: {0}")]
    Integration(#[from] IntegrationError),
    #[error("monte carlo: {0}")]
    Ensemble(#[from] EnsembleError),
    #[error("statistics: {0}")]
    Stats(#[from] StatsError),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    /// 1 for input and configuration problems, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. }
            | CliError::Parse { .. }
            | CliError::Config(_)
            | CliError::Usage(_) => 1,
            _ => 2,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// On-disk layout of a configuration: one flat JSON object.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    rho: f64,
    area: f64,
    length: f64,
    damping: f64,
    k_lin: f64,
    k_cub: f64,
    lumped_mass: f64,
    sigma: f64,
    alpha1: f64,
    alpha2: f64,
    t_final: f64,
    e_mean: f64,
    e_dispersion: f64,
    n_samples: usize,
    master_seed: u64,
    n_modes: Option<usize>,
    dt: Option<f64>,
    newmark_beta: Option<f64>,
    newmark_gamma: Option<f64>,
    newton_tol_rel: Option<f64>,
    newton_tol_abs: Option<f64>,
    newton_max_iter: Option<usize>,
    quadrature_order: Option<usize>,
}

impl ConfigFile {
    fn into_parts(self) -> (PhysicalConfig, StochasticConfig, NumericsConfig) {
        let d = NumericsConfig::default();
        (
            PhysicalConfig {
                rho: self.rho,
                area: self.area,
                length: self.length,
                damping: self.damping,
                k_lin: self.k_lin,
                k_cub: self.k_cub,
                lumped_mass: self.lumped_mass,
                sigma: self.sigma,
                alpha1: self.alpha1,
                alpha2: self.alpha2,
                t_final: self.t_final,
            },
            StochasticConfig {
                e_mean: self.e_mean,
                e_dispersion: self.e_dispersion,
                n_samples: self.n_samples,
                master_seed: self.master_seed,
            },
            NumericsConfig {
                n_modes: self.n_modes.unwrap_or(d.n_modes),
                dt: self.dt.unwrap_or(d.dt),
                newmark_beta: self.newmark_beta.unwrap_or(d.newmark_beta),
                newmark_gamma: self.newmark_gamma.unwrap_or(d.newmark_gamma),
                newton_tol_rel: self.newton_tol_rel.unwrap_or(d.newton_tol_rel),
                newton_tol_abs: self.newton_tol_abs.unwrap_or(d.newton_tol_abs),
                newton_max_iter: self.newton_max_iter.unwrap_or(d.newton_max_iter),
                quadrature_order: self.quadrature_order.unwrap_or(d.quadrature_order),
            },
        )
    }
}

/// Parses and validates a configuration document. `origin` labels errors.
pub fn parse_config_str(text: &str, origin: &Path) -> Result<ModelConfig, CliError> {
    let file: ConfigFile = serde_json::from_str(text).map_err(|e| CliError::Parse {
        path: origin.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let (p, s, n) = file.into_parts();
    Ok(validate_config(p, s, n)?)
}

/// Reads, parses and validates the configuration file at `path`.
pub fn parse_config(path: &Path) -> Result<ModelConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    parse_config_str(&text, path)
}

/// Shortest decimal that reads back as the same value; zero is `0`.
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        "0".to_owned()
    } else {
        format!("{x:?}")
    }
}

/// Writes `header` and `rows` to `path` via a temporary file in the same
/// directory.
pub fn write_csv<I, R>(path: &Path, header: &str, rows: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = R>,
    R: AsRef<[f64]>,
{
    let mut text = String::new();
    text.push_str(header);
    text.push('\n');
    for row in rows {
        for (j, x) in row.as_ref().iter().enumerate() {
            if j > 0 {
                text.push(',');
            }
            text.push_str(&format_number(*x));
        }
        text.push('\n');
    }
    write_atomic(path, text.as_bytes())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(path))?;
    tmp.write_all(bytes).map_err(io_err(path))?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file()
            .set_permissions(std::fs::Permissions::from_mode(0o644))
            .map_err(io_err(path))?;
    }
    tmp.persist(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

/// Reproduction record written next to the outputs of every command.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub version: String,
    pub output_dir: PathBuf,
    pub master_seed: u64,
    pub physical: PhysicalConfig,
    pub stochastic: StochasticConfig,
    pub numerics: NumericsConfig,
    pub outputs: Vec<String>,
    pub duration_s: f64,
    pub workers: Option<usize>,
    pub n_requested: Option<usize>,
    pub n_failures: usize,
    pub failed_realizations: Vec<usize>,
    pub notes: Vec<String>,
}

impl RunManifest {
    fn new(subcommand: &str, config: &ModelConfig, output_dir: &Path) -> Self {
        RunManifest {
            subcommand: subcommand.to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            output_dir: output_dir.to_path_buf(),
            master_seed: config.stochastic.master_seed,
            physical: config.physical,
            stochastic: config.stochastic,
            numerics: config.numerics,
            outputs: Vec::new(),
            duration_s: 0.0,
            workers: None,
            n_requested: None,
            n_failures: 0,
            failed_realizations: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf, CliError> {
        let path = dir.join("manifest.json");
        let mut json = serde_json::to_string_pretty(self).expect("manifest serializes");
        json.push('\n');
        write_atomic(&path, json.as_bytes())?;
        Ok(path)
    }
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))
}

/// Writes modes.csv with the first `count` eigenvalues and frequencies at
/// the mean modulus.
pub fn cmd_modes(config: &ModelConfig, count: usize, output_dir: &Path) -> Result<RunManifest, CliError> {
    let start = Instant::now();
    if count == 0 {
        return Err(CliError::Usage("mode count must be at least 1".into()));
    }
    ensure_dir(output_dir)?;
    let basis = solve_basis(&config.physical, config.stochastic.e_mean, count)?;
    let rows = (0..count).map(|i| (i + 1, [basis.lambdas[i], basis.frequencies[i]]));
    write_indexed_csv(&output_dir.join("modes.csv"), "n,lambda,frequency_rad_s", rows)?;
    let mut m = RunManifest::new("modes", config, output_dir);
    m.outputs.push("modes.csv".into());
    m.duration_s = start.elapsed().as_secs_f64();
    m.write(output_dir)?;
    Ok(m)
}

/// Writes trajectory.csv for the deterministic system at the mean modulus.
pub fn cmd_simulate(config: &ModelConfig, output_dir: &Path) -> Result<RunManifest, CliError> {
    let start = Instant::now();
    ensure_dir(output_dir)?;
    let nominal = nominal_basis(config)?;
    let basis = solve_basis(&config.physical, config.stochastic.e_mean, config.numerics.n_modes)?;
    let sys = assemble_system(&basis, &nominal, &config.physical)?;
    let traj = integrate(&sys, &config.numerics, config.physical.t_final)?;
    let rows = (0..traj.len()).map(|k| [traj.times[k], traj.u_end[k], traj.v_end[k]]);
    write_csv(&output_dir.join("trajectory.csv"), "t,u_L,v_L", rows)?;
    let mut m = RunManifest::new("simulate", config, output_dir);
    m.outputs.push("trajectory.csv".into());
    m.notes.push(format!("max Newton corrections per step: {}", traj.max_newton_iterations));
    m.duration_s = start.elapsed().as_secs_f64();
    m.write(output_dir)?;
    Ok(m)
}

/// Runs the Monte Carlo ensemble and writes envelope.csv, phase.csv,
/// pdf.csv, samples.csv and manifest.json.
pub fn cmd_mc(
    config: &ModelConfig,
    output_dir: &Path,
    workers: Option<usize>,
) -> Result<RunManifest, CliError> {
    let start = Instant::now();
    ensure_dir(output_dir)?;
    let mut manifest = RunManifest::new("mc", config, output_dir);
    manifest.workers = workers;
    manifest.n_requested = Some(config.stochastic.n_samples);
    let options = EnsembleOptions {
        workers,
        end_values_only: false,
    };
    let ens = match run_ensemble(config, options) {
        Ok(ens) => ens,
        Err(EnsembleError::TooManyFailures { result, failed, requested }) => {
            record_failures(&mut manifest, &result);
            manifest.duration_s = start.elapsed().as_secs_f64();
            manifest.write(output_dir)?;
            return Err(CliError::Ensemble(EnsembleError::TooManyFailures {
                failed,
                requested,
                result,
            }));
        }
        Err(e) => return Err(e.into()),
    };
    record_failures(&mut manifest, &ens);
    write_mc_outputs(&ens, output_dir, &mut manifest)?;
    manifest.duration_s = start.elapsed().as_secs_f64();
    manifest.write(output_dir)?;
    Ok(manifest)
}

fn record_failures(manifest: &mut RunManifest, ens: &EnsembleResult) {
    manifest.n_failures = ens.failures.len();
    manifest.failed_realizations = ens.failures.iter().map(|f| f.index).collect();
    for f in &ens.failures {
        manifest
            .notes
            .push(format!("realization {} (E = {:?} Pa): {}", f.index, f.e_modulus, f.error));
    }
}

fn write_mc_outputs(
    ens: &EnsembleResult,
    dir: &Path,
    manifest: &mut RunManifest,
) -> Result<(), CliError> {
    let env = mean_envelope(ens, ENVELOPE_COVERAGE)?;
    let rows = (0..env.times.len()).map(|k| [env.times[k], env.mean[k], env.low[k], env.high[k]]);
    write_csv(&dir.join("envelope.csv"), "t,mean_u,q01,q99", rows)?;

    let phase = phase_mean(ens)?;
    let rows = (0..phase.times.len()).map(|k| [phase.times[k], phase.mean_u[k], phase.mean_v[k]]);
    write_csv(&dir.join("phase.csv"), "t,mean_u,mean_v", rows)?;

    let pdf_path = dir.join("pdf.csv");
    match pdf_estimate(&ens.end_values, PDF_GRID_POINTS) {
        Ok(d) => {
            let rows = d.grid.iter().zip(&d.density).map(|(x, p)| [*x, *p]);
            write_csv(&pdf_path, "x_normalized,density", rows)?;
        }
        Err(e @ (StatsError::TooFewSamples { .. } | StatsError::Degenerate)) => {
            write_csv(&pdf_path, "x_normalized,density", std::iter::empty::<[f64; 2]>())?;
            manifest.notes.push(format!("pdf.csv left empty: {e}"));
        }
        Err(e) => return Err(e.into()),
    }

    let rows = (0..ens.len()).map(|i| (ens.indices[i], [ens.moduli[i], ens.end_values[i]]));
    write_indexed_csv(&dir.join("samples.csv"), "realization,E,u_L_at_T", rows)?;
    manifest.outputs.extend(
        ["envelope.csv", "phase.csv", "pdf.csv", "samples.csv"].map(String::from),
    );
    Ok(())
}

/// Like [`write_csv`] with a leading integer column.
pub fn write_indexed_csv<I, R>(path: &Path, header: &str, rows: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = (usize, R)>,
    R: AsRef<[f64]>,
{
    let mut text = String::new();
    text.push_str(header);
    text.push('\n');
    for (i, row) in rows {
        let _ = write!(text, "{i}");
        for x in row.as_ref() {
            text.push(',');
            text.push_str(&format_number(*x));
        }
        text.push('\n');
    }
    write_atomic(path, text.as_bytes())
}

#[derive(Debug, Parser)]
#[command(name = "stochbar", version, about = "Stochastic dynamics of a fixed-mass-spring bar")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Eigenvalues and natural frequencies at the mean modulus
    Modes {
        #[command(flatten)]
        common: CommonArgs,
        /// Number of modes to list (default: n_modes of the configuration)
        #[arg(long)]
        count: Option<usize>,
    },
    /// Deterministic response at the mean modulus
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Monte Carlo ensemble over the random modulus
    Mc {
        #[command(flatten)]
        common: CommonArgs,
        /// Master seed (overrides the configuration)
        #[arg(long)]
        seed: Option<u64>,
        /// Number of realizations (overrides the configuration)
        #[arg(long)]
        samples: Option<usize>,
        /// Worker threads (default: one per core)
        #[arg(long)]
        workers: Option<usize>,
    },
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON configuration file
    #[arg(long)]
    pub config: PathBuf,
    /// Directory for the output files
    #[arg(long, default_value = ".")]
    pub output_dir: PathBuf,
    /// Lumped end mass in kg (overrides the configuration)
    #[arg(long)]
    pub mass: Option<f64>,
    /// Number of retained modes (overrides the configuration)
    #[arg(long)]
    pub modes: Option<usize>,
}

impl CommonArgs {
    fn load(&self) -> Result<ModelConfig, CliError> {
        let mut c = parse_config(&self.config)?;
        if let Some(m) = self.mass {
            c.physical.lumped_mass = m;
        }
        if let Some(n) = self.modes {
            c.numerics.n_modes = n;
        }
        Ok(c.validate()?)
    }
}

/// Executes a parsed command line.
pub fn execute(cli: Cli) -> Result<RunManifest, CliError> {
    match cli.command {
        Command::Modes { common, count } => {
            let c = common.load()?;
            cmd_modes(&c, count.unwrap_or(c.numerics.n_modes), &common.output_dir)
        }
        Command::Simulate { common } => cmd_simulate(&common.load()?, &common.output_dir),
        Command::Mc {
            common,
            seed,
            samples,
            workers,
        } => {
            let mut c = common.load()?;
            if let Some(s) = seed {
                c.stochastic.master_seed = s;
            }
            if let Some(n) = samples {
                c.stochastic.n_samples = n;
            }
            if workers == Some(0) {
                return Err(CliError::Usage("--workers must be at least 1".into()));
            }
            cmd_mc(&c.validate()?, &common.output_dir, workers)
        }
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(_) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
