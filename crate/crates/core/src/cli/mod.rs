//! Command-line front end: `run`, `verify`, `scalar-compare` and `rays`.
//!
//! Exit codes: `0` success, `1` any error or failed check, `2` when
//! `scalar-compare` is given polarized data.

pub mod config;

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

pub use config::{parse_config, parse_config_str, ConfigError, RunConfig};

use crate::coherence::{trace_field, write_snapshot, CoherenceField};
use crate::dynamics::{self, CsvSink, DynamicsError, MemorySink, RunSink, SimulationState};
use crate::frames::{self, FrameError};
use crate::scattering::{build_kernel, scalar_kernel, KernelError};
use crate::verify::{axiom_suite, thermo_report, BracketKind, ThermoCriteria};

/// Environment variable overriding `output.dir`.
pub const OUTPUT_DIR_ENV: &str = "POLRAD_OUTPUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "polrad", version, about = "Metriplectic polarized radiative transfer")]
pub struct Cli {
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true, env = OUTPUT_DIR_ENV)]
    pub output_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate and write diagnostics and snapshots.
    Run {
        #[arg(short, long)]
        config: PathBuf,
    },
    /// Run the bracket axiom suites and a thermodynamic check.
    Verify {
        #[arg(short, long)]
        config: Option<PathBuf>,
        /// Only this suite (matrix, poisson_grid, metric_grid).
        #[arg(long)]
        only: Option<BracketKind>,
    },
    /// Evolve the polarized and the scalar equations side by side.
    ScalarCompare {
        #[arg(short, long)]
        config: PathBuf,
    },
    /// Trace a ray, build its frames and export the optical rotation term.
    Rays {
        #[arg(short, long)]
        config: PathBuf,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{context}: {source}")]
    Io { context: String, source: io::Error },
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("kernel rejected: {0}")]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Frame(#[from] FrameError),
    /// Inputs that violate a documented precondition; exit code 2.
    #[error("{0}")]
    Precondition(String),
    /// Checks ran but at least one failed.
    #[error("{0} check(s) failed")]
    ChecksFailed(usize),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Precondition(_) => 2,
            _ => 1,
        }
    }
}

fn io_err(context: impl Into<String>) -> impl FnOnce(io::Error) -> CliError {
    let context = context.into();
    move |source| CliError::Io { context, source }
}

/// Parse arguments, run, and map the outcome to an exit code.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("polrad: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let out = cli.output_dir.as_deref();
    match &cli.command {
        Command::Run { config } => cmd_run(&load(config, out)?),
        Command::Verify { config, only } => {
            let cfg = match config {
                Some(p) => load(p, out)?,
                None => RunConfig::default(),
            };
            cmd_verify(&cfg, config.is_some(), *only)
        }
        Command::ScalarCompare { config } => cmd_scalar_compare(&load(config, out)?),
        Command::Rays { config } => cmd_rays(&load(config, out)?),
    }
}

fn load(path: &Path, output_dir: Option<&Path>) -> Result<RunConfig, CliError> {
    let mut cfg = parse_config(path)?;
    if let Some(d) = output_dir {
        cfg.output.dir = d.to_path_buf();
    }
    Ok(cfg)
}

fn prepare_output(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = cfg.output.dir.clone();
    fs::create_dir_all(&dir).map_err(io_err(format!("cannot create output directory {}", dir.display())))?;
    let path = dir.join("resolved_config.toml");
    fs::write(&path, cfg.resolved_toml()).map_err(io_err(format!("cannot write {}", path.display())))?;
    Ok(dir)
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(io_err(format!("cannot create {}", path.display())))
}

fn simulation_state(cfg: &RunConfig) -> Result<SimulationState, CliError> {
    let grid = cfg.build_grid()?;
    let w = cfg.initial_field(&grid)?;
    let kernel = build_kernel(&cfg.kernel.spec(), &grid)?;
    Ok(SimulationState::new(w, &cfg.medium, kernel)?)
}

/// Diagnostics CSV plus `w_<step>.snap` files.
struct FileSink {
    csv: CsvSink<BufWriter<File>>,
    dir: PathBuf,
}

impl RunSink for FileSink {
    fn record(&mut self, rec: &dynamics::DiagnosticsRecord) -> io::Result<()> {
        self.csv.record(rec)
    }

    fn snapshot(&mut self, step: usize, w: &CoherenceField) -> io::Result<()> {
        let mut out = BufWriter::new(File::create(self.dir.join(format!("w_{step}.snap")))?);
        write_snapshot(&mut out, w, step)?;
        out.flush()
    }
}

pub fn cmd_run(cfg: &RunConfig) -> Result<(), CliError> {
    let mut state = simulation_state(cfg)?;
    let integ = cfg.integrator(state.grid())?;
    let dir = prepare_output(cfg)?;
    let csv_path = dir.join(&cfg.output.diagnostics);
    let csv = CsvSink::new(create(&csv_path)?).map_err(io_err(format!("cannot write {}", csv_path.display())))?;
    let mut sink = FileSink { csv, dir: dir.clone() };
    let records = dynamics::run(&mut state, &integ, &mut sink)?;
    sink.csv.0.flush().map_err(io_err("flushing diagnostics"))?;
    let (first, last) = (records[0], records[records.len() - 1]);
    println!(
        "run: {} steps, dt = {:.6e}, {} points; H {:.12e} -> {:.12e}, S {:.12e} -> {:.12e}",
        integ.n_steps,
        integ.dt,
        state.grid().len(),
        first.hamiltonian,
        last.hamiltonian,
        first.entropy,
        last.entropy
    );
    println!("run: wrote {}", csv_path.display());
    Ok(())
}

/// Small dissipative run checked by `verify` when no run is configured.
pub const DEFAULT_THERMO_RUN: &str = r#"
[grid]
x_extent = [1.0]
x_points = [16]
k_shells = [1.0]
k_angles = 16

[kernel]
type = "rotation"
sigma0 = 0.5
anisotropy = 0.5
gain = 1.0

[initial]
profile = "gaussian"
background = 1.0
amplitude = 0.8
width = 0.15
anisotropy = 0.5
polarization = [0.3, 0.2, 0.1]

[integrator]
scheme = "midpoint"
cfl_safety = 0.25
n_steps = 40
"#;

pub fn cmd_verify(cfg: &RunConfig, configured: bool, only: Option<BracketKind>) -> Result<(), CliError> {
    let mut failed = 0;
    let kinds: Vec<BracketKind> = only.map_or(BracketKind::ALL.to_vec(), |k| vec![k]);
    for kind in kinds {
        let report = axiom_suite(kind, &cfg.verify);
        print!("{report}");
        failed += report.rows.iter().filter(|r| !r.pass).count();
    }
    let run_cfg = if configured && cfg.grid.is_some() {
        cfg.clone()
    } else {
        parse_config_str(DEFAULT_THERMO_RUN).expect("built-in run parses")
    };
    let mut state = simulation_state(&run_cfg)?;
    let integ = run_cfg.integrator(state.grid())?;
    let mut sink = MemorySink::default();
    let records = dynamics::run(&mut state, &integ, &mut sink)?;
    let verdict = thermo_report(
        &records,
        ThermoCriteria {
            energy_band: cfg.thermo.energy_band,
            entropy_tol: cfg.thermo.entropy_tol,
        },
    );
    print!("{verdict}");
    failed += usize::from(!verdict.first_law) + usize::from(!verdict.second_law);
    if failed == 0 {
        println!("verify: all checks PASS");
        Ok(())
    } else {
        println!("verify: {failed} check(s) FAIL");
        Err(CliError::ChecksFailed(failed))
    }
}

pub fn cmd_scalar_compare(cfg: &RunConfig) -> Result<(), CliError> {
    let init = cfg.require_initial()?;
    if init.is_polarized() {
        eprintln!("warning: scalar reduction assumes Q = U = V = 0, but initial.polarization = {:?}", init.polarization());
        return Err(CliError::Precondition("initial data is polarized; the scalar reduction does not apply".into()));
    }
    let mut state = simulation_state(cfg)?;
    let integ = cfg.integrator(state.grid())?;
    let grid = state.grid().clone();
    let sk = scalar_kernel(&state.kernel, &grid)?;
    let mut intensity = trace_field(&state.w);
    let dir = prepare_output(cfg)?;
    let path = dir.join("scalar_compare.csv");
    let mut out = create(&path)?;
    let werr = || io_err(format!("cannot write {}", path.display()));
    writeln!(out, "step,time,max_intensity_diff,max_polarization").map_err(werr())?;
    let (mut worst_i, mut worst_p) = (0.0f64, 0.0f64);
    for n in 0..=integ.n_steps {
        if n > 0 {
            dynamics::step_rk4(&mut state, integ.dt)?;
            intensity = dynamics::step_scalar_rk4(&grid, &intensity, &state.omega_grad, &sk, integ.dt)?;
        }
        let di = trace_field(&state.w).zip_map(&intensity, |a, b| a - b).max_abs();
        let dp = state.w.data.max_polarization_component();
        worst_i = worst_i.max(di);
        worst_p = worst_p.max(dp);
        if n % integ.record_interval == 0 || n == integ.n_steps {
            writeln!(out, "{n},{:.17e},{di:.6e},{dp:.6e}", n as f64 * integ.dt).map_err(werr())?;
        }
    }
    out.flush().map_err(werr())?;
    println!("scalar-compare: {} RK4 steps, dt = {:.6e}", integ.n_steps, integ.dt);
    println!("scalar-compare: max |I_full - I_scalar| = {worst_i:.3e}");
    println!("scalar-compare: max |Q|,|U|,|V|        = {worst_p:.3e}");
    println!("scalar-compare: wrote {}", path.display());
    Ok(())
}

pub fn cmd_rays(cfg: &RunConfig) -> Result<(), CliError> {
    let rc = cfg.require_rays()?;
    let (x0, k0) = rc.launch_state()?;
    let ray = frames::trace_ray(rc.medium.model(), x0, k0, rc.length, rc.ds, rc.tol)?;
    let mut ray = frames::frenet_frame(&ray)?;
    let darboux = frames::darboux_frame(&mut ray, rc.alpha0)?;
    let fixed = frames::fixed_basis(&ray, frames::Vec3::from(rc.fixed_axis));
    let nd = frames::optical_rotation_n(&ray, &darboux)?;
    let nf = frames::optical_rotation_n(&ray, &fixed)?;
    let dir = prepare_output(cfg)?;
    let path = dir.join(&rc.file);
    let mut out = create(&path)?;
    frames::write_ray_csv(&mut out, &ray, &nd, &nf)
        .and_then(|_| out.flush())
        .map_err(io_err(format!("cannot write {}", path.display())))?;
    let max = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let last = ray.samples.last().expect("traced ray has samples");
    println!("rays: {} samples, ds = {}, omega drift {:.3e}", ray.samples.len(), ray.ds, ray.omega_drift);
    println!("rays: max |n| darboux = {:.3e}, fixed = {:.3e}", max(&nd), max(&nf));
    println!("rays: alpha({:.4}) = {:.12e}", last.s, last.alpha);
    println!("rays: wrote {}", path.display());
    Ok(())
}
