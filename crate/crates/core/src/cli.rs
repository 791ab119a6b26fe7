//! Command-line front end.
//!
//! Exit codes: 0 success, 2 bad arguments, 3 I/O or file format, 4
//! validation failure.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::analysis::{build_witness, fit_extrapolation_records, fit_power_records, FitReport};
use crate::error::Error;
use crate::gilbert::{HaltCriteria, RunState};
use crate::io::{read_trace_file, write_trace_file, RunMetadata, StateFile, StateKind};
use crate::linalg::DensityMatrix;
use crate::states::{DeviateSource, NamedState, SamplerConfig, SamplingMode};
use crate::symmetry::{Generator, SymmetryGroup, DEFAULT_CAP};

pub const EXIT_ARGS: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_VALIDATION: i32 = 4;

/// Stall budget applied when no halt flag is given.
pub const DEFAULT_STALL: u64 = 1_000_000;
/// Trials each worker draws per speculative round.
pub const PARALLEL_BATCH: usize = 64;

#[derive(Debug, Parser)]
#[command(
    name = "gilbert-hsd",
    version,
    about = "Upper bounds on the Hilbert-Schmidt distance to the separable set"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the Gilbert iteration on a state.
    Run(RunArgs),
    /// Fit the distance limit and the trial/success power law on a trace.
    Fit(FitArgs),
    /// Build an entanglement witness from a state and a separable approximation.
    Witness(WitnessArgs),
    /// Write a named reference state.
    State(StateArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Named state (e.g. `bell`, `ghz:3`) or state file.
    #[arg(long)]
    pub state: String,
    /// Expected subsystem dimensions, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub dims: Option<Vec<usize>>,
    /// Halt after this many corrections.
    #[arg(long = "halt-cs")]
    pub halt_cs: Option<u64>,
    /// Halt after this many trial states.
    #[arg(long = "halt-ct")]
    pub halt_ct: Option<u64>,
    /// Halt once D² reaches this value.
    #[arg(long = "halt-d2")]
    pub halt_d2: Option<f64>,
    /// Halt after this many trials without a correction.
    #[arg(long)]
    pub stall: Option<u64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Initial separable state: `maxmix`, a named state or a state file.
    #[arg(long, default_value = "maxmix")]
    pub init: String,
    /// Symmetry generator, `perm:0,2,1` or `local:<file>,<file>,...`.
    #[arg(long = "sym")]
    pub sym: Vec<String>,
    /// Largest symmetry group accepted.
    #[arg(long = "sym-cap", default_value_t = DEFAULT_CAP)]
    pub sym_cap: usize,
    /// Draw real trial states only.
    #[arg(long = "real-only")]
    pub real_only: bool,
    /// Build amplitudes with the Box-Muller recipe instead of normal pairs.
    #[arg(long = "box-muller")]
    pub box_muller: bool,
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    pub meta: Option<PathBuf>,
    /// Write the final separable iterate as a state file.
    #[arg(long = "final")]
    pub final_state: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    pub trace: PathBuf,
    #[arg(long, default_value_t = crate::analysis::DEFAULT_STRIDE)]
    pub stride: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct WitnessArgs {
    /// Tested state, named or file.
    #[arg(long)]
    pub rho0: String,
    /// Separable approximation, named or file.
    #[arg(long)]
    pub rho1: String,
    #[arg(long, default_value_t = crate::analysis::DEFAULT_RESTARTS)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Report path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write W as an operator state file.
    #[arg(long)]
    pub operator: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StateArgs {
    pub name: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// An error with the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Parameter(_) => EXIT_ARGS,
            Error::Io(_) | Error::Format(_) => EXIT_IO,
            Error::Dimension(_)
            | Error::Validation(_)
            | Error::Capacity { .. }
            | Error::Degenerate(_) => EXIT_VALIDATION,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl CliError {
    fn with_code(code: i32, e: Error) -> Self {
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `args` (including the program name) and runs the command.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ARGS } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

fn dispatch(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Run(a) => cmd_run(&a),
        Command::Fit(a) => cmd_fit(&a),
        Command::Witness(a) => cmd_witness(&a),
        Command::State(a) => cmd_state(&a),
    }
}

/// Resolves a named state or a state file.
pub fn resolve_state(spec: &str) -> crate::Result<DensityMatrix> {
    match spec.parse::<NamedState>() {
        Ok(named) => named.build(),
        Err(named_err) => {
            let path = Path::new(spec);
            let looks_like_path = path.exists()
                || spec.contains(std::path::MAIN_SEPARATOR)
                || path.extension().is_some();
            if looks_like_path {
                crate::io::read_state(path)
            } else {
                Err(named_err)
            }
        }
    }
}

fn write_output(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| CliError::from(Error::Io(e))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::from(Error::Io(e))),
    }
}

fn halt_from(a: &RunArgs) -> HaltCriteria {
    let halt = HaltCriteria {
        max_successes: a.halt_cs,
        max_trials: a.halt_ct,
        target_d2: a.halt_d2,
        stall_trials: a.stall,
    };
    if halt.validate().is_err() && a.halt_d2.is_none() {
        HaltCriteria {
            stall_trials: Some(DEFAULT_STALL),
            ..halt
        }
    } else {
        halt
    }
}

pub fn cmd_run(a: &RunArgs) -> CliResult<()> {
    if a.threads == 0 {
        return Err(Error::Parameter("--threads must be >= 1".into()).into());
    }
    let rho0 = resolve_state(&a.state)?;
    if let Some(dims) = &a.dims {
        if dims.as_slice() != rho0.dims() {
            return Err(Error::Dimension(format!(
                "--dims {dims:?} disagrees with state dims {:?}",
                rho0.dims()
            ))
            .into());
        }
    }
    let init = match a.init.as_str() {
        "maxmix" => None,
        spec => Some(resolve_state(spec)?),
    };
    let group = if a.sym.is_empty() {
        None
    } else {
        let gens = a
            .sym
            .iter()
            .map(|s| s.parse::<Generator>())
            .collect::<crate::Result<Vec<_>>>()?;
        Some(SymmetryGroup::closure(&gens, rho0.dims(), a.sym_cap)?)
    };
    let cfg = SamplerConfig {
        mode: if a.real_only {
            SamplingMode::Real
        } else {
            SamplingMode::Complex
        },
        seed: a.seed,
        source: if a.box_muller {
            DeviateSource::BoxMuller
        } else {
            DeviateSource::Gaussian
        },
    };
    let halt = halt_from(a);
    halt.validate()?;

    let dims = rho0.dims().to_vec();
    let started = Instant::now();
    let mut state = RunState::new(rho0, init, group, cfg)?;
    let trace = if a.threads > 1 {
        state.run_parallel(&halt, a.threads, PARALLEL_BATCH)?
    } else {
        state.run(&halt)?
    };
    let wall_seconds = started.elapsed().as_secs_f64();

    if let Some(path) = &a.trace {
        write_trace_file(path, &trace)?;
    }
    if let Some(path) = &a.final_state {
        StateFile::from_density(&state.rho1())
            .with_name(format!("separable approximation of {}", a.state))
            .write(path)?;
    }
    let meta = RunMetadata {
        state: a.state.clone(),
        dims,
        seed: a.seed,
        halt,
        final_d2: state.d2(),
        c_t: state.trials(),
        c_s: state.successes(),
        wall_seconds,
    };
    let json = meta.to_json()?;
    match &a.meta {
        Some(path) => write_output(Some(path), &json)?,
        None => println!(
            "c_t={} c_s={} d2={}",
            meta.c_t,
            meta.c_s,
            crate::io::format_d2(meta.final_d2)
        ),
    }
    Ok(())
}

pub fn cmd_fit(a: &FitArgs) -> CliResult<()> {
    let records = read_trace_file(&a.trace)?;
    // a trace too short to fit is a validation failure here, not bad usage
    let as_validation = |e: Error| match e {
        Error::Parameter(_) => CliError::with_code(EXIT_VALIDATION, e),
        other => other.into(),
    };
    let ext = fit_extrapolation_records(&records, a.stride).map_err(as_validation)?;
    let power = fit_power_records(&records).map_err(as_validation)?;
    let mut json = serde_json::to_string(&FitReport::new(&ext, &power)).map_err(Error::from)?;
    json.push('\n');
    write_output(a.out.as_deref(), &json)
}

pub fn cmd_witness(a: &WitnessArgs) -> CliResult<()> {
    let rho0 = resolve_state(&a.rho0)?;
    let rho1 = resolve_state(&a.rho1)?;
    let w = build_witness(&rho0, &rho1, a.restarts, a.seed)?;
    if let Some(path) = &a.operator {
        StateFile::from_matrix(&w.dims, StateKind::Operator, &w.operator)
            .with_name("entanglement witness")
            .write(path)?;
    }
    let mut json = serde_json::to_string(&w.report()).map_err(Error::from)?;
    json.push('\n');
    write_output(a.out.as_deref(), &json)
}

pub fn cmd_state(a: &StateArgs) -> CliResult<()> {
    let named: NamedState = a.name.parse()?;
    let rho = named.build()?;
    let file = StateFile::from_density(&rho).with_name(a.name.clone());
    write_output(a.out.as_deref(), &file.to_json()?)
}
