//! Command-line front end of `qwm-core`: configuration, dispatch and output.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::Parser;
use qwm_core::cascade::CascadeError;
use qwm_core::oracle::OracleError;
use qwm_core::probe::ProbeError;
use qwm_core::spectral::SpectralError;
use serde_json::{json, Value};
use thiserror::Error;

pub use config::{parse_config, Command, ConfigError, ConfigFile, ConfigInput, Format, Origin, RunConfig};
pub use output::{render, Artifact};

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Success = 0,
    Validation = 1,
    Convergence = 2,
}

#[derive(Debug, Parser)]
#[command(name = "qwm", version, about = "Quantum wave mixing in a cascaded two-qubit system")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// Configuration file, or the output of an earlier run.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one value; `key=value` or `section.key=value`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads for `sweep`.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Convergence(String),
    #[error("cannot write `{path}`: {reason}")]
    Write { path: String, reason: String },
    #[error("equivalence check failed: max deviation {max_deviation:e} is not below {threshold:e}")]
    CheckFailed { max_deviation: f64, threshold: f64 },
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Convergence(_) | CliError::CheckFailed { .. } => ExitCode::Convergence,
            _ => ExitCode::Validation,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(ConfigError::Parse { .. }) => "parse",
            CliError::Config(ConfigError::ConflictingSubcommands { .. }) => "conflicting_subcommands",
            CliError::Config(ConfigError::InvalidParam { .. }) => "invalid_param",
            CliError::Config(ConfigError::Read { .. }) => "io",
            CliError::Config(_) => "invalid_config",
            CliError::Validation(_) => "validation",
            CliError::Convergence(_) => "convergence",
            CliError::Write { .. } => "io",
            CliError::CheckFailed { .. } => "check_failed",
        }
    }

    fn details(&self) -> Value {
        match self {
            CliError::Config(ConfigError::Parse { file, line, reason }) => {
                json!({ "file": file, "line": line, "reason": reason })
            }
            CliError::Config(ConfigError::ConflictingSubcommands { requested, found }) => {
                json!({ "requested": requested.name(), "found": found })
            }
            CliError::Config(ConfigError::InvalidParam { source, at }) => {
                json!({ "field": source.field, "reason": source.reason, "at": at })
            }
            CliError::Config(ConfigError::Invalid { key, at, reason }) => {
                json!({ "key": key, "at": at, "reason": reason })
            }
            CliError::CheckFailed { max_deviation, threshold } => {
                json!({ "max_deviation": max_deviation, "threshold": threshold })
            }
            _ => Value::Null,
        }
    }
}

impl From<CascadeError> for CliError {
    fn from(e: CascadeError) -> Self {
        if e.is_convergence() {
            CliError::Convergence(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

impl From<ProbeError> for CliError {
    fn from(e: ProbeError) -> Self {
        match e {
            ProbeError::SingularSystem { .. } => CliError::Convergence(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<SpectralError> for CliError {
    fn from(e: SpectralError) -> Self {
        match e {
            SpectralError::Cascade(c) => c.into(),
            SpectralError::Probe(p) => p.into(),
            SpectralError::NotPeriodic | SpectralError::TooManyFailures { .. } => CliError::Convergence(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::Cascade(c) => c.into(),
            OracleError::Ode(o) => CascadeError::Ode(o).into(),
            OracleError::PositivityViolation { .. } | OracleError::NoSteadyState => {
                CliError::Convergence(e.to_string())
            }
            OracleError::BadDimension(_) | OracleError::InvalidState(_) => CliError::Validation(e.to_string()),
        }
    }
}

/// Logging on standard error, level from `QWM_LOG` (default `warn`).
pub fn init_logging() {
    let env = env_logger::Env::new().filter_or("QWM_LOG", "warn");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

fn read_config(path: &PathBuf) -> Result<ConfigFile, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Read { path: path.display().to_string(), reason: e.to_string() })?;
    Ok(ConfigFile { name: path.display().to_string(), text })
}

fn check_out(out: &Option<PathBuf>) -> Result<(), CliError> {
    let Some(path) = out else { return Ok(()) };
    let parent = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = parent {
        if !dir.is_dir() {
            return Err(CliError::Write {
                path: path.display().to_string(),
                reason: "parent directory does not exist".into(),
            });
        }
    }
    if path.is_dir() {
        return Err(CliError::Write { path: path.display().to_string(), reason: "is a directory".into() });
    }
    Ok(())
}

/// Executes a validated run. The rendered artifact is returned together
/// with a failure that must be reported after writing it.
pub fn run(cfg: &RunConfig) -> Result<(String, Option<CliError>), CliError> {
    check_out(&cfg.out)?;
    let outcome = commands::execute(cfg)?;
    Ok((render(cfg, &outcome.artifact), outcome.failure))
}

fn emit(text: &str, out: &Option<PathBuf>, stdout: &mut dyn Write) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Write { path: path.display().to_string(), reason: e.to_string() }),
        None => stdout
            .write_all(text.as_bytes())
            .and_then(|_| stdout.flush())
            .map_err(|e| CliError::Write { path: "<stdout>".into(), reason: e.to_string() }),
    }
}

fn report(err: &CliError, format: Format, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let code = err.exit_code() as i32;
    log::debug!("{err}");
    match format {
        Format::Json => {
            let env = output::error_envelope(err.kind(), code, &err.to_string(), err.details());
            let _ = stdout.write_all(env.as_bytes());
        }
        Format::Csv => {
            let _ = writeln!(stderr, "error: {err}");
        }
    }
    code
}

/// Entry point shared by the binary and the tests; returns the exit status.
pub fn run_cli<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{e}");
                    ExitCode::Success as i32
                }
                _ => {
                    let _ = write!(stderr, "{e}");
                    ExitCode::Validation as i32
                }
            };
        }
    };
    let fallback = cli.format.unwrap_or_default();
    let file = match cli.config.as_ref().map(read_config).transpose() {
        Ok(f) => f,
        Err(e) => return report(&e.into(), fallback, stdout, stderr),
    };
    let input = ConfigInput { file, sets: cli.sets, format: cli.format, out: cli.out, jobs: cli.jobs };
    let cfg = match parse_config(cli.command, &input) {
        Ok(c) => c,
        Err(e) => return report(&e.into(), fallback, stdout, stderr),
    };
    log::info!(
        "running {} with {} explicit values",
        cfg.command,
        cfg.values.iter().filter(|v| v.origin != Origin::Default).count()
    );
    match run(&cfg) {
        Ok((text, failure)) => {
            if let Err(e) = emit(&text, &cfg.out, stdout) {
                return report(&e, cfg.format, stdout, stderr);
            }
            match failure {
                Some(e) if cfg.out.is_some() => report(&e, cfg.format, stdout, stderr),
                Some(e) => {
                    log::debug!("{e}");
                    let _ = writeln!(stderr, "error: {e}");
                    e.exit_code() as i32
                }
                None => ExitCode::Success as i32,
            }
        }
        Err(e) => report(&e, cfg.format, stdout, stderr),
    }
}
