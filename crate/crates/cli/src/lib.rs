//! Command-line front end of `mosumci`.
//!
//! Every subcommand is available as a function returning its payload so the
//! binary stays a thin shell around [`run`].

pub mod args;
pub mod commands;
pub mod input;

use std::path::Path;

use serde::Serialize;
use serde_json::Value;

pub use args::{Cli, Command};
pub use commands::{cmd_ci, cmd_detect, cmd_limits, cmd_simulate, LimitsOutput, SimulateOutput};

/// Version of the JSON payloads written by every subcommand.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, configuration or unreadable/unwritable files.
    #[error("{0}")]
    Usage(String),
    /// Malformed or unusable input data.
    #[error("{0}")]
    Data(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Internal(_) => 4,
        }
    }
}

impl From<mosumci::Error> for CliError {
    fn from(e: mosumci::Error) -> Self {
        use mosumci::Error as E;
        match e {
            E::SeriesTooShort(_) | E::NonFinite(_) => CliError::Data(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

/// Reproducibility record embedded in every JSON payload.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub config: Value,
    pub seed: Option<u64>,
}

impl RunManifest {
    pub fn new(command: &'static str, config: Value) -> Self {
        Self {
            tool: "mosumci",
            version: env!("CARGO_PKG_VERSION"),
            command,
            inputs: Vec::new(),
            outputs: Vec::new(),
            config,
            seed: None,
        }
    }
}

pub(crate) fn to_value<T: Serialize>(v: &T) -> Result<Value, CliError> {
    serde_json::to_value(v).map_err(|e| CliError::Internal(e.to_string()))
}

pub(crate) fn path_string(p: &Path) -> String {
    p.display().to_string()
}

fn write_text(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", p.display()))),
        None => {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError::Usage(format!("cannot write to stdout: {e}")))
        }
    }
}

pub fn to_json_text(v: &Value) -> Result<String, CliError> {
    serde_json::to_string_pretty(v)
        .map(|s| s + "\n")
        .map_err(|e| CliError::Internal(e.to_string()))
}

/// Runs a parsed command line, writing results to the requested files or stdout.
pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Detect(a) => write_text(a.output.as_deref(), &to_json_text(&cmd_detect(&a)?)?),
        Command::Ci(a) => write_text(a.output.as_deref(), &to_json_text(&cmd_ci(&a)?)?),
        Command::Simulate(a) => {
            let out = cmd_simulate(&a)?;
            if let Some(p) = &a.csv {
                write_text(Some(p), &out.csv)?;
            }
            write_text(a.json.as_deref(), &to_json_text(&out.json)?)
        }
        Command::Limits(a) => {
            let out = cmd_limits(&a)?;
            if let Some(p) = &a.output {
                write_text(Some(p), &out.csv)?;
            }
            write_text(a.summary.as_deref(), &to_json_text(&out.summary)?)
        }
    }
}
