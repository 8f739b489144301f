//! Command-line front end: config files, subcommand dispatch, seeds, and
//! JSON reports.

pub mod config;
pub mod error;
pub mod run;
pub mod settings;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};

pub use error::{CliError, CliResult, ErrorKind};
pub use run::{run, RunOutput, RunReport};
pub use settings::{resolve, Inputs, RunConfig, Subcommand};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CommandArg {
    Symbolic,
    Spectral,
    Vmc,
    SptOrders,
    Rqmc,
}

impl From<CommandArg> for Subcommand {
    fn from(c: CommandArg) -> Self {
        match c {
            CommandArg::Symbolic => Subcommand::Symbolic,
            CommandArg::Spectral => Subcommand::Spectral,
            CommandArg::Vmc => Subcommand::Vmc,
            CommandArg::SptOrders => Subcommand::SptOrders,
            CommandArg::Rqmc => Subcommand::Rqmc,
        }
    }
}

/// Perturbation series, random-walk estimators and reptation Monte Carlo.
#[derive(Debug, Parser)]
#[command(name = "spt", version)]
pub struct Cli {
    /// Subcommand; otherwise taken from the config file.
    #[arg(value_enum)]
    pub command: Option<CommandArg>,
    /// Run configuration file.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Model file for `spectral`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Highest perturbative order.
    #[arg(long)]
    pub order: Option<usize>,
    /// Compare with the diagonalization oracle.
    #[arg(long)]
    pub oracle: bool,
    /// Print sum-over-states forms as well.
    #[arg(long)]
    pub sum_over_states: bool,
    /// Local-energy series CSV for `spt-orders`.
    #[arg(long)]
    pub series: Option<PathBuf>,
    /// Also run at half the step size and extrapolate (`rqmc`).
    #[arg(long)]
    pub extrapolate: bool,
    /// Master seed.
    #[arg(long, env = "SPT_SEED")]
    pub seed: Option<u64>,
    /// Write the JSON report here.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Write the per-step or per-sweep series here.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Include wall time in the report.
    #[arg(long)]
    pub timing: bool,
    /// Override any config key, e.g. `--set alpha=1.2`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

impl Cli {
    pub fn inputs(&self) -> CliResult<Inputs> {
        use config::Value;
        let config_text = self
            .config
            .as_deref()
            .map(settings::read_config)
            .transpose()?;
        let mut overrides = Vec::new();
        for item in &self.set {
            let (k, v) = item.split_once('=').ok_or_else(|| {
                CliError::config(format!("--set expects KEY=VALUE, got {item:?}"))
            })?;
            let value = config::parse_value(v.trim())
                .map_err(|e| CliError::config(format!("--set {k}: {e}")))?;
            overrides.push((k.trim().to_string(), value));
        }
        let path = |p: &Path| Value::Str(p.display().to_string());
        if let Some(p) = &self.model {
            overrides.push(("model".into(), path(p)));
        }
        if let Some(n) = self.order {
            overrides.push(("order".into(), Value::Int(n as i64)));
        }
        if self.oracle {
            overrides.push(("oracle".into(), Value::Bool(true)));
        }
        if self.sum_over_states {
            overrides.push(("sum_over_states".into(), Value::Bool(true)));
        }
        if let Some(p) = &self.series {
            overrides.push(("series".into(), path(p)));
        }
        if self.extrapolate {
            overrides.push(("extrapolate".into(), Value::Bool(true)));
        }
        if let Some(p) = &self.csv {
            overrides.push(("csv_output".into(), path(p)));
        }
        Ok(Inputs {
            subcommand: self.command.map(Into::into),
            config_text,
            overrides,
            seed: self.seed,
            output: self.output.clone(),
        })
    }
}

/// Write via a temporary file in the target directory and rename, so a
/// failed run never leaves a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> CliResult<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let fail = |e: std::io::Error| CliError::io(format!("cannot write {}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(fail)?;
    tmp.write_all(contents.as_bytes()).map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}

/// Resolve, run, and write every output; returns what goes to stdout.
pub fn execute(cli: &Cli) -> CliResult<String> {
    let config = resolve(&cli.inputs()?)?;
    let output = run(&config, cli.timing)?;
    if let Some((path, text)) = &output.csv {
        write_atomic(path, text)?;
    }
    if let Some(path) = &config.output_path {
        write_atomic(path, &output.report.to_json())?;
    }
    Ok(output.stdout)
}
