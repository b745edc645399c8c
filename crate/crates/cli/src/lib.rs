//! Command-line front end: strict experiment configs, one subcommand per study, and
//! hashed, reproducible artifacts.

pub mod commands;
pub mod config;
pub mod output;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use thiserror::Error;

use commands::{Outcome, Verdict};
use config::{ConfigError, RunConfig};
use output::{RunInfo, TOOL_VERSION};

#[derive(Debug, Parser)]
#[command(name = "slowfast", version = TOOL_VERSION, about = "Slow-fast SPDE averaging experiments")]
pub struct Cli {
    /// Experiment document (TOML); built-in defaults when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides `seed_base`.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Caps the worker pool.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    /// Overrides `[output] directory`.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Re-runs into a scratch directory and compares against the existing manifest.
    #[arg(long, global = true)]
    pub verify: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// One coupled slow-fast path.
    Simulate,
    /// One frozen fast path ending at `[measure] t`.
    Frozen,
    /// Pullback ensemble of the evolution measure.
    Measure,
    /// Averaged drift, its Bohr limit and the limit coefficients.
    Average,
    /// Strong convergence study.
    Converge,
    /// Block-frozen auxiliary process study.
    Khasminskii,
    /// Almost-periodicity diagnostics.
    Apcheck,
    /// Sampled structural condition checks.
    Conditions,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Frozen => "frozen",
            Command::Measure => "measure",
            Command::Average => "average",
            Command::Converge => "converge",
            Command::Khasminskii => "khasminskii",
            Command::Apcheck => "apcheck",
            Command::Conditions => "conditions",
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("{context}: {source}{}", hint(source))]
    Core {
        context: String,
        source: slowfast::Error,
    },
    #[error("io: {0}")]
    Io(String),
    #[error("verify: {0}")]
    Verify(String),
}

fn hint(e: &slowfast::Error) -> String {
    match e.root() {
        slowfast::Error::HorizonTooShort { required, .. } => {
            format!("\nhint: set [measure] horizon to at least {required}")
        }
        slowfast::Error::EnsembleTooSmall { required_m, .. } => {
            format!("\nhint: set [provider] ensemble_m to at least {required_m}")
        }
        _ => String::new(),
    }
}

impl CliError {
    pub fn core(context: &str, source: slowfast::Error) -> Self {
        CliError::Core { context: context.into(), source }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub fn dispatch(command: Command, cfg: &RunConfig) -> Result<Outcome, CliError> {
    match command {
        Command::Simulate => commands::simulate(cfg),
        Command::Frozen => commands::frozen(cfg),
        Command::Measure => commands::measure(cfg),
        Command::Average => commands::average(cfg),
        Command::Converge => commands::converge(cfg),
        Command::Khasminskii => commands::khasminskii(cfg),
        Command::Apcheck => commands::apcheck(cfg),
        Command::Conditions => commands::conditions(cfg),
    }
}

/// Effective config: file (or defaults) with command-line overrides applied.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed_base = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output.directory = out.display().to_string();
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn config_hash(cfg: &RunConfig) -> String {
    // The output directory does not affect results.
    let mut c = cfg.clone();
    c.output.directory.clear();
    output::sha256_hex(c.to_toml().as_bytes())
}

fn run_into(command: Command, cfg: &RunConfig, dir: &Path) -> Result<(Outcome, output::Manifest), CliError> {
    let start = std::time::Instant::now();
    let mut outcome = dispatch(command, cfg)?;
    let elapsed = start.elapsed().as_secs_f64();
    match &mut outcome.artifacts.timing {
        serde_json::Value::Object(m) => {
            m.entry("total_seconds").or_insert(elapsed.into());
        }
        t => *t = serde_json::json!({ "total_seconds": elapsed }),
    }
    let info = RunInfo {
        command: command.name(),
        seed_base: cfg.seed_base,
        config_hash: config_hash(cfg),
        write_json: cfg.output.formats.iter().any(|f| f == "json"),
        write_csv: cfg.output.formats.iter().any(|f| f == "csv"),
    };
    let manifest = output::write_run(dir, &info, &outcome.artifacts)?;
    Ok((outcome, manifest))
}

/// Process exit status: 0 pass, 2 flagged, 1 error.
pub fn exit_code(result: &Result<Outcome, CliError>) -> i32 {
    match result {
        Ok(o) if o.verdict == Verdict::Pass => 0,
        Ok(_) => 2,
        Err(_) => 1,
    }
}

/// Runs the selected command (or its verification) and writes the artifacts.
pub fn execute(cli: &Cli) -> Result<Outcome, CliError> {
    let cfg = resolve_config(cli)?;
    let dir = PathBuf::from(&cfg.output.directory);
    if !cli.verify {
        return run_into(cli.command, &cfg, &dir).map(|(o, _)| o);
    }
    let old = output::read_manifest(&dir).map_err(CliError::Verify)?;
    if old.config_hash != config_hash(&cfg) || old.command != cli.command.name() {
        return Err(CliError::Verify("manifest was produced by a different config or command".into()));
    }
    let stale = output::stale_files(&dir, &old);
    if !stale.is_empty() {
        return Err(CliError::Verify(format!("files changed since the run: {}", stale.join(", "))));
    }
    let scratch = output::scratch_dir("verify");
    let rerun = run_into(cli.command, &cfg, &scratch);
    let _ = std::fs::remove_dir_all(&scratch);
    let (outcome, new) = rerun?;
    let diff = output::deterministic_mismatches(&old, &new);
    if !diff.is_empty() {
        return Err(CliError::Verify(format!("re-run differs in: {}", diff.join(", "))));
    }
    Ok(outcome)
}

/// Entry point shared by the binary: prints the verdict and returns the exit status.
pub fn main_with(cli: Cli) -> i32 {
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be >= 1");
            return 1;
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot size the worker pool: {e}");
            return 1;
        }
    }
    let result = execute(&cli);
    let code = exit_code(&result);
    match &result {
        Ok(_) if code == 0 => {
            let what = if cli.verify { "verified" } else { "pass" };
            println!("{}: {what}", cli.command.name());
        }
        Ok(o) => {
            println!("{}: flagged", cli.command.name());
            for f in &o.flags {
                println!("  - {f}");
            }
        }
        Err(e) => eprintln!("error: {e}"),
    }
    code
}
