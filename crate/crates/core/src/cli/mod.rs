//! Batch driver: reads a run configuration, executes the experiments and
//! writes one CSV per experiment plus `manifest.json`.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical error, 4 I/O error.

pub mod config;
pub mod experiments;
pub mod output;

use std::fs;
use std::path::PathBuf;

use clap::Parser;
use serde_json::Value;

use crate::error::BoundError;
pub use config::{Experiment, Grid, RunConfig, EXPERIMENT_KINDS, SCHEMA_VERSION};
pub use experiments::{Outcome, Plan};
use output::{sha256_hex, write_all, ExperimentRecord, Manifest};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Parser)]
#[command(name = "optbound", version, about = "Option price bounds from partial moments")]
pub struct Args {
    /// Run configuration (TOML).
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output` in the configuration.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads for grid evaluation (default: all cores).
    #[arg(long, value_name = "N")]
    pub threads: Option<usize>,
    /// Print the experiment kinds and exit.
    #[arg(long)]
    pub list_experiments: bool,
    /// Parse and validate the configuration without running it.
    #[arg(long)]
    pub validate_only: bool,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical { experiment: String, source: BoundError },
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical { .. } => 3,
            CliError::Io(_) => 4,
        }
    }

    /// Single line of the form `error: <category>[/<kind>]: <message>`.
    pub fn line(&self) -> String {
        let one = |s: &str| s.replace(['\n', '\r'], " ");
        match self {
            CliError::Config(m) => format!("error: config: {}", one(m)),
            CliError::Numerical { experiment, source } => format!(
                "error: numerical/{}: experiment {experiment}: {}",
                source.kind(),
                one(&source.to_string())
            ),
            CliError::Io(m) => format!("error: io: {}", one(m)),
        }
    }
}

/// What a successful run produced.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub output_dir: Option<PathBuf>,
    pub files: Vec<PathBuf>,
    pub manifest: Option<Manifest>,
}

/// Loads and validates a configuration file.
pub fn load_config(path: &std::path::Path) -> Result<(RunConfig, Vec<u8>), CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|_| CliError::Config(format!("{} is not UTF-8", path.display())))?;
    let cfg = RunConfig::parse(text).map_err(CliError::Config)?;
    Ok((cfg, bytes))
}

/// Validates every experiment of a configuration.
pub fn plan(cfg: &RunConfig) -> Result<Vec<Plan>, CliError> {
    cfg.experiments
        .iter()
        .map(|e| Plan::new(e).map_err(|m| CliError::Config(format!("experiment {}: {m}", e.name()))))
        .collect()
}

/// Executes the plans and renders the output files in memory.
pub fn execute(
    cfg: &RunConfig,
    config_bytes: &[u8],
    plans: &[Plan],
) -> Result<(Vec<(String, String)>, Manifest), CliError> {
    let mut files = Vec::new();
    let mut records = Vec::new();
    for p in plans {
        let Outcome { table, summary } =
            p.execute(&cfg.tolerances).map_err(|source| CliError::Numerical {
                experiment: p.name.clone(),
                source,
            })?;
        let file = format!("{}.csv", p.name);
        records.push(ExperimentRecord {
            name: p.name.clone(),
            kind: p.kind.to_string(),
            file: file.clone(),
            rows: table.rows.len(),
            summary,
        });
        files.push((file, table.render(&cfg.inf_sentinel)));
    }
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        schema_version: cfg.schema_version,
        config_sha256: sha256_hex(config_bytes),
        tolerances: cfg.tolerances,
        experiments: records,
    };
    let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    files.push((MANIFEST_FILE.to_string(), text));
    Ok((files, manifest))
}

/// Runs the driver for parsed arguments.
pub fn run(args: &Args) -> Result<RunReport, CliError> {
    if args.list_experiments {
        for (kind, about) in EXPERIMENT_KINDS {
            println!("{kind:<14} {about}");
        }
        return Ok(RunReport {
            output_dir: None,
            files: Vec::new(),
            manifest: None,
        });
    }
    let path = args
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config is required".into()))?;
    let (cfg, bytes) = load_config(path)?;
    let plans = plan(&cfg)?;
    if args.validate_only {
        println!("configuration valid: {} experiment(s)", plans.len());
        return Ok(RunReport {
            output_dir: None,
            files: Vec::new(),
            manifest: None,
        });
    }
    let dir = args
        .out
        .clone()
        .or_else(|| cfg.output.as_ref().map(PathBuf::from))
        .ok_or_else(|| CliError::Config("no output directory: pass --out or set `output`".into()))?;

    let threads = args.threads.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    let (files, manifest) = pool.install(|| execute(&cfg, &bytes, &plans))?;
    let written = write_all(&dir, &files).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    Ok(RunReport {
        output_dir: Some(dir),
        files: written,
        manifest: Some(manifest),
    })
}

/// Summary of one experiment from a manifest, by name.
pub fn summary<'a>(manifest: &'a Manifest, name: &str) -> Option<&'a Value> {
    manifest.experiments.iter().find(|e| e.name == name).map(|e| &e.summary)
}

struct StderrLogger;

impl log::Log for StderrLogger {
    fn enabled(&self, metadata: &log::Metadata) -> bool {
        metadata.level() <= log::Level::Warn
    }

    fn log(&self, record: &log::Record) {
        if self.enabled(record.metadata()) {
            eprintln!("{}: {}", record.level().as_str().to_lowercase(), record.args());
        }
    }

    fn flush(&self) {}
}

static LOGGER: StderrLogger = StderrLogger;

/// Entry point for the binary; returns the process exit code.
pub fn main_entry() -> i32 {
    if log::set_logger(&LOGGER).is_ok() {
        log::set_max_level(log::LevelFilter::Warn);
    }
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&args) {
        Ok(report) => {
            if let Some(dir) = report.output_dir {
                println!("wrote {} file(s) to {}", report.files.len(), dir.display());
            }
            0
        }
        Err(e) => {
            eprintln!("{}", e.line());
            e.exit_code()
        }
    }
}
