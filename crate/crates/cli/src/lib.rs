//! Experiment driver: config ingestion, subcommand pipelines and CSV output.

pub mod commands;
pub mod config;
pub mod csv;
pub mod error;

use std::path::{Path, PathBuf};

pub use commands::{Command, Output};
pub use config::Config;
pub use error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct RunArgs {
    /// Falls back to the command recorded in a manifest.
    pub command: Option<Command>,
    pub config: PathBuf,
    pub out: PathBuf,
    pub threads: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub command: Command,
    pub files: Vec<PathBuf>,
    pub summary: String,
    pub warnings: Vec<String>,
}

/// Loads the config, runs the pipeline and writes its CSVs and
/// `manifest.toml` into `args.out`. When a budget cap truncated the run the
/// files are still written and [`CliError::Budget`] is returned.
pub fn run(args: &RunArgs) -> Result<RunReport, CliError> {
    match args.threads {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k.max(1))
            .build()
            .map_err(|e| CliError::Io(format!("cannot start {k} threads: {e}")))?
            .install(|| run_inner(args)),
        None => run_inner(args),
    }
}

fn run_inner(args: &RunArgs) -> Result<RunReport, CliError> {
    let source = std::fs::read_to_string(&args.config).map_err(|e| CliError::Config {
        path: args.config.clone(),
        line: None,
        message: format!("cannot read: {e}"),
    })?;
    let mut config = Config::parse(&source, &args.config)?;
    let command = match (args.command, &config.run) {
        (Some(c), _) => c,
        (None, Some(run)) => Command::parse(&run.command).ok_or_else(|| CliError::Config {
            path: args.config.clone(),
            line: None,
            message: format!("unknown command '{}' in [run]", run.command),
        })?,
        (None, None) => {
            return Err(CliError::Config {
                path: args.config.clone(),
                line: None,
                message: "no subcommand given and the config is not a manifest".into(),
            })
        }
    };
    let mut warnings = Vec::new();
    if let Some(run) = &config.run {
        if run.version != env!("CARGO_PKG_VERSION") {
            warnings.push(format!("manifest written by version {}, running {}", run.version, env!("CARGO_PKG_VERSION")));
        }
    }
    if let Some(seed) = args.seed {
        config.sweep.seed = seed;
    }
    let setup = commands::Setup::new(&config, &args.config, &source)?;
    let output = match command {
        Command::Periodic => commands::periodic(&config, &setup),
        Command::Expand => commands::expand(&config, &setup, &args.config, &source),
        Command::Mc => commands::mc(&config, &setup),
        Command::Oned => commands::oned(&config, &setup, &args.config, &source),
        Command::Figure => commands::figure(&config, &setup),
    }?;
    let mut files = Vec::new();
    files.push(write(&args.out, "manifest.toml", &config.manifest(command.name())?)?);
    for (name, text) in &output.files {
        files.push(write(&args.out, name, text)?);
    }
    warnings.extend(output.warnings);
    if let Some(message) = output.budget {
        return Err(CliError::Budget { module: "defect_expansion", message });
    }
    Ok(RunReport { command, files, summary: output.summary, warnings })
}

fn write(dir: &Path, name: &str, text: &str) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}
