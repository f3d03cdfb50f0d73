use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use weakhom::{run, Command, RunArgs};

/// Perturbative and Monte Carlo homogenization experiments.
#[derive(Debug, Parser)]
#[command(name = "weakhom", version)]
struct Cli {
    /// Pipeline to run; may be omitted when --config points at a manifest.
    command: Option<Command>,
    /// Experiment config (TOML) or a manifest.toml from an earlier run.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let args = RunArgs { command: cli.command, config: cli.config, out: cli.out, threads: cli.threads, seed: cli.seed };
    match run(&args) {
        Ok(report) => {
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            print!("{}", report.summary);
            for f in &report.files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
