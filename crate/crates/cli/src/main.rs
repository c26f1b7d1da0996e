mod commands;
mod config;
mod error;
mod output;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use crate::commands::Command;
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::Outputs;

/// Mean-field, torus and finite-N analysis of a two-branch driven-dissipative ensemble.
#[derive(Debug, Parser)]
#[command(name = "tqc", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// RNG seed (overrides `numerics.seed`).
    #[arg(long)]
    seed: Option<u64>,
}

fn execute(args: &Args) -> CliResult<Vec<PathBuf>> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(dir) = &args.out {
        cfg.out_dir = dir.clone();
    }
    if let Some(seed) = args.seed {
        cfg.numerics.seed = seed;
    }
    let mut out = Outputs::new(&cfg.out_dir)?;
    match commands::run(args.command, &cfg, &mut out) {
        Ok(()) => Ok(out.written().to_vec()),
        Err(e) => {
            out.rollback();
            Err(e)
        }
    }
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!("{}", e.to_json());
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.render().to_string();
            return fail(&CliError::Usage(msg.lines().next().unwrap_or_default().trim_start_matches("error: ").to_string()));
        }
    };
    match execute(&args) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}
