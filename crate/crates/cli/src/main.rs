//! `stickyflow` command-line front end.

mod args;
mod commands;
mod config;
mod table;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context as _, Result};
use clap::Parser;

use args::{Cli, Command};
use commands::RunSettings;

/// Seed used when neither a flag, the config nor `STICKYFLOW_SEED` sets one.
const DEFAULT_SEED: u64 = 42;
const DEFAULT_REPLICAS: usize = 10_000;

fn parse(argv: Vec<OsString>) -> Result<Cli, clap::Error> {
    let merged = match config::config_path(&argv) {
        Some(path) => match config::load(&PathBuf::from(path)).and_then(|c| config::merge(argv, &c)) {
            Ok(merged) => merged,
            Err(e) => return Err(clap::Error::raw(clap::error::ErrorKind::InvalidValue, format!("{e:#}\n"))),
        },
        None => argv,
    };
    Cli::try_parse_from(merged)
}

fn seed(flag: Option<u64>) -> Result<u64> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    match std::env::var("STICKYFLOW_SEED") {
        Ok(text) => text.trim().parse().with_context(|| format!("STICKYFLOW_SEED={text:?} is not an unsigned integer")),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let g = &cli.global;
    let ctx = RunSettings {
        seed: seed(g.seed)?,
        replicas: g.replicas.unwrap_or(DEFAULT_REPLICAS),
        parallelism: g.parallelism.unwrap_or_else(stickyflow::verify::default_parallelism).max(1),
    };
    let output = match &cli.command {
        Command::Params(cmd) => commands::params(cmd)?,
        Command::Flow(cmd) => commands::flow(&ctx, cmd)?,
        Command::Chain(cmd) => commands::chain(&ctx, cmd)?,
        Command::Halfplane(cmd) => commands::halfplane(&ctx, cmd)?,
        Command::Verify(cmd) => commands::verify(&ctx, cmd)?,
    };
    commands::write(&output, g.format, g.out.as_ref())?;
    Ok(if output.gate == Some(false) { ExitCode::from(1) } else { ExitCode::SUCCESS })
}

fn main() -> ExitCode {
    let cli = match parse(std::env::args_os().collect()) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
