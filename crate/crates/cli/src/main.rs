mod commands;
mod config;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use commands::{run, Command, RunError};
use config::{ExperimentConfig, Format};

/// Counterexample families, functionals and verdicts for LSI, Talagrand and BHI instability.
///
/// Exit status: 0 when every check passes, 2 when a claim fails at its tolerance, 1 on errors.
#[derive(Parser, Debug)]
#[command(name = "lsi-instab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON file with the same keys as the flags; flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    exp: ExperimentConfig,
}

fn execute(cli: Cli) -> Result<bool, RunError> {
    let file = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let cfg = cli.exp.over(file);
    cfg.validate()?;
    let art = run(&cli.command, &cfg)?;
    let body = match cfg.format() {
        Format::Csv => art.csv,
        Format::Json => art.json + "\n",
    };
    match (&cfg.out, &cli.command) {
        (Some(path), c) if !matches!(c, Command::FixturesRegen) => commands::write(path, &body)?,
        _ => std::io::stdout().write_all(body.as_bytes()).map_err(|e| RunError::Io(e.to_string()))?,
    }
    for line in &art.summary {
        eprintln!("{line}");
    }
    Ok(art.pass)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
