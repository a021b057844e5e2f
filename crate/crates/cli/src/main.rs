//! Command-line dispatcher: extract, analyze and compare pipeline variants.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gitprism_core::config::ConfigFile;
use gitprism_core::pipeline::{run, RunError, RunOptions, RunSummary, Stage};

#[derive(Parser)]
#[command(
    name = "gitprism",
    version,
    about = "Git repository mining laboratory with pluggable pipeline variants"
)]
struct Cli {
    /// TOML configuration describing the repository and variants.
    #[arg(long, global = true, default_value = "gitprism.toml")]
    config: PathBuf,
    /// Output directory for the artifact tree.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads for extraction.
    #[arg(long, global = true, default_value_t = 4)]
    jobs: usize,
    /// Override the seed recorded in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse the git history into fact tables.
    Extract,
    /// Extract and build per-window developer networks.
    Networks,
    /// Run the core/peripheral role agreement study.
    Roles,
    /// Run the team-size vs productivity study.
    Brooks,
    /// Run the developer turnover vs bug density study.
    Turnover,
    /// Run every configured variant and study, then compare conclusions.
    Compare,
    /// Full run plus the markdown report (works with a single variant).
    Report,
}

fn execute(cli: &Cli) -> Result<RunSummary, RunError> {
    let text = std::fs::read_to_string(&cli.config).map_err(|e| {
        RunError::Config(format!("cannot read {}: {e}", cli.config.display()))
    })?;
    let resolved = ConfigFile::parse(&text)?.resolve(cli.seed)?;
    let stage = match cli.command {
        Command::Extract => Stage::Extract,
        Command::Networks => Stage::Networks,
        Command::Roles => Stage::Roles,
        Command::Brooks => Stage::Brooks,
        Command::Turnover => Stage::Turnover,
        Command::Compare => Stage::Compare,
        Command::Report => Stage::Report,
    };
    run(
        &resolved,
        stage,
        &RunOptions {
            out_dir: cli.out.clone(),
            jobs: cli.jobs,
            seed_override: cli.seed,
        },
    )
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(summary) => {
            for line in &summary.log {
                println!("{line}");
            }
            println!("artifacts written to {}", cli.out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
