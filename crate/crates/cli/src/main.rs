//! `xlingual`: ingest parallel benchmarks, build within/across-language
//! sets, score predictions, run overlap diagnostics and emit reports.
//!
//! Exit codes: 0 success, 1 validation or scoring failure, 2 usage or I/O
//! error.

mod commands;
mod config;
mod provenance;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::{BuildArgs, DiagnoseArgs, IngestArgs, ReportArgs, ScoreArgs};

#[derive(Parser)]
#[command(
    name = "xlingual",
    version,
    about = "Within/across-language evaluation toolkit"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

/// Settings shared by all commands; they override the config file.
#[derive(Args, Debug, Default)]
pub struct GlobalArgs {
    /// Flat TOML file with defaults for any of these settings.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Fallback distance when no question token occurs in the context.
    #[arg(long, global = true)]
    pub max_len: Option<usize>,
    /// Tokenizer overrides, e.g. `zh=char,th=char,ja=char,de=ws`.
    #[arg(long, global = true)]
    pub tokenizer: Option<String>,
    /// Merge neutral and contradiction into not_entailment (`--collapse=false`
    /// turns off a config value).
    #[arg(long, global = true, num_args = 0..=1, require_equals = true, default_missing_value = "true")]
    pub collapse: Option<bool>,
    /// Share of instances in each of the top and bottom groups.
    #[arg(long, global = true)]
    pub fraction: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse raw benchmark files into canonical JSONL.
    Ingest(IngestArgs),
    /// Build within/across-language eval or training sets.
    Build(BuildArgs),
    /// Score a prediction file against its eval set.
    Score(ScoreArgs),
    /// Answer-distance diagnostics for the best and worst QA instances.
    Diagnose(DiagnoseArgs),
    /// Aggregate score files into tables.
    Report(ReportArgs),
}

/// A failed command and the exit code it maps to.
#[derive(Debug)]
pub enum Failure {
    /// Bad input files, paths or arguments (exit 2).
    Input(anyhow::Error),
    /// Inputs parsed but failed validation or scoring (exit 1).
    Invalid(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 1,
            Failure::Input(_) => 2,
        }
    }

    pub fn input(msg: impl std::fmt::Display) -> Self {
        Failure::Input(anyhow::anyhow!("{msg}"))
    }

    pub fn invalid(msg: impl std::fmt::Display) -> Self {
        Failure::Invalid(anyhow::anyhow!("{msg}"))
    }
}

impl From<xlingual_core::Error> for Failure {
    fn from(e: xlingual_core::Error) -> Self {
        if e.is_input_error() {
            Failure::Input(e.into())
        } else {
            Failure::Invalid(e.into())
        }
    }
}

pub type CmdResult<T = ()> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = config::RunConfig::resolve(&cli.global).and_then(|cfg| match cli.command {
        Command::Ingest(a) => commands::ingest(a, cfg),
        Command::Build(a) => commands::build(a, cfg),
        Command::Score(a) => commands::score(a, cfg),
        Command::Diagnose(a) => commands::diagnose(a, cfg),
        Command::Report(a) => commands::report(a, cfg),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Input(e) | Failure::Invalid(e)) = &f;
            eprintln!("error: {e:#}");
            ExitCode::from(f.code())
        }
    }
}
