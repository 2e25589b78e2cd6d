//! Thin command-line front end over the library pipelines.
//!
//! Exit codes: 0 ok, 2 config error, 3 missing upstream artifact,
//! 4 training failure, 1 anything else. Failures also emit a
//! machine-readable JSON error record on stderr.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use w2s_lab::cli::{self, Command, Options};

#[derive(Parser)]
#[command(
    name = "w2s",
    version,
    about = "Weak-to-strong alignment laboratory: synthetic preference tasks, \
             conflicting objectives, deception diagnostics"
)]
struct CliArgs {
    #[command(subcommand)]
    command: CliCommand,
}

#[derive(Args)]
struct CommonFlags {
    /// Experiment config (TOML). Optional for analyze and export-plots.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Root seed override; component seeds derive from it.
    #[arg(long, value_parser = clap::value_parser!(u64).range(..=i64::MAX as u64))]
    seed: Option<u64>,
    /// Output directory (falls back to $W2S_OUT_DIR).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Parallel sweep-point execution.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Subcommand)]
enum CliCommand {
    /// Generate the synthetic preference dataset bundle.
    GenerateData(CommonFlags),
    /// Train the weak and strong ground-truth models.
    TrainGt(CommonFlags),
    /// Run the weak-to-strong protocol and compute the report.
    Run(CommonFlags),
    /// Run a bootstrapping chain with intermediate teachers.
    Bootstrap(CommonFlags),
    /// Run the configured sweep axis.
    Sweep(CommonFlags),
    /// Recompute partition metrics from cached dumps (no retraining).
    Analyze(CommonFlags),
    /// Export plot CSVs from persisted reports.
    ExportPlots(CommonFlags),
}

impl CliCommand {
    fn split(self) -> (Command, CommonFlags) {
        match self {
            CliCommand::GenerateData(f) => (Command::GenerateData, f),
            CliCommand::TrainGt(f) => (Command::TrainGt, f),
            CliCommand::Run(f) => (Command::Run, f),
            CliCommand::Bootstrap(f) => (Command::Bootstrap, f),
            CliCommand::Sweep(f) => (Command::Sweep, f),
            CliCommand::Analyze(f) => (Command::Analyze, f),
            CliCommand::ExportPlots(f) => (Command::ExportPlots, f),
        }
    }
}

fn main() -> ExitCode {
    let args = CliArgs::parse();
    let (command, flags) = args.command.split();

    let out = match cli::resolve_out_dir(flags.out) {
        Ok(out) => out,
        Err(err) => return fail(&err),
    };
    let options = Options {
        config: flags.config,
        seed: flags.seed,
        out,
        jobs: flags.jobs,
    };
    match cli::execute(command, &options) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => fail(&err),
    }
}

fn fail(err: &w2s_lab::Error) -> ExitCode {
    let record = cli::error_record(err);
    eprintln!(
        "{}",
        serde_json::to_string(&record).unwrap_or_else(|_| err.to_string())
    );
    ExitCode::from(err.exit_code() as u8)
}
