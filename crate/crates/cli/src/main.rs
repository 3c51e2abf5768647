//! `conceptvec`: batch entry points for the concept embedding pipeline.
//!
//! Exit status is 0 on success, 1 for user or data errors and 2 for
//! internal failures.

mod commands;
mod manifest;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "conceptvec", version, about = "Train and evaluate biomedical concept embeddings")]
struct Cli {
    /// Only log warnings and errors.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Rewrite a PubTator export into a tokenized corpus with concept tokens.
    Normalize(commands::normalize::Args),
    /// Train an embedding on a normalized corpus.
    Train(commands::train::Args),
    /// Nearest neighbours of a token, or the cosine of two tokens.
    Query(commands::query::Args),
    /// Group similarity difference on a concept group dataset.
    EvalIntrinsic(commands::intrinsic::Args),
    /// Protein-protein interaction classification.
    EvalPpi(commands::ppi::Args),
    /// Drug-drug interaction sentence classification.
    EvalDdi(commands::ddi::Args),
    /// Concept counts per type and overlap with a reference list.
    Coverage(commands::coverage::Args),
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Normalize(a) => commands::normalize::run(a),
        Command::Train(a) => commands::train::run(a),
        Command::Query(a) => commands::query::run(a),
        Command::EvalIntrinsic(a) => commands::intrinsic::run(a),
        Command::EvalPpi(a) => commands::ppi::run(a),
        Command::EvalDdi(a) => commands::ddi::run(a),
        Command::Coverage(a) => commands::coverage::run(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).format_timestamp(None).init();
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(_) => ExitCode::from(2),
    }
}
