//! `cohmark`: ingest transcripts, build pairs, train and evaluate coherence
//! scorers, compute the longitudinal marker, and report.

mod commands;
mod config;
mod plot;
mod store;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use crate::commands::{AssociateArgs, EvaluateArgs, IngestArgs, MarkerArgs, PairsArgs, ReportArgs, SynthArgs, TrainArgs};
use crate::config::Config;
use crate::store::Store;

#[derive(Debug, Parser)]
#[command(name = "cohmark", version, about = "Coherence scoring and digital marker pipeline")]
struct Cli {
    /// TOML config; flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config's `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output root holding the run store.
    #[arg(long, global = true, default_value = "cohmark-out")]
    out: PathBuf,
    /// More log output (-v info, -vv debug); `RUST_LOG` also applies.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse transcripts into a corpus.
    Ingest(IngestArgs),
    /// Split subjects and enumerate coherent / incoherent pairs.
    Pairs(PairsArgs),
    /// Grid-search, train seeded runs, and report test metrics.
    Train(TrainArgs),
    /// Score a split with a trained run's scorers.
    Evaluate(EvaluateArgs),
    /// Per-narrative marker, per-subject series, cohort and disruptive tables.
    Marker(MarkerArgs),
    /// Bin subjects by biomarker change and tabulate marker change.
    Associate(AssociateArgs),
    /// Render tables and plots from a marker run and its upstream runs.
    Report(ReportArgs),
    /// Write synthetic transcripts.
    Synth(SynthArgs),
}

fn run(cli: Cli) -> Result<()> {
    let mut config = Config::load(cli.config.as_deref())?;
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    let store = Store::new(&cli.out);
    let id = match cli.command {
        Command::Ingest(a) => commands::ingest(&store, config, a)?,
        Command::Pairs(a) => commands::pairs(&store, config, a)?,
        Command::Train(a) => commands::train_cmd(&store, config, a)?,
        Command::Evaluate(a) => commands::evaluate(&store, config, a)?,
        Command::Marker(a) => commands::marker(&store, config, a)?,
        Command::Associate(a) => commands::associate(&store, config, a)?,
        Command::Report(a) => commands::report(&store, config, a)?,
        Command::Synth(a) => {
            commands::synth(&config, a)?;
            return Ok(());
        }
    };
    println!("run_id={id}");
    Ok(())
}

/// Coarse error class for the machine-readable tail line.
fn error_kind(e: &anyhow::Error) -> &'static str {
    use cohmark::Error as E;
    for cause in e.chain() {
        if let Some(err) = cause.downcast_ref::<E>() {
            return match err {
                E::Parse { .. } | E::NoUtterances | E::File { .. } | E::DuplicateNarrative { .. } => "input",
                E::Config(_) | E::Capability(_) | E::Untrained => "config",
                E::Io { .. } => "io",
                E::NonFiniteLoss { .. } => "training",
                _ => "data",
            };
        }
        if cause.downcast_ref::<toml::de::Error>().is_some() {
            return "config";
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return "io";
        }
    }
    "runtime"
}

/// `error kind=<kind> message=<json string>` on one line.
fn error_tail(kind: &str, message: &str) -> String {
    let one_line = message.split_whitespace().collect::<Vec<_>>().join(" ");
    format!(
        "error kind={kind} message={}",
        serde_json::to_string(&one_line).unwrap_or_else(|_| "\"?\"".into())
    )
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if !e.use_stderr() {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let _ = e.print();
            eprintln!("{}", error_tail("usage", &e.kind().to_string()));
            return ExitCode::from(2);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_tail(error_kind(&e), &format!("{e:#}")));
            ExitCode::FAILURE
        }
    }
}
