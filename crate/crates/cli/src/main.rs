//! `posasc`: ingest benchmarks, train and evaluate position-biased aspect
//! sentiment classifiers, run the robustness grid, and render analyses.

mod commands;
mod error;
mod manifest;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{eval, explain, ingest, proximity, robustness, split, train};
use error::CliError;
use settings::FileConfig;

#[derive(Parser, Debug)]
#[command(name = "posasc", version, about = "Position-biased aspect sentiment classification workbench")]
struct Cli {
    /// INI-style settings file; flags on the command line take precedence
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse a SemEval XML or ARTS JSON file, dump it as JSONL, print label counts
    Ingest(ingest::IngestArgs),
    /// Draw a dev split from a training set
    Split(split::SplitArgs),
    /// Train one model and keep its best dev epoch
    Train(train::TrainArgs),
    /// Score a checkpoint on a test set
    Eval(eval::EvalArgs),
    /// Run the in-domain / out-of-domain / adversarial grid
    Robustness(robustness::RobustnessArgs),
    /// Aspect-opinion proximity density from pair annotations
    Proximity(proximity::ProximityArgs),
    /// Saliency or attention heatmap for one sentence
    Explain(explain::ExplainArgs),
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let cfg = cli.config.as_deref();
    match cli.command {
        Command::Ingest(a) => ingest::run(a, &FileConfig::load(cfg, "ingest", &["format", "domain", "split"])?),
        Command::Split(a) => split::run(
            a,
            &FileConfig::load(cfg, "split", &["format", "domain", "dev-size", "seed"])?,
        ),
        Command::Train(a) => train::run(a, &FileConfig::load(cfg, "train", &train::keys())?),
        Command::Eval(a) => eval::run(a, &FileConfig::load(cfg, "eval", &["format", "domain", "jobs"])?),
        Command::Robustness(a) => robustness::run(a, &FileConfig::load(cfg, "robustness", &robustness::keys())?),
        Command::Proximity(a) => proximity::run(
            a,
            &FileConfig::load(cfg, "proximity", &["bandwidth", "grid-points", "lo", "hi"])?,
        ),
        Command::Explain(a) => explain::run(a, &FileConfig::load(cfg, "explain", &["format", "domain"])?),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
