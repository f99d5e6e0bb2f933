//! `faultsound` command-line pipeline.
//!
//! Exit codes: 0 success, 1 usage, 2 input format, 3 numeric failure. On
//! failure one line of the form
//! `error: category=<usage|input-format|numeric> exit=<code> message=<text>`
//! is written to stderr.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use faultsound::{Error, ErrorCategory};

#[derive(Debug, Parser)]
#[command(name = "faultsound", version, about = "Acoustic machine-fault detection pipeline")]
struct Cli {
    /// TOML pipeline configuration; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Artifact store root [default: store, or `store_root` from the config].
    #[arg(long, global = true, value_name = "DIR")]
    store: Option<PathBuf>,

    /// Disable autoencoder standardization and split stratification.
    #[arg(long, global = true)]
    strict_paper: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute log-mel spectrograms for WAV files.
    Preprocess(commands::PreprocessArgs),
    /// Partition a manifest into train/validation/test.
    Split(commands::SplitArgs),
    /// Train the dense autoencoder on normal training clips.
    TrainAe(commands::TrainAeArgs),
    /// Score clips by autoencoder reconstruction error.
    ScoreAe(commands::ScoreAeArgs),
    /// Train the supervised classifier head on labeled embeddings.
    TrainHead(commands::TrainHeadArgs),
    /// Score embeddings with a trained classifier head.
    ScoreHead(commands::ScoreHeadArgs),
    /// Fit Local Outlier Factor on normal embeddings.
    LofFit(commands::LofFitArgs),
    /// Score embeddings with a fitted LOF model and contamination vote.
    LofScore(commands::LofScoreArgs),
    /// Compute ROC/AUC of a score file against known labels.
    EvalAuc(commands::EvalAucArgs),
    /// Project embeddings to 2-D with exact t-SNE.
    Tsne(commands::TsneArgs),
    /// Mean attention distance per layer and head.
    AttnDistance(commands::AttnDistanceArgs),
    /// Inspect the run ledger.
    Runs(RunsArgs),
}

#[derive(Debug, Args)]
struct RunsArgs {
    #[command(subcommand)]
    command: RunsCommand,
}

#[derive(Debug, Subcommand)]
enum RunsCommand {
    /// List recorded runs in insertion order.
    List,
}

fn category_name(c: ErrorCategory) -> (&'static str, u8) {
    match c {
        ErrorCategory::Usage => ("usage", 1),
        ErrorCategory::InputFormat => ("input-format", 2),
        ErrorCategory::Numeric => ("numeric", 3),
    }
}

fn report(category: ErrorCategory, message: &str) -> ExitCode {
    let (name, code) = category_name(category);
    let flat = message.replace('\n', " ");
    eprintln!("error: category={name} exit={code} message={flat}");
    ExitCode::from(code)
}

fn run(cli: Cli) -> Result<(), Error> {
    let mut cfg = config::PipelineConfig::load(cli.config.as_deref())?;
    if let Some(store) = cli.store {
        cfg.store_root = store;
    }
    if cli.strict_paper || cfg.strict_paper {
        cfg.apply_strict_paper();
    }
    let ctx = commands::Context::new(cfg)?;
    match cli.command {
        Command::Preprocess(a) => commands::preprocess(&ctx, a),
        Command::Split(a) => commands::split(&ctx, a),
        Command::TrainAe(a) => commands::train_ae(&ctx, a),
        Command::ScoreAe(a) => commands::score_ae(&ctx, a),
        Command::TrainHead(a) => commands::train_head(&ctx, a),
        Command::ScoreHead(a) => commands::score_head(&ctx, a),
        Command::LofFit(a) => commands::lof_fit(&ctx, a),
        Command::LofScore(a) => commands::lof_score(&ctx, a),
        Command::EvalAuc(a) => commands::eval_auc(&ctx, a),
        Command::Tsne(a) => commands::tsne(&ctx, a),
        Command::AttnDistance(a) => commands::attn_distance(&ctx, a),
        Command::Runs(RunsArgs {
            command: RunsCommand::List,
        }) => commands::runs_list(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            let first = e.to_string();
            let first = first.lines().next().unwrap_or("invalid arguments");
            return report(ErrorCategory::Usage, first.trim_start_matches("error: "));
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(e.category(), &e.to_string()),
    }
}
