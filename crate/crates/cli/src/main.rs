mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use cogaug::augmentation::Strategy;

use crate::config::{parse_k_list, EmbedderKind, ExperimentConfig, Mode};

/// Synthetic monologue augmentation and PLS evaluation pipeline.
#[derive(Debug, Parser)]
#[command(name = "cogaug", version)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Provider mode for generation and embeddings.
    #[arg(long, global = true, value_enum)]
    mode: Option<Mode>,
    /// Parallelism bound.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Corpus JSONL (defaults to the built-in fixture).
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
    /// Synthetic pool JSONL.
    #[arg(long, global = true)]
    pool: Option<PathBuf>,
    /// Embedding provider: mock, ngram or remote.
    #[arg(long, global = true)]
    embedder: Option<EmbedderKind>,
    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the synthetic pool (seven styles per patient).
    Generate,
    /// Embed oral transcriptions and synthetic samples into the cache.
    Embed,
    /// Run the LOOCV sweep and write report files.
    Evaluate(EvaluateArgs),
    /// Summarize a corpus, pool or report file.
    Inspect {
        /// Corpus/pool JSONL, report.json, or a report directory.
        path: PathBuf,
    },
}

#[derive(Debug, Clone)]
pub struct KValues(Vec<usize>);

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Strategies to run (comma separated): none, noise, random, similarity.
    #[arg(long, value_delimiter = ',')]
    strategy: Vec<Strategy>,
    /// Synthetic samples per patient: `0..7`, `3` or `0,2,5`.
    #[arg(long, value_parser = |s: &str| parse_k_list(s).map(KValues))]
    k: Option<KValues>,
    /// Number of seeds for the stochastic strategies.
    #[arg(long)]
    seeds: Option<u64>,
}

fn build_config(g: &GlobalArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &g.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(m) = g.mode {
        cfg.mode = m;
    }
    if let Some(j) = g.jobs {
        cfg.jobs = j;
    }
    if let Some(o) = &g.out {
        cfg.out_dir = o.clone();
    }
    if let Some(c) = &g.corpus {
        cfg.corpus_path = Some(c.clone());
    }
    if let Some(p) = &g.pool {
        cfg.pool_path = Some(p.clone());
    }
    if let Some(e) = g.embedder {
        cfg.embedding.provider = e;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    if let Command::Inspect { path } = &cli.command {
        return commands::inspect(path);
    }
    let mut cfg = build_config(&cli.global)?;
    if let Command::Evaluate(args) = &cli.command {
        if !args.strategy.is_empty() {
            cfg.evaluation.strategies = args.strategy.clone();
        }
        if let Some(k) = &args.k {
            cfg.evaluation.k_values = k.0.clone();
        }
        if let Some(s) = args.seeds {
            cfg.evaluation.seeds = s;
        }
    }
    cfg.validate()?;
    rayon::ThreadPoolBuilder::new().num_threads(cfg.jobs).build_global().ok();
    match cli.command {
        Command::Generate => commands::generate(&cfg),
        Command::Embed => commands::embed(&cfg),
        Command::Evaluate(_) => commands::evaluate(&cfg),
        Command::Inspect { .. } => unreachable!(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
