//! `opinionrank` command-line tool.
//!
//! Exit status: 0 on success, 1 on data or runtime errors, 2 on usage errors.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::builder::PossibleValuesParser;
use clap::{Args, CommandFactory, Parser, Subcommand};
use opinionrank::rank::DEFAULT_POWER;
use opinionrank::simgen::Experiment;
use opinionrank::{OpinionRank, Task, TopNWeighting};

#[derive(Debug, Parser)]
#[command(name = "opinionrank", version, about = "Aggregate unreliable annotations by spectral source ranking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Aggregate an annotation file into labels, scores and source rankings.
    Aggregate(AggregateArgs),
    /// Run a synthetic experiment over seeded trials.
    Simulate(SimulateArgs),
    /// Compare a predictions file against ground truth.
    Score(ScoreArgs),
    /// Time full ranking passes on random binary opinions.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
struct RankArgs {
    /// Maximum power iterations.
    #[arg(long, default_value_t = DEFAULT_POWER as u64, value_parser = clap::value_parser!(u64).range(1..))]
    power: u64,
    /// Number of top-ranked sources that vote. Defaults to all of them.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    top_n: Option<u64>,
    /// Use the kept weights as-is instead of renormalizing them.
    #[arg(long)]
    raw_top_n: bool,
}

impl RankArgs {
    fn config(&self) -> OpinionRank {
        let mut cfg = OpinionRank::new().with_power(self.power as usize);
        if let Some(n) = self.top_n {
            cfg = cfg.with_top_n(n as usize);
        }
        if self.raw_top_n {
            cfg = cfg.with_weighting(TopNWeighting::Raw);
        }
        cfg
    }
}

#[derive(Debug, Args)]
struct OutArgs {
    /// Directory for output files.
    #[arg(long, env = "OPINIONRANK_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct AggregateArgs {
    /// Annotation CSV: an instance id column, then one column per source.
    file: PathBuf,
    #[command(flatten)]
    rank: RankArgs,
    /// Labeling task. Inferred from the class count when omitted.
    #[arg(long, value_parser = PossibleValuesParser::new(["binary", "multinomial", "multilabel"]))]
    task: Option<String>,
    /// Cell text that marks a missing opinion.
    #[arg(long, default_value = "")]
    missing_token: String,
    /// Comma-separated class tokens, in class-id order.
    #[arg(long, value_delimiter = ',')]
    classes: Option<Vec<String>>,
    /// Also write majority-vote and Dawid-Skene predictions.
    #[arg(long)]
    baselines: bool,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(value_parser = PossibleValuesParser::new(Experiment::NAMES))]
    experiment: String,
    /// Number of seeded trials per configuration.
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    trials: u64,
    /// Run 50,000 trials per configuration.
    #[arg(long, conflicts_with = "trials")]
    paper_scale: bool,
    /// Base seed; trial t uses seed + t.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated methods: opinionrank, majority-vote, dawid-skene.
    #[arg(long, value_delimiter = ',', default_value = "opinionrank,majority-vote,dawid-skene")]
    methods: Vec<String>,
    /// Comma-separated labeler counts. Defaults to the experiment's sweep.
    #[arg(long, value_delimiter = ',')]
    sources: Option<Vec<usize>>,
    /// Instances per dataset.
    #[arg(long)]
    instances: Option<usize>,
    /// Bad labelers (whitehill-difficulty only).
    #[arg(long)]
    n_bad: Option<usize>,
    #[command(flatten)]
    rank: RankArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    /// Predictions CSV with instance,label rows.
    predictions: PathBuf,
    /// Ground-truth CSV with instance,label rows.
    truth: PathBuf,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Comma-separated source counts.
    #[arg(long, value_delimiter = ',', default_value = "100")]
    sources: Vec<usize>,
    /// Comma-separated instance counts.
    #[arg(long, value_delimiter = ',', default_value = "1000")]
    instances: Vec<usize>,
    /// Timed passes per cell.
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    repetitions: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: OutArgs,
}

enum Failure {
    Usage(String),
    Run(opinionrank::Error),
}

impl From<opinionrank::Error> for Failure {
    fn from(e: opinionrank::Error) -> Self {
        Failure::Run(e)
    }
}

type CmdResult = Result<(), Failure>;

fn parse_task(task: &Option<String>) -> Option<Task> {
    task.as_deref().map(|t| t.parse().expect("restricted by clap"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Aggregate(a) => commands::aggregate(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Score(a) => commands::score(a),
        Command::Bench(a) => commands::bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            Cli::command().error(clap::error::ErrorKind::ValueValidation, msg).exit()
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
