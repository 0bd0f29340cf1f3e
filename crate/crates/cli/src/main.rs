//! `osnlink` command-line driver.

mod commands;
mod manifest;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use osnlink::countermeasures::DEFAULT_GRID_SIZE;
use serde::Serialize;

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;
pub const EXIT_INFEASIBLE: u8 = 3;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Infeasible(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Infeasible(_) => EXIT_INFEASIBLE,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "error: {m}"),
            CliError::Infeasible(m) => write!(f, "infeasible: {m}"),
        }
    }
}

impl From<osnlink::Error> for CliError {
    fn from(e: osnlink::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "osnlink", version, about = "Cross-network profile matching and countermeasures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic pair of corpora with ground-truth labels.
    Generate(GenerateArgs),
    /// Fit the topic model used for interest similarity.
    FitLda(FitLdaArgs),
    /// Train a similarity weight model on labeled pairs.
    Train(TrainArgs),
    /// Score all pairs and compute the one-to-one assignment.
    Match(MatchArgs),
    /// Precision, recall and success rate of a match result.
    Evaluate(EvaluateArgs),
    /// Plan profile distortions that push coupled scores below tau.
    Mitigate(MitigateArgs),
    /// Run a full synthetic experiment end to end.
    Experiment(ExperimentArgs),
}

/// Reference data; bundled tables are used when a flag is absent.
#[derive(Args, Debug, Clone, Serialize)]
pub struct RefArgs {
    /// Gazetteer CSV (`place,lat,lon`).
    #[arg(long)]
    pub gazetteer: Option<PathBuf>,
    /// First-name gender table CSV (`name,male,female`).
    #[arg(long)]
    pub names: Option<PathBuf>,
    /// Directory holding `positive.txt` and `negative.txt`.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Zero,
    Moderate,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Trainer {
    Linreg,
    Svr,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentName {
    Exp1,
    Exp2,
    Exp3,
    Exp4,
}

/// Generator settings shared by `generate` and `experiment`.
#[derive(Args, Debug, Clone, Serialize)]
pub struct GeneratorArgs {
    /// Noise preset applied before `--config` and `--set`.
    #[arg(long, value_enum, default_value = "moderate")]
    pub preset: Preset,
    /// `key = value` generator config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Single `key=value` override; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Overrides the seed of the preset or config file.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug, Serialize)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub generator: GeneratorArgs,
    #[command(flatten)]
    pub refs: RefArgs,
    /// Topic vocabulary file (`topic: word word ...` lines).
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct FitLdaArgs {
    #[arg(long)]
    pub aux: PathBuf,
    #[arg(long)]
    pub target: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub topics: usize,
    #[arg(long, default_value_t = 500)]
    pub iterations: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub aux: PathBuf,
    #[arg(long)]
    pub target: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub lda_model: Option<PathBuf>,
    #[command(flatten)]
    pub refs: RefArgs,
    #[arg(long, value_enum, default_value = "exp1")]
    pub experiment: ExperimentName,
    #[arg(long, value_enum, default_value = "linreg")]
    pub trainer: Trainer,
    /// SVR box constraint.
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    /// SVR tube width.
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct MatchArgs {
    #[arg(long)]
    pub aux: PathBuf,
    #[arg(long)]
    pub target: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub lda_model: Option<PathBuf>,
    #[command(flatten)]
    pub refs: RefArgs,
    /// Acceptance threshold; every assignment is accepted when absent.
    #[arg(long, allow_negative_numbers = true)]
    pub threshold: Option<f64>,
    /// Target ids to attack, one per line (targeted attack).
    #[arg(long)]
    pub victims: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub aux: PathBuf,
    #[arg(long)]
    pub target: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    /// `matches.csv` written by `match`.
    #[arg(long)]
    pub matches: PathBuf,
    /// Target ids of a targeted attack, one per line.
    #[arg(long)]
    pub victims: Option<PathBuf>,
    /// Defaults to the operating point of the precision/recall curve.
    #[arg(long, allow_negative_numbers = true)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct MitigateArgs {
    #[arg(long)]
    pub aux: PathBuf,
    #[arg(long)]
    pub target: PathBuf,
    /// Coupled pairs to protect.
    #[arg(long)]
    pub labels: PathBuf,
    /// Linear-regression model.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub lda_model: Option<PathBuf>,
    #[command(flatten)]
    pub refs: RefArgs,
    #[arg(long, allow_negative_numbers = true)]
    pub tau: f64,
    #[arg(long, default_value_t = DEFAULT_GRID_SIZE)]
    pub grid_size: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct ExperimentArgs {
    #[command(flatten)]
    pub generator: GeneratorArgs,
    #[command(flatten)]
    pub refs: RefArgs,
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "exp1")]
    pub experiment: ExperimentName,
    #[arg(long, value_enum, default_value = "linreg")]
    pub trainer: Trainer,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 500)]
    pub eval_coupled: usize,
    #[arg(long, default_value_t = 100)]
    pub eval_uncoupled: usize,
    #[arg(long, default_value_t = 20)]
    pub lda_topics: usize,
    #[arg(long, default_value_t = 500)]
    pub lda_iterations: usize,
    #[arg(long, allow_negative_numbers = true)]
    pub threshold: Option<f64>,
    /// Comma-separated tau grid; runs the countermeasure sweep on a
    /// coupled-only evaluation set.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub tau: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_GRID_SIZE)]
    pub grid_size: usize,
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Generate(a) => commands::generate(a),
        Command::FitLda(a) => commands::fit_lda(a),
        Command::Train(a) => commands::train(a),
        Command::Match(a) => commands::run_match(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Mitigate(a) => commands::mitigate(a),
        Command::Experiment(a) => commands::experiment(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code())
        }
    }
}
