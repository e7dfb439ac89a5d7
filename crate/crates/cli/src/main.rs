use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod config;

use config::{Overrides, RunConfig};

/// Learn per-item biases over a base recommender and compare trend strategies.
#[derive(Debug, Parser)]
#[command(name = "trendbias", version)]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit the base model on the train window and write a model dump
    Fit(FitArgs),
    /// Write a score file for one group of users
    Predict(PredictArgs),
    /// Learn biases from a score file against the recent window
    LearnBias(LearnBiasArgs),
    /// Evaluate a score file (and optional biases) on the test window
    Evaluate(EvaluateArgs),
    /// Run every strategy and write lift, overlap and plot tables
    Compare,
    /// Generate a synthetic drifting transaction log and taxonomy
    Generate(GenerateArgs),
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Window to fit on
    #[arg(long, value_enum, default_value_t = FitWindow::Train)]
    pub window: FitWindow,
    /// Time-decayed Markov counts (uses --beta)
    #[arg(long)]
    pub decay: bool,
    /// Model file; defaults to model.<base> in the output directory
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FitWindow {
    /// Everything before the recent window
    Train,
    /// Train and recent windows
    History,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// `test`: fit on train+recent and score test buyers (the LONG scores).
    /// `recent`: fit on train and score recent buyers, for bias learning.
    #[arg(long, value_enum, default_value_t = Target::Test)]
    pub target: Target,
    /// Time-decayed Markov fit (the DECAY scores)
    #[arg(long)]
    pub decay: bool,
    /// Score file; defaults to scores.tsv in the output directory
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Target {
    Test,
    Recent,
}

#[derive(Debug, Args)]
pub struct LearnBiasArgs {
    /// Score file (user, item, score)
    #[arg(long, value_name = "FILE")]
    pub scores: PathBuf,
    /// Previous bias file to start from
    #[arg(long, value_name = "FILE")]
    pub warm_start: Option<PathBuf>,
    /// Bias file; defaults to bias.tsv in the output directory
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long, value_name = "FILE")]
    pub scores: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub bias: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub users: Option<usize>,
    #[arg(long)]
    pub items: Option<usize>,
    #[arg(long)]
    pub days: Option<usize>,
    #[arg(long)]
    pub churn_rate: Option<f64>,
    #[arg(long)]
    pub trend_spike: Option<f64>,
    #[arg(long)]
    pub categories: Option<usize>,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut config = RunConfig::resolve(&cli.overrides)?;
    if let Command::Generate(g) = &cli.command {
        commands::apply_generate_flags(&mut config, g);
    }
    config.validate()?;
    if !matches!(cli.command, Command::Generate(_)) {
        config.check_inputs()?;
    }
    let out = config.output_dir();
    std::fs::create_dir_all(&out)?;
    match &cli.command {
        Command::Fit(a) => commands::fit(&config, a),
        Command::Predict(a) => commands::predict(&config, a),
        Command::LearnBias(a) => commands::learn_bias(&config, a),
        Command::Evaluate(a) => commands::evaluate(&config, a),
        Command::Compare => commands::compare(&config),
        Command::Generate(_) => commands::generate(&config),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
