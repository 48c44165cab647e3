mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

/// Monotone-and-separating multiset embeddings: constructions, refuters,
/// Monte Carlo separation studies, trainable containment models and a
/// containment index.
#[derive(Debug, Parser)]
#[command(name = "mas", version)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Seed for every random stream; falls back to MAS_SEED, then the config file, then 0.
    #[arg(long, global = true, env = "MAS_SEED")]
    pub seed: Option<u64>,
    /// Worker threads (at least 1; default 1).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// TOML configuration; flags take precedence over it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Brute-force check of the MAS property over all multisets of size at
    /// most k (one-hot embeddings pass for every k).
    Verify(commands::VerifyArgs),
    /// Constructive impossibility witnesses: the maximal-singleton argument
    /// (m <= n - 2) and the monotone-subsequence (Erdős–Szekeres) argument.
    Refute(commands::RefuteArgs),
    /// Random non-negative projection with (k+2)^(k+2) ln n rows, resampled
    /// until every extreme pair is separated.
    Embed(commands::EmbedArgs),
    /// Asymmetric containment distance d_as via min-cost assignment, and
    /// optionally the padded Wasserstein distance.
    Distance(commands::DistanceArgs),
    /// Failure probability of random hat coordinates against m, compared with
    /// the single-coordinate rate raised to the power m.
    SeparationExperiment(commands::LabArgs),
    /// Lower Hölder separation: expected positive part of F(S) - F(T) against d_as.
    Holder(commands::HolderArgs),
    /// Upper Lipschitz stability: expected |F(S) - F(T)| against the padded
    /// Wasserstein distance.
    Lipschitz(commands::LipschitzArgs),
    /// Train a MAS network on containment pairs with the dominance hinge loss.
    Train(commands::TrainArgs),
    /// Containment accuracy and confusion counts of a checkpoint.
    Eval(commands::EvalArgs),
    /// Regress a monotone set function (monotone universality) with a scalar MAS network.
    FitMonotone(commands::FitArgs),
    /// Containment index over embedded targets.
    #[command(subcommand)]
    Index(commands::IndexCommand),
    /// Lower and upper bounds on the smallest MAS output dimension.
    Bounds(commands::BoundsArgs),
    /// Small demonstrations.
    #[command(subcommand)]
    Demo(commands::DemoCommand),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let body = serde_json::json!({ "error": { "kind": e.kind, "message": e.message } });
            eprintln!("{body}");
            ExitCode::from(1)
        }
    }
}
