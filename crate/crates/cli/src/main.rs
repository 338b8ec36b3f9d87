//! `opaquemdp` command-line driver.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use opaquemdp::{EstimatorKind, RelationKind};

#[derive(Debug, Parser)]
#[command(
    name = "opaquemdp",
    version,
    about = "Approximate opacity verification for finite gMDPs"
)]
pub struct Cli {
    /// Use exact rational arithmetic instead of f64.
    #[arg(long, global = true)]
    pub exact: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Initial,
    Current,
}

impl From<Kind> for EstimatorKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Initial => EstimatorKind::Initial,
            Kind::Current => EstimatorKind::Current,
        }
    }
}

impl From<Kind> for RelationKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Initial => RelationKind::InitSop,
            Kind::Current => RelationKind::CurSop,
        }
    }
}

#[derive(Debug, Args)]
pub struct OutArg {
    /// Write the machine-readable report to this path.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a model file; exit 1 lists every violated invariant.
    Validate {
        /// gMDP file.
        model: PathBuf,
    },
    /// Build the initial-state or current-state estimator of a model.
    Estimator {
        model: PathBuf,
        #[arg(long, value_enum)]
        kind: Kind,
        /// Output-distance threshold of the intruder.
        #[arg(long, default_value = "0")]
        eps: String,
        /// Estimator file (gMDP layout plus `kind`, `eps`, `bad`).
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Decide (eps, lambda)-approximate opacity within a horizon.
    Verify {
        model: PathBuf,
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long, default_value = "0")]
        eps: String,
        /// Required lower bound on the probability of not revealing the secret.
        #[arg(long)]
        lambda: String,
        #[arg(long)]
        horizon: usize,
        #[command(flatten)]
        out: OutArg,
    },
    /// Check an opacity-preserving stochastic simulation relation from A to B.
    Relate {
        model_a: PathBuf,
        model_b: PathBuf,
        /// Relation file: `{"pairs": [[state_a, state_b], ...]}`.
        relation: PathBuf,
        /// `initial` checks InitSOP, `current` checks CurSOP.
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long)]
        eps: String,
        #[arg(long)]
        delta: String,
        #[command(flatten)]
        out: OutArg,
    },
    /// Grid abstraction of a scalar affine Gaussian system.
    Abstract {
        /// System file with an optional `certificate`.
        system: PathBuf,
        /// State quantization step.
        #[arg(long)]
        eta: String,
        /// Inflation of the secret set.
        #[arg(long, default_value = "0")]
        theta: String,
        /// Input quantization radius; ignored for finite input sets.
        #[arg(long, default_value = "0")]
        mu: String,
        /// Relation precision used by the feasibility check.
        #[arg(long)]
        eps: String,
        /// Relation slack used by the feasibility check.
        #[arg(long)]
        delta: String,
        /// Which feasibility conditions to check against the certificate.
        #[arg(long, value_enum, default_value = "initial")]
        kind: Kind,
        /// Abstract gMDP file with a `meta` block.
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Carry an abstract verdict over to the concrete system.
    Transfer {
        /// Verdict report written by `verify --out`.
        verdict: PathBuf,
        #[arg(long)]
        eps_rel: String,
        #[arg(long)]
        delta: String,
        #[command(flatten)]
        out: OutArg,
    },
    /// Monte Carlo estimate of the probability of revealing the secret.
    Simulate {
        model: PathBuf,
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long, default_value = "0")]
        eps: String,
        /// Initial state name.
        #[arg(long)]
        x0: String,
        #[arg(long)]
        horizon: usize,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated input names, one per step. Without it the
        /// maximizing inputs from value iteration are replayed.
        #[arg(long, value_delimiter = ',')]
        inputs: Option<Vec<String>>,
        #[arg(long, default_value_t = 0.999)]
        confidence: f64,
        /// CSV of first-hit steps.
        #[arg(long)]
        histogram: Option<PathBuf>,
        #[command(flatten)]
        out: OutArg,
    },
}

fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("OPAQUEMDP_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| format!("OPAQUEMDP_THREADS must be a positive integer, got `{v}`"))?;
    if n == 0 {
        return Err("OPAQUEMDP_THREADS must be >= 1".into());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let invocation: Vec<String> = std::env::args().collect();
    match commands::run(&cli, invocation) {
        Ok(commands::Outcome::Holds) => ExitCode::SUCCESS,
        Ok(commands::Outcome::Fails) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
