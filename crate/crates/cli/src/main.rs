//! Command-line front end for the detection experiments.
//!
//! Exit codes: 0 success, 2 configuration error, 3 invariant-suite failure,
//! 1 any other runtime error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sparse_detect::harness::{self, Command, ExperimentConfig};
use sparse_detect::Error;

#[derive(Parser)]
#[command(name = "sparse-detect", version, about = "Sparse signal detection experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// ROC curves of the selected detectors (roc.csv, summary.csv).
    Roc(Common),
    /// Minimum known-support fraction over a grid (minfrac.csv, ftrace.csv).
    Minfrac(Common),
    /// First-iteration success rates over compression ratios (p1p2.csv).
    P1p2(Common),
    /// Known partial support against simultaneous OMP (known_vs_somp.csv).
    KnownVsSomp(Common),
    /// Run the invariant suite (validate.csv).
    Validate(Common),
}

#[derive(Args)]
struct Common {
    /// TOML file with experiment fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in configuration, used when --config is absent.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// Master seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Number of Monte Carlo trials (overrides the config).
    #[arg(long)]
    trials: Option<usize>,
}

const EXIT_RUNTIME: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_INVARIANT: u8 = 3;

fn load(cmd: Command, args: &Common) -> Result<ExperimentConfig, Error> {
    let mut cfg = match (&args.config, &args.preset) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(name)) => harness::preset(name).ok_or_else(|| Error::Config {
            path: "--preset".to_string(),
            message: format!("unknown preset `{name}`; known: {}", harness::PRESETS.join(", ")),
        })?,
        (None, None) => cmd.default_config(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, args) = match &cli.command {
        Cmd::Roc(a) => (Command::Roc, a),
        Cmd::Minfrac(a) => (Command::MinFrac, a),
        Cmd::P1p2(a) => (Command::P1P2, a),
        Cmd::KnownVsSomp(a) => (Command::KnownVsSomp, a),
        Cmd::Validate(a) => (Command::Validate, a),
    };
    let result = load(cmd, args).and_then(|cfg| harness::execute(cmd, &cfg, &args.out));
    match result {
        Ok(outcome) => {
            for f in &outcome.files {
                println!("{}", f.display());
            }
            if outcome.checks_failed > 0 {
                eprintln!("{} invariant check(s) failed", outcome.checks_failed);
                ExitCode::from(EXIT_INVARIANT)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e @ Error::Config { .. }) => {
            eprintln!("{e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
