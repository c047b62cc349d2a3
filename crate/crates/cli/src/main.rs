//! `gtnvf`: run the forecasting pipeline stage by stage.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
//! failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gtnvf_core::graph::Relation;
use gtnvf_core::harness::{stages, ExperimentConfig};
use gtnvf_core::{Error, ErrorKind};

#[derive(Parser)]
#[command(name = "gtnvf", version, about = "Realized volatility forecasting with graph transformers")]
struct Cli {
    /// Experiment config (TOML). Defaults apply when omitted.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,

    /// Run directory for all outputs.
    #[arg(short, long, global = true, default_value = "run")]
    run: PathBuf,

    /// Override the config's seeds, e.g. `--seeds 0,1,2`.
    #[arg(long, global = true, value_delimiter = ',')]
    seeds: Vec<u64>,

    /// More log output; repeat for debug.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write raw quote and trade files of the synthetic market.
    Generate,
    /// Sample raw events to one-second rows.
    Sample,
    /// Cut sampled rows into buckets and encode features.
    Encode,
    /// Build relation graphs and write edge lists.
    BuildGraph,
    /// Fit all configured models and write predictions and checkpoints.
    Train,
    /// Compute metric tables from the run's predictions.
    Evaluate {
        /// Score one GTN checkpoint on the test split instead.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Relations of the checkpoint's graph, comma separated.
        #[arg(long, value_delimiter = ',', requires = "checkpoint")]
        relations: Vec<String>,
    },
    /// Liquidity and degree ablation tables and plots.
    Report,
    /// Sector-granularity sweep.
    Sweep,
    /// Print the effective config as TOML.
    Config,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if !cli.seeds.is_empty() {
        cfg.seeds = cli.seeds.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), Error> {
    let cfg = load_config(cli)?;
    let run = &cli.run;
    match &cli.command {
        Command::Generate => {
            let dir = stages::generate(&cfg, run)?;
            println!("{}", dir.display());
        }
        Command::Sample => {
            let dir = stages::sample(&cfg, run)?;
            println!("{}", dir.display());
        }
        Command::Encode => {
            let dir = stages::encode(&cfg, run)?;
            println!("{}", dir.display());
        }
        Command::BuildGraph => {
            let dir = stages::build_graph(&cfg, run)?;
            println!("{}", dir.display());
        }
        Command::Train => {
            let result = stages::train(&cfg, run)?;
            println!("{} model runs written to {}", result.runs.len(), run.display());
        }
        Command::Evaluate { checkpoint: Some(path), relations } => {
            let rels = relations
                .iter()
                .map(|r| Relation::parse(r).ok_or_else(|| Error::Config(format!("unknown relation {r:?}"))))
                .collect::<Result<Vec<_>, _>>()?;
            let rmspe = stages::evaluate_checkpoint(&cfg, run, path, &rels)?;
            println!("test RMSPE {rmspe:.6}");
        }
        Command::Evaluate { checkpoint: None, .. } => {
            print!("{}", stages::evaluate(&cfg, run)?);
        }
        Command::Report => {
            for p in stages::report(&cfg, run)? {
                println!("{}", p.display());
            }
        }
        Command::Sweep => {
            let path = stages::sweep(&cfg, run)?;
            print!("{}", std::fs::read_to_string(&path).unwrap_or_default());
        }
        Command::Config => print!("{}", cfg.to_toml()),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Config => 2,
                ErrorKind::Data => 3,
                ErrorKind::Numerical => 4,
            })
        }
    }
}
