use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use valuestack::config::ExperimentConfig;
use valuestack::pipeline::{cmd_evaluate, cmd_optimize_bids, cmd_synth, cmd_train};
use valuestack::report::cmd_report;

#[derive(Debug, Parser)]
#[command(name = "valuestack", version, about = "FCR bidding and imbalance arbitrage for a grid battery")]
struct Cli {
    /// Experiment config (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `out_dir` from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides `seed` from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic dataset to <out>/data.
    Synth,
    /// Stage one: choose an FCR bid per 4-hour block.
    OptimizeBids {
        /// Use this bid for every block instead of optimising.
        #[arg(long)]
        uniform: Option<u32>,
    },
    /// Stage two: train the arbitrage agent.
    Train {
        #[arg(long)]
        schedule: Option<PathBuf>,
    },
    /// Greedy evaluation of a trained agent.
    Evaluate {
        #[arg(long)]
        schedule: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Compare evaluated runs and bin the selected bids.
    Report {
        /// Run directories holding summary.json.
        #[arg(required = true)]
        runs: Vec<PathBuf>,
    },
}

fn load_config(cli: &Cli) -> valuestack::Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.set_seed(seed);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> valuestack::Result<String> {
    let cfg = load_config(cli)?;
    Ok(match &cli.command {
        Command::Synth => format!("wrote {}", cmd_synth(&cfg)?.display()),
        Command::OptimizeBids { uniform } => {
            let out = cmd_optimize_bids(&cfg, *uniform)?;
            format!(
                "{} blocks, bids {:?}, written to {}",
                out.schedule.bids.len(),
                out.schedule.bids,
                cfg.out_dir.display()
            )
        }
        Command::Train { schedule } => {
            let out = cmd_train(&cfg, schedule.as_deref())?;
            format!(
                "{} episodes, best validation profit {:.2} EUR at episode {}",
                out.log.len(),
                out.best_validation_profit,
                out.best_episode
            )
        }
        Command::Evaluate { schedule, checkpoint } => {
            let s = cmd_evaluate(&cfg, schedule.as_deref(), checkpoint.as_deref())?;
            format!(
                "{} {} days: total {:.2} EUR (FCR {:.2}, imbalance {:.2}), {:.3} cycles",
                s.days, s.split, s.total_profit, s.fcr_revenue, s.imbalance_profit, s.cycles
            )
        }
        Command::Report { runs } => {
            let out = cmd_report(runs, &cfg.out_dir, &cfg.report)?;
            format!(
                "{} runs compared, written to {} and {}",
                out.rows.len(),
                out.comparison_path.display(),
                out.heatmap_path.display()
            )
        }
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&cli).context("valuestack failed") {
        Ok(msg) => {
            println!("{msg}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {:#}", e);
            let validation = e
                .downcast_ref::<valuestack::Error>()
                .is_some_and(valuestack::Error::is_validation);
            ExitCode::from(if validation { 1 } else { 2 })
        }
    }
}
