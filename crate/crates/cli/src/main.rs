use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use faultexplain::config::RunConfig;
use faultexplain::pipeline::commands::{self, RunDir};
use faultexplain::Error;
use serde_json::json;

/// Simulated pick-and-place failures, explained in natural language.
#[derive(Debug, Parser)]
#[command(name = "faultexplain", version)]
struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run directory that all outputs are written under.
    #[arg(long, global = true, default_value = "run")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate the configured episode matrix.
    Simulate {
        #[arg(long)]
        episodes_per_scenario: Option<usize>,
    },
    /// Label simulated episodes and write the dataset.
    Annotate,
    /// Cross-validated training, one model per fold.
    Train {
        /// Train a single deployment model on all data instead.
        #[arg(long = "final")]
        final_model: bool,
    },
    /// Score held-out predictions and write the report.
    Evaluate,
    /// Print the explanation for one tick of a recorded episode.
    Explain {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        episode: PathBuf,
        #[arg(long)]
        t: u32,
    },
    /// Score participant responses.
    Metrics {
        #[arg(long)]
        responses: PathBuf,
    },
}

fn load_config(path: Option<&Path>, seed: Option<u64>) -> faultexplain::Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn print(value: &impl serde::Serialize) {
    println!("{}", serde_json::to_string(value).expect("summaries serialize"));
}

fn run(cli: Cli) -> faultexplain::Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Usage(e.to_string()))?;
    }
    let mut cfg = load_config(cli.config.as_deref(), cli.seed)?;
    match cli.command {
        Command::Simulate { episodes_per_scenario } => {
            if let Some(n) = episodes_per_scenario {
                cfg.dataset.episodes_per_scenario = n;
                cfg.validate()?;
            }
            let m = commands::cmd_simulate(&RunDir::new(&cli.out, cfg))?;
            print(&json!({"episodes": m.episodes.len(), "counts": m.counts, "config_digest": m.config_digest}));
        }
        Command::Annotate => print(&commands::cmd_annotate(&RunDir::new(&cli.out, cfg))?),
        Command::Train { final_model: false } => {
            let logs = commands::cmd_train(&RunDir::new(&cli.out, cfg))?;
            let folds: Vec<_> = logs
                .iter()
                .map(|l| json!({"fold": l.fold, "best_epoch": l.best_epoch, "epochs": l.epochs, "stop": l.stop}))
                .collect();
            print(&json!({ "folds": folds }));
        }
        Command::Train { final_model: true } => {
            let l = commands::cmd_train_final(&RunDir::new(&cli.out, cfg))?;
            print(&json!({"best_epoch": l.best_epoch, "epochs": l.epochs, "stop": l.stop}));
        }
        Command::Evaluate => {
            let r = commands::cmd_evaluate(&RunDir::new(&cli.out, cfg))?;
            print(&json!({
                "accuracy": r.accuracy,
                "exact_match_accuracy": r.exact_match_accuracy,
                "total": r.total,
                "malformed_count": r.malformed_count,
            }));
        }
        Command::Explain { checkpoint, episode, t } => {
            println!("{}", commands::cmd_explain(&checkpoint, &episode, t)?);
        }
        Command::Metrics { responses } => print(&commands::cmd_metrics(&responses, Some(&cli.out))?),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({"error": e.kind(), "message": e.to_string()}));
            match e {
                Error::Config(_) | Error::Usage(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
