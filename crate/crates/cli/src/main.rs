use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use seqmia::config::RunConfig;
use seqmia::run::{verify_run, Run, RunStore, Stage, StageOutcome, RUNS_ENV};
use seqmia::Error;

/// Staged membership inference audit. Artifacts live under
/// `$SEQMIA_RUNS/<run-id>/` (default `runs/`).
#[derive(Debug, Parser)]
#[command(name = "seqmia", version)]
struct Cli {
    /// Run configuration (TOML). Defaults to the configuration already
    /// stored in the run, or the built-in defaults for a new run.
    #[arg(long, short, global = true, env = "SEQMIA_CONFIG")]
    config: Option<PathBuf>,

    #[arg(long, global = true, env = "SEQMIA_RUN_ID", default_value = "default")]
    run_id: String,

    /// Repeat for more detail.
    #[arg(long, short, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the dataset and its five-way split.
    Generate,
    /// Train the target and shadow models.
    Train,
    /// Distill both models and save the per-epoch snapshots.
    Distill,
    /// Evaluate every snapshot into per-sample metric sequences.
    Sequences,
    /// Train and score the recurrent attack and the baselines.
    Attack,
    /// ROC curves, AUC, TPR at fixed FPR and balanced accuracy.
    Evaluate,
    /// Run the configured ablation grids.
    Ablate,
    /// Write reports/report.md and reports/summary.json.
    Report,
    /// Every stage in order, skipping those that are up to date.
    RunAll,
    /// Re-check hashes, stage freshness, ROC figures and gradients.
    Verify,
}

fn stage_of(cmd: &Command) -> Option<Stage> {
    Some(match cmd {
        Command::Generate => Stage::Generate,
        Command::Train => Stage::Train,
        Command::Distill => Stage::Distill,
        Command::Sequences => Stage::Sequences,
        Command::Attack => Stage::Attack,
        Command::Evaluate => Stage::Evaluate,
        Command::Ablate => Stage::Ablate,
        Command::Report => Stage::Report,
        Command::RunAll | Command::Verify => return None,
    })
}

fn open(cli: &Cli, store: &RunStore) -> seqmia::Result<Run> {
    match &cli.config {
        Some(path) => Run::open(store, &cli.run_id, RunConfig::load(path)?),
        None if store.run_dir(&cli.run_id)?.join(seqmia::run::CONFIG_FILE).exists() => {
            Run::open_existing(store, &cli.run_id)
        }
        None => Run::open(store, &cli.run_id, RunConfig::canonical(0)),
    }
}

fn report_stage(stage: Stage, outcome: StageOutcome) {
    let word = match outcome {
        StageOutcome::Ran => "done",
        StageOutcome::Cached => "cached",
    };
    println!("{stage}: {word}");
}

fn execute(cli: &Cli) -> seqmia::Result<()> {
    let store = RunStore::from_env();
    if let Command::Verify = cli.command {
        if cli.config.is_some() {
            log::warn!("verify uses the configuration stored in the run; --config is ignored");
        }
        let run = Run::open_existing(&store, &cli.run_id)?;
        let report = verify_run(&run);
        print!("{report}");
        return if report.passed() {
            Ok(())
        } else {
            let names: Vec<&str> = report.failures().map(|c| c.name.as_str()).collect();
            Err(Error::Verification(names.join(", ")))
        };
    }
    let mut run = open(cli, &store)?;
    log::debug!("run directory {}", run.dir().display());
    match stage_of(&cli.command) {
        Some(stage) => report_stage(stage, run.run_stage(stage)?),
        None => {
            for (stage, outcome) in run.run_all()? {
                report_stage(stage, outcome);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    log::debug!("runs root from ${RUNS_ENV}");
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let body = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{body}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
