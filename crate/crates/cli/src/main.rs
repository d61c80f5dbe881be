//! `wavegrasp`: train, evaluate and self-check wave-disturbed grasping
//! policies from the command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime error. Log verbosity is
//! controlled by the `WAVEGRASP_LOG` environment variable (`error`, `warn`,
//! `info`, `debug`, `trace`).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use wavegrasp_core::{diagnostics, evaluate_checkpoint, train, EvalProtocol, FileConfig};

mod manifest;

use manifest::RunManifest;

#[derive(Parser)]
#[command(
    name = "wavegrasp",
    version,
    about = "Wave-disturbed grasping: deterministic kinematic simulator, \
             soft actor-critic trainer, and sea-state evaluation harness",
    after_help = "Every command honors --seed; without it the fixed default seed 7 is used, \
                  so default runs are reproducible. Config precedence: command-line flag > \
                  config file > built-in default."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a policy in the calm environment and write metrics/checkpoints.
    Train(TrainArgs),
    /// Evaluate a checkpoint across sea states with the seeded protocol.
    Eval(EvalArgs),
    /// Run fast self-checks and print one PASS/FAIL line per check.
    Diagnose,
}

#[derive(Args)]
struct TrainArgs {
    /// TOML config file ([env], [sac], [train], [eval] sections, all optional).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for metrics, checkpoints and the run manifest.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base seed for the run (default 7: reproducible without a flag).
    #[arg(long)]
    seed: Option<u64>,
    /// Episode budget (desk-scale default 3000).
    #[arg(long)]
    episodes: Option<u32>,
    /// Steps per training episode (default 100).
    #[arg(long)]
    steps_per_episode: Option<u32>,
    /// Random-action warmup steps before updates begin (default 1000).
    #[arg(long)]
    warmup: Option<u64>,
    /// Minibatch size per update (default 256).
    #[arg(long)]
    batch_size: Option<usize>,
    /// Episodes between checkpoints (default 500).
    #[arg(long)]
    checkpoint_interval: Option<u32>,
    /// Episodes between in-training evaluations (default 100).
    #[arg(long)]
    eval_interval: Option<u32>,
    /// Stop once the in-training evaluation reaches this success rate.
    #[arg(long)]
    early_stop_success: Option<f64>,
}

#[derive(Args)]
struct EvalArgs {
    /// Policy checkpoint to evaluate.
    #[arg(long)]
    checkpoint: PathBuf,
    /// TOML config file (the [env]/[sac]/[eval] sections apply).
    #[arg(long)]
    config: Option<PathBuf>,
    /// WMO sea state codes to test (default: 0 1 2).
    #[arg(long, num_args = 1.., value_name = "CODE")]
    sea_state: Option<Vec<u8>>,
    /// Trials per sea state (default 15).
    #[arg(long)]
    trials: Option<u32>,
    /// Simulated-time limit per trial in seconds (default 30).
    #[arg(long)]
    time_limit: Option<f64>,
    /// Base trial seed; trial i uses seed + i (default 7).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for summary.json, traces and the run manifest.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("WAVEGRASP_LOG"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Diagnose => cmd_diagnose(),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<FileConfig> {
    match path {
        Some(p) => FileConfig::load(p)
            .with_context(|| format!("cannot read config file {}", p.display())),
        None => Ok(FileConfig::default()),
    }
}

fn cmd_train(args: TrainArgs) -> Result<ExitCode> {
    let file = load_config(args.config.as_deref())?;
    let env_cfg = file.env;
    let sac_cfg = {
        let mut c = file.sac;
        if let Some(v) = args.batch_size {
            c.batch_size = v;
        }
        c
    };
    let train_cfg = {
        let mut c = file.train;
        if let Some(v) = args.episodes {
            c.episodes = v;
        }
        if let Some(v) = args.steps_per_episode {
            c.steps_per_episode = v;
        }
        if let Some(v) = args.warmup {
            c.warmup_steps = v;
        }
        if let Some(v) = args.checkpoint_interval {
            c.checkpoint_interval = v;
        }
        if let Some(v) = args.eval_interval {
            c.eval_interval = v;
        }
        if let Some(v) = args.early_stop_success {
            c.early_stop_success = Some(v);
        }
        if let Some(v) = args.seed {
            c.seed = v;
        }
        if let Some(v) = args.out {
            c.out_dir = v;
        }
        c
    };

    std::fs::create_dir_all(&train_cfg.out_dir).with_context(|| {
        format!("cannot create output directory {}", train_cfg.out_dir.display())
    })?;
    let mut manifest = RunManifest::start(
        "train",
        train_cfg.seed,
        serde_json::json!({ "env": env_cfg, "sac": sac_cfg, "train": train_cfg }),
    );
    let manifest_path = train_cfg.out_dir.join("manifest.json");
    manifest.write(&manifest_path)?;

    log::info!(
        "training: {} episodes x {} steps, seed {}, out {}",
        train_cfg.episodes,
        train_cfg.steps_per_episode,
        train_cfg.seed,
        train_cfg.out_dir.display()
    );
    let outcome = match train(&env_cfg, &sac_cfg, &train_cfg) {
        Ok(o) => o,
        Err(e) => {
            manifest.finish_failed(&e.to_string());
            let _ = manifest.write(&manifest_path);
            return Err(e.into());
        }
    };

    let ckpt_hash = manifest::sha256_file(&outcome.final_checkpoint)?;
    manifest.finish_completed(
        serde_json::json!({
            "episodes_run": outcome.episodes_run,
            "stopped_early": outcome.stopped_early,
            "final_checkpoint": outcome.final_checkpoint,
            "checkpoint_sha256": ckpt_hash,
            "last_eval_success": outcome.last_eval_success,
        }),
    );
    manifest.write(&manifest_path)?;

    let successes = outcome.records.iter().filter(|r| r.success).count();
    println!(
        "trained {} episodes ({} successes); final checkpoint: {}",
        outcome.episodes_run,
        successes,
        outcome.final_checkpoint.display()
    );
    if let Some(rate) = outcome.last_eval_success {
        println!("last in-training evaluation success rate: {rate:.3}");
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_eval(args: EvalArgs) -> Result<ExitCode> {
    let file = load_config(args.config.as_deref())?;
    let env_cfg = file.env;
    let sac_cfg = file.sac;
    let protocol = {
        let mut p: EvalProtocol = file.eval;
        if let Some(v) = args.sea_state {
            p.sea_states = v;
        }
        if let Some(v) = args.trials {
            p.trials = v;
        }
        if let Some(v) = args.time_limit {
            p.time_limit_s = v;
        }
        if let Some(v) = args.seed {
            p.base_seed = v;
        }
        p
    };
    let out_dir = args.out.unwrap_or_else(|| PathBuf::from("runs/eval"));
    std::fs::create_dir_all(&out_dir)
        .with_context(|| format!("cannot create output directory {}", out_dir.display()))?;

    let ckpt_hash = manifest::sha256_file(&args.checkpoint).with_context(|| {
        format!("cannot read checkpoint {}", args.checkpoint.display())
    })?;
    let mut manifest = RunManifest::start(
        "eval",
        protocol.base_seed,
        serde_json::json!({
            "env": env_cfg,
            "sac": sac_cfg,
            "eval": protocol,
            "checkpoint": args.checkpoint,
            "checkpoint_sha256": ckpt_hash,
        }),
    );
    let manifest_path = out_dir.join("manifest.json");
    manifest.write(&manifest_path)?;

    let (report, _) = match evaluate_checkpoint(
        &args.checkpoint,
        &env_cfg,
        &sac_cfg,
        &protocol,
        Some(&out_dir),
    ) {
        Ok(r) => r,
        Err(e) => {
            manifest.finish_failed(&e.to_string());
            let _ = manifest.write(&manifest_path);
            return Err(anyhow::Error::new(e)
                .context(format!("evaluating {}", args.checkpoint.display())));
        }
    };

    println!("sea_state  success_rate  trials  mean_steps");
    for (state, s) in &report.states {
        let mean = s
            .mean_steps
            .map(|m| format!("{m:.1}"))
            .unwrap_or_else(|| "-".into());
        println!("{state:9}  {:12.3}  {:6}  {mean:>10}", s.success_rate, s.trials);
    }
    println!("summary written to {}", out_dir.join("summary.json").display());

    manifest.finish_completed(serde_json::json!({ "report": report.states }));
    manifest.write(&manifest_path)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_diagnose() -> Result<ExitCode> {
    let mut all_ok = true;
    for check in diagnostics::run_all() {
        let token = if check.passed { "PASS" } else { "FAIL" };
        println!("{token} {} ({})", check.name, check.detail);
        all_ok &= check.passed;
    }
    if all_ok {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("error: one or more self-checks failed");
        Ok(ExitCode::from(2))
    }
}
