//! End-to-end tests of the `wavegrasp` binary: exit codes, config
//! precedence, metrics determinism and the documented output formats.

use std::path::Path;
use std::process::{Command, Output};

use rand::SeedableRng;
use wavegrasp_core::{config_hash, EnvConfig, SacAgent, SacConfig};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wavegrasp"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// Tiny-network config so CLI runs stay fast.
fn small_config(dir: &Path, extra: &str) -> std::path::PathBuf {
    let path = dir.join("config.toml");
    let text = format!(
        "[sac]\nactor_hidden = [16, 16]\ncritic_hidden = [16, 16]\nbatch_size = 32\n\n\
         [train]\nwarmup_steps = 120\nepisodes = 10\neval_interval = 1000\n\
         checkpoint_interval = 1000\n{extra}"
    );
    std::fs::write(&path, text).unwrap();
    path
}

fn count_rows(path: &Path) -> usize {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines().count() - 1 // header
}

#[test]
fn usage_error_exits_one() {
    let out = run(&["train", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn help_exits_zero_and_documents_the_default_seed() {
    let out = run(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("default seed 7"), "{}", stdout(&out));
}

#[test]
fn missing_config_file_names_the_path() {
    let out = run(&["train", "--config", "/no/such/config.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr(&out).contains("/no/such/config.toml"),
        "stderr: {}",
        stderr(&out)
    );
}

#[test]
fn smoke_train_writes_requested_episode_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let out_dir = dir.path().join("run");
    let out = run(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(count_rows(&out_dir.join("episodes.csv")), 10);
    assert_eq!(count_rows(&out_dir.join("smoothed.csv")), 10);
    let header = std::fs::read_to_string(out_dir.join("episodes.csv")).unwrap();
    assert!(header.starts_with("episode,return,steps,success,final_cube_z"));
    // Manifest exists and records completion.
    let manifest = std::fs::read_to_string(out_dir.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"status\": \"completed\""));
    assert!(manifest.contains("checkpoint_sha256"));
}

#[test]
fn command_line_overrides_beat_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let out_dir = dir.path().join("run");
    let out = run(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--episodes",
        "3",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(count_rows(&out_dir.join("episodes.csv")), 3);
}

#[test]
fn identical_invocations_produce_identical_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let out_dir = dir.path().join(name);
        let out = run(&[
            "train",
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            "11",
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        outputs.push((
            std::fs::read(out_dir.join("episodes.csv")).unwrap(),
            std::fs::read(out_dir.join("smoothed.csv")).unwrap(),
        ));
    }
    assert_eq!(outputs[0].0, outputs[1].0, "episodes.csv differs across runs");
    assert_eq!(outputs[0].1, outputs[1].1, "smoothed.csv differs across runs");
}

/// Write an untrained full-size checkpoint for evaluation tests.
fn write_checkpoint(path: &Path) {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let sac = SacConfig::default();
    let agent = SacAgent::new(sac.clone(), &mut rng).unwrap();
    let hash = config_hash(&EnvConfig::default(), &sac);
    agent.to_checkpoint(hash).save(path).unwrap();
}

#[test]
fn eval_reports_each_requested_sea_state() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = dir.path().join("policy.ckpt");
    write_checkpoint(&ckpt);
    let out_dir = dir.path().join("eval");
    let out = run(&[
        "eval",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--sea-state",
        "0",
        "1",
        "2",
        "--trials",
        "2",
        "--time-limit",
        "3",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap())
            .unwrap();
    let map = summary.as_object().unwrap();
    assert_eq!(map.len(), 3);
    for code in ["0", "1", "2"] {
        assert!(map.contains_key(code), "missing state {code}");
        assert_eq!(map[code]["trials"], 2);
    }
}

#[test]
fn eval_defaults_to_fifteen_trials_per_state() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = dir.path().join("policy.ckpt");
    write_checkpoint(&ckpt);
    let out_dir = dir.path().join("eval");
    let out = run(&[
        "eval",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--sea-state",
        "0",
        "--time-limit",
        "2",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["0"]["trials"], 15);
}

#[test]
fn corrupt_checkpoint_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = dir.path().join("broken.ckpt");
    std::fs::write(&ckpt, b"WGCKP this is not a checkpoint").unwrap();
    let out = run(&["eval", "--checkpoint", ckpt.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let msg = stderr(&out);
    assert!(
        msg.contains("truncated") || msg.contains("corrupt") || msg.contains("version"),
        "stderr: {msg}"
    );
}

#[test]
fn diagnose_prints_machine_parseable_lines() {
    let out = run(&["diagnose"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines.len() >= 4, "expected one line per check: {text}");
    for line in &lines {
        assert!(
            line.starts_with("PASS ") || line.starts_with("FAIL "),
            "unparseable line: {line}"
        );
    }
    assert!(text.contains("PASS gradient_check"));
    assert!(text.contains("PASS env_determinism"));
}
