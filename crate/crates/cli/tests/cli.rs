use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const STUDY: &str = include_str!("../configs/study.toml");
const DATAGEN: &str = include_str!("../configs/datagen.toml");

fn rankopt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rankopt"))
        .args(args)
        .env_remove("RANKOPT_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A temp dir holding generated data and the example study config.
fn workspace(study: &str) -> (TempDir, PathBuf) {
    let dir = TempDir::new().unwrap();
    let spec = dir.path().join("datagen.toml");
    fs::write(&spec, DATAGEN).unwrap();
    stdout(&rankopt(&["datagen", "--spec", s(&spec), "--out-dir", s(&dir.path().join("data"))]));
    let config = dir.path().join("study.toml");
    fs::write(&config, study).unwrap();
    (dir, config)
}

fn run_study(config: &Path, out: &Path, extra: &[&str]) -> String {
    let mut args = vec!["run", "--config", s(config), "--out-dir", s(out)];
    args.extend_from_slice(extra);
    stdout(&rankopt(&args))
}

fn read_report(out: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

fn line_count(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().count()
}

#[test]
fn stage_budget_sets_the_trial_count() {
    let (dir, config) = workspace(STUDY);
    let out = dir.path().join("out");
    run_study(&config, &out, &["--stage-budgets", "5"]);
    let report = read_report(&out);
    let stages = report["stages"].as_array().unwrap();
    assert_eq!(stages.len(), 1);
    assert_eq!(stages[0]["trials"].as_array().unwrap().len(), 5);
    // header plus one row per trial
    assert_eq!(line_count(&out.join("trials.csv")), 6);
    assert_eq!(line_count(&out.join("trials.jsonl")), 5);
}

#[test]
fn seed_flag_matches_inline_seed() {
    let (dir, config) = workspace(STUDY);
    let inline = dir.path().join("inline.toml");
    fs::write(&inline, STUDY.replace("seed = 7", "seed = 99")).unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run_study(&config, &a, &["--seed", "99", "--stage-budgets", "8,8"]);
    run_study(&inline, &b, &["--stage-budgets", "8,8"]);
    assert_eq!(fs::read(a.join("report.json")).unwrap(), fs::read(b.join("report.json")).unwrap());
}

#[test]
fn reruns_are_byte_identical() {
    let (dir, config) = workspace(STUDY);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run_study(&config, &a, &["--stage-budgets", "10,10", "--parallel", "1"]);
    run_study(&config, &b, &["--stage-budgets", "10,10", "--parallel", "3"]);
    for file in ["report.json", "trials.csv", "trials.jsonl", "pareto.jsonl"] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{file}");
    }
}

#[test]
fn override_changes_the_sampler() {
    let (dir, config) = workspace(STUDY);
    let out = dir.path().join("out");
    let text = run_study(
        &config,
        &out,
        &["--stage-budgets", "4", "--override", "sampler={ name = \"random\" }"],
    );
    assert!(text.starts_with("sampler: random"), "{text}");
    assert_eq!(read_report(&out)["sampler"]["name"], "random");
}

#[test]
fn out_dir_falls_back_to_env_then_config() {
    let (dir, config) = workspace(STUDY);
    let env_out = dir.path().join("from-env");
    let status = Command::new(env!("CARGO_BIN_EXE_rankopt"))
        .args(["run", "--config", s(&config), "--stage-budgets", "3"])
        .env("RANKOPT_OUT_DIR", &env_out)
        .output()
        .unwrap();
    stdout(&status);
    assert!(env_out.join("report.json").exists());

    let out = rankopt(&["run", "--config", s(&config), "--stage-budgets", "3"]);
    stdout(&out);
    assert!(dir.path().join("out/report.json").exists());
}

#[test]
fn datagen_writes_all_files() {
    let dir = TempDir::new().unwrap();
    let spec = dir.path().join("gen.toml");
    fs::write(&spec, "n_items = 30\nn_queries = 6\nn_meta_queries = 4\n").unwrap();
    let out = dir.path().join("data");
    stdout(&rankopt(&["datagen", "--spec", s(&spec), "--out-dir", s(&out), "--seed", "3"]));
    assert_eq!(line_count(&out.join("corpus.jsonl")), 30);
    assert_eq!(line_count(&out.join("queries.jsonl")), 10);
    // one row per (query, item) pair plus the header
    assert_eq!(line_count(&out.join("train_log.csv")), 6 * 30 + 1);
    assert_eq!(line_count(&out.join("meta_log.csv")), 4 * 30 + 1);
}

#[test]
fn datagen_is_deterministic_per_seed() {
    let dir = TempDir::new().unwrap();
    let gen = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        stdout(&rankopt(&["datagen", "--out-dir", s(&out), "--seed", seed]));
        out
    };
    let a = gen("a", "11");
    let b = gen("b", "11");
    let c = gen("c", "12");
    for file in ["corpus.jsonl", "queries.jsonl", "train_log.csv", "meta_log.csv"] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{file}");
    }
    assert_ne!(fs::read(a.join("train_log.csv")).unwrap(), fs::read(c.join("train_log.csv")).unwrap());
}

#[test]
fn invalid_generator_spec_exits_2() {
    let dir = TempDir::new().unwrap();
    let spec = dir.path().join("gen.toml");
    fs::write(&spec, "n_queries = 0\n").unwrap();
    let out = rankopt(&["datagen", "--spec", s(&spec), "--out-dir", s(&dir.path().join("d"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_queries"));
}

#[test]
fn invalid_study_values_exit_2_and_name_the_key() {
    let (dir, config) = workspace(STUDY);
    let out_dir = dir.path().join("out");
    for (flag, key) in [
        ("selection.top_n=0", "selection.top_n"),
        ("objectives.0.weight=-1", "objectives[0].weight"),
        ("sampler.gamma=1.5", "gamma"),
        ("cumulative.seed_quantile=2.0", "seed_quantile"),
    ] {
        let out = rankopt(&["run", "--config", s(&config), "--out-dir", s(&out_dir), "--override", flag]);
        let err = String::from_utf8_lossy(&out.stderr);
        assert_eq!(out.status.code(), Some(2), "{flag}: {err}");
        assert!(err.contains(key), "{flag}: {err}");
    }
    assert!(!out_dir.exists());
}

#[test]
fn unknown_config_key_exits_2() {
    let (dir, _) = workspace(STUDY);
    let config = dir.path().join("typo.toml");
    fs::write(&config, STUDY.replace("top_n = 10", "top_m = 10")).unwrap();
    let out = rankopt(&["run", "--config", s(&config)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("top_m"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(rankopt(&["run"]).status.code(), Some(2));
    assert_eq!(rankopt(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn unwritable_out_dir_exits_1() {
    let (dir, config) = workspace(STUDY);
    let blocker = dir.path().join("file");
    fs::write(&blocker, "not a directory").unwrap();
    let out = rankopt(&[
        "run",
        "--config",
        s(&config),
        "--out-dir",
        s(&blocker.join("out")),
        "--stage-budgets",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn missing_data_file_is_a_validation_error() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("study.toml");
    fs::write(&config, STUDY).unwrap();
    let out = rankopt(&["run", "--config", s(&config)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("data.corpus"));
}

#[test]
fn malformed_report_exits_1() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("report.json");
    fs::write(&path, "{\"stages\": [").unwrap();
    let out = rankopt(&["report", "--report", s(&path)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("report.json"));
}

#[test]
fn report_renders_saved_results() {
    let (dir, config) = workspace(STUDY);
    let out = dir.path().join("out");
    let printed = run_study(&config, &out, &["--stage-budgets", "6,6"]);
    let path = out.join("report.json");

    let text = stdout(&rankopt(&["report", "--report", s(&path)]));
    assert_eq!(text, printed);

    let report = read_report(&out);
    let winner = &report["winner"];
    let line = text.lines().rev().find(|l| l.trim_start().starts_with("winner:")).unwrap();
    let expected = format!("winner: trial {} with {} votes", winner["trial_id"], winner["votes"]);
    assert!(line.trim_start().starts_with(&expected), "{line} vs {expected}");

    let csv = stdout(&rankopt(&["report", "--report", s(&path), "--format", "csv"]));
    let rows: Vec<&str> = csv.lines().collect();
    assert!(rows[0].starts_with("stage,criterion,"));
    // two stages, each with the two objectives plus the weighted criterion
    assert_eq!(rows.len(), 1 + 2 * 3);
}

#[test]
fn vote_reproduces_the_study_winner() {
    let (dir, config) = workspace(STUDY);
    let out = dir.path().join("out");
    run_study(&config, &out, &["--stage-budgets", "8,8"]);
    let report = read_report(&out);
    let text = stdout(&rankopt(&[
        "vote",
        "--config",
        s(&config),
        "--report",
        s(&out.join("report.json")),
    ]));
    let winner = &report["winner"];
    let expected = format!("winner: trial {} with {} votes", winner["trial_id"], winner["votes"]);
    assert!(text.lines().any(|l| l.starts_with(&expected)), "{text}");
}

#[test]
fn oracle_prints_the_grid_argmax() {
    let (_dir, config) = workspace(STUDY);
    let text = stdout(&rankopt(&["oracle", "--config", s(&config), "--resolution", "3"]));
    let result: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(result["evaluated"], 27);
    let best = result["best_weighted"].as_f64().unwrap();
    assert!(best > 0.0 && best <= 1.0);

    let capped = rankopt(&["oracle", "--config", s(&config), "--resolution", "3", "--cap", "26"]);
    assert_eq!(capped.status.code(), Some(2));
}
