//! End-to-end runs of the `lgscrl` binary on a small synthetic market.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use lgscrl::lgmodel::{Checkpoint, Variant};
use tempfile::TempDir;

fn lgscrl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lgscrl"))
        .args(["--threads", "1"])
        .args(args)
        .env_remove("LGSCRL_OUT")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = lgscrl(args);
    assert!(out.status.success(), "lgscrl {args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Synth data, three critics and one aligned actor, built once.
struct Fixture {
    _dir: TempDir,
    data: PathBuf,
    run: PathBuf,
}

impl Fixture {
    fn config(&self) -> PathBuf {
        self.data.join("config.toml")
    }

    fn ckpt(&self, slug: &str) -> PathBuf {
        self.run.join(format!("{slug}.ckpt.json"))
    }
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("data");
        let run = dir.path().join("run");
        ok(&["--seed", "2", "synth", "--out", s(&data), "--stocks", "30", "--features", "8", "--factors", "4", "--d-llm", "8", "--days", "90"]);
        let config = data.join("config.toml");
        for variant in ["Local", "LG-STOCK", "LG-LLM"] {
            ok(&["train", "--config", s(&config), "--out", s(&run), "--variant", variant, "--epochs", "5"]);
        }
        let critic = run.join("lg-stock.ckpt.json");
        ok(&[
            "align", "--config", s(&config), "--out", s(&run), "--critic", s(&critic), "--rounds", "1", "--rollouts", "2",
            "--steps", "16", "--participants", "2", "--batch-size", "8",
        ]);
        Fixture { _dir: dir, data, run }
    })
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn synth_writes_the_market_files() {
    let f = fixture();
    for name in ["features.csv", "returns.csv", "embeddings.jsonl", "truth.json", "config.toml"] {
        assert!(f.data.join(name).is_file(), "{name}");
    }
    let first = fs::read_to_string(f.data.join("embeddings.jsonl")).unwrap();
    assert!(first.lines().next().unwrap().contains("provenance"));
}

#[test]
fn trained_checkpoints_round_trip() {
    let f = fixture();
    for (slug, variant) in [("local", Variant::Local), ("lg-stock", Variant::LgStock), ("lg-llm", Variant::LgLlm)] {
        let ckpt = Checkpoint::load(f.ckpt(slug)).unwrap();
        assert_eq!(ckpt.model.variant, variant);
        assert!(ckpt.policy.is_none());
        assert_eq!(Checkpoint::from_json(&ckpt.to_json().unwrap()).unwrap(), ckpt);
        let loss = csv_rows(&f.run.join(format!("{slug}_loss.csv")));
        // epoch 0 is the initial loss
        assert_eq!(loss.len(), 6);
        assert!(loss.iter().all(|r| r[1].parse::<f64>().unwrap().is_finite()));
    }
    let scrl = Checkpoint::load(f.ckpt("scrl-lg")).unwrap();
    assert_eq!(scrl.model.variant, Variant::ScrlLg);
    assert!(scrl.policy.is_some());
}

#[test]
fn zero_theta_diagnostics_have_total_equal_raw() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "align", "--config", s(&f.config()), "--out", s(dir.path()), "--critic", s(&f.ckpt("lg-stock")), "--rounds", "1",
        "--rollouts", "2", "--steps", "16", "--batch-size", "8", "--theta", "0",
    ]);
    let rows = csv_rows(&dir.path().join("ppo_diagnostics.csv"));
    assert_eq!(rows.len(), 32);
    for r in &rows {
        // rollout,step,date,raw_reward,kl,total_reward,...
        assert_eq!(r[3], r[5]);
    }
    let rounds: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("rounds.json")).unwrap()).unwrap();
    assert_eq!(rounds["rounds"].as_array().unwrap().len(), 1);
}

#[test]
fn backtest_compares_four_models_and_sweeps_horizons() {
    let f = fixture();
    let bt = tempfile::tempdir().unwrap();
    let ckpts: Vec<PathBuf> = ["local", "lg-stock", "lg-llm", "scrl-lg"].iter().map(|c| f.ckpt(c)).collect();
    let config = f.config();
    let mut args = vec!["backtest", "--config", s(&config), "--out", s(bt.path()), "--horizons", "5,10,20"];
    args.extend(ckpts.iter().map(|p| s(p)));
    ok(&args);

    let table = csv_rows(&bt.path().join("comparison.csv"));
    let labels: Vec<&str> = table.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(labels, ["Local", "LG-STOCK", "LG-LLM", "SCRL-LG"]);
    let sweep = csv_rows(&bt.path().join("horizon_sweep.csv"));
    for label in &labels {
        let horizons: Vec<&str> = sweep.iter().filter(|r| r[0] == *label).map(|r| r[1].as_str()).collect();
        assert_eq!(horizons, ["5", "10", "20"], "{label}");
    }
    for slug in ["local", "lg-stock", "lg-llm", "scrl-lg"] {
        assert!(bt.path().join(format!("{slug}_report.csv")).is_file());
        assert!(bt.path().join(format!("{slug}_metrics.json")).is_file());
    }

    let out = ok(&["report", s(bt.path())]);
    let md = fs::read_to_string(bt.path().join("report.md")).unwrap();
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), md.trim());
    assert!(md.contains("| SCRL-LG |"));
}

fn assert_usage_error(args: &[&str], out_dir: &Path) {
    let out = lgscrl(args);
    assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("usage error"));
    assert!(!out_dir.exists(), "{args:?} created {}", out_dir.display());
}

#[test]
fn usage_errors_exit_two_and_write_nothing() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never");
    let config = f.config();
    let cfg = s(&config);
    let o = s(&out);
    assert_usage_error(&["train", "--config", cfg, "--out", o, "--variant", "SCRL-LG"], &out);
    let zero = Command::new(env!("CARGO_BIN_EXE_lgscrl"))
        .args(["--threads", "0", "train", "--config", cfg, "--out", o])
        .output()
        .unwrap();
    assert_eq!(zero.status.code(), Some(2));
    assert!(!out.exists());
    assert_usage_error(&["synth", "--out", o, "--factors", "40", "--features", "8"], &out);
    assert_usage_error(&["backtest", "--config", cfg, "--out", o, s(&f.ckpt("local")), s(&f.ckpt("local"))], &out);
    assert_usage_error(&["align", "--config", cfg, "--out", o, "--critic", s(&f.ckpt("local"))], &out);
    assert_usage_error(&["train", "--out", o, "--features", "/nonexistent/features.csv"], &out);
    assert_usage_error(&["report", o], &out);
}

#[test]
fn llm_variant_requires_embeddings() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never");
    assert_usage_error(
        &[
            "train", "--out", s(&out), "--variant", "LG-LLM", "--features", s(&f.data.join("features.csv")), "--returns",
            s(&f.data.join("returns.csv")),
        ],
        &out,
    );
}

#[test]
fn dimension_mismatch_is_a_runtime_error() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let other = dir.path().join("wide");
    ok(&["synth", "--out", s(&other), "--stocks", "20", "--features", "12", "--factors", "4", "--d-llm", "8", "--days", "40"]);
    let out = dir.path().join("bt");
    let res = lgscrl(&["backtest", "--config", s(&other.join("config.toml")), "--out", s(&out), s(&f.ckpt("lg-stock"))]);
    assert_eq!(res.status.code(), Some(1), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(!out.exists());
}

#[test]
fn out_directory_falls_back_to_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("from-env");
    let res = Command::new(env!("CARGO_BIN_EXE_lgscrl"))
        .args(["--threads", "1", "synth", "--stocks", "10", "--features", "4", "--factors", "2", "--support", "1", "--d-llm", "4", "--days", "12"])
        .env("LGSCRL_OUT", &target)
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(target.join("features.csv").is_file());
    assert!(!dir.path().join("lgscrl-out").exists());
}

#[test]
fn seed_flag_changes_the_market_and_reruns_repeat_it() {
    let dir = tempfile::tempdir().unwrap();
    let gen = |seed: &str, name: &str| {
        let out = dir.path().join(name);
        ok(&["--seed", seed, "synth", "--out", s(&out), "--stocks", "10", "--features", "4", "--factors", "2", "--support", "1", "--d-llm", "4", "--days", "12"]);
        fs::read(out.join("returns.csv")).unwrap()
    };
    let a = gen("5", "a");
    assert_eq!(a, gen("5", "b"));
    assert_ne!(a, gen("6", "c"));
}
