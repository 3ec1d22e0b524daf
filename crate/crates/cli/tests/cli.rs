use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const TINY: &str = r#"
[env]
n = 150
impressions_per_step = 1.5e6

[agent]
n_s = 30
m = 2
hidden = [8]
conv_channels = [4, 3]
conv_kernel = 4
conv_stride = 2
batch_size = 8

[protocol]
warmup_steps = 6
train_steps = 6
seeds = [1, 2]
"#;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_metabolism")).args(args).output().expect("spawn cli")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("metabolism-cli-{name}-{}", std::process::id()));
    std::fs::remove_dir_all(&dir).ok();
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn validate_config_prints_resolved_keys() {
    let dir = scratch("validate");
    let config = write_config(&dir, TINY);
    let out = cli(&["validate-config", "--config", &config]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for key in ["n_s = 30", "m = 2", "beta = 0.999", "gamma = 0.99", "tau = 0.99"] {
        assert!(text.contains(key), "missing {key}");
    }
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn invalid_config_exits_nonzero() {
    let dir = scratch("invalid");
    let config = write_config(&dir, "[agent]\ngamma = 1.2\n");
    let out = cli(&["validate-config", "--config", &config]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("gamma"));
    let out = cli(&["run", "--config", &config]);
    assert!(!out.status.success());
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn unknown_variant_is_rejected() {
    let out = cli(&["run", "--variant", "ddpg"]);
    assert!(!out.status.success());
}

#[test]
fn sweep_writes_per_seed_directories() {
    let dir = scratch("sweep");
    let config = write_config(&dir, TINY);
    let out_dir = dir.join("out");
    let out = cli(&["run", "--config", &config, "--variant", "fpc", "--audit", "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for seed in [1, 2] {
        let csv = std::fs::read_to_string(out_dir.join(format!("seed-{seed}/metrics.csv"))).unwrap();
        assert_eq!(csv.lines().count(), 13);
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["method"], "fpc");
    assert_eq!(summary["seeds"], serde_json::json!([1, 2]));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn warmup_only_and_compare() {
    let dir = scratch("compare");
    let config = write_config(&dir, TINY);
    let a = dir.join("a");
    let b = dir.join("b");
    for out_dir in [&a, &b] {
        let out = cli(&["warmup-only", "--config", &config, "--seed", "3", "--out", out_dir.to_str().unwrap()]);
        assert!(out.status.success());
    }
    let csv = std::fs::read_to_string(a.join("metrics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
    assert!(csv.lines().skip(1).all(|l| l.contains(",warmup,")));

    let out = cli(&["compare", a.join("metrics.csv").to_str().unwrap(), b.join("metrics.csv").to_str().unwrap()]);
    assert!(out.status.success());
    let rel: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rel["clicks_pct"], 0.0);
    assert_eq!(rel["reward_pct"], 0.0);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn compare_rejects_mismatched_lengths() {
    let dir = scratch("mismatch");
    let short = write_config(&dir, TINY);
    let long_path = dir.join("long.toml");
    std::fs::write(&long_path, TINY.replace("warmup_steps = 6", "warmup_steps = 9")).unwrap();
    let (a, b) = (dir.join("a"), dir.join("b"));
    assert!(cli(&["warmup-only", "--config", &short, "--seed", "1", "--out", a.to_str().unwrap()]).status.success());
    assert!(cli(&["warmup-only", "--config", long_path.to_str().unwrap(), "--seed", "1", "--out", b.to_str().unwrap()])
        .status
        .success());
    let out = cli(&["compare", a.join("metrics.csv").to_str().unwrap(), b.join("metrics.csv").to_str().unwrap()]);
    assert!(!out.status.success());
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn unwritable_output_exits_nonzero() {
    let dir = scratch("unwritable");
    let config = write_config(&dir, TINY);
    let blocker = dir.join("blocker");
    std::fs::write(&blocker, b"x").unwrap();
    let target = blocker.join("nested");
    let out = cli(&["run", "--config", &config, "--seed", "1", "--variant", "ctr-a", "--out", target.to_str().unwrap()]);
    assert!(!out.status.success());
    std::fs::remove_dir_all(&dir).ok();
}
