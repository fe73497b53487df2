//! End-to-end checks of the command-line interface on a small synthetic
//! dataset: run, summarize, grind --inspect, hpo, and exit codes.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_gapbench")
}

fn write_toy_csv(path: &Path, rows: usize) {
    let mut f = std::fs::File::create(path).unwrap();
    writeln!(f, "ts,a,b,OT").unwrap();
    for i in 0..rows {
        let x = i as f64;
        writeln!(
            f,
            "{},{:.6},{:.6},{:.6}",
            i,
            (x * 0.13).sin(),
            (x * 0.29).cos(),
            (x * 0.13).sin() - 0.5 * (x * 0.29).cos()
        )
        .unwrap();
    }
}

fn write_config(dir: &Path, extra_imputer: &str, seeds: &str) -> PathBuf {
    let path = dir.join("plan.toml");
    let text = format!(
        r#"
[dataset.toy]
source = "toy.csv"
window = 8
split_fractions = [0.6, 0.2]

[grind.p40]
pattern = "point"
rate = 0.4

[imputer.locf]
kind = "locf"
{extra_imputer}

[run]
seeds = {seeds}
output = "out.csv"
"#
    );
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn run_then_summarize() {
    let dir = tempfile::tempdir().unwrap();
    write_toy_csv(&dir.path().join("toy.csv"), 400);
    let config = write_config(dir.path(), "", "[1, 2]");

    let status = Command::new(bin())
        .arg("run")
        .arg(&config)
        .status()
        .unwrap();
    assert!(status.success());

    let out_path = dir.path().join("out.csv");
    assert!(out_path.exists());
    let output = Command::new(bin())
        .arg("summarize")
        .arg(&out_path)
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("locf"), "{stdout}");
    assert!(stdout.contains("mae_mean"), "{stdout}");
}

#[test]
fn run_exit_code_reflects_failures() {
    let dir = tempfile::tempdir().unwrap();
    write_toy_csv(&dir.path().join("toy.csv"), 400);
    // rate 0 leaves nothing to evaluate: every cell fails, exit code nonzero
    let config = dir.path().join("bad.toml");
    std::fs::write(
        &config,
        r#"
[dataset.toy]
source = "toy.csv"
window = 8
split_fractions = [0.6, 0.2]

[grind.empty]
pattern = "point"
rate = 0.0

[imputer.locf]
kind = "locf"

[run]
seeds = [1]
output = "out.csv"
"#,
    )
    .unwrap();
    let status = Command::new(bin())
        .arg("run")
        .arg(&config)
        .stdout(std::process::Stdio::null())
        .stderr(std::process::Stdio::null())
        .status()
        .unwrap();
    assert!(!status.success());
}

#[test]
fn grind_inspect_prints_rates() {
    let dir = tempfile::tempdir().unwrap();
    write_toy_csv(&dir.path().join("toy.csv"), 400);
    let config = write_config(dir.path(), "", "[1]");
    let output = Command::new(bin())
        .arg("grind")
        .arg(&config)
        .arg("--inspect")
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8(output.stdout).unwrap();
    for split in ["train", "val", "test"] {
        assert!(stdout.contains(split), "missing {split} in:\n{stdout}");
    }
    assert!(stdout.contains("removed 0.4"), "{stdout}");
}

#[test]
fn hpo_prints_winning_spec() {
    let dir = tempfile::tempdir().unwrap();
    write_toy_csv(&dir.path().join("toy.csv"), 400);
    let config = write_config(
        dir.path(),
        "\n[imputer.adapted]\nkind = \"adapted_linear\"\nepochs = 4\npatience = 2\n",
        "[1]",
    );
    let output = Command::new(bin())
        .arg("hpo")
        .arg(&config)
        .arg("--budget")
        .arg("2")
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("[imputer.adapted]"), "{stdout}");
    assert!(stdout.contains("learning_rate ="), "{stdout}");
}

#[test]
fn output_flag_overrides_config_with_warning() {
    let dir = tempfile::tempdir().unwrap();
    write_toy_csv(&dir.path().join("toy.csv"), 400);
    let config = write_config(dir.path(), "", "[1]");
    let override_path = dir.path().join("elsewhere.csv");
    let output = Command::new(bin())
        .arg("run")
        .arg(&config)
        .arg("--output")
        .arg(&override_path)
        .output()
        .unwrap();
    assert!(output.status.success());
    assert!(override_path.exists());
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert!(
        stderr.contains("overrides"),
        "override must be announced, got:\n{stderr}"
    );
}

#[test]
fn jsonl_format_writes_objects() {
    let dir = tempfile::tempdir().unwrap();
    write_toy_csv(&dir.path().join("toy.csv"), 400);
    let config = dir.path().join("plan.toml");
    std::fs::write(
        &config,
        r#"
[dataset.toy]
source = "toy.csv"
window = 8
split_fractions = [0.6, 0.2]

[grind.p40]
pattern = "point"
rate = 0.4

[imputer.linear]
kind = "linear"

[run]
seeds = [1]
output = "out.jsonl"
format = "jsonl"
"#,
    )
    .unwrap();
    let status = Command::new(bin())
        .arg("run")
        .arg(&config)
        .stdout(std::process::Stdio::null())
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(dir.path().join("out.jsonl")).unwrap();
    let value: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(value["imputer"], "linear");
    assert_eq!(value["status"], "ok");
}
