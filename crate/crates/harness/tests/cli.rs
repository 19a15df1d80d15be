use std::fs;
use std::process::Command;

use maisac::experiment::{read_csv, COLUMNS};

const DEFAULT: &str = include_str!("../../../configs/default.toml");

fn maisac() -> Command {
    Command::new(env!("CARGO_BIN_EXE_maisac"))
}

/// Default scenario with the optimizer and training cut to a few steps.
fn quick_config(dir: &std::path::Path) -> std::path::PathBuf {
    let text = DEFAULT
        .replace("iterations = 30", "iterations = 2")
        .replace("steps = 200", "steps = 2")
        .replace("samples = 32", "samples = 4")
        .replace("batch = 8", "batch = 2");
    let path = dir.join("quick.toml");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn run_writes_one_row_per_seed_and_method() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick_config(dir.path());
    let out = dir.path().join("run.csv");
    let status = maisac()
        .args(["run", "--seeds", "0..2", "--method", "fp,fpa", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let rows = read_csv(fs::File::open(&out).unwrap()).unwrap();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.is_ok() && r.sweep_value == 0.15));
    let header = fs::read_to_string(&out).unwrap();
    assert_eq!(header.lines().next().unwrap(), COLUMNS.join(","));
}

#[test]
fn sweep_then_plotdata_summarizes_each_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick_config(dir.path());
    let raw = dir.path().join("sweep.csv");
    let status = maisac()
        .args(["sweep", "--param", "max_power_w", "--values", "0.5,1.0", "--seed", "3", "--method", "fpa", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&raw)
        .status()
        .unwrap();
    assert!(status.success());
    let out = maisac().args(["plotdata", "--input"]).arg(&raw).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3, "{text}");
    assert!(lines[0].starts_with("sweep,sweep_value,method"));
    assert!(lines[1].starts_with("max_power_w,0.5,fpa,1,0,"));
}

#[test]
fn train_writes_a_loadable_checkpoint_and_loss_curve() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick_config(dir.path());
    let ckpt = dir.path().join("policy.txt");
    let losses = dir.path().join("losses.csv");
    let status = maisac()
        .args(["train", "--mode", "nonrobust", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&ckpt)
        .arg("--losses")
        .arg(&losses)
        .status()
        .unwrap();
    assert!(status.success());
    maisac_gnn::params::Params::from_text(&fs::read_to_string(&ckpt).unwrap()).unwrap();
    let curve = fs::read_to_string(&losses).unwrap();
    assert_eq!(curve.lines().next(), Some("step,loss"));
    assert_eq!(curve.lines().count(), 3);
}

#[test]
fn bad_input_is_reported_with_a_location() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.toml");
    fs::write(&path, DEFAULT.replace("crlb_threshold = 0.05\n", "")).unwrap();
    let out = maisac().args(["run", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("broken.toml:") && err.contains("crlb_threshold"), "{err}");

    let out = maisac().args(["run", "--method", "gnn"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("unknown method"));
}
