#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Run {
    pub fn ok(&self) -> &Self {
        assert_eq!(self.code, 0, "stderr: {}", self.stderr);
        self
    }

    /// The single-line JSON error object on stderr.
    pub fn error(&self) -> serde_json::Value {
        let line = self.stderr.lines().last().unwrap_or_default();
        serde_json::from_str(line).unwrap_or_else(|e| panic!("not a JSON error line ({e}): {:?}", self.stderr))
    }
}

pub fn memfail<I, S>(args: I) -> Run
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    let out: Output = Command::new(env!("CARGO_BIN_EXE_memfail"))
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .expect("spawn memfail");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

pub fn p(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

pub fn s(path: &Path) -> String {
    path.to_str().unwrap().to_string()
}

/// simulate, extract, label, train and predict on a small fleet; returns
/// the artifact paths in pipeline order.
pub fn pipeline(dir: &Path, jobs: usize) -> Vec<PathBuf> {
    let j = jobs.to_string();
    let log = p(dir, "ce.jsonl");
    let failures = p(dir, "failures.csv");
    let manifest = p(dir, "manifest.json");
    let features = p(dir, "features.csv");
    let labeled = p(dir, "labeled.csv");
    let splits = p(dir, "splits.json");
    let model = p(dir, "model.json");
    let verdicts = p(dir, "verdicts.csv");
    let eval_dir = p(dir, "eval");
    std::fs::create_dir_all(&eval_dir).unwrap();
    memfail([
        "--jobs", &j, "simulate", "--log", &s(&log), "--failures", &s(&failures), "--manifest", &s(&manifest),
        "--n-normal", "150", "--n-failing", "20", "--duration-hours", "1500", "--seed", "11",
    ])
    .ok();
    memfail([
        "--jobs", &j, "extract", "--log", &s(&log), "--out", &s(&features), "--window-hours", "168", "--mode",
        "overall",
    ])
    .ok();
    memfail([
        "--jobs", &j, "label", "--features", &s(&features), "--failures", &s(&failures), "--out", &s(&labeled),
        "--splits", &s(&splits), "--lead-hours", "3", "--n-normal", "80", "--repeats", "2", "--seed", "5",
    ])
    .ok();
    memfail([
        "--jobs", &j, "train", "--features", &s(&labeled), "--splits", &s(&splits), "--repeat", "1", "--model",
        &s(&model), "--n-trees", "15", "--forest-seed", "2",
    ])
    .ok();
    memfail(["--jobs", &j, "predict", "--model", &s(&model), "--features", &s(&features), "--out", &s(&verdicts)]).ok();
    memfail([
        "--jobs", &j, "evaluate", "--log", &s(&log), "--failures", &s(&failures), "--out-dir", &s(&eval_dir), "--w",
        "168", "--n-normal", "80", "--mode", "both", "--repeats", "2", "--folds", "4", "--n-trees", "15",
    ])
    .ok();
    let mut all = vec![log, failures, manifest, features, labeled, splits, model, verdicts];
    all.push(eval_dir.join("report.json"));
    all.push(eval_dir.join("report.txt"));
    all.push(eval_dir.join("baseline_w168.csv"));
    all
}
