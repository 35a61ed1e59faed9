mod common;

use common::{memfail, p, pipeline, s};
use memfail::fengine::{CATALOG_VERSION, FEATURE_COUNT};

#[test]
fn catalog_lists_every_feature() {
    let run = memfail(["catalog"]);
    run.ok();
    assert!(run.stdout.contains(CATALOG_VERSION));
    for name in memfail::fengine::feature_names() {
        assert!(run.stdout.contains(name), "{name} missing from catalog document");
    }
}

#[test]
fn extract_on_empty_log_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let log = p(dir.path(), "empty.jsonl");
    std::fs::write(&log, "").unwrap();
    let out = p(dir.path(), "features.csv");
    memfail(["extract", "--log", &s(&log), "--out", &s(&out), "--window-hours", "168"]).ok();
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2, "{text}");
    assert!(lines[0].starts_with(&format!("#catalog={CATALOG_VERSION}")));
    assert_eq!(lines[1].split(',').count(), 3 + FEATURE_COUNT);
    assert!(lines[1].starts_with("dimm,ts,label,"));
}

#[test]
fn train_rejects_foreign_catalog_naming_both_versions() {
    let dir = tempfile::tempdir().unwrap();
    let log = p(dir.path(), "empty.jsonl");
    std::fs::write(&log, "").unwrap();
    let features = p(dir.path(), "features.csv");
    memfail(["extract", "--log", &s(&log), "--out", &s(&features), "--window-hours", "24"]).ok();
    let text = std::fs::read_to_string(&features).unwrap().replace(CATALOG_VERSION, "memfail-catalog/0");
    std::fs::write(&features, text).unwrap();

    let model = p(dir.path(), "model.json");
    let run = memfail(["train", "--features", &s(&features), "--model", &s(&model)]);
    assert_eq!(run.code, 3);
    let err = run.error();
    assert_eq!(err["error"], "data");
    let msg = err["message"].as_str().unwrap();
    assert!(msg.contains("memfail-catalog/0") && msg.contains(CATALOG_VERSION), "{msg}");
    assert!(!model.exists());
}

#[test]
fn usage_errors_exit_2_with_one_json_line() {
    let run = memfail(["extract", "--no-such-flag"]);
    assert_eq!(run.code, 2);
    assert_eq!(run.stderr.lines().count(), 1, "{}", run.stderr);
    assert_eq!(run.error()["error"], "usage");

    let run = memfail(["frobnicate"]);
    assert_eq!(run.code, 2);

    let run = memfail(["extract", "--log", "x.jsonl"]);
    assert_eq!(run.code, 2);
    assert!(run.error()["message"].as_str().unwrap().contains("--out"));

    let dir = tempfile::tempdir().unwrap();
    let log = p(dir.path(), "l.jsonl");
    std::fs::write(&log, "").unwrap();
    let out = p(dir.path(), "f.csv");
    let run = memfail(["extract", "--log", &s(&log), "--out", &s(&out), "--window-hours", "-1"]);
    assert_eq!(run.code, 2);
    assert!(!out.exists());

    let run = memfail(["--jobs", "0", "catalog"]);
    assert_eq!(run.code, 2);
}

#[test]
fn help_and_version_succeed() {
    assert_eq!(memfail(["--help"]).code, 0);
    assert_eq!(memfail(["--version"]).code, 0);
}

#[test]
fn missing_input_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = p(dir.path(), "f.csv");
    let run = memfail(["extract", "--log", &s(&p(dir.path(), "absent.jsonl")), "--out", &s(&out), "--window-hours", "3"]);
    assert_eq!(run.code, 3);
    assert_eq!(run.error()["error"], "data");
    assert!(!out.exists());
}

#[test]
fn config_file_supplies_values_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let log = p(dir.path(), "ce.jsonl");
    let cfg = p(dir.path(), "run.json");
    let config = serde_json::json!({
        "simulate": {
            "log": s(&log),
            "failures": s(&p(dir.path(), "failures.csv")),
            "manifest": s(&p(dir.path(), "manifest.json")),
            "n_normal": 5,
            "n_failing": 1,
            "duration_hours": 800.0,
            "seed": 1
        }
    });
    std::fs::write(&cfg, config.to_string()).unwrap();
    memfail(["--config", &s(&cfg), "simulate"]).ok();
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(p(dir.path(), "manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["dimms"].as_array().unwrap().len(), 6);

    memfail(["--config", &s(&cfg), "simulate", "--n-normal", "9"]).ok();
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(p(dir.path(), "manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["dimms"].as_array().unwrap().len(), 10);

    std::fs::write(&cfg, r#"{"simulate": {"n_normals": 3}}"#).unwrap();
    assert_eq!(memfail(["--config", &s(&cfg), "simulate"]).code, 2);
}

#[test]
fn invalid_fleet_config_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let log = p(dir.path(), "ce.jsonl");
    let run = memfail([
        "simulate", "--log", &s(&log), "--failures", &s(&p(dir.path(), "f.csv")), "--manifest",
        &s(&p(dir.path(), "m.json")), "--duration-hours", "100",
    ]);
    assert_eq!(run.code, 2);
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn failed_evaluate_leaves_no_partial_report() {
    let dir = tempfile::tempdir().unwrap();
    let log = p(dir.path(), "ce.jsonl");
    let failures = p(dir.path(), "failures.csv");
    memfail([
        "simulate", "--log", &s(&log), "--failures", &s(&failures), "--manifest", &s(&p(dir.path(), "m.json")),
        "--n-normal", "20", "--n-failing", "3", "--duration-hours", "800",
    ])
    .ok();
    let out_dir = p(dir.path(), "eval");
    std::fs::create_dir(&out_dir).unwrap();
    let run = memfail([
        "evaluate", "--log", &s(&log), "--failures", &s(&failures), "--out-dir", &s(&out_dir), "--n-normal", "10",
        "--folds", "5", "--repeats", "1", "--n-trees", "3",
    ]);
    assert_eq!(run.code, 3, "{}", run.stderr);
    assert!(run.error()["message"].as_str().unwrap().contains("smaller k"));
    assert_eq!(std::fs::read_dir(&out_dir).unwrap().count(), 0);
}

#[test]
fn pipeline_is_deterministic_across_job_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let one = pipeline(a.path(), 1);
    let four = pipeline(b.path(), 4);
    for (x, y) in one.iter().zip(&four) {
        let (bx, by) = (std::fs::read(x).unwrap(), std::fs::read(y).unwrap());
        assert!(bx == by, "{} differs between --jobs 1 and --jobs 4", x.file_name().unwrap().to_string_lossy());
    }

    let verdicts = std::fs::read_to_string(&one[7]).unwrap();
    let mut lines = verdicts.lines();
    assert_eq!(lines.next(), Some("dimm,fail,first_alarm_ts,max_proba"));
    assert_eq!(lines.count(), 170);

    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&one[8]).unwrap()).unwrap();
    assert_eq!(report["format"], "memfail-report/1");
    assert_eq!(report["rows"].as_array().unwrap().len(), 2);
    assert_eq!(report["rows"][0]["window_hours"], 168.0);
    assert_eq!(report["rows"][0]["n_normal"], 80);
}

#[test]
fn predict_rejects_model_with_wrong_catalog() {
    let dir = tempfile::tempdir().unwrap();
    let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
    let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
    let labels: Vec<u8> = (0..10).map(|i| u8::from(i > 4)).collect();
    let params = memfail::forest::ForestParams { n_trees: 2, ..Default::default() };
    let model = memfail::forest::train_matrix(&refs, &labels, &params, "other-catalog/3").unwrap();
    let model_path = p(dir.path(), "model.json");
    std::fs::write(&model_path, memfail::forest::Classifier::to_json(&model).unwrap()).unwrap();

    let log = p(dir.path(), "empty.jsonl");
    std::fs::write(&log, "").unwrap();
    let features = p(dir.path(), "features.csv");
    memfail(["extract", "--log", &s(&log), "--out", &s(&features), "--window-hours", "24"]).ok();
    let out = p(dir.path(), "verdicts.csv");
    let run = memfail(["predict", "--model", &s(&model_path), "--features", &s(&features), "--out", &s(&out)]);
    assert_eq!(run.code, 3);
    let msg = run.error()["message"].as_str().unwrap().to_string();
    assert!(msg.contains("other-catalog/3") && msg.contains(CATALOG_VERSION), "{msg}");
    assert!(!out.exists());
}
