use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use easytime_core::automl::{pretrained_model, ClassifierModel};
use easytime_qa::{demo_store_in_memory, QaEngine, SessionHistory, TOP_METHODS_QUESTION};
use easytime_store::{RunStatus, Store};

fn easytime(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_easytime"));
    cmd.args(args).env_remove("EASYTIME_WORKERS").env_remove("QA_LLM_URL");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn copy_quickstart(dir: &Path) -> PathBuf {
    let path = dir.join("quickstart.json");
    std::fs::copy(configs_dir().join("quickstart.json"), &path).unwrap();
    path
}

#[test]
fn quickstart_is_reproducible() {
    let mut reports = Vec::new();
    for workers in ["", "1"] {
        let dir = tempfile::tempdir().unwrap();
        let config = copy_quickstart(dir.path());
        let env: &[(&str, &str)] = if workers.is_empty() { &[] } else { &[("EASYTIME_WORKERS", workers)] };
        for _ in 0..2 {
            let out = easytime(&["run", "-c", config.to_str().unwrap()], env);
            assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
            assert!(stderr(&out).contains("60/60"));
            let md = std::fs::read(dir.path().join("out/quickstart-report.md")).unwrap();
            let csv = std::fs::read(dir.path().join("out/quickstart-report.csv")).unwrap();
            reports.push((md, csv));
        }
        let store = Store::open_read_only(dir.path().join("out/quickstart.db")).unwrap();
        assert_eq!(store.count_runs(RunStatus::Ok).unwrap(), 60);
        assert_eq!(store.count_runs(RunStatus::Failed).unwrap(), 0);
    }
    assert!(reports.windows(2).all(|w| w[0] == w[1]));
    let md = String::from_utf8(reports[0].0.clone()).unwrap();
    assert!(md.contains("| seasonal_naive | 6 |"));
    assert_eq!(String::from_utf8(reports[0].1.clone()).unwrap().lines().count(), 61);
}

#[test]
fn config_and_io_errors_exit_1_without_a_database() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    std::fs::write(&missing, r#"{"datasets": ["nowhere.csv"], "methods": ["naive"]}"#).unwrap();
    let out = easytime(&["run", "-c", missing.to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("nowhere.csv"));
    assert!(!dir.path().join("results.db").exists());

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"datasets": [], "methods": ["nope"], "eval": {"horizon": 0}}"#).unwrap();
    let out = easytime(&["run", "-c", bad.to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    for path in ["datasets:", "methods[0]:", "eval.horizon:"] {
        assert!(err.contains(path), "{err}");
    }
    assert!(!dir.path().join("results.db").exists());

    let out = easytime(&["run", "-c", dir.path().join("absent.json").to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(1));
    let out = easytime(&["run", "-c", missing.to_str().unwrap()], &[("EASYTIME_WORKERS", "many")]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn failed_runs_exit_2_and_are_listed() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.json");
    std::fs::write(
        &config,
        r#"{"datasets": [{"synthetic": [{"length": 300}]}],
            "methods": ["naive", {"method_id": "seasonal_naive", "params": {"period": 500}}],
            "output": {"results_db": "r.db", "report": "r.md"}}"#,
    )
    .unwrap();
    let out = easytime(&["run", "-c", config.to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    let report = std::fs::read_to_string(dir.path().join("r.md")).unwrap();
    assert!(report.contains("- failed runs: 1"));
    assert!(report.contains("| synthetic-0 | seasonal_naive(period=500) |"));
    let store = Store::open_read_only(dir.path().join("r.db")).unwrap();
    assert_eq!(store.count_runs(RunStatus::Ok).unwrap(), 1);
    assert_eq!(store.count_runs(RunStatus::Failed).unwrap(), 1);
}

#[test]
fn csv_globs_are_read_relative_to_the_config() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("data")).unwrap();
    for (name, phase) in [("a", 0.0), ("b", 1.0)] {
        let mut csv = String::from("t,value\n");
        for t in 0..200 {
            let v = 5.0 + (t as f64 * std::f64::consts::TAU / 12.0 + phase).sin() + t as f64 * 0.01;
            csv.push_str(&format!("{t},{v:.5}\n"));
        }
        std::fs::write(dir.path().join(format!("data/{name}.csv")), csv).unwrap();
    }
    let config = dir.path().join("c.json");
    std::fs::write(&config, r#"{"datasets": ["data/*.csv"], "methods": ["naive", "theta"], "eval": {"horizon": 12}}"#)
        .unwrap();
    let out = easytime(&["run", "-c", config.to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert!(csv.contains("\na,naive,") && csv.contains("\nb,theta,"), "{csv}");
}

#[test]
fn validate_echoes_the_canonical_config() {
    let out = easytime(&["validate", "-c", configs_dir().join("quickstart.json").to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(0));
    let echoed: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(echoed["methods"].as_array().unwrap().len(), 10);
    assert_eq!(echoed["eval"]["lookback"], 512);
}

#[test]
fn ask_and_export_on_the_demo_database() {
    let dir = tempfile::tempdir().unwrap();
    let db = dir.path().join("demo.db");
    let out = easytime(&["demo", "-o", db.to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));

    let golden = QaEngine::grammar_only().answer(
        TOP_METHODS_QUESTION,
        &mut SessionHistory::new("g"),
        &demo_store_in_memory().unwrap(),
    );
    let out = easytime(&["ask", "-d", db.to_str().unwrap(), TOP_METHODS_QUESTION], &[]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines[0], golden.text);
    assert_eq!(lines[2], format!("SQL: {}", golden.sql.unwrap()));
    assert_eq!(lines[4], golden.columns.join("\t"));
    let rows: Vec<String> =
        golden.rows.iter().map(|r| r.iter().map(|v| v.render()).collect::<Vec<_>>().join("\t")).collect();
    assert_eq!(&lines[5..], rows.as_slice());

    let out = easytime(&["ask", "-d", db.to_str().unwrap(), "tell me a joke"], &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stdout).unwrap().contains("Try one of these"));
    let out = easytime(&["ask", "-d", dir.path().join("none.db").to_str().unwrap(), TOP_METHODS_QUESTION], &[]);
    assert_eq!(out.status.code(), Some(1));

    let export = dir.path().join("export");
    let out = easytime(&["export", "-d", db.to_str().unwrap(), "-o", export.to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(0));
    for table in ["datasets", "methods", "runs", "scores"] {
        assert!(export.join(format!("{table}.csv")).exists());
    }
    assert_eq!(std::fs::read_to_string(export.join("runs.csv")).unwrap().lines().count(), 481);
}

#[test]
fn pretrain_reproduces_the_shipped_model() {
    let dir = tempfile::tempdir().unwrap();
    let model_path = dir.path().join("model.json");
    let config = configs_dir().join("pretrain.json");
    let out = easytime(&["pretrain", "-c", config.to_str().unwrap(), "-o", model_path.to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let fresh = ClassifierModel::from_json(&std::fs::read_to_string(&model_path).unwrap()).unwrap();
    let shipped = pretrained_model();
    assert_eq!(fresh.method_ids, shipped.method_ids);
    for (a, b) in fresh.w.iter().zip(&shipped.w) {
        assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()), "{a} vs {b}");
    }
}
