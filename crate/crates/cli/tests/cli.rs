use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use venuerec::store::load_model;
use venuerec_service::recommend_fields;

fn fixture() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/dblp_mini.json")
}

fn venuerec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_venuerec"))
        .args(args)
        .env_remove("SOURCE_DATE_EPOCH")
        .env("RUST_LOG", "error")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = venuerec(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

/// The machine-readable error must be the last stderr line.
fn error_of(out: &Output) -> (i32, Value) {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let last = stderr.lines().last().unwrap_or_default();
    let v: Value = serde_json::from_str(last).unwrap_or_else(|_| panic!("not JSON: {stderr}"));
    (out.status.code().unwrap(), v["error"].clone())
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Pipeline {
    dir: tempfile::TempDir,
}

impl Pipeline {
    fn new() -> Self {
        let p = Pipeline { dir: tempfile::tempdir().unwrap() };
        ok(&["ingest", "--input", s(&fixture()), "--out", s(&p.path("ds.json"))]);
        ok(&[
            "split", "--data", s(&p.path("ds.json")), "--seed", "2",
            "--out-train", s(&p.path("train.json")), "--out-test", s(&p.path("test.json")),
        ]);
        ok(&["train", "--train", s(&p.path("train.json")), "--out", s(&p.path("model.json"))]);
        p
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

#[test]
fn pipeline_runs_end_to_end() {
    let p = Pipeline::new();
    let out = ok(&["--json", "split", "--data", s(&p.path("ds.json")), "--out-train", s(&p.path("a.json")), "--out-test", s(&p.path("b.json"))]);
    assert_eq!(stdout_json(&out)["train"], 140);
    assert_eq!(stdout_json(&out)["test"], 60);

    let out = ok(&[
        "--json", "eval", "--model", s(&p.path("model.json")), "--test", s(&p.path("test.json")),
        "--report", s(&p.path("report.json")),
    ]);
    let printed = stdout_json(&out);
    let saved: Value = serde_json::from_str(&std::fs::read_to_string(p.path("report.json")).unwrap()).unwrap();
    assert_eq!(printed, saved);
    let rho = &saved["evaluation"]["per_venue_rho"];
    for v in ["AAAI", "IJCAI", "KDD", "NeurIPS", "ICML"] {
        let r = rho[v].as_f64().unwrap();
        assert!((-1.0..=1.0).contains(&r));
    }
    assert!(saved["feature_space_warning"].is_null());

    let text = String::from_utf8(ok(&["eval", "--model", s(&p.path("model.json")), "--test", s(&p.path("test.json"))]).stdout).unwrap();
    assert!(text.lines().last().unwrap().starts_with("total"));

    let out = ok(&["--json", "coefficients", "--model", s(&p.path("model.json")), "--venue", "NeurIPS", "--top", "3"]);
    let coefs = stdout_json(&out)["coefficients"].as_array().unwrap().clone();
    assert_eq!(coefs.len(), 3);
    let w: Vec<f64> = coefs.iter().map(|c| c["weight"].as_f64().unwrap()).collect();
    assert!(w[0] >= w[1] && w[1] >= w[2]);
}

#[test]
fn recommend_matches_the_library_and_api_body() {
    let p = Pipeline::new();
    let model = p.path("model.json");
    let out = ok(&["--json", "recommend", "--model", s(&model), "--fields", "Deep learning, Data mining,Nonexistent"]);
    let file = load_model(&model).unwrap();
    let fields = ["Deep learning", "Data mining", "Nonexistent"].map(String::from);
    let expected = serde_json::to_string(&recommend_fields(&file.model, &fields).unwrap()).unwrap();
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim_end(), expected);

    let text = String::from_utf8(ok(&["recommend", "--model", s(&model), "--fields", "Deep learning"]).stdout).unwrap();
    assert!(text.starts_with("recommended: "));
}

#[test]
fn training_is_byte_reproducible_and_overwrites() {
    let p = Pipeline::new();
    let first = std::fs::read(p.path("model.json")).unwrap();
    ok(&["train", "--train", s(&p.path("train.json")), "--out", s(&p.path("model.json"))]);
    assert_eq!(first, std::fs::read(p.path("model.json")).unwrap());

    ok(&["train", "--train", s(&p.path("train.json")), "--learner", "s", "--out", s(&p.path("model.json"))]);
    let s_model = std::fs::read(p.path("model.json")).unwrap();
    assert_ne!(first, s_model);
    let leftovers: Vec<_> = std::fs::read_dir(p.dir.path())
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().starts_with(".tmp"))
        .collect();
    assert!(leftovers.is_empty());
}

#[test]
fn uniform_weighting_is_recorded_in_the_model() {
    let p = Pipeline::new();
    let model = p.path("uw.json");
    ok(&["train", "--train", s(&p.path("train.json")), "--weighting", "uniform", "--out", s(&model)]);
    let file = load_model(&model).unwrap();
    assert_eq!(file.model.config.weighting, venuerec::learners::Weighting::Uniform);
    assert!(file.model.propensity.is_none());
}

#[test]
fn config_file_overrides_defaults_and_flags_win() {
    let p = Pipeline::new();
    let cfg = p.path("cfg.json");
    std::fs::write(&cfg, r#"{"cv_folds": 3, "lambda_grid": [0.5, 5.0], "seed": 9}"#).unwrap();
    let out = ok(&[
        "--config", s(&cfg), "train", "--train", s(&p.path("train.json")), "--seed", "4", "--out", s(&p.path("m.json")),
    ]);
    let stderr = String::from_utf8(out.stderr).unwrap();
    let resolved: Value = stderr.lines().find_map(|l| serde_json::from_str::<Value>(l).ok()).unwrap();
    assert_eq!(resolved["command"], "train");
    let c = &resolved["resolved_config"];
    assert_eq!(c["cv_folds"], 3);
    assert_eq!(c["seed"], 4);
    assert_eq!(c["lambda_grid"], serde_json::json!([0.5, 5.0]));
    let file = load_model(&p.path("m.json")).unwrap();
    assert!(file.model.per_venue_lambda.values().all(|l| *l == 0.5 || *l == 5.0));
}

#[test]
fn errors_are_json_with_distinct_exit_codes() {
    let p = Pipeline::new();
    let model = s(&p.path("model.json")).to_string();

    let (code, e) = error_of(&venuerec(&["train", "--nope"]));
    assert_eq!((code, e["kind"].as_str().unwrap()), (2, "usage"));
    let (code, _) = error_of(&venuerec(&["frobnicate"]));
    assert_eq!(code, 2);
    let (code, _) = error_of(&venuerec(&["eval-suite", "--data", "x", "--seeds", "5..1"]));
    assert_eq!(code, 2);

    let cfg = p.path("bad.json");
    std::fs::write(&cfg, r#"{"cv_fold": 3}"#).unwrap();
    let (code, e) = error_of(&venuerec(&["--config", s(&cfg), "train", "--train", "x", "--out", "y"]));
    assert_eq!((code, e["kind"].as_str().unwrap()), (3, "config"));
    assert!(e["message"].as_str().unwrap().contains("cv_fold"));
    std::fs::write(&cfg, "{not json").unwrap();
    assert_eq!(error_of(&venuerec(&["--config", s(&cfg), "train", "--train", "x", "--out", "y"])).0, 3);
    assert_eq!(error_of(&venuerec(&["split", "--data", "x", "--train-fraction", "1.5", "--out-train", "a", "--out-test", "b"])).0, 3);
    assert_eq!(error_of(&venuerec(&["mmd", "--data", "x", "--permutations", "10"])).0, 3);

    let (code, e) = error_of(&venuerec(&["recommend", "--model", s(&p.path("missing.json")), "--fields", "a"]));
    assert_eq!((code, e["kind"].as_str().unwrap()), (4, "io"));

    let old = p.path("old.json");
    let text = std::fs::read_to_string(&model).unwrap().replacen("\"format_version\": 1", "\"format_version\": 0", 1);
    std::fs::write(&old, text).unwrap();
    let (code, e) = error_of(&venuerec(&["recommend", "--model", s(&old), "--fields", "a"]));
    assert_eq!((code, e["kind"].as_str().unwrap()), (5, "schema"));
    std::fs::write(&old, "[1, 2").unwrap();
    assert_eq!(error_of(&venuerec(&["train", "--train", s(&old), "--out", "y"])).0, 5);

    let (code, e) = error_of(&venuerec(&["coefficients", "--model", &model, "--venue", "SIGMOD"]));
    assert_eq!((code, e["kind"].as_str().unwrap()), (6, "data"));

    assert_eq!(error_of(&venuerec(&["serve", "--model", &model, "--bind", "not-an-address"])).0, 2);
}

#[test]
fn help_documents_defaults() {
    let train = String::from_utf8(ok(&["train", "--help"]).stdout).unwrap();
    for needle in ["[default: 5]", "[default: t]", "[default: ipw]", "0.001..0.009", "10..90"] {
        assert!(train.contains(needle), "train --help lacks {needle}");
    }
    let split = String::from_utf8(ok(&["split", "--help"]).stdout).unwrap();
    assert!(split.contains("[default: 0.7]"));
    let suite = String::from_utf8(ok(&["eval-suite", "--help"]).stdout).unwrap();
    assert!(suite.contains("[default: 0..9]"));
    let mmd = String::from_utf8(ok(&["mmd", "--help"]).stdout).unwrap();
    assert!(mmd.contains("[default: 1000]") && mmd.contains("[default: 0.01]"));
}

#[test]
fn eval_suite_and_mmd_reports() {
    let p = Pipeline::new();
    let ds = s(&p.path("ds.json")).to_string();
    let out = ok(&["--json", "eval-suite", "--data", &ds, "--seeds", "0..1", "--report", s(&p.path("suite.json"))]);
    let suite = stdout_json(&out);
    let methods: Vec<&str> = suite["reports"].as_array().unwrap().iter().map(|r| r["method"].as_str().unwrap()).collect();
    assert_eq!(methods, ["t-ipw", "t-uniform", "s-ipw", "logistic-association"]);
    assert_eq!(suite["reports"][0]["seeds"], serde_json::json!([0, 1]));

    let a = ok(&["--json", "mmd", "--data", &ds, "--permutations", "100", "--seed", "3"]).stdout;
    let b = ok(&["--json", "mmd", "--data", &ds, "--permutations", "100", "--seed", "3"]).stdout;
    assert_eq!(a, b);
    let report: Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(report["results"].as_array().unwrap().len(), 5);
    let text = String::from_utf8(ok(&["mmd", "--data", &ds, "--permutations", "100"]).stdout).unwrap();
    assert!(text.contains("NeurIPS"));
}

#[test]
fn synthetic_data_feeds_the_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let set = dir.path().join("set.json");
    let ds = dir.path().join("ds.json");
    let out = ok(&["--json", "synth", "--seed", "1", "--n", "300", "--d", "4", "--out", s(&set), "--dataset", s(&ds)]);
    assert_eq!(stdout_json(&out)["instances"], 300);
    let raw: Value = serde_json::from_str(&std::fs::read_to_string(&set).unwrap()).unwrap();
    assert_eq!(raw["instances"][0]["y"].as_array().unwrap().len(), 2);
    let again = dir.path().join("again.json");
    ok(&["synth", "--seed", "1", "--n", "300", "--d", "4", "--out", s(&again)]);
    assert_eq!(std::fs::read(&set).unwrap(), std::fs::read(&again).unwrap());

    ok(&["train", "--train", s(&ds), "--target-transform", "log", "--out", s(&dir.path().join("m.json"))]);

    let out = ok(&["--json", "synth-bench", "--seeds", "0..1", "--n", "400", "--d", "4"]);
    let board = stdout_json(&out);
    let oracle = board["rows"].as_array().unwrap().iter().find(|r| r["method"] == "oracle").unwrap();
    assert_eq!(oracle["accuracy"]["mean"], 1.0);
    assert_eq!(board["config"]["train"]["target_transform"], "log");
}
