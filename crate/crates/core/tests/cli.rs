use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use globe_ce::predictors::Model;

fn toy_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/toy")
}

fn globe_ce(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_globe-ce"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// A config in `dir` pointing at the bundled toy data, followed by `extra`.
fn write_config(dir: &Path, model: &Path, seed: Option<u64>, extra: &str) -> PathBuf {
    let toy = toy_dir();
    let seed = seed.map_or(String::new(), |s| format!("seed = {s}\n"));
    let text = format!(
        "{seed}[data]\ncsv = {:?}\nschema = {:?}\nmodel = {:?}\n\n\
         [generation]\nn_s = 40\n\n[grid]\nm = 50\nk_max = 5.0\n{extra}",
        toy.join("data.csv"),
        toy.join("schema.json"),
        model
    );
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn help_lists_every_subcommand() {
    let o = globe_ce(&["--help"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stdout);
    for sub in [
        "explain",
        "compare",
        "ares",
        "bench",
        "fit",
        "inspect-model",
    ] {
        assert!(text.contains(sub), "{sub} missing from help");
    }
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(code(&globe_ce(&[])), 2);
    assert_eq!(code(&globe_ce(&["explain"])), 2);
    assert_eq!(code(&globe_ce(&["summarise", "--config", "x"])), 2);
}

#[test]
fn toy_explain_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let config = toy_dir().join("config.toml");
    let out = dir.path().join("out");
    let o = globe_ce(&[
        "explain",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--workers",
        "2",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("artifacts in"));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["workers"], 2);
    assert!(out.join("profile_0.svg").is_file());
}

#[test]
fn missing_config_file_exits_with_two() {
    let o = globe_ce(&["ares", "--config", "/nonexistent/run.toml"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("cannot read config"));
}

#[test]
fn seed_comes_from_config_or_flag() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &toy_dir().join("model.json"), None, "");
    let config = config.to_str().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();

    let o = globe_ce(&["inspect-model", "--config", config, "--out", out]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("seed"), "{}", stderr(&o));

    let o = globe_ce(&[
        "inspect-model",
        "--config",
        config,
        "--out",
        out,
        "--seed",
        "11",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn invalid_values_exit_with_two_and_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &dir.path().join("absent.json"), Some(1), "");
    let o = globe_ce(&[
        "explain",
        "--config",
        config.to_str().unwrap(),
        "--workers",
        "0",
    ]);
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    assert!(err.contains("data.model: file not found"), "{err}");
    assert!(err.contains("workers must be at least 1"), "{err}");
}

#[test]
fn stage_failure_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let schema = globe_ce::schema::FeatureSchema::load(toy_dir().join("schema.json")).unwrap();
    let model_path = dir.path().join("always_one.json");
    Model::logistic(vec![0.0; schema.dim()], 50.0)
        .save(&model_path)
        .unwrap();
    let config = write_config(dir.path(), &model_path, Some(1), "");
    let out = dir.path().join("out");
    let o = globe_ce(&[
        "explain",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("select affected"), "{}", stderr(&o));
}
