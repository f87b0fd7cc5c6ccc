use std::path::PathBuf;
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn ssrlint(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ssrlint")).args(args).env("RUST_LOG", "off").output().unwrap()
}

fn path(p: PathBuf) -> String {
    p.to_string_lossy().into_owned()
}

#[test]
fn empty_directory_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = ssrlint(&["analyze", &path(dir.path().to_path_buf())]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("0 finding(s)"));
}

#[test]
fn findings_exit_one_unless_fail_on_none() {
    let f = path(fixtures().join("corpus/reward_rate_setter.ast.json"));
    assert_eq!(ssrlint(&["analyze", &f]).status.code(), Some(1));
    assert_eq!(ssrlint(&["analyze", "--fail-on", "none", &f]).status.code(), Some(0));
}

#[test]
fn clean_fixture_exits_zero() {
    let f = path(fixtures().join("corpus/reward_rate_setter_fixed.ast.json"));
    assert_eq!(ssrlint(&["analyze", &f]).status.code(), Some(0));
}

#[test]
fn unreadable_or_malformed_input_exits_two() {
    assert_eq!(ssrlint(&["analyze", "/nonexistent/x.ast.json"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.ast.json");
    std::fs::write(&bad, "{not json").unwrap();
    let out = ssrlint(&["analyze", &path(bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stdout).contains("error:"));
}

#[test]
fn bad_arguments_exit_two() {
    let f = path(fixtures().join("corpus/reward_rate_setter.ast.json"));
    assert_eq!(ssrlint(&["analyze", "--rules", "NOPE", &f]).status.code(), Some(2));
    assert_eq!(ssrlint(&["analyze", "--format", "xml", &f]).status.code(), Some(2));
}

#[test]
fn rules_filter_changes_exit_code() {
    let f = path(fixtures().join("corpus/reward_rate_setter.ast.json"));
    assert_eq!(ssrlint(&["analyze", "--rules", "UV,RT", &f]).status.code(), Some(0));
    assert_eq!(ssrlint(&["analyze", "--rules", "SVM", &f]).status.code(), Some(1));
}

#[test]
fn sarif_output_is_valid_json() {
    let out = ssrlint(&["analyze", "--format", "sarif", &path(fixtures().join("corpus"))]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["version"], "2.1.0");
}

#[test]
fn strict_llm_without_endpoint_is_an_error() {
    let f = path(fixtures().join("corpus/reward_rate_setter.ast.json"));
    let out = Command::new(env!("CARGO_BIN_EXE_ssrlint"))
        .args(["analyze", "--extractor", "llm", "--strict-llm", &f])
        .env_remove("SSRLINT_LLM_ENDPOINT")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn dump_cdg_writes_dot_files() {
    let dir = tempfile::tempdir().unwrap();
    let f = path(fixtures().join("units/pending_reward.ast.json"));
    ssrlint(&["analyze", "--dump-cdg", &path(dir.path().to_path_buf()), &f]);
    let dots: Vec<_> = std::fs::read_dir(dir.path()).unwrap().filter_map(|e| e.ok()).collect();
    assert!(!dots.is_empty());
    let text = std::fs::read_to_string(dots[0].path()).unwrap();
    assert!(text.starts_with("digraph"));
}

#[test]
fn score_model_prints_a_table() {
    let out = ssrlint(&["score-model", "--gold", &path(fixtures().join("corpus/gold.json"))]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("CalDepend") && text.contains("Total"));
}
