mod common;

use std::collections::BTreeMap;

use common::*;
use ssrlint_core::corpus::{count, describe, load_gold, load_labels, parse_gold, score_model, CorpusLabels, GoldContract, GoldFile, LabelEntry};
use ssrlint_core::detect::DefectType;
use ssrlint_core::error::Error;
use ssrlint_core::pipeline::ContractResult;

#[test]
fn shipped_corpus_meets_the_floor() {
    let m = corpus_metrics();
    check_corpus_floor(&m).unwrap();
    for r in &m.rows {
        assert!(r.tp >= 2, "{} has too few labeled instances", r.defect);
    }
}

#[test]
fn every_labeled_defect_has_a_source_marker() {
    let labels = load_labels(&fixtures().join("corpus/labels.json")).unwrap();
    assert_eq!(labels.entries.len(), 24);
    for e in &labels.entries {
        let sol = labels.base.join(e.file.replace(".ast.json", ".sol"));
        let mut marked: Vec<DefectType> = markers(&sol).into_iter().map(|m| m.1).collect();
        marked.sort();
        marked.dedup();
        let mut labeled = e.defects.clone();
        labeled.sort();
        assert_eq!(marked, labeled, "{}", e.file);
    }
}

fn result(file: &str, contract: &str, found: &[DefectType]) -> ContractResult {
    let mut r = run(vec![fixtures().join("corpus/reward_rate_setter.ast.json")]).report.contracts.remove(0);
    let template = r.findings[0].clone();
    r.file = file.into();
    r.contract = contract.into();
    r.findings = found.iter().map(|&d| ssrlint_core::detect::Finding { defect: d, ..template.clone() }).collect();
    r
}

fn labels(entries: &[(&str, &str, &[DefectType])]) -> CorpusLabels {
    CorpusLabels {
        schema_version: 1,
        entries: entries.iter().map(|(f, c, d)| LabelEntry { file: f.to_string(), contract: c.to_string(), defects: d.to_vec() }).collect(),
        base: Default::default(),
    }
}

#[test]
fn counting_matches_by_stem_and_type() {
    let l = labels(&[("a.ast.json", "A", &[DefectType::UV]), ("b.ast.json", "B", &[]), ("c.ast.json", "C", &[DefectType::RT])]);
    let results = [
        result("dir/a.sol", "A", &[DefectType::UV, DefectType::SVM]),
        result("dir/b.sol", "B", &[]),
        result("dir/c.sol", "C", &[]),
    ];
    let c = count(&l, &results).unwrap();
    assert_eq!((c[&DefectType::UV].tp, c[&DefectType::UV].fp, c[&DefectType::UV].fn_), (1, 0, 0));
    assert_eq!((c[&DefectType::SVM].tp, c[&DefectType::SVM].fp), (0, 1));
    assert_eq!((c[&DefectType::RT].tp, c[&DefectType::RT].fn_), (0, 1));
}

#[test]
fn unknown_contract_is_a_label_mismatch() {
    let l = labels(&[("a.ast.json", "Missing", &[])]);
    assert!(matches!(count(&l, &[result("a.sol", "A", &[])]), Err(Error::LabelMismatch(_))));
}

#[test]
fn missing_labeled_file_is_a_label_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("labels.json");
    std::fs::write(&p, r#"{"schema_version":1,"entries":[{"file":"nope.sol","contract":"X","defects":[]}]}"#).unwrap();
    assert!(matches!(load_labels(&p), Err(Error::LabelMismatch(_))));
    std::fs::write(&p, r#"{"schema_version":9,"entries":[]}"#).unwrap();
    assert!(matches!(load_labels(&p), Err(Error::Schema(_))));
}

fn gold_one(vars: &[(&str, &[&str])], funcs: &[(&str, &[&str])]) -> GoldContract {
    let m = |xs: &[(&str, &[&str])]| -> BTreeMap<String, Vec<String>> {
        xs.iter().map(|(k, v)| (k.to_string(), v.iter().map(|s| s.to_string()).collect())).collect()
    };
    GoldContract { file: "a.sol".into(), contract: "A".into(), variables: m(vars), functions: m(funcs), transfers: vec![] }
}

#[test]
fn gold_scoring_by_hand() {
    let gold = GoldFile {
        schema_version: 1,
        contracts: vec![gold_one(&[("User Stake Amount", &["bal", "stakes"])], &[("Stake", &["stake"])])],
        base: Default::default(),
    };
    let same = score_model(&gold, &gold.contracts).unwrap();
    assert_eq!(same.total.f1.value, Some(100.0));

    // One of two gold variables found: precision 100, recall 50.
    let half = gold_one(&[("User Stake Amount", &["bal"])], &[("Stake", &["stake"])]);
    let acc = score_model(&gold, &[half]).unwrap();
    assert_eq!(acc.var.precision.value, Some(100.0));
    assert_eq!(acc.var.recall.value, Some(50.0));
    assert_eq!(acc.func.f1.value, Some(100.0));
}

#[test]
fn unknown_role_label_is_a_schema_error() {
    let text = r#"{"schema_version":1,"contracts":[{"file":"a.sol","contract":"A","variables":{"Bogus Role":["x"]}}]}"#;
    assert!(matches!(parse_gold(text), Err(Error::Schema(_))));
}

#[test]
fn shipped_gold_scores_high() {
    let gold = load_gold(&fixtures().join("corpus/gold.json")).unwrap();
    let a = run(gold.files());
    let produced: Vec<_> = a.contracts.iter().map(describe).collect();
    let acc = score_model(&gold, &produced).unwrap();
    for part in [&acc.var, &acc.func, &acc.cal] {
        assert!(part.f1.value.unwrap() >= 90.0, "{:?}", acc);
    }
}
