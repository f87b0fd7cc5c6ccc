mod common;

use std::time::Instant;

use common::*;
use ssrlint_core::detect::DefectType;
use ssrlint_core::pipeline::{analyze, RunConfig};
use ssrlint_core::report::render_json;

#[test]
fn twinned_fixtures_flag_the_marked_line_and_twins_are_clean() {
    let start = Instant::now();
    let bad: Vec<String> = twin_suite().into_iter().filter_map(Result::err).collect();
    assert!(bad.is_empty(), "{:#?}", bad);
    assert!(start.elapsed().as_secs_f64() < 5.0);
}

#[test]
fn every_corpus_fixture_matches_its_markers() {
    let dir = fixtures().join("corpus");
    let mut bad = Vec::new();
    for p in sorted_asts(&dir) {
        let name = p.file_name().unwrap().to_string_lossy().trim_end_matches(".ast.json").to_string();
        if let Err(e) = check_marked(&dir, &name) {
            bad.push(e);
        }
    }
    assert!(bad.is_empty(), "{:#?}", bad);
}

#[test]
fn each_documented_repair_removes_the_finding() {
    let rs = repairs();
    assert_eq!(rs.len(), 12);
    let bad: Vec<String> = rs.iter().map(check_repair).filter_map(Result::err).collect();
    assert!(bad.is_empty(), "{:#?}", bad);
}

#[test]
fn json_output_is_deterministic() {
    let cfg = RunConfig { inputs: vec![fixtures()], ..RunConfig::default() };
    let a = render_json(&analyze(&cfg).report);
    let b = render_json(&analyze(&RunConfig { jobs: Some(1), ..cfg }).report);
    assert_eq!(a, b);
}

#[test]
fn non_staking_contract_gets_a_note_and_no_findings() {
    let a = run(vec![fixtures().join("units/erc20_only.ast.json")]);
    let c = &a.report.contracts[0];
    assert!(!c.staking);
    assert!(c.findings.is_empty());
    assert!(c.notes.iter().any(|n| n.starts_with("non-staking")));
}

#[test]
fn tx_origin_authorization_is_an_advisory_not_a_finding() {
    let a = run(vec![fixtures().join("units/origin_owner.ast.json")]);
    let c = &a.report.contracts[0];
    assert!(c.findings.is_empty(), "{:?}", c.findings);
    assert!(c.notes.iter().any(|n| n.contains("tx.origin")));
}

#[test]
fn reward_paid_through_internal_helper_is_verified_there() {
    assert!(found(&fixtures().join("units/harvest_wrapper.ast.json")).is_empty());
}

#[test]
fn unauthorized_reward_credit_is_uaa() {
    let dir = fixtures().join("units");
    check_marked(&dir, "set_user_reward").unwrap();
    let a = run(vec![dir.join("set_user_reward.ast.json")]);
    assert_eq!(a.report.contracts[0].findings[0].rule, "R8");
}

#[test]
fn caller_chosen_reward_amount_is_unverified() {
    let got = found(&fixtures().join("units/unguarded_reward.ast.json"));
    let types: Vec<DefectType> = got.iter().map(|f| f.1).collect();
    assert!(types.contains(&DefectType::UV), "{:?}", got);
}

#[test]
fn rules_filter_drops_other_types() {
    let only_uv = RunConfig {
        inputs: vec![fixtures().join("corpus")],
        rules: [DefectType::UV].into_iter().collect(),
        ..RunConfig::default()
    };
    let a = analyze(&only_uv);
    assert!(a.report.findings().count() >= 2);
    assert!(a.report.findings().all(|f| f.defect == DefectType::UV));
}

#[test]
fn walkthrough_transfer_pays_from_pending_reward() {
    let w = walkthrough();
    assert!(w.cal_targets.is_superset(&expected_walkthrough_targets()));
}
