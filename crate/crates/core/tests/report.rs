mod common;

use common::*;
use ssrlint_core::pipeline::{ErrorEntry, Report};
use ssrlint_core::report::{parse_json, parse_sarif, render_json, render_sarif, render_text};

fn corpus_report() -> Report {
    run(vec![fixtures().join("corpus")]).report
}

#[test]
fn json_round_trips_every_field() {
    let r = corpus_report();
    assert!(r.findings().count() >= 12);
    assert_eq!(parse_json(&render_json(&r)).unwrap(), r);
}

#[test]
fn sarif_round_trips_findings_in_order() {
    let r = corpus_report();
    let back = parse_sarif(&render_sarif(&r)).unwrap();
    let orig: Vec<_> = r.findings().cloned().collect();
    assert_eq!(back, orig);
}

#[test]
fn sarif_has_rules_and_locations() {
    let r = corpus_report();
    let doc: serde_json::Value = serde_json::from_str(&render_sarif(&r)).unwrap();
    assert_eq!(doc["version"], "2.1.0");
    let rules = doc.pointer("/runs/0/tool/driver/rules").unwrap().as_array().unwrap();
    let ids: Vec<&str> = rules.iter().map(|r| r["id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["SSR-SVM", "SSR-RT", "SSR-SLR", "SSR-OSU", "SSR-UV", "SSR-UAA"]);
    for res in doc.pointer("/runs/0/results").unwrap().as_array().unwrap() {
        let idx = res["ruleIndex"].as_u64().unwrap() as usize;
        assert_eq!(res["ruleId"], rules[idx]["id"]);
        assert!(res.pointer("/locations/0/physicalLocation/region/startLine").unwrap().as_u64().unwrap() > 0);
    }
}

#[test]
fn empty_report_still_describes_the_tool() {
    let r = Report::new(vec![], vec![]);
    let doc: serde_json::Value = serde_json::from_str(&render_sarif(&r)).unwrap();
    assert_eq!(doc.pointer("/runs/0/results").unwrap().as_array().unwrap().len(), 0);
    assert_eq!(doc.pointer("/runs/0/tool/driver/name").unwrap(), "ssrlint");
    assert_eq!(doc.pointer("/runs/0/tool/driver/rules").unwrap().as_array().unwrap().len(), 6);
    assert!(parse_sarif(&render_sarif(&r)).unwrap().is_empty());
    assert!(render_text(&r).contains("0 finding(s)"));
}

#[test]
fn findings_are_sorted_by_file_then_line() {
    let r = corpus_report();
    for c in &r.contracts {
        let keys: Vec<_> = c.findings.iter().map(|f| (f.file.clone(), f.line)).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }
    let files: Vec<_> = r.contracts.iter().map(|c| (c.file.clone(), c.contract.clone())).collect();
    let mut sorted = files.clone();
    sorted.sort();
    assert_eq!(files, sorted);
}

#[test]
fn errors_surface_in_every_format() {
    let r = Report::new(vec![], vec![ErrorEntry { file: "x.ast.json".into(), error: "parse error: bad".into() }]);
    assert!(render_text(&r).contains("error: x.ast.json"));
    let doc: serde_json::Value = serde_json::from_str(&render_sarif(&r)).unwrap();
    assert_eq!(doc.pointer("/runs/0/invocations/0/executionSuccessful").unwrap(), false);
    assert_eq!(parse_json(&render_json(&r)).unwrap(), r);
}
