//! Rendering of reports as text, JSON and SARIF 2.1.0.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde_json::{json, Value};

use crate::detect::{Confidence, DefectType, Evidence, Finding};
use crate::error::{Error, Result};
use crate::pipeline::{Format, Report};

const SARIF_SCHEMA: &str = "https://json.schemastore.org/sarif-2.1.0.json";

pub fn render(report: &Report, format: Format) -> String {
    match format {
        Format::Text => render_text(report),
        Format::Json => render_json(report),
        Format::Sarif => render_sarif(report),
    }
}

pub fn render_text(report: &Report) -> String {
    let mut out = String::new();
    let mut total = 0;
    for c in &report.contracts {
        if c.findings.is_empty() && c.notes.is_empty() {
            continue;
        }
        let _ = writeln!(out, "{} ({})", c.contract, c.file);
        for f in &c.findings {
            total += 1;
            let conf = if f.confidence == Confidence::Low { " [low confidence]" } else { "" };
            let _ = writeln!(out, "  {} {} {}:{} in {}: {}{}", f.defect.rule_id(), f.rule, f.file, f.line, f.function, f.message, conf);
            let ev: Vec<&str> = f.evidence.iter().map(|e| e.fact.as_str()).collect();
            if !ev.is_empty() {
                let _ = writeln!(out, "      evidence: {}", ev.join("; "));
            }
        }
        for n in &c.notes {
            let _ = writeln!(out, "  note: {}", n);
        }
    }
    for e in &report.errored {
        let _ = writeln!(out, "error: {}: {}", e.file, e.error);
    }
    let _ = writeln!(
        out,
        "{} finding(s) in {} contract(s){}",
        total,
        report.contracts.len(),
        if report.errored.is_empty() { String::new() } else { format!(", {} input(s) failed", report.errored.len()) }
    );
    out
}

pub fn render_json(report: &Report) -> String {
    let mut s = serde_json::to_string_pretty(report).unwrap_or_default();
    s.push('\n');
    s
}

pub fn parse_json(text: &str) -> Result<Report> {
    serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

fn rule_descriptors() -> Vec<Value> {
    DefectType::ALL
        .into_iter()
        .map(|d| {
            json!({
                "id": d.rule_id(),
                "name": format!("{:?}", d),
                "shortDescription": {"text": d.title()},
                "help": {"text": d.help()},
                "defaultConfiguration": {"level": "warning"},
            })
        })
        .collect()
}

pub fn render_sarif(report: &Report) -> String {
    let index: BTreeMap<DefectType, usize> = DefectType::ALL.into_iter().enumerate().map(|(i, d)| (d, i)).collect();
    let results: Vec<Value> = report
        .findings()
        .map(|f| {
            json!({
                "ruleId": f.defect.rule_id(),
                "ruleIndex": index[&f.defect],
                "level": if f.confidence == Confidence::High { "warning" } else { "note" },
                "message": {"text": f.message},
                "locations": [{
                    "physicalLocation": {
                        "artifactLocation": {"uri": f.file},
                        "region": {"startLine": f.line, "charOffset": f.offset, "charLength": f.len},
                    },
                    "logicalLocations": [{"name": f.function, "fullyQualifiedName": format!("{}.{}", f.contract, f.function), "kind": "function"}],
                }],
                "properties": {
                    "rule": f.rule,
                    "contract": f.contract,
                    "function": f.function,
                    "confidence": f.confidence,
                    "evidence": f.evidence,
                },
            })
        })
        .collect();
    let notifications: Vec<Value> = report
        .errored
        .iter()
        .map(|e| json!({"level": "error", "message": {"text": format!("{}: {}", e.file, e.error)}}))
        .collect();
    let doc = json!({
        "$schema": SARIF_SCHEMA,
        "version": "2.1.0",
        "runs": [{
            "tool": {"driver": {
                "name": report.tool,
                "version": report.version,
                "rules": rule_descriptors(),
            }},
            "invocations": [{
                "executionSuccessful": report.errored.is_empty(),
                "toolExecutionNotifications": notifications,
            }],
            "results": results,
        }],
    });
    let mut s = serde_json::to_string_pretty(&doc).unwrap_or_default();
    s.push('\n');
    s
}

/// Reads findings back from SARIF produced by [`render_sarif`].
pub fn parse_sarif(text: &str) -> Result<Vec<Finding>> {
    let bad = |m: &str| Error::Parse(format!("SARIF: {}", m));
    let doc: Value = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let results = doc.pointer("/runs/0/results").and_then(Value::as_array).ok_or_else(|| bad("no results"))?;
    let mut out = Vec::new();
    for r in results {
        let rule_id = r["ruleId"].as_str().ok_or_else(|| bad("ruleId"))?;
        let defect = DefectType::parse(rule_id).ok_or_else(|| bad("unknown ruleId"))?;
        let loc = r.pointer("/locations/0/physicalLocation").ok_or_else(|| bad("location"))?;
        let p = &r["properties"];
        let num = |v: &Value| v.as_u64().map(|n| n as u32).ok_or_else(|| bad("region"));
        out.push(Finding {
            defect,
            rule: p["rule"].as_str().unwrap_or_default().into(),
            contract: p["contract"].as_str().unwrap_or_default().into(),
            function: p["function"].as_str().unwrap_or_default().into(),
            file: loc.pointer("/artifactLocation/uri").and_then(Value::as_str).unwrap_or_default().into(),
            line: num(&loc["region"]["startLine"])?,
            offset: num(&loc["region"]["charOffset"])?,
            len: num(&loc["region"]["charLength"])?,
            message: r.pointer("/message/text").and_then(Value::as_str).unwrap_or_default().into(),
            confidence: serde_json::from_value(p["confidence"].clone()).map_err(|_| bad("confidence"))?,
            evidence: serde_json::from_value::<Vec<Evidence>>(p["evidence"].clone()).map_err(|_| bad("evidence"))?,
        });
    }
    Ok(out)
}
