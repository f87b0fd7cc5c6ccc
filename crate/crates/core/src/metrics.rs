//! Detection and model-accuracy metrics.
//!
//! All values are percentages. A value whose denominator is zero is reported as
//! `null` together with the reason, never as 0 or 100.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::detect::DefectType;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: u32,
    pub fp: u32,
    #[serde(rename = "fn")]
    pub fn_: u32,
}

impl Counts {
    pub fn new(tp: u32, fp: u32, fn_: u32) -> Self {
        Counts { tp, fp, fn_ }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub undefined: Option<String>,
}

impl Metric {
    pub fn of(v: f64) -> Self {
        Metric { value: Some(v), undefined: None }
    }

    pub fn undefined(reason: &str) -> Self {
        Metric { value: None, undefined: Some(reason.into()) }
    }

    fn ratio(num: u32, den: u32, reason: &str) -> Self {
        if den == 0 {
            Metric::undefined(reason)
        } else {
            Metric::of(100.0 * num as f64 / den as f64)
        }
    }

    pub fn f1(p: &Metric, r: &Metric) -> Self {
        match (p.value, r.value) {
            (Some(p), Some(r)) if p + r > 0.0 => Metric::of(2.0 * p * r / (p + r)),
            (Some(_), Some(_)) => Metric::undefined("precision and recall are both zero"),
            _ => Metric::undefined("precision or recall undefined"),
        }
    }

    pub fn show(&self) -> String {
        match self.value {
            Some(v) => format!("{:.2}", v),
            None => "n/a".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeRow {
    pub defect: DefectType,
    /// Contracts reported with the defect (TP + FP); also the row's weight.
    pub detected: u32,
    pub tp: u32,
    pub fp: u32,
    #[serde(rename = "fn")]
    pub fn_: u32,
    pub precision: Metric,
    pub recall: Metric,
    pub f1: Metric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Overall {
    pub precision: Metric,
    pub recall: Metric,
    pub f1: Metric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub schema_version: u32,
    pub rows: Vec<TypeRow>,
    pub overall: Overall,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_accuracy: Option<ModelAccuracy>,
}

pub fn row(defect: DefectType, c: Counts) -> TypeRow {
    let precision = Metric::ratio(c.tp, c.tp + c.fp, "nothing detected");
    let recall = Metric::ratio(c.tp, c.tp + c.fn_, "no labeled instances");
    let f1 = Metric::f1(&precision, &recall);
    TypeRow { defect, detected: c.tp + c.fp, tp: c.tp, fp: c.fp, fn_: c.fn_, precision, recall, f1 }
}

/// Mean of the defined values weighted by `detected`.
fn weighted(rows: &[TypeRow], pick: fn(&TypeRow) -> &Metric) -> Metric {
    let (mut sum, mut weight) = (0.0, 0.0);
    for r in rows {
        if let Some(v) = pick(r).value {
            sum += r.detected as f64 * v;
            weight += r.detected as f64;
        }
    }
    if weight == 0.0 {
        Metric::undefined("no detections to weight")
    } else {
        Metric::of(sum / weight)
    }
}

pub fn compute(counts: &BTreeMap<DefectType, Counts>) -> MetricsReport {
    let rows: Vec<TypeRow> = counts.iter().map(|(d, c)| row(*d, *c)).collect();
    let overall = Overall {
        precision: weighted(&rows, |r| &r.precision),
        recall: weighted(&rows, |r| &r.recall),
        f1: weighted(&rows, |r| &r.f1),
    };
    MetricsReport { schema_version: 1, rows, overall, model_accuracy: None }
}

pub fn render_table(m: &MetricsReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<6} {:>8} {:>4} {:>4} {:>4} {:>9} {:>9} {:>9}", "Type", "#Detect", "TP", "FP", "FN", "Precision", "Recall", "F1");
    for r in &m.rows {
        let _ = writeln!(
            out,
            "{:<6} {:>8} {:>4} {:>4} {:>4} {:>9} {:>9} {:>9}",
            r.defect.to_string(),
            r.detected,
            r.tp,
            r.fp,
            r.fn_,
            r.precision.show(),
            r.recall.show(),
            r.f1.show()
        );
    }
    let det: u32 = m.rows.iter().map(|r| r.detected).sum();
    let tp: u32 = m.rows.iter().map(|r| r.tp).sum();
    let fp: u32 = m.rows.iter().map(|r| r.fp).sum();
    let fn_: u32 = m.rows.iter().map(|r| r.fn_).sum();
    let _ = writeln!(
        out,
        "{:<6} {:>8} {:>4} {:>4} {:>4} {:>9} {:>9} {:>9}",
        "Total",
        det,
        tp,
        fp,
        fn_,
        m.overall.precision.show(),
        m.overall.recall.show(),
        m.overall.f1.show()
    );
    if let Some(a) = &m.model_accuracy {
        let _ = writeln!(out);
        let _ = writeln!(out, "{:<10} {:>9} {:>9} {:>9}", "Component", "Precision", "Recall", "F1");
        for (name, c) in [("Variables", &a.var), ("Functions", &a.func), ("CalDepend", &a.cal), ("Total", &a.total)] {
            let _ = writeln!(out, "{:<10} {:>9} {:>9} {:>9}", name, c.precision.show(), c.recall.show(), c.f1.show());
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: Metric,
    pub recall: Metric,
    pub f1: Metric,
}

impl Prf {
    /// Set comparison of produced against gold.
    pub fn of_sets<T: Ord>(gold: &BTreeSet<T>, produced: &BTreeSet<T>) -> Prf {
        let hit = gold.intersection(produced).count() as u32;
        let precision = Metric::ratio(hit, produced.len() as u32, "nothing produced");
        let recall = Metric::ratio(hit, gold.len() as u32, "nothing in gold");
        let f1 = Metric::f1(&precision, &recall);
        Prf { precision, recall, f1 }
    }

    /// Unweighted mean over the parts whose value is defined.
    pub fn mean(parts: &[&Prf]) -> Prf {
        let avg = |pick: fn(&Prf) -> &Metric| {
            let vals: Vec<f64> = parts.iter().filter_map(|p| pick(p).value).collect();
            if vals.is_empty() {
                Metric::undefined("no defined component")
            } else {
                Metric::of(vals.iter().sum::<f64>() / vals.len() as f64)
            }
        };
        Prf { precision: avg(|p| &p.precision), recall: avg(|p| &p.recall), f1: avg(|p| &p.f1) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelAccuracy {
    /// Per role label, pooled over contracts.
    pub var_roles: BTreeMap<String, Prf>,
    pub func_roles: BTreeMap<String, Prf>,
    pub var: Prf,
    pub func: Prf,
    pub cal: Prf,
    pub total: Prf,
}
