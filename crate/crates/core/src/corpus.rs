//! Labeled-corpus evaluation: `labels.json` for detection metrics and
//! `gold.json` for staking-model accuracy.
//!
//! labels.json (schema_version 1):
//! `{"schema_version": 1, "entries": [{"file": "a.sol", "contract": "A", "defects": ["UV"]}]}`
//! `file` is relative to the labels file; an empty `defects` list marks a clean contract.
//!
//! gold.json (schema_version 1):
//! `{"schema_version": 1, "contracts": [{"file", "contract", "variables": {"User Stake Amount": [..]},
//! "functions": {"Stake": [..]}, "transfers": [{"function", "line", "state_dep": ["base", "base.member"]}]}]}`

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::detect::DefectType;
use crate::error::{Error, Result};
use crate::extract::{FuncRole, VarRole};
use crate::metrics::{compute, Counts, MetricsReport, ModelAccuracy, Prf};
use crate::pipeline::{ContractAnalysis, ContractResult};

pub const LABELS_SCHEMA_VERSION: u32 = 1;
pub const GOLD_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelEntry {
    pub file: String,
    pub contract: String,
    pub defects: Vec<DefectType>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusLabels {
    pub schema_version: u32,
    pub entries: Vec<LabelEntry>,
    /// Directory the entries' files are relative to.
    #[serde(skip)]
    pub base: PathBuf,
}

pub fn load_labels(path: &Path) -> Result<CorpusLabels> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut l: CorpusLabels = serde_json::from_str(&text).map_err(|e| Error::Schema(format!("{}: {}", path.display(), e)))?;
    if l.schema_version != LABELS_SCHEMA_VERSION {
        return Err(Error::Schema(format!("{}: unsupported schema_version {}", path.display(), l.schema_version)));
    }
    l.base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    for e in &l.entries {
        let p = l.base.join(&e.file);
        if !p.exists() {
            return Err(Error::LabelMismatch(format!("labeled file {} does not exist", p.display())));
        }
    }
    Ok(l)
}

impl CorpusLabels {
    /// Files to analyze for this corpus.
    pub fn files(&self) -> Vec<PathBuf> {
        let set: BTreeSet<PathBuf> = self.entries.iter().map(|e| self.base.join(&e.file)).collect();
        set.into_iter().collect()
    }
}

/// `x.sol` and its compiled `x.ast.json` name the same input.
fn input_stem(p: &str) -> &str {
    let p = p.strip_suffix(".ast.json").or_else(|| p.strip_suffix(".sol")).unwrap_or(p);
    p.rsplit(['/', '\\']).next().unwrap_or(p)
}

fn same_file(result_file: &str, label_file: &str) -> bool {
    input_stem(result_file) == input_stem(label_file)
}

/// TP/FP/FN per defect type over labeled contracts.
pub fn count(labels: &CorpusLabels, results: &[ContractResult]) -> Result<BTreeMap<DefectType, Counts>> {
    let mut counts: BTreeMap<DefectType, Counts> = DefectType::ALL.into_iter().map(|d| (d, Counts::default())).collect();
    for e in &labels.entries {
        let r = results
            .iter()
            .find(|r| r.contract == e.contract && same_file(&r.file, &e.file))
            .ok_or_else(|| Error::LabelMismatch(format!("no analyzed contract `{}` in {}", e.contract, e.file)))?;
        let detected: BTreeSet<DefectType> = r.findings.iter().map(|f| f.defect).collect();
        let labeled: BTreeSet<DefectType> = e.defects.iter().copied().collect();
        for d in DefectType::ALL {
            let c = counts.get_mut(&d).expect("all types present");
            match (labeled.contains(&d), detected.contains(&d)) {
                (true, true) => c.tp += 1,
                (false, true) => c.fp += 1,
                (true, false) => c.fn_ += 1,
                _ => {}
            }
        }
    }
    Ok(counts)
}

pub fn run_corpus(labels: &CorpusLabels, results: &[ContractResult]) -> Result<MetricsReport> {
    Ok(compute(&count(labels, results)?))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldTransfer {
    pub function: String,
    pub line: u32,
    pub state_dep: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldContract {
    pub file: String,
    pub contract: String,
    #[serde(default)]
    pub variables: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub functions: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub transfers: Vec<GoldTransfer>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldFile {
    pub schema_version: u32,
    pub contracts: Vec<GoldContract>,
    #[serde(skip)]
    pub base: PathBuf,
}

pub fn parse_gold(text: &str) -> Result<GoldFile> {
    let g: GoldFile = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
    if g.schema_version != GOLD_SCHEMA_VERSION {
        return Err(Error::Schema(format!("unsupported schema_version {}", g.schema_version)));
    }
    for c in &g.contracts {
        for k in c.variables.keys() {
            VarRole::from_label(k).ok_or_else(|| Error::Schema(format!("{}: unknown variable role `{}`", c.contract, k)))?;
        }
        for k in c.functions.keys() {
            FuncRole::from_label(k).ok_or_else(|| Error::Schema(format!("{}: unknown function role `{}`", c.contract, k)))?;
        }
    }
    Ok(g)
}

pub fn load_gold(path: &Path) -> Result<GoldFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut g = parse_gold(&text).map_err(|e| Error::Schema(format!("{}: {}", path.display(), e)))?;
    g.base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(g)
}

impl GoldFile {
    pub fn files(&self) -> Vec<PathBuf> {
        let set: BTreeSet<PathBuf> = self.contracts.iter().map(|c| self.base.join(&c.file)).collect();
        set.into_iter().collect()
    }
}

/// The gold-schema description of what the tool produced for one contract.
pub fn describe(a: &ContractAnalysis) -> GoldContract {
    let file = Path::new(&a.result.file).file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    GoldContract {
        file,
        contract: a.result.contract.clone(),
        variables: a.info.var_roles.iter().map(|(r, v)| (r.label().to_string(), v.clone())).collect(),
        functions: a.info.func_roles.iter().map(|(r, v)| (r.label().to_string(), v.iter().map(|f| f.name.clone()).collect())).collect(),
        transfers: a
            .model
            .transfers
            .iter()
            .filter(|t| !t.roles.is_empty())
            .map(|t| GoldTransfer {
                function: t.locator.function.clone(),
                line: t.locator.line,
                state_dep: t.cdg.state_dep.iter().map(|p| match &p.member {
                    Some(m) => format!("{}.{}", p.base, m),
                    None => p.base.clone(),
                }).collect::<BTreeSet<_>>().into_iter().collect(),
            })
            .collect(),
    }
}

type Key = (String, String);

/// Compares produced models with gold, pooling each role over contracts.
pub fn score_model(gold: &GoldFile, produced: &[GoldContract]) -> Result<ModelAccuracy> {
    let mut gv: BTreeMap<VarRole, BTreeSet<(Key, String)>> = BTreeMap::new();
    let mut pv = gv.clone();
    let mut gf: BTreeMap<FuncRole, BTreeSet<(Key, String)>> = BTreeMap::new();
    let mut pf = gf.clone();
    let mut gc: BTreeSet<(Key, String, u32, String)> = BTreeSet::new();
    let mut pc = gc.clone();
    for g in &gold.contracts {
        let p = produced
            .iter()
            .find(|p| p.contract == g.contract && same_file(&p.file, &g.file))
            .ok_or_else(|| Error::LabelMismatch(format!("no produced model for `{}` in {}", g.contract, g.file)))?;
        let key: Key = (g.file.clone(), g.contract.clone());
        for (src, vars, funcs) in [(g, &mut gv, &mut gf), (p, &mut pv, &mut pf)] {
            for (label, names) in &src.variables {
                let role = VarRole::from_label(label).ok_or_else(|| Error::Schema(format!("unknown variable role `{}`", label)))?;
                vars.entry(role).or_default().extend(names.iter().map(|n| (key.clone(), n.clone())));
            }
            for (label, names) in &src.functions {
                let role = FuncRole::from_label(label).ok_or_else(|| Error::Schema(format!("unknown function role `{}`", label)))?;
                funcs.entry(role).or_default().extend(names.iter().map(|n| (key.clone(), n.clone())));
            }
        }
        for t in &g.transfers {
            gc.extend(t.state_dep.iter().map(|d| (key.clone(), t.function.clone(), t.line, d.clone())));
            if let Some(pt) = p.transfers.iter().find(|x| x.function == t.function && x.line == t.line) {
                pc.extend(pt.state_dep.iter().map(|d| (key.clone(), t.function.clone(), t.line, d.clone())));
            }
        }
    }
    let empty = BTreeSet::new();
    let var_roles: BTreeMap<String, Prf> = VarRole::ALL
        .into_iter()
        .filter(|r| gv.contains_key(r) || pv.contains_key(r))
        .map(|r| (r.label().to_string(), Prf::of_sets(gv.get(&r).unwrap_or(&empty), pv.get(&r).unwrap_or(&empty))))
        .collect();
    let func_roles: BTreeMap<String, Prf> = FuncRole::ALL
        .into_iter()
        .filter(|r| gf.contains_key(r) || pf.contains_key(r))
        .map(|r| (r.label().to_string(), Prf::of_sets(gf.get(&r).unwrap_or(&empty), pf.get(&r).unwrap_or(&empty))))
        .collect();
    let var = Prf::mean(&var_roles.values().collect::<Vec<_>>());
    let func = Prf::mean(&func_roles.values().collect::<Vec<_>>());
    let cal = Prf::of_sets(&gc, &pc);
    let total = Prf::mean(&[&var, &func, &cal]);
    Ok(ModelAccuracy { var_roles, func_roles, var, func, cal, total })
}
