//! End-to-end analysis: inputs to per-contract results.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde::{Deserialize, Serialize};

use crate::defs::index_defs;
use crate::detect::{detect, DefectType, Finding};
use crate::error::{Error, Result};
use crate::extract::llm::{extract_llm, LlmConfig, CONTEXT_BUDGET};
use crate::extract::{extract_heuristic, locators_for, refine_roles, validate, Provenance, RoleFunction, StakingInfo};
use crate::facts::{derive_facts, Facts};
use crate::flatten::{analysis_targets, flatten_inheritance};
use crate::graphs::build_graphs;
use crate::ingest::{load_ast_file, load_ast_with_sources, source_near};
use crate::ir::*;
use crate::model::{build_model, StakingModel, DEFAULT_MAX_DEPTH};
use crate::summary::{PermKind, Summaries};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Text,
    Json,
    Sarif,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtractorKind {
    #[default]
    Heuristic,
    Llm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FailOn {
    None,
    #[default]
    Any,
    High,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub inputs: Vec<PathBuf>,
    pub format: Format,
    pub extractor: ExtractorKind,
    pub rules: BTreeSet<DefectType>,
    pub jobs: Option<usize>,
    pub fail_on: FailOn,
    pub dump_graphs: Option<PathBuf>,
    pub dump_cdg: Option<PathBuf>,
    pub dump_facts: bool,
    pub strict_llm: bool,
    pub llm: Option<LlmConfig>,
    pub max_depth: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            inputs: Vec::new(),
            format: Format::Text,
            extractor: ExtractorKind::Heuristic,
            rules: DefectType::ALL.into_iter().collect(),
            jobs: None,
            fail_on: FailOn::Any,
            dump_graphs: None,
            dump_cdg: None,
            dump_facts: false,
            strict_llm: false,
            llm: None,
            max_depth: DEFAULT_MAX_DEPTH,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractResult {
    pub file: String,
    pub contract: String,
    pub staking: bool,
    pub extractor: String,
    #[serde(default)]
    pub notes: Vec<String>,
    pub findings: Vec<Finding>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorEntry {
    pub file: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub tool: String,
    pub version: String,
    pub contracts: Vec<ContractResult>,
    #[serde(default)]
    pub errored: Vec<ErrorEntry>,
}

impl Report {
    pub fn new(contracts: Vec<ContractResult>, errored: Vec<ErrorEntry>) -> Self {
        Report {
            schema_version: SCHEMA_VERSION,
            tool: "ssrlint".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            contracts,
            errored,
        }
    }

    pub fn findings(&self) -> impl Iterator<Item = &Finding> {
        self.contracts.iter().flat_map(|c| c.findings.iter())
    }

    /// 0 nothing to report, 1 findings under the policy, 2 operational errors.
    pub fn exit_code(&self, fail_on: FailOn) -> i32 {
        if !self.errored.is_empty() {
            return 2;
        }
        let hit = match fail_on {
            FailOn::None => false,
            FailOn::Any => self.findings().next().is_some(),
            FailOn::High => self.findings().any(|f| f.confidence == crate::detect::Confidence::High),
        };
        hit as i32
    }
}

/// Everything computed for one contract; owned so it can leave the worker.
#[derive(Debug, Clone)]
pub struct ContractAnalysis {
    pub result: ContractResult,
    pub info: StakingInfo,
    pub model: StakingModel,
    pub facts: Facts,
    /// Messages for the warning channel; not part of the report.
    pub warnings: Vec<String>,
}

/// Files to analyze: `.ast.json`/`.json` ASTs and `.sol` sources. Directories are
/// searched recursively; a `.sol` with a sibling `.ast.json` is skipped.
pub fn collect_inputs(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = BTreeSet::new();
    for p in paths {
        let meta = std::fs::metadata(p).map_err(|e| Error::io(p.display().to_string(), e))?;
        if meta.is_dir() {
            walk(p, &mut out)?;
        } else {
            out.insert(p.clone());
        }
    }
    let all = out.clone();
    Ok(out
        .into_iter()
        .filter(|p| !(is_sol(p) && all.contains(&p.with_extension("ast.json"))))
        .collect())
}

fn is_sol(p: &Path) -> bool {
    p.extension().is_some_and(|e| e == "sol")
}

fn walk(dir: &Path, out: &mut BTreeSet<PathBuf>) -> Result<()> {
    let rd = std::fs::read_dir(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    for entry in rd {
        let entry = entry.map_err(|e| Error::io(dir.display().to_string(), e))?;
        let p = entry.path();
        if p.is_dir() {
            walk(&p, out)?;
        } else if is_sol(&p) || p.extension().is_some_and(|e| e == "json") && p.to_string_lossy().ends_with(".ast.json") {
            out.insert(p);
        }
    }
    Ok(())
}

/// Runs the compiler named by `SSRLINT_SOLC` (command plus optional arguments).
pub fn compile_sol(path: &Path) -> Result<SourceUnit> {
    let cmd = std::env::var("SSRLINT_SOLC")
        .ok()
        .filter(|s| !s.trim().is_empty())
        .ok_or_else(|| Error::Compiler(format!("{}: set SSRLINT_SOLC to compile .sol inputs, or pass the AST JSON", path.display())))?;
    let mut parts = cmd.split_whitespace();
    let prog = parts.next().unwrap_or_default();
    let out = Command::new(prog)
        .args(parts)
        .arg("--ast-compact-json")
        .arg(path)
        .output()
        .map_err(|e| Error::Compiler(format!("{}: cannot run `{}`: {}", path.display(), cmd, e)))?;
    if !out.status.success() {
        return Err(Error::Compiler(format!(
            "{}: compiler exited with {}: {}",
            path.display(),
            out.status,
            String::from_utf8_lossy(&out.stderr).trim()
        )));
    }
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    load_ast_with_sources(&out.stdout, &path.display().to_string(), &|abs| source_near(&dir, abs))
}

pub fn load_input(path: &Path) -> Result<SourceUnit> {
    if is_sol(path) {
        compile_sol(path)
    } else {
        load_ast_file(path)
    }
}

fn contract_source(c: &ContractIR) -> Option<String> {
    let text = std::fs::read_to_string(&*c.file).ok()?;
    if text.len() <= CONTEXT_BUDGET {
        return Some(text);
    }
    let start = c.loc.offset as usize;
    let end = (start + c.loc.len as usize).min(text.len());
    text.get(start..end).map(|s| s.chars().take(CONTEXT_BUDGET).collect())
}

fn llm_info(s: &Summaries, unit: &SourceUnit, cfg: &LlmConfig) -> Result<StakingInfo> {
    let c = s.g.contract;
    let source = contract_source(c).ok_or_else(|| Error::ServiceUnavailable(format!("{}: source text unavailable", c.name)))?;
    let roles = extract_llm(&source, &unit.source_hash, &c.name, cfg)?;
    let mut info = StakingInfo::empty(Provenance::Llm { model: cfg.model.clone() });
    info.var_roles = roles.vars;
    for (role, names) in roles.funcs {
        let fs = names.into_iter().map(|name| RoleFunction { name, decl: 0, transfers: Vec::new() }).collect();
        info.func_roles.insert(role, fs);
    }
    validate(&mut info, s.g);
    for (role, fs) in info.func_roles.iter_mut() {
        for f in fs.iter_mut() {
            f.transfers = locators_for(s, f.decl, *role);
        }
    }
    Ok(info)
}

/// Runs extraction, modeling, facts and rules for one contract of a flattened unit.
/// Fails only when `strict_llm` is set and the LLM path cannot be used.
pub fn analyze_contract(unit: &SourceUnit, c: &ContractIR, cfg: &RunConfig) -> Result<ContractAnalysis> {
    let g = build_graphs(unit, c);
    let s = Summaries::new(&g);
    let defs = index_defs(&g);
    let mut warnings = Vec::new();
    let info = match (cfg.extractor, &cfg.llm) {
        (ExtractorKind::Llm, Some(llm)) => match llm_info(&s, unit, llm) {
            Ok(i) => i,
            Err(e) if cfg.strict_llm => return Err(e),
            Err(e) => {
                warnings.push(format!("{}: LLM extraction failed ({}); using heuristic extractor", c.name, e));
                extract_heuristic(&s, &defs)
            }
        },
        (ExtractorKind::Llm, None) if cfg.strict_llm => {
            return Err(Error::ServiceUnavailable("SSRLINT_LLM_ENDPOINT is not set".into()));
        }
        (ExtractorKind::Llm, None) => {
            warnings.push(format!("{}: no LLM endpoint configured; using heuristic extractor", c.name));
            extract_heuristic(&s, &defs)
        }
        _ => extract_heuristic(&s, &defs),
    };
    let info = refine_roles(info, &s);
    let model = build_model(&s, &defs, &info, cfg.max_depth);
    let facts = derive_facts(&s, &model);
    let mut notes: Vec<String> = info.diagnostics.clone();
    notes.extend(model.diagnostics.iter().cloned());
    let staking = !info.is_empty();
    let findings: Vec<Finding> = if staking {
        detect(&s, &model).into_iter().filter(|f| cfg.rules.contains(&f.defect)).collect()
    } else {
        notes.push("non-staking: no stake, reward or unstake functions found".into());
        Vec::new()
    };
    for f in c.functions.iter().filter(|f| f.body.is_some()) {
        if s.get(f.decl_id).perms().any(|p| p.kind == PermKind::Origin) {
            notes.push(format!("advisory: `{}` authorizes with tx.origin", g.name(f.decl_id)));
        }
    }
    if let Some(dir) = &cfg.dump_graphs {
        dump_graphs(dir, &g, &mut warnings);
    }
    if let Some(dir) = &cfg.dump_cdg {
        for t in &model.transfers {
            let name = format!("{}.{}.L{}.cdg.dot", c.name, sanitize(&t.locator.function), t.locator.line);
            let title = format!("{} {}:{}", c.name, t.locator.function, t.locator.line);
            write_dump(dir, &name, &t.cdg.to_dot(&title), &mut warnings);
        }
    }
    notes.sort();
    notes.dedup();
    let provenance = match &info.provenance {
        Provenance::Heuristic => "heuristic".to_string(),
        Provenance::Llm { model } => format!("llm:{}", model),
    };
    Ok(ContractAnalysis {
        result: ContractResult { file: c.file.to_string(), contract: c.name.clone(), staking, extractor: provenance, notes, findings },
        info,
        model,
        facts,
        warnings,
    })
}

fn sanitize(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '.' { c } else { '_' }).collect()
}

fn write_dump(dir: &Path, name: &str, text: &str, warnings: &mut Vec<String>) {
    if let Err(e) = std::fs::create_dir_all(dir).and_then(|_| std::fs::write(dir.join(name), text)) {
        warnings.push(format!("cannot write {}: {}", dir.join(name).display(), e));
    }
}

fn dump_graphs(dir: &Path, g: &crate::graphs::ContractGraphs, warnings: &mut Vec<String>) {
    write_dump(dir, &format!("{}.callgraph.dot", g.contract.name), &g.callgraph.to_dot(), warnings);
    for (decl, fg) in &g.fns {
        let name = format!("{}.{}.{}.cfg.dot", g.contract.name, sanitize(&fg.func.display_name()), decl);
        write_dump(dir, &name, &fg.cfg.to_dot(), warnings);
    }
}

/// Loads one input and analyzes every contract in it.
pub fn analyze_file(path: &Path, cfg: &RunConfig) -> Result<Vec<ContractAnalysis>> {
    let unit = flatten_inheritance(load_input(path)?)?;
    analysis_targets(&unit).into_iter().map(|c| analyze_contract(&unit, c, cfg)).collect()
}

pub struct Analysis {
    pub report: Report,
    pub contracts: Vec<ContractAnalysis>,
}

/// Analyzes every input on a bounded worker pool; results are ordered by file
/// and contract regardless of completion order.
pub fn analyze(cfg: &RunConfig) -> Analysis {
    let files = match collect_inputs(&cfg.inputs) {
        Ok(f) => f,
        Err(e) => {
            let file = match &e {
                Error::Io { path, .. } => path.clone(),
                _ => String::new(),
            };
            return Analysis { report: Report::new(Vec::new(), vec![ErrorEntry { file, error: e.to_string() }]), contracts: Vec::new() };
        }
    };
    let run = || -> Vec<(PathBuf, Result<Vec<ContractAnalysis>>)> {
        use rayon::prelude::*;
        files.par_iter().map(|p| (p.clone(), analyze_file(p, cfg))).collect()
    };
    let results = match rayon::ThreadPoolBuilder::new().num_threads(cfg.jobs.unwrap_or(0)).build() {
        Ok(pool) => pool.install(run),
        Err(_) => run(),
    };
    let mut contracts = Vec::new();
    let mut errored = Vec::new();
    for (path, r) in results {
        match r {
            Ok(cs) => contracts.extend(cs),
            Err(e) => errored.push(ErrorEntry { file: path.display().to_string(), error: e.to_string() }),
        }
    }
    for c in &contracts {
        for w in &c.warnings {
            log::warn!("{}", w);
        }
    }
    contracts.sort_by(|a, b| (&a.result.file, &a.result.contract).cmp(&(&b.result.file, &b.result.contract)));
    errored.sort_by(|a, b| a.file.cmp(&b.file));
    let report = Report::new(contracts.iter().map(|c| c.result.clone()).collect(), errored);
    Analysis { report, contracts }
}
