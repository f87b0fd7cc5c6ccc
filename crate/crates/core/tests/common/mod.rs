#![allow(dead_code)]

pub mod mock_llm;
pub mod randgen;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use ssrlint_core::detect::DefectType;
use ssrlint_core::extract::{extract_heuristic, refine_roles, Provenance, StakingInfo};
use ssrlint_core::ir::{ExprKind, Binding};
use ssrlint_core::model::{build_model, CdgNode, EdgeKind, DEFAULT_MAX_DEPTH};
use ssrlint_core::{defs, flatten, graphs, ingest, summary};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

/// `// expect: TYPE` markers in a source file, as (line, type).
pub fn markers(sol: &Path) -> Vec<(u32, DefectType)> {
    let text = std::fs::read_to_string(sol).unwrap();
    text.lines()
        .enumerate()
        .filter_map(|(i, l)| {
            let (_, tag) = l.split_once("// expect: ")?;
            Some((i as u32 + 1, DefectType::parse(tag.trim()).expect("known defect type")))
        })
        .collect()
}

pub fn sorted_asts(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.to_string_lossy().ends_with(".ast.json"))
        .collect();
    v.sort();
    v
}

/// State dependencies of every transfer CDG in the first analyzed contract.
pub fn state_deps_of(json: &[u8]) -> Vec<BTreeSet<String>> {
    let unit = flatten::flatten_inheritance(ingest::load_ast(json).unwrap()).unwrap();
    let c = flatten::analysis_targets(&unit)[0];
    let g = graphs::build_graphs(&unit, c);
    let s = summary::Summaries::new(&g);
    let d = defs::index_defs(&g);
    let m = build_model(&s, &d, &StakingInfo::empty(Provenance::Heuristic), DEFAULT_MAX_DEPTH);
    m.transfers.iter().map(|t| t.cdg.state_dep.iter().map(|p| p.base.clone()).collect()).collect()
}

/// (oracle, produced, source) for one random program.
pub fn random_case(seed: u64) -> (BTreeSet<String>, BTreeSet<String>, String) {
    let p = randgen::Program::random(seed, 20);
    assert!(p.assignments() <= 20);
    let oracle = randgen::oracle_state_dep(&p).into_iter().map(|i| format!("s{}", i)).collect();
    let deps = state_deps_of(&p.to_ast_json());
    assert_eq!(deps.len(), 1, "exactly one transfer expected\n{}", p.to_solidity());
    (oracle, deps.into_iter().next().unwrap(), p.to_solidity())
}

pub struct Walkthrough {
    /// Variables reachable from the root over Cal edges; locals a callee merely returns are looked through.
    pub cal_targets: BTreeSet<String>,
    pub con_targets: BTreeSet<String>,
    pub depends_on_balance: bool,
}

/// CDG of the `getReward` transfer in the pending-reward fixture.
pub fn walkthrough() -> Walkthrough {
    let path = fixtures().join("units/pending_reward.ast.json");
    let unit = flatten::flatten_inheritance(ingest::load_ast_file(&path).unwrap()).unwrap();
    let c = flatten::analysis_targets(&unit)[0];
    let g = graphs::build_graphs(&unit, c);
    let s = summary::Summaries::new(&g);
    let d = defs::index_defs(&g);
    let info = refine_roles(extract_heuristic(&s, &d), &s);
    let m = build_model(&s, &d, &info, DEFAULT_MAX_DEPTH);
    let t = m.transfers.iter().find(|t| t.locator.function == "getReward").expect("getReward transfer");
    let cdg = &t.cdg;

    // Locals that appear as a bare `return x;` in their function.
    let mut returned = BTreeSet::new();
    for (func, exprs) in &d.returns {
        for e in exprs {
            if let ExprKind::Ident { binding: Binding::Local { decl }, .. } = &e.kind {
                returned.insert((*func, *decl));
            }
        }
    }
    let name = |n: &CdgNode| match n {
        CdgNode::StateVar { path } => Some(path.base.clone()),
        CdgNode::Local { name, .. } => Some(name.clone()),
        _ => None,
    };
    let transparent = |n: &CdgNode| matches!(n, CdgNode::Local { func, decl, .. } if returned.contains(&(*func, *decl)));

    let mut cal_targets = BTreeSet::new();
    let mut seen = BTreeSet::from([cdg.root]);
    let mut stack = vec![cdg.root];
    while let Some(i) = stack.pop() {
        for &(a, b, k) in &cdg.edges {
            if a == i && k == EdgeKind::Cal && seen.insert(b) {
                stack.push(b);
                if !transparent(&cdg.nodes[b]) {
                    if let Some(n) = name(&cdg.nodes[b]) {
                        cal_targets.insert(n);
                    }
                }
            }
        }
    }
    let con_targets = cdg
        .edges
        .iter()
        .filter(|&&(a, _, k)| a == cdg.root && k == EdgeKind::Con)
        .filter_map(|&(_, b, _)| name(&cdg.nodes[b]))
        .collect();
    Walkthrough { cal_targets, con_targets, depends_on_balance: cdg.depends_on_balance }
}

pub fn expected_walkthrough_targets() -> BTreeSet<String> {
    ["_rewardPerToken", "userLPStakeAmount", "userRewardPerTokenPaid", "userRewards", "_totalSupply"]
        .into_iter()
        .map(String::from)
        .collect()
}

pub struct LlmCheck {
    pub same_roles: bool,
    pub mock_hits: usize,
    /// Reports from the heuristic run and from an LLM run whose endpoint is down.
    pub heuristic_json: String,
    pub down_json: String,
    pub down_warnings: Vec<String>,
}

fn llm_config(endpoint: String) -> ssrlint_core::extract::llm::LlmConfig {
    ssrlint_core::extract::llm::LlmConfig {
        endpoint,
        key: None,
        model: "mock-model".into(),
        sample_count: 3,
        timeout: std::time::Duration::from_secs(10),
        cache_dir: None,
    }
}

/// Runs the reward-rate fixture through the LLM path against a replaying mock and a dead endpoint.
pub fn llm_check() -> LlmCheck {
    use ssrlint_core::pipeline::{analyze, analyze_contract, ExtractorKind, RunConfig};
    use ssrlint_core::report::render_json;

    let replies: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(fixtures().join("llm/reward_rate_setter.replies.json")).unwrap()).unwrap();
    let mock = mock_llm::serve(replies);
    let path = fixtures().join("corpus/reward_rate_setter.ast.json");
    let unit = flatten::flatten_inheritance(ingest::load_ast_file(&path).unwrap()).unwrap();
    let c = flatten::analysis_targets(&unit)[0];

    let heuristic = RunConfig { inputs: vec![path.clone()], ..RunConfig::default() };
    let llm = RunConfig { extractor: ExtractorKind::Llm, llm: Some(llm_config(mock.endpoint.clone())), ..heuristic.clone() };
    let h = analyze_contract(&unit, c, &heuristic).unwrap();
    let l = analyze_contract(&unit, c, &llm).unwrap();
    assert!(l.warnings.is_empty(), "mock run fell back: {:?}", l.warnings);

    let down = RunConfig { extractor: ExtractorKind::Llm, llm: Some(llm_config(mock_llm::dead_endpoint())), ..heuristic.clone() };
    let down_run = analyze(&down);
    LlmCheck {
        same_roles: l.info.same_roles(&h.info),
        mock_hits: mock.hits.load(std::sync::atomic::Ordering::SeqCst),
        heuristic_json: render_json(&analyze(&heuristic).report),
        down_json: render_json(&down_run.report),
        down_warnings: down_run.contracts.iter().flat_map(|c| c.warnings.clone()).collect(),
    }
}

/// Defective fixtures whose minimally fixed twin is `<name>_fixed`.
pub const TWINNED: [&str; 6] =
    ["reward_rate_setter", "untimed_reward", "single_pair_price", "unstake_no_update", "stake_status_unchecked", "force_transfer"];

pub fn run(inputs: Vec<PathBuf>) -> ssrlint_core::pipeline::Analysis {
    ssrlint_core::pipeline::analyze(&ssrlint_core::pipeline::RunConfig { inputs, ..Default::default() })
}

/// (line, type) of every finding for one input.
pub fn found(path: &Path) -> Vec<(u32, DefectType)> {
    let a = run(vec![path.to_path_buf()]);
    assert!(a.report.errored.is_empty(), "{:?}", a.report.errored);
    a.report.findings().map(|f| (f.line, f.defect)).collect()
}

/// Checks one defective fixture against its markers; Err describes the mismatch.
pub fn check_marked(dir: &Path, name: &str) -> Result<(), String> {
    let want = markers(&dir.join(format!("{}.sol", name)));
    let got = found(&dir.join(format!("{}.ast.json", name)));
    if want.is_empty() && got.is_empty() || !want.is_empty() && got == want {
        Ok(())
    } else {
        Err(format!("{}: expected {:?}, found {:?}", name, want, got))
    }
}

/// Twinned fixtures: exactly one marked finding, twin clean.
pub fn twin_suite() -> Vec<Result<(), String>> {
    let dir = fixtures().join("corpus");
    let mut out = Vec::new();
    for name in TWINNED {
        let want = markers(&dir.join(format!("{}.sol", name)));
        out.push(if want.len() == 1 { check_marked(&dir, name) } else { Err(format!("{}: needs one marker", name)) });
        let twin = format!("{}_fixed", name);
        out.push(check_marked(&dir, &twin));
    }
    out
}

#[derive(Debug, serde::Deserialize)]
pub struct Repair {
    pub fixture: String,
    pub op: String,
    pub line: usize,
    pub text: String,
}

pub fn repairs() -> Vec<Repair> {
    #[derive(serde::Deserialize)]
    struct Manifest {
        repairs: Vec<Repair>,
    }
    let text = std::fs::read_to_string(fixtures().join("repairs/repairs.json")).unwrap();
    serde_json::from_str::<Manifest>(&text).unwrap().repairs
}

/// The repaired source must be the defective one (markers dropped) with exactly
/// the documented line edit, the finding must go away and nothing new may appear.
pub fn check_repair(r: &Repair) -> Result<(), String> {
    let corpus = fixtures().join("corpus");
    let fixed_dir = fixtures().join("repairs");
    let original = std::fs::read_to_string(corpus.join(format!("{}.sol", r.fixture))).unwrap();
    let mut lines: Vec<String> = original
        .split('\n')
        .map(|l| match l.find(" // expect: ") {
            Some(i) => l[..i].to_string(),
            None => l.to_string(),
        })
        .collect();
    match r.op.as_str() {
        "replace" => lines[r.line - 1] = r.text.clone(),
        "insert" => lines.insert(r.line - 1, r.text.clone()),
        other => return Err(format!("{}: unknown op {}", r.fixture, other)),
    }
    let repaired = std::fs::read_to_string(fixed_dir.join(format!("{}.sol", r.fixture))).unwrap();
    if repaired != lines.join("\n") {
        return Err(format!("{}: repaired source is not a one-line edit of the fixture", r.fixture));
    }
    let before = found(&corpus.join(format!("{}.ast.json", r.fixture)));
    let after = found(&fixed_dir.join(format!("{}.ast.json", r.fixture)));
    if before.is_empty() {
        return Err(format!("{}: defective fixture has no finding", r.fixture));
    }
    if !after.is_empty() {
        return Err(format!("{}: repair leaves {:?}", r.fixture, after));
    }
    Ok(())
}

/// Published per-type (TP, FP, FN) counts of the reference evaluation.
pub const REFERENCE_COUNTS: [(DefectType, u32, u32, u32); 6] = [
    (DefectType::SVM, 1, 0, 0),
    (DefectType::RT, 4, 0, 1),
    (DefectType::SLR, 2, 0, 1),
    (DefectType::OSU, 4, 0, 1),
    (DefectType::UV, 6, 2, 0),
    (DefectType::UAA, 7, 0, 1),
];

/// Overall precision, recall, F1 of the reference counts, worked out by hand
/// (detection-weighted mean of the per-type percentages).
pub const REFERENCE_TOTALS: (f64, f64, f64) = (92.31, 87.92, 88.85);

pub fn reference_report() -> ssrlint_core::metrics::MetricsReport {
    let counts = REFERENCE_COUNTS
        .iter()
        .map(|&(d, tp, fp, fn_)| (d, ssrlint_core::metrics::Counts::new(tp, fp, fn_)))
        .collect();
    ssrlint_core::metrics::compute(&counts)
}

/// Err unless the computed overall row is within 0.01 of the hand totals.
pub fn check_reference_totals() -> Result<(), String> {
    let o = reference_report().overall;
    let got = (o.precision.value, o.recall.value, o.f1.value);
    let want = REFERENCE_TOTALS;
    match got {
        (Some(p), Some(r), Some(f)) if (p - want.0).abs() <= 0.01 && (r - want.1).abs() <= 0.01 && (f - want.2).abs() <= 0.01 => Ok(()),
        _ => Err(format!("overall {:?}, expected {:?}", got, want)),
    }
}

/// Detection metrics on the shipped labeled corpus.
pub fn corpus_metrics() -> ssrlint_core::metrics::MetricsReport {
    let labels = ssrlint_core::corpus::load_labels(&fixtures().join("corpus/labels.json")).unwrap();
    let a = run(labels.files());
    assert!(a.report.errored.is_empty(), "{:?}", a.report.errored);
    ssrlint_core::corpus::run_corpus(&labels, &a.report.contracts).unwrap()
}

/// Err naming every type whose precision or recall is below 90%.
pub fn check_corpus_floor(m: &ssrlint_core::metrics::MetricsReport) -> Result<(), String> {
    let low: Vec<String> = m
        .rows
        .iter()
        .filter(|r| !(r.precision.value.unwrap_or(0.0) >= 90.0 && r.recall.value.unwrap_or(0.0) >= 90.0))
        .map(|r| format!("{} P={} R={}", r.defect, r.precision.show(), r.recall.show()))
        .collect();
    if low.is_empty() { Ok(()) } else { Err(low.join(", ")) }
}
