use std::collections::BTreeSet;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ssrlint_core::corpus::{describe, load_gold, load_labels, run_corpus, score_model};
use ssrlint_core::detect::DefectType;
use ssrlint_core::extract::llm::LlmConfig;
use ssrlint_core::metrics::render_table;
use ssrlint_core::pipeline::{analyze, ExtractorKind, FailOn, Format, RunConfig};
use ssrlint_core::report::render;

#[derive(Parser)]
#[command(name = "ssrlint", version, about = "Find logical defects in DeFi staking contracts")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Analyze contracts and report findings.
    Analyze(AnalyzeArgs),
    /// Score detection against a labeled corpus.
    Corpus(CorpusArgs),
    /// Score the recovered staking models against hand-written gold models.
    ScoreModel(ScoreArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Text,
    Json,
    Sarif,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExtractorArg {
    Heuristic,
    Llm,
}

#[derive(Clone, Copy, ValueEnum)]
enum FailOnArg {
    None,
    Any,
    High,
}

#[derive(Args)]
struct Common {
    #[arg(long, value_enum, default_value = "heuristic")]
    extractor: ExtractorArg,
    /// Worker threads (default: CPU count).
    #[arg(long)]
    jobs: Option<usize>,
    /// Fail instead of falling back to the heuristic extractor when the LLM is unavailable.
    #[arg(long)]
    strict_llm: bool,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// .sol or .ast.json files, or directories to search.
    #[arg(required = true)]
    paths: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    format: FormatArg,
    /// Comma-separated defect types to report (SVM,RT,SLR,OSU,UV,UAA).
    #[arg(long, value_delimiter = ',')]
    rules: Vec<String>,
    #[arg(long, value_enum, default_value = "any")]
    fail_on: FailOnArg,
    /// Write call graphs and CFGs as DOT files here.
    #[arg(long)]
    dump_graphs: Option<PathBuf>,
    /// Write one DOT file per transfer CDG here.
    #[arg(long)]
    dump_cdg: Option<PathBuf>,
    /// Print derived facts as JSON lines on stderr.
    #[arg(long)]
    dump_facts: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct CorpusArgs {
    #[arg(long)]
    labels: PathBuf,
    /// Also score staking models against this gold file.
    #[arg(long)]
    gold: Option<PathBuf>,
    /// Inputs; defaults to the files named in the labels.
    paths: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    format: FormatArg,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    gold: PathBuf,
    /// Inputs; defaults to the files named in the gold file.
    paths: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    format: FormatArg,
    #[command(flatten)]
    common: Common,
}

fn base_config(c: &Common) -> anyhow::Result<RunConfig> {
    let extractor = match c.extractor {
        ExtractorArg::Heuristic => ExtractorKind::Heuristic,
        ExtractorArg::Llm => ExtractorKind::Llm,
    };
    let llm = LlmConfig::from_env();
    if extractor == ExtractorKind::Llm && llm.is_none() && c.strict_llm {
        anyhow::bail!("--extractor llm requires SSRLINT_LLM_ENDPOINT");
    }
    Ok(RunConfig { extractor, jobs: c.jobs, strict_llm: c.strict_llm, llm, ..RunConfig::default() })
}

fn parse_rules(list: &[String]) -> anyhow::Result<BTreeSet<DefectType>> {
    if list.is_empty() {
        return Ok(DefectType::ALL.into_iter().collect());
    }
    list.iter()
        .filter(|s| !s.trim().is_empty())
        .map(|s| DefectType::parse(s.trim()).ok_or_else(|| anyhow::anyhow!("unknown defect type `{}`", s)))
        .collect()
}

fn run_analyze(a: AnalyzeArgs) -> anyhow::Result<i32> {
    let mut cfg = base_config(&a.common)?;
    cfg.inputs = a.paths;
    cfg.format = match a.format {
        FormatArg::Text => Format::Text,
        FormatArg::Json => Format::Json,
        FormatArg::Sarif => Format::Sarif,
    };
    cfg.rules = parse_rules(&a.rules)?;
    cfg.fail_on = match a.fail_on {
        FailOnArg::None => FailOn::None,
        FailOnArg::Any => FailOn::Any,
        FailOnArg::High => FailOn::High,
    };
    cfg.dump_graphs = a.dump_graphs;
    cfg.dump_cdg = a.dump_cdg;
    cfg.dump_facts = a.dump_facts;
    let out = analyze(&cfg);
    for e in &out.report.errored {
        log::error!("{}: {}", e.file, e.error);
    }
    std::io::stdout().write_all(render(&out.report, cfg.format).as_bytes())?;
    Ok(out.report.exit_code(cfg.fail_on))
}

fn json_out(format: FormatArg) -> bool {
    !matches!(format, FormatArg::Text)
}

fn run_corpus_cmd(a: CorpusArgs) -> anyhow::Result<i32> {
    let labels = load_labels(&a.labels)?;
    let mut cfg = base_config(&a.common)?;
    cfg.inputs = if a.paths.is_empty() { labels.files() } else { a.paths };
    let out = analyze(&cfg);
    for e in &out.report.errored {
        log::error!("{}: {}", e.file, e.error);
    }
    let mut metrics = run_corpus(&labels, &out.report.contracts)?;
    if let Some(g) = &a.gold {
        let gold = load_gold(g)?;
        let produced: Vec<_> = out.contracts.iter().map(describe).collect();
        metrics.model_accuracy = Some(score_model(&gold, &produced)?);
    }
    if json_out(a.format) {
        println!("{}", serde_json::to_string_pretty(&metrics)?);
    } else {
        print!("{}", render_table(&metrics));
    }
    Ok(if out.report.errored.is_empty() { 0 } else { 2 })
}

fn run_score(a: ScoreArgs) -> anyhow::Result<i32> {
    let gold = load_gold(&a.gold)?;
    let mut cfg = base_config(&a.common)?;
    cfg.inputs = if a.paths.is_empty() { gold.files() } else { a.paths };
    let out = analyze(&cfg);
    for e in &out.report.errored {
        log::error!("{}: {}", e.file, e.error);
    }
    let produced: Vec<_> = out.contracts.iter().map(describe).collect();
    let acc = score_model(&gold, &produced)?;
    if json_out(a.format) {
        println!("{}", serde_json::to_string_pretty(&acc)?);
    } else {
        println!("{:<22} {:>9} {:>9} {:>9}", "Component", "Precision", "Recall", "F1");
        let rows = acc
            .var_roles
            .iter()
            .chain(acc.func_roles.iter())
            .map(|(k, v)| (k.as_str(), v))
            .chain([("Variables", &acc.var), ("Functions", &acc.func), ("CalDepend", &acc.cal), ("Total", &acc.total)]);
        for (name, p) in rows {
            println!("{:<22} {:>9} {:>9} {:>9}", name, p.precision.show(), p.recall.show(), p.f1.show());
        }
    }
    Ok(if out.report.errored.is_empty() { 0 } else { 2 })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).format_timestamp(None).init();
    let cli = Cli::parse();
    let r = match cli.cmd {
        Cmd::Analyze(a) => run_analyze(a),
        Cmd::Corpus(a) => run_corpus_cmd(a),
        Cmd::ScoreModel(a) => run_score(a),
    };
    match r {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {:#}", e);
            ExitCode::from(2)
        }
    }
}
