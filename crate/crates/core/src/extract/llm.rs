//! Role extraction through a chat-completions endpoint, with response caching and
//! majority voting over several samples.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

use super::{FuncRole, VarRole};

pub const TEMPLATE_VERSION: &str = "v1";
const VARIABLES_TEMPLATE: &str = include_str!("../../prompts/variables.v1.txt");
const FUNCTIONS_TEMPLATE: &str = include_str!("../../prompts/functions.v1.txt");
/// Sources longer than this are cut down to the contract's own text.
pub const CONTEXT_BUDGET: usize = 48_000;

#[derive(Debug, Clone)]
pub struct LlmConfig {
    pub endpoint: String,
    pub key: Option<String>,
    pub model: String,
    pub sample_count: usize,
    pub timeout: Duration,
    pub cache_dir: Option<PathBuf>,
}

impl LlmConfig {
    /// Reads `SSRLINT_LLM_*` and `SSRLINT_CACHE_DIR`; `None` without an endpoint.
    pub fn from_env() -> Option<LlmConfig> {
        let endpoint = std::env::var("SSRLINT_LLM_ENDPOINT").ok().filter(|s| !s.is_empty())?;
        Some(LlmConfig {
            endpoint,
            key: std::env::var("SSRLINT_LLM_KEY").ok().filter(|s| !s.is_empty()),
            model: std::env::var("SSRLINT_LLM_MODEL").unwrap_or_else(|_| "gpt-4o".into()),
            sample_count: 3,
            timeout: Duration::from_secs(60),
            cache_dir: default_cache_dir(),
        })
    }
}

pub fn default_cache_dir() -> Option<PathBuf> {
    if let Ok(d) = std::env::var("SSRLINT_CACHE_DIR") {
        if !d.is_empty() {
            return Some(PathBuf::from(d));
        }
    }
    std::env::var("HOME").ok().map(|h| Path::new(&h).join(".cache/ssrlint/llm"))
}

/// Names returned by the model, before validation against the contract.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LlmRoles {
    pub vars: BTreeMap<VarRole, Vec<String>>,
    pub funcs: BTreeMap<FuncRole, Vec<String>>,
}

#[derive(Clone, Copy)]
enum Prompt {
    Variables,
    Functions,
}

impl Prompt {
    fn name(self) -> &'static str {
        match self {
            Prompt::Variables => "variables",
            Prompt::Functions => "functions",
        }
    }

    fn render(self, contract: &str, source: &str) -> String {
        let t = match self {
            Prompt::Variables => VARIABLES_TEMPLATE,
            Prompt::Functions => FUNCTIONS_TEMPLATE,
        };
        t.replace("{{contract}}", contract).replace("{{source}}", source)
    }
}

fn cache_path(cfg: &LlmConfig, source_hash: &str, contract: &str, prompt: Prompt, sample: usize) -> Option<PathBuf> {
    let dir = cfg.cache_dir.as_ref()?;
    let mut h = Sha256::new();
    for part in [source_hash, TEMPLATE_VERSION, &cfg.model, contract, prompt.name(), &sample.to_string()] {
        h.update(part.as_bytes());
        h.update([0u8]);
    }
    Some(dir.join(format!("{}.json", hex::encode(h.finalize()))))
}

fn redact(s: &str, key: Option<&str>) -> String {
    match key {
        Some(k) if !k.is_empty() => s.replace(k, "***"),
        _ => s.to_string(),
    }
}

fn request(client: &reqwest::blocking::Client, cfg: &LlmConfig, prompt: &str) -> Result<String> {
    let body = json!({
        "model": cfg.model,
        "temperature": 0.7,
        "messages": [
            {"role": "system", "content": "You answer with a single JSON object and nothing else."},
            {"role": "user", "content": prompt},
        ],
    });
    log::debug!("llm request to {}: {}", cfg.endpoint, body);
    let mut req = client.post(&cfg.endpoint).json(&body);
    if let Some(k) = &cfg.key {
        req = req.bearer_auth(k);
    }
    let resp = req.send().map_err(|e| Error::ServiceUnavailable(redact(&e.to_string(), cfg.key.as_deref())))?;
    let status = resp.status();
    let text = resp.text().map_err(|e| Error::ServiceUnavailable(e.to_string()))?;
    log::debug!("llm response ({}): {}", status, redact(&text, cfg.key.as_deref()));
    if !status.is_success() {
        return Err(Error::ServiceUnavailable(format!("HTTP {}", status)));
    }
    let v: Value = serde_json::from_str(&text).map_err(|e| Error::MalformedResponse(e.to_string()))?;
    v.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| Error::MalformedResponse("no choices[0].message.content".into()))
}

/// Extracts the JSON object from a reply that may be wrapped in a code fence.
pub fn parse_reply(content: &str) -> Result<BTreeMap<String, Vec<String>>> {
    let start = content.find('{').ok_or_else(|| Error::MalformedResponse("no JSON object".into()))?;
    let end = content.rfind('}').ok_or_else(|| Error::MalformedResponse("no JSON object".into()))?;
    let v: Value = serde_json::from_str(&content[start..=end]).map_err(|e| Error::MalformedResponse(e.to_string()))?;
    let obj = v.as_object().ok_or_else(|| Error::MalformedResponse("reply is not an object".into()))?;
    let mut out = BTreeMap::new();
    for (k, v) in obj {
        let names = match v {
            Value::Array(a) => a.iter().filter_map(Value::as_str).map(str::to_string).collect(),
            Value::String(s) if !s.is_empty() => vec![s.clone()],
            _ => Vec::new(),
        };
        out.insert(k.clone(), names);
    }
    Ok(out)
}

/// Most frequent value; ties go to the value seen first.
pub fn majority<T: Clone + PartialEq>(samples: &[T]) -> Option<T> {
    let mut best: Option<(usize, &T)> = None;
    for (i, s) in samples.iter().enumerate() {
        if samples[..i].contains(s) {
            continue;
        }
        let n = samples.iter().filter(|x| *x == s).count();
        if best.is_none_or(|(b, _)| n > b) {
            best = Some((n, s));
        }
    }
    best.map(|(_, s)| s.clone())
}

fn sample(
    client: &reqwest::blocking::Client,
    cfg: &LlmConfig,
    source_hash: &str,
    contract: &str,
    source: &str,
    prompt: Prompt,
) -> Result<Vec<BTreeMap<String, Vec<String>>>> {
    let text = prompt.render(contract, source);
    let mut replies = Vec::new();
    let mut last_err = None;
    for i in 0..cfg.sample_count.max(1) {
        let path = cache_path(cfg, source_hash, contract, prompt, i);
        let cached = path.as_ref().and_then(|p| std::fs::read_to_string(p).ok());
        let content = match cached {
            Some(c) => c,
            None => {
                let c = request(client, cfg, &text)?;
                if let Some(p) = &path {
                    write_cache(p, &c);
                }
                c
            }
        };
        match parse_reply(&content) {
            Ok(r) => replies.push(r),
            Err(e) => {
                log::warn!("{}: discarding malformed {} reply: {}", contract, prompt.name(), e);
                last_err = Some(e);
            }
        }
    }
    if replies.is_empty() {
        return Err(last_err.unwrap_or_else(|| Error::MalformedResponse("no replies".into())));
    }
    Ok(replies)
}

/// Atomic replace so concurrent readers never see a partial entry.
fn write_cache(path: &Path, content: &str) {
    let Some(dir) = path.parent() else { return };
    if std::fs::create_dir_all(dir).is_err() {
        return;
    }
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    if std::fs::write(&tmp, content).is_ok() && std::fs::rename(&tmp, path).is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
}

fn vote<R: Ord + Copy>(replies: &[BTreeMap<String, Vec<String>>], roles: &[R], parse: fn(&str) -> Option<R>) -> BTreeMap<R, Vec<String>> {
    let mut out = BTreeMap::new();
    for role in roles {
        let per_sample: Vec<Vec<String>> = replies
            .iter()
            .map(|r| {
                let mut v: Vec<String> = r
                    .iter()
                    .filter(|(k, _)| parse(k) == Some(*role))
                    .flat_map(|(_, v)| v.iter().map(|s| s.trim().to_string()))
                    .filter(|s| !s.is_empty())
                    .collect();
                v.sort();
                v.dedup();
                v
            })
            .collect();
        if let Some(v) = majority(&per_sample) {
            if !v.is_empty() {
                out.insert(*role, v);
            }
        }
    }
    out
}

/// Issues both prompts and votes per role over the samples.
pub fn extract_llm(source: &str, source_hash: &str, contract: &str, cfg: &LlmConfig) -> Result<LlmRoles> {
    let client = reqwest::blocking::Client::builder()
        .timeout(cfg.timeout)
        .build()
        .map_err(|e| Error::ServiceUnavailable(e.to_string()))?;
    let vars = sample(&client, cfg, source_hash, contract, source, Prompt::Variables)?;
    let funcs = sample(&client, cfg, source_hash, contract, source, Prompt::Functions)?;
    Ok(LlmRoles {
        vars: vote(&vars, &VarRole::ALL, VarRole::from_label),
        funcs: vote(&funcs, &FuncRole::ALL, FuncRole::from_label),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn majority_picks_most_frequent() {
        assert_eq!(majority(&["A", "A", "B"]), Some("A"));
        assert_eq!(majority(&["B", "A", "A"]), Some("A"));
        assert_eq!(majority(&["B", "A"]), Some("B"));
        assert_eq!(majority::<&str>(&[]), None);
    }

    #[test]
    fn single_sample_is_itself() {
        assert_eq!(majority(&[vec!["x".to_string()]]), Some(vec!["x".to_string()]));
    }

    #[test]
    fn reply_in_code_fence() {
        let r = parse_reply("```json\n{\"Stake\": [\"stake\"], \"UnStake\": \"exit\"}\n```").unwrap();
        assert_eq!(r["Stake"], vec!["stake"]);
        assert_eq!(r["UnStake"], vec!["exit"]);
        assert!(parse_reply("no json here").is_err());
    }

    #[test]
    fn vote_per_role() {
        let mk = |s: &str| parse_reply(s).unwrap();
        let replies = vec![
            mk(r#"{"User Stake Reward": ["A"]}"#),
            mk(r#"{"User Stake Reward": ["A"]}"#),
            mk(r#"{"User Stake Reward": ["B"]}"#),
        ];
        let v = vote(&replies, &VarRole::ALL, VarRole::from_label);
        assert_eq!(v[&VarRole::UserStakeReward], vec!["A"]);
    }

    #[test]
    fn down_endpoint_is_unavailable() {
        let cfg = LlmConfig {
            endpoint: "http://127.0.0.1:9/v1/chat/completions".into(),
            key: None,
            model: "m".into(),
            sample_count: 1,
            timeout: Duration::from_secs(2),
            cache_dir: None,
        };
        let e = extract_llm("contract A {}", "h", "A", &cfg).unwrap_err();
        assert!(matches!(e, Error::ServiceUnavailable(_)), "{e}");
    }
}
