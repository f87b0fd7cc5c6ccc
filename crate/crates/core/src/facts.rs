//! Semantic facts derived from the graphs and the staking model.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::callgraph::contract_type_name;
use crate::defuse::{AddrClass, VariablePath};
use crate::ir::*;
use crate::model::StakingModel;
use crate::summary::{GuardKind, PermKind, Summaries};
use crate::transfer::TransferKind;

/// A type name that looks like an AMM pair: exposes `getReserves`, or mints and
/// burns liquidity over a token pair.
pub fn is_pool_type(unit: &SourceUnit, type_name: &str) -> bool {
    let name = contract_type_name(type_name).unwrap_or_else(|| type_name.trim().to_string());
    match unit.contract(&name) {
        Some(c) => {
            let has = |n: &str| c.functions.iter().any(|f| f.name == n);
            has("getReserves") || (has("mint") && has("burn") && (has("token0") || has("token1")))
        }
        None => {
            let l = name.to_ascii_lowercase();
            l.contains("pair") || l.ends_with("pool")
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(tag = "fact", rename_all = "snake_case")]
pub enum Fact {
    LpPool { receiver: String, type_name: String },
    ModifyVar { function: String, path: String, key: Option<AddrClass>, line: u32 },
    VerifyVar { function: String, path: String, kind: GuardKind, line: u32 },
    NaTokenTrans { function: String, to: AddrClass, line: u32 },
    RewardTrans { function: String, from: AddrClass, to: AddrClass, line: u32 },
    PermissCheck { function: String, who: AddrClass, kind: PermKind },
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Facts {
    pub contract: String,
    pub facts: BTreeSet<Fact>,
}

impl Facts {
    /// One JSON object per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for f in &self.facts {
            let mut v = serde_json::to_value(f).unwrap_or_default();
            if let Some(o) = v.as_object_mut() {
                o.insert("contract".into(), self.contract.clone().into());
            }
            out.push_str(&v.to_string());
            out.push('\n');
        }
        out
    }
}

/// Who a token transfer in a role CDG effectively takes value from: the explicit
/// source when it is not the contract, otherwise the account whose reward or
/// stake slots feed the amount.
pub fn effective_from(s: &Summaries, m: &StakingModel, idx: usize) -> AddrClass {
    let t = &m.transfers[idx];
    let Some(scope) = s.g.scope(t.site.function) else { return AddrClass::This };
    if let Some(f) = &t.site.from {
        let c = scope.classify(f);
        if c != AddrClass::This {
            return c;
        }
    }
    let sum = s.get(t.site.function);
    let keys: BTreeSet<AddrClass> = sum
        .reads
        .iter()
        .filter(|r| (m.is_reward(&r.path) || m.is_amount(&r.path)) && t.cdg.depends_on_state(&r.path))
        .filter_map(|r| r.key.clone())
        .collect();
    keys.iter()
        .find(|k| !matches!(k, AddrClass::Caller | AddrClass::This | AddrClass::Origin))
        .or_else(|| keys.iter().find(|k| **k == AddrClass::Caller))
        .cloned()
        .unwrap_or(AddrClass::This)
}

/// Token transfers whose amount is computed from reward or stake slots, or that
/// move the reward or stake token.
pub fn is_reward_trans(m: &StakingModel, idx: usize) -> bool {
    let t = &m.transfers[idx];
    if t.site.native || t.site.kind == TransferKind::Burn {
        return false;
    }
    let slots = t.cdg.state_dep.iter().any(|p| m.is_reward(p) || m.is_amount(p));
    let token = t.site.token_name().is_some_and(|n| m.reward_token.contains(&n) || m.stake_token.contains(&n));
    slots || token
}

fn path_text(p: &VariablePath) -> String {
    p.to_string()
}

pub fn derive_facts(s: &Summaries, m: &StakingModel) -> Facts {
    let g = s.g;
    let mut facts = BTreeSet::new();
    let mut pools = BTreeSet::new();
    for t in &m.transfers {
        for i in &t.cdg.pool_sources {
            if let crate::model::CdgNode::ExternalSource { receiver, target_type: Some(ty), .. } = &t.cdg.nodes[*i] {
                pools.insert((receiver.clone(), ty.clone()));
            }
        }
    }
    for v in &g.contract.state_vars {
        if let TypeDesc::ContractRef { name } = &v.type_desc {
            if is_pool_type(g.unit, name) {
                pools.insert((v.name.clone(), name.clone()));
            }
        }
    }
    for (receiver, type_name) in pools {
        facts.insert(Fact::LpPool { receiver, type_name });
    }
    for f in g.contract.functions.iter().filter(|f| f.body.is_some()) {
        let sum = s.get(f.decl_id);
        let function = g.name(f.decl_id);
        for w in &sum.writes {
            facts.insert(Fact::ModifyVar { function: function.clone(), path: path_text(&w.path), key: w.key.clone(), line: w.loc.line });
        }
        for gd in &sum.guards {
            for (p, _) in &gd.reads {
                facts.insert(Fact::VerifyVar { function: function.clone(), path: path_text(p), kind: gd.kind, line: gd.loc.line });
            }
            for p in &gd.perms {
                facts.insert(Fact::PermissCheck { function: function.clone(), who: p.who.clone(), kind: p.kind });
            }
        }
        for x in sum.sites.iter().filter(|x| x.via.is_empty() && x.site.native) {
            facts.insert(Fact::NaTokenTrans { function: function.clone(), to: x.to.clone(), line: x.site.loc.line });
        }
    }
    for (i, t) in m.transfers.iter().enumerate() {
        if !is_reward_trans(m, i) {
            continue;
        }
        let to = match (&t.site.to, g.scope(t.site.function)) {
            (Some(e), Some(sc)) => sc.classify(e),
            _ => AddrClass::This,
        };
        facts.insert(Fact::RewardTrans {
            function: t.locator.function.clone(),
            from: effective_from(s, m, i),
            to,
            line: t.site.loc.line,
        });
    }
    Facts { contract: g.contract.name.clone(), facts }
}
