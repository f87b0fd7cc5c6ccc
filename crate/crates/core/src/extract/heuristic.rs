//! Offline role extractor: name lexicons, type shapes and observed token flows.

use std::collections::{BTreeMap, BTreeSet};

use crate::defs::DefIndex;
use crate::defuse::{key_shape, KeyShape, VariablePath};
use crate::facts::is_pool_type;
use crate::ir::*;
use crate::summary::{Src, Summaries};
use crate::transfer::Direction;

use super::{locators_for, FuncRole, Provenance, RoleFunction, StakingInfo, VarRole};

pub const TIME_WORDS: &[&str] =
    &["time", "timestamp", "start", "last", "since", "date", "epoch", "checkpoint", "duration", "period", "block"];
const REWARD_WORDS: &[&str] = &["reward", "earned", "pending", "accrued", "claimable", "interest", "yield"];
const REWARD_EXCLUDE: &[&str] = &["rate", "pertoken", "pershare", "paid", "debt", "token", "duration", "claimed"];
const AMOUNT_WORDS: &[&str] = &["stake", "staked", "deposit", "balance", "amount", "shares", "locked", "principal"];
const AMOUNT_EXCLUDE: &[&str] = &["allowance", "allowed", "total", "debt", "paid", "claimed"];
const STAKE_TOKEN_WORDS: &[&str] = &["stak", "lp", "deposit", "want", "underlying"];

const STAKE_FN: &[&str] = &["stake", "deposit", "enter", "lock", "join"];
const REWARD_FN: &[&str] = &["reward", "claim", "harvest", "earn", "collect"];
const UNSTAKE_FN: &[&str] = &["unstake", "withdraw", "exit", "leave", "redeem", "unlock", "emergency"];

fn has_any(name: &str, words: &[&str]) -> bool {
    let n = name.to_ascii_lowercase();
    words.iter().any(|w| n.contains(w))
}

pub fn is_time_name(name: &str) -> bool {
    has_any(name, TIME_WORDS)
}

pub fn is_reward_name(name: &str) -> bool {
    has_any(name, REWARD_WORDS) && !has_any(name, REWARD_EXCLUDE) && !is_time_name(name)
}

pub fn is_amount_name(name: &str) -> bool {
    has_any(name, AMOUNT_WORDS) && !has_any(name, AMOUNT_EXCLUDE) && !is_reward_name(name) && !is_time_name(name)
        && !has_any(name, REWARD_WORDS)
}

fn fn_lexicon(role: FuncRole, name: &str) -> bool {
    let n = name.to_ascii_lowercase();
    match role {
        FuncRole::Stake => has_any(&n, STAKE_FN) && !has_any(&n, &["unstake", "unlock"]),
        FuncRole::GetReward => has_any(&n, REWARD_FN),
        FuncRole::UnStake => has_any(&n, UNSTAKE_FN),
    }
}

/// Per-user uint slot: `mapping(address => uint)` or a uint member of a record
/// stored in a mapping or array.
#[derive(Debug, Clone)]
pub struct SlotCandidate {
    pub name: String,
    pub term: String,
    pub path: VariablePath,
}

pub fn slot_candidates(c: &ContractIR, unit: &SourceUnit) -> Vec<SlotCandidate> {
    let mut out = Vec::new();
    for v in c.state_vars.iter().filter(|v| !v.is_constant_or_immutable) {
        match &v.type_desc {
            TypeDesc::Mapping { key, value } if key.is_address() && value.is_uint() => out.push(SlotCandidate {
                name: v.name.clone(),
                term: v.name.clone(),
                path: VariablePath { base: v.name.clone(), member: None, key_shape: KeyShape::AddressKeyed },
            }),
            TypeDesc::Mapping { .. } | TypeDesc::Array { .. } => {
                let TypeDesc::Struct { decl, name } = v.type_desc.innermost() else { continue };
                let Some(s) = unit.structs.get(decl).or_else(|| unit.struct_by_name(name)) else { continue };
                for (m, t) in &s.members {
                    if t.is_uint() {
                        out.push(SlotCandidate {
                            name: format!("{}.{}", v.name, m),
                            term: m.clone(),
                            path: VariablePath {
                                base: v.name.clone(),
                                member: Some(m.clone()),
                                key_shape: key_shape(&v.type_desc),
                            },
                        });
                    }
                }
            }
            _ => {}
        }
    }
    out
}

fn mentions_timestamp(e: &Expr) -> bool {
    let mut found = false;
    e.walk(&mut |x| found |= matches!(x.special(), Some(SpecialRef::BlockTimestamp | SpecialRef::BlockNumber)));
    found
}

pub fn extract_heuristic(s: &Summaries, defs: &DefIndex) -> StakingInfo {
    let g = s.g;
    let c = g.contract;
    let mut info = StakingInfo::empty(Provenance::Heuristic);

    // Token flows per function, own body only.
    let mut flows: BTreeMap<AstId, Vec<(Direction, Option<String>)>> = BTreeMap::new();
    for f in c.functions.iter().filter(|f| f.body.is_some()) {
        let sum = s.get(f.decl_id);
        let v = sum.sites.iter().filter(|x| x.via.is_empty()).map(|x| (x.dir, x.site.token_name())).collect();
        flows.insert(f.decl_id, v);
    }
    let token_dirs = |name: &str| -> BTreeSet<Direction> {
        flows.values().flatten().filter(|(_, t)| t.as_deref() == Some(name)).map(|(d, _)| *d).collect()
    };

    // Token addresses.
    let mut stake_tokens = Vec::new();
    let mut reward_tokens = Vec::new();
    let mut used_tokens = Vec::new();
    for v in &c.state_vars {
        let is_token = match &v.type_desc {
            TypeDesc::ContractRef { name } => !is_pool_type(g.unit, name) || !token_dirs(&v.name).is_empty(),
            t => t.is_address(),
        };
        if !is_token || v.is_constant_or_immutable && v.type_desc.is_address() {
            continue;
        }
        let dirs = token_dirs(&v.name);
        if !dirs.is_empty() {
            used_tokens.push(v.name.clone());
        }
        let lower = v.name.to_ascii_lowercase();
        if lower.contains("reward") {
            reward_tokens.push(v.name.clone());
        } else if has_any(&lower, STAKE_TOKEN_WORDS) && (!dirs.is_empty() || lower.contains("token")) || dirs.contains(&Direction::In) {
            stake_tokens.push(v.name.clone());
        }
    }
    if reward_tokens.is_empty() && used_tokens.len() == 1 && stake_tokens == used_tokens {
        reward_tokens = used_tokens.clone();
    }

    // Per-user slots.
    let cands = slot_candidates(c, g.unit);
    let timed: Vec<&VariablePath> =
        defs.state.iter().filter(|d| mentions_timestamp(d.value)).map(|d| &d.path).collect();
    let mut amounts = Vec::new();
    let mut rewards = Vec::new();
    let mut times = Vec::new();
    for cand in &cands {
        let timed_usage = timed.iter().any(|p| p.same_slot(&cand.path));
        if is_time_name(&cand.term) || timed_usage && !is_reward_name(&cand.term) && !is_amount_name(&cand.term) {
            times.push(cand.name.clone());
            continue;
        }
        if is_reward_name(&cand.term) {
            rewards.push(cand.name.clone());
        } else if is_amount_name(&cand.term) || funded_by_deposit(s, &cand.path) {
            amounts.push(cand.name.clone());
        }
    }
    let amount_paths: Vec<&VariablePath> =
        cands.iter().filter(|c| amounts.contains(&c.name)).map(|c| &c.path).collect();
    let reward_paths: Vec<&VariablePath> =
        cands.iter().filter(|c| rewards.contains(&c.name)).map(|c| &c.path).collect();

    // Functions.
    for f in c.functions.iter().filter(|f| f.body.is_some() && f.kind == FunctionKind::Function) {
        if f.mutability.is_read_only() {
            continue;
        }
        let sum = s.get(f.decl_id);
        let fl = &flows[&f.decl_id];
        let mut best: Option<(u8, FuncRole)> = None;
        for role in FuncRole::ALL {
            let usage: Vec<&Option<String>> = fl.iter().filter(|(d, _)| role.accepts(*d)).map(|(_, t)| t).collect();
            if usage.is_empty() {
                continue;
            }
            let lex = fn_lexicon(role, &f.name);
            let effect = match role {
                FuncRole::Stake | FuncRole::UnStake => amount_paths.iter().any(|p| sum.writes_slot(p)),
                FuncRole::GetReward => reward_paths.iter().any(|p| sum.writes_slot(p)),
            };
            if !lex && !effect {
                continue;
            }
            let tokens = match role {
                FuncRole::GetReward => &reward_tokens,
                _ => &stake_tokens,
            };
            let token_match = usage.iter().any(|t| t.as_ref().is_some_and(|t| tokens.contains(t)));
            let score = 1 + lex as u8 + effect as u8 + token_match as u8;
            // Ties go to the later role, so UnStake wins over GetReward.
            if best.is_none_or(|(b, _)| score >= b) {
                best = Some((score, role));
            }
        }
        if let Some((_, role)) = best {
            info.func_roles.entry(role).or_default().push(RoleFunction {
                name: f.name.clone(),
                decl: f.decl_id,
                transfers: locators_for(s, f.decl_id, role),
            });
        }
    }

    if info.func_roles.is_empty() {
        info.diagnostics.push(format!("{}: no staking functions found", c.name));
        return info;
    }
    for (role, names) in [
        (VarRole::UserStakeAmount, amounts),
        (VarRole::UserStakeReward, rewards),
        (VarRole::UserStakeTime, times),
        (VarRole::StakeTokenAddress, stake_tokens),
        (VarRole::RewardTokenAddress, reward_tokens),
    ] {
        if !names.is_empty() {
            info.var_roles.insert(role, names);
        }
    }
    info.normalize();
    info
}

/// The slot grows by a parameter that is also the amount of an incoming transfer.
fn funded_by_deposit(s: &Summaries, path: &VariablePath) -> bool {
    s.g.contract.functions.iter().filter(|f| f.is_entry() && f.body.is_some()).any(|f| {
        let sum = s.get(f.decl_id);
        let scope = match s.g.scope(f.decl_id) {
            Some(sc) => sc,
            None => return false,
        };
        let deposit_params: BTreeSet<usize> = sum
            .sites
            .iter()
            .filter(|x| x.via.is_empty() && x.dir == Direction::In)
            .filter_map(|x| match &x.site.amount.strip_conversions().kind {
                ExprKind::Ident { binding: Binding::Param { decl }, .. } => scope.function.param_index(*decl),
                _ => None,
            })
            .collect();
        sum.writes.iter().any(|w| w.path.same_slot(path) && w.srcs.iter().any(|s| matches!(s, Src::Param(i) if deposit_params.contains(i))))
    })
}
