//! Defect rules over the staking model, summaries and facts.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::defuse::{AddrClass, Var, VariablePath};
use crate::extract::FuncRole;
use crate::facts::{effective_from, is_reward_trans};
use crate::ir::*;
use crate::model::{CdgNode, StakingModel, TransferModel};
use crate::summary::{PermKind, Summaries, Summary};
use crate::transfer::TransferKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DefectType {
    SVM,
    RT,
    SLR,
    OSU,
    UV,
    UAA,
}

impl DefectType {
    pub const ALL: [DefectType; 6] =
        [DefectType::SVM, DefectType::RT, DefectType::SLR, DefectType::OSU, DefectType::UV, DefectType::UAA];

    pub fn rule_id(self) -> String {
        format!("SSR-{:?}", self)
    }

    pub fn title(self) -> &'static str {
        match self {
            DefectType::SVM => "Staking variable manipulation",
            DefectType::RT => "Reward calculation ignores staking time",
            DefectType::SLR => "Reward priced from a single liquidity pool",
            DefectType::OSU => "Omitted staking state update",
            DefectType::UV => "Unverified staking state",
            DefectType::UAA => "Unauthorized access to another account",
        }
    }

    pub fn help(self) -> &'static str {
        match self {
            DefectType::SVM => "Restrict who can change variables that feed reward or stake amounts, and do not derive rewards from the contract's own balance.",
            DefectType::RT => "Make the reward a function of how long the stake has been held.",
            DefectType::SLR => "Use a time-weighted or multi-source price instead of one pool's reserves.",
            DefectType::OSU => "Update the stake amount and the reward checkpoint whenever value leaves or enters the pool.",
            DefectType::UV => "Check the user's recorded stake, reward and status before paying out.",
            DefectType::UAA => "Only let the owner of a position, or someone they approved, move its value.",
        }
    }

    pub fn parse(s: &str) -> Option<DefectType> {
        let s = s.trim().trim_start_matches("SSR-").to_ascii_uppercase();
        DefectType::ALL.into_iter().find(|d| format!("{:?}", d) == s)
    }
}

impl fmt::Display for DefectType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Confidence {
    High,
    Low,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Evidence {
    pub fact: String,
    pub line: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub defect: DefectType,
    pub rule: String,
    pub contract: String,
    pub function: String,
    pub file: String,
    pub line: u32,
    pub offset: u32,
    pub len: u32,
    pub message: String,
    pub confidence: Confidence,
    pub evidence: Vec<Evidence>,
}

impl Finding {
    fn sort_key(&self) -> (String, u32, DefectType, String) {
        (self.file.clone(), self.line, self.defect, self.rule.clone())
    }
}

struct Ctx<'s, 'g, 'a> {
    s: &'s Summaries<'g, 'a>,
    m: &'s StakingModel,
    out: Vec<Finding>,
}

impl Ctx<'_, '_, '_> {
    #[allow(clippy::too_many_arguments)]
    fn report(&mut self, defect: DefectType, rule: &str, func: AstId, loc: &Loc, message: String, low: bool, evidence: Vec<Evidence>) {
        self.out.push(Finding {
            defect,
            rule: rule.into(),
            contract: self.m.contract.clone(),
            function: self.s.g.name(func),
            file: loc.file.to_string(),
            line: loc.line,
            offset: loc.offset,
            len: loc.len,
            message,
            confidence: if low { Confidence::Low } else { Confidence::High },
            evidence,
        });
    }

    fn entry_fns(&self) -> Vec<&FunctionIR> {
        self.s
            .g
            .contract
            .functions
            .iter()
            .filter(|f| f.body.is_some() && f.is_entry() && f.kind == FunctionKind::Function)
            .collect()
    }

    fn shaky(&self, sum: &Summary) -> bool {
        sum.unanalyzed || sum.low_level || sum.depth_exceeded
    }

    fn ambiguous(&self, p: &VariablePath) -> bool {
        self.m.ambiguous.iter().any(|a| a.same_slot(p))
    }

    fn role_transfers(&self, role: FuncRole) -> Vec<(&TransferModel, AstId)> {
        self.m.role_transfers(role).collect()
    }
}

fn ev(fact: impl Into<String>, line: u32) -> Evidence {
    Evidence { fact: fact.into(), line }
}

fn has_perm(sum: &Summary) -> bool {
    sum.perms().next().is_some()
}

fn perm_for(sum: &Summary, who: &AddrClass) -> bool {
    sum.perms().any(|p| p.kind == PermKind::Role || &p.who == who || matches!(p.who, AddrClass::StateRef(_) | AddrClass::Constant(_)))
}

/// Runs every rule and merges findings that describe the same defect.
pub fn detect(s: &Summaries, m: &StakingModel) -> Vec<Finding> {
    let mut c = Ctx { s, m, out: Vec::new() };
    if m.stake_funcs.is_empty() && m.getreward_funcs.is_empty() && m.unstake_funcs.is_empty() {
        return Vec::new();
    }
    r1_input_manipulation(&mut c);
    r2_native_balance(&mut c);
    r3_reward_time(&mut c);
    r4_single_pool(&mut c);
    r5_missing_update(&mut c);
    r6_unverified(&mut c);
    r7_r8_foreign_account(&mut c);
    let mut out = c.out;
    out.sort_by_key(|f| f.sort_key());
    out.dedup_by(|a, b| a.defect == b.defect && a.file == b.file && a.line == b.line);
    out
}

/// Non-role entry functions that write, from caller input, a variable the reward
/// or stake amount is computed from.
fn r1_input_manipulation(c: &mut Ctx) {
    let mut deps: BTreeSet<VariablePath> = BTreeSet::new();
    for t in &c.m.transfers {
        if t.roles.iter().any(|(r, _)| *r == FuncRole::GetReward) {
            deps.extend(t.cdg.state_dep.iter().cloned());
        }
        if t.roles.iter().any(|(r, _)| matches!(r, FuncRole::Stake | FuncRole::UnStake)) {
            deps.extend(t.cdg.state_dep.iter().filter(|p| c.m.is_amount(p)).cloned());
        }
    }
    let mut hits = Vec::new();
    for f in c.entry_fns() {
        if c.m.role_of(f.decl_id).is_some() || !c.s.g.callgraph.is_reachable(f.decl_id) {
            continue;
        }
        let sum = c.s.get(f.decl_id);
        if has_perm(&sum) {
            continue;
        }
        for w in &sum.writes {
            if w.srcs.is_empty() || w.key == Some(AddrClass::Caller) || c.m.is_amount(&w.path) || c.m.is_reward(&w.path) {
                continue;
            }
            if !deps.iter().any(|d| d.same_slot(&w.path)) {
                continue;
            }
            let low = w.unknown || c.shaky(&sum) || c.ambiguous(&w.path);
            hits.push((f.decl_id, w.loc.clone(), w.path.to_string(), low));
        }
    }
    for (func, loc, path, low) in hits {
        let name = c.s.g.name(func);
        c.report(
            DefectType::SVM,
            "R1",
            func,
            &loc,
            format!("`{}` lets any caller set `{}`, which feeds reward or stake amounts", name, path),
            low,
            vec![ev(format!("ModifyVar({}, {})", name, path), loc.line), ev(format!("CalDepend(reward, {})", path), loc.line)],
        );
    }
}

/// Rewards derived from the native balance while an unguarded function can move it.
fn r2_native_balance(c: &mut Ctx) {
    let native = c.role_transfers(FuncRole::GetReward).iter().any(|(t, _)| t.cdg.has_native_balance());
    if !native {
        return;
    }
    let mut hits = Vec::new();
    for f in c.entry_fns() {
        if c.m.role_of(f.decl_id).is_some() {
            continue;
        }
        let sum = c.s.get(f.decl_id);
        if has_perm(&sum) {
            continue;
        }
        for x in sum.sites.iter().filter(|x| x.site.native) {
            hits.push((f.decl_id, x.site.loc.clone(), c.shaky(&sum)));
        }
    }
    for (func, loc, low) in hits {
        let name = c.s.g.name(func);
        c.report(
            DefectType::SVM,
            "R2",
            func,
            &loc,
            format!("reward depends on the contract's native balance, which `{}` can drain without restriction", name),
            low,
            vec![ev("DependonBalance(reward)", loc.line), ev(format!("NaTokenTrans({})", name), loc.line)],
        );
    }
}

/// Reward amounts with no dependence on time.
fn r3_reward_time(c: &mut Ctx) {
    let hits: Vec<_> = c
        .role_transfers(FuncRole::GetReward)
        .into_iter()
        .filter(|(t, _)| !t.cdg.time_dep && !t.cdg.depth_exceeded && t.site.kind != TransferKind::Burn)
        .map(|(t, f)| (f, t.site.function, t.site.loc.clone(), c.shaky(&c.s.get(t.site.function))))
        .collect();
    for (role_fn, func, loc, low) in hits {
        let name = c.s.g.name(role_fn);
        c.report(
            DefectType::RT,
            "R3",
            func,
            &loc,
            format!("reward paid by `{}` does not depend on staking time", name),
            low,
            vec![ev("not StakeTime in CDG(reward)", loc.line)],
        );
    }
}

/// Reward or minted stake priced from exactly one pool.
fn r4_single_pool(c: &mut Ctx) {
    let mut hits = Vec::new();
    for t in &c.m.transfers {
        let in_role = !t.roles.is_empty()
            || c.m.role_of(t.site.function) == Some(FuncRole::Stake) && t.site.kind == TransferKind::Mint;
        if !in_role {
            continue;
        }
        let pools = t.cdg.pools();
        if pools.len() != 1 {
            continue;
        }
        let Some(i) = t.cdg.pool_sources.first() else { continue };
        let loc = t.cdg.locs[*i].clone();
        let pool = pools.into_iter().next().unwrap_or_default();
        hits.push((t.site.function, loc, pool, t.cdg.nodes[*i].to_string()));
    }
    for (func, loc, pool, node) in hits {
        c.report(
            DefectType::SLR,
            "R4",
            func,
            &loc,
            format!("amount is priced from the single pool `{}` via `{}`", pool, node),
            false,
            vec![ev(format!("lpPool({})", pool), loc.line)],
        );
    }
}

fn writes_any(sum: &Summary, paths: &BTreeSet<VariablePath>) -> bool {
    paths.iter().any(|p| sum.writes_slot(p))
}

/// Role functions that move value without updating the state that tracks it.
fn r5_missing_update(c: &mut Ctx) {
    let mut hits = Vec::new();
    let reward_deps: BTreeSet<VariablePath> = c
        .role_transfers(FuncRole::GetReward)
        .iter()
        .flat_map(|(t, _)| t.cdg.state_dep.iter().cloned())
        .collect();
    let feeding_times: BTreeSet<VariablePath> =
        c.m.stake_times.iter().filter(|p| reward_deps.iter().any(|d| d.same_slot(p))).cloned().collect();
    let flags: BTreeSet<VariablePath> = status_flags(c).into_iter().collect();
    for (t, f) in c.role_transfers(FuncRole::UnStake) {
        let sum = c.s.get(f);
        if !c.m.amounts.is_empty() && !writes_any(&sum, &c.m.amounts) && !writes_any(&sum, &flags) {
            hits.push((f, t.site.loc.clone(), "unstake does not reduce the recorded stake".to_string(), c.shaky(&sum)));
        }
    }
    for (t, f) in c.role_transfers(FuncRole::GetReward) {
        let sum = c.s.get(f);
        let tracked: BTreeSet<VariablePath> = t
            .cdg
            .state_dep
            .iter()
            .filter(|p| {
                c.m.is_reward(p) || c.m.stake_times.iter().any(|s| s.same_slot(p)) || p.is_keyed() && !c.m.is_amount(p)
            })
            .cloned()
            .collect();
        if !tracked.is_empty() && !writes_any(&sum, &tracked) {
            let names: Vec<String> = tracked.iter().map(|p| p.to_string()).collect();
            hits.push((f, t.site.loc.clone(), format!("claim does not update {}", names.join(", ")), c.shaky(&sum)));
        }
    }
    for (t, f) in c.role_transfers(FuncRole::Stake) {
        let sum = c.s.get(f);
        if !c.m.amounts.is_empty() && !writes_any(&sum, &c.m.amounts) {
            hits.push((f, t.site.loc.clone(), "stake does not record the deposited amount".to_string(), c.shaky(&sum)));
        } else if !feeding_times.is_empty() && !writes_any(&sum, &feeding_times) {
            hits.push((f, t.site.loc.clone(), "stake does not reset the reward checkpoint".to_string(), c.shaky(&sum)));
        }
    }
    for (func, loc, msg, low) in hits {
        let name = c.s.g.name(func);
        c.report(DefectType::OSU, "R5", func, &loc, format!("`{}`: {}", name, msg), low, vec![ev(format!("not ModifyVar({})", name), loc.line)]);
    }
}

fn root_guarded(sum: &Summary, t: &TransferModel) -> bool {
    let root = &t.cdg.nodes[t.cdg.root];
    match root {
        CdgNode::Local { decl, func, .. } if *func == t.site.function => sum
            .guards
            .iter()
            .any(|g| g.direct && g.vars.iter().any(|v| matches!(v, Var::Local { decl: d, .. } | Var::Param { decl: d, .. } if d == decl))),
        CdgNode::Param { decl, .. } => sum
            .guards
            .iter()
            .any(|g| g.direct && g.vars.iter().any(|v| matches!(v, Var::Param { decl: d, .. } if d == decl))),
        CdgNode::StateVar { path } => sum.guard_reads_slot(path),
        _ => false,
    }
}

/// Bool members of the records that hold stakes.
fn status_flags(c: &Ctx) -> Vec<VariablePath> {
    let unit = c.s.g.unit;
    let mut out = Vec::new();
    let bases: BTreeSet<&str> = c.m.amounts.iter().filter(|p| p.member.is_some()).map(|p| p.base.as_str()).collect();
    for v in c.s.g.contract.state_vars.iter().filter(|v| bases.contains(v.name.as_str())) {
        if let TypeDesc::Struct { decl, name } = v.type_desc.innermost() {
            if let Some(sd) = unit.structs.get(decl).or_else(|| unit.struct_by_name(name)) {
                for (m, t) in &sd.members {
                    if t.is_bool() {
                        out.push(VariablePath {
                            base: v.name.clone(),
                            member: Some(m.clone()),
                            key_shape: crate::defuse::key_shape(&v.type_desc),
                        });
                    }
                }
            }
        }
    }
    out
}

/// Payouts made without checking the stake, reward or status they rely on.
fn r6_unverified(c: &mut Ctx) {
    let mut hits = Vec::new();
    for (t, f) in c.role_transfers(FuncRole::UnStake) {
        let sum = c.s.get(f);
        if !c.m.amounts.is_empty() && !c.m.amounts.iter().any(|p| sum.guard_reads_slot(p)) {
            hits.push((f, t.site.loc.clone(), "unstake never checks the caller's recorded stake".to_string(), c.shaky(&sum), "VerifyVar(amount)"));
        }
    }
    let flags = status_flags(c);
    let unstake_sums: Vec<_> = c.m.unstake_funcs.iter().map(|f| c.s.get(f.decl)).collect();
    for (t, f) in c.role_transfers(FuncRole::GetReward) {
        let sum = c.s.get(f);
        let reward_guard = c.m.rewards.iter().any(|p| sum.guard_reads_slot(p));
        // The root lives in the function making the transfer, which may be a helper.
        if !reward_guard && !root_guarded(&c.s.get(t.site.function), t) {
            hits.push((f, t.site.loc.clone(), "reward is paid without checking the owed amount".to_string(), c.shaky(&sum), "VerifyVar(reward)"));
            continue;
        }
        for flag in &flags {
            let set_on_exit = unstake_sums.iter().any(|u| u.writes.iter().any(|w| w.path.same_slot(flag)));
            if set_on_exit && !sum.guard_reads_slot(flag) {
                hits.push((
                    f,
                    t.site.loc.clone(),
                    format!("reward is paid without checking the status flag `{}`", flag),
                    true,
                    "VerifyVar(status)",
                ));
            }
        }
    }
    for (func, loc, msg, low, fact) in hits {
        let name = c.s.g.name(func);
        c.report(DefectType::UV, "R6", func, &loc, format!("`{}`: {}", name, msg), low, vec![ev(format!("not {}", fact), loc.line)]);
    }
}

/// Value taken from, or balances rewritten for, an account the caller does not control.
fn r7_r8_foreign_account(c: &mut Ctx) {
    let mut by_fn: BTreeMap<AstId, (Option<(Loc, String)>, Vec<(Loc, String)>, bool)> = BTreeMap::new();
    for (i, t) in c.m.transfers.iter().enumerate() {
        let Some(f) = c.s.g.function(t.site.function) else { continue };
        if !f.is_entry() || !is_reward_trans(c.m, i) {
            continue;
        }
        let Some(scope) = c.s.g.scope(t.site.function) else { continue };
        let from = effective_from(c.s, c.m, i);
        let to = t.site.to.as_ref().map(|e| scope.classify(e)).unwrap_or(AddrClass::This);
        if matches!(from, AddrClass::Caller | AddrClass::This | AddrClass::Origin) || from == to {
            continue;
        }
        let sum = c.s.get(t.site.function);
        if perm_for(&sum, &from) {
            continue;
        }
        let e = by_fn.entry(t.site.function).or_default();
        if e.0.is_none() {
            e.0 = Some((t.site.loc.clone(), format!("RewardTrans(from {}, to {})", from, to)));
        }
        e.2 |= c.shaky(&sum);
    }
    for f in c.entry_fns() {
        let sum = c.s.get(f.decl_id);
        for w in &sum.writes {
            if !(c.m.is_reward(&w.path) || c.m.is_amount(&w.path)) || w.srcs.is_empty() {
                continue;
            }
            let Some(key) = &w.key else { continue };
            if matches!(key, AddrClass::Caller | AddrClass::This | AddrClass::Origin) || has_perm(&sum) {
                continue;
            }
            let e = by_fn.entry(f.decl_id).or_default();
            e.1.push((w.loc.clone(), format!("ModifyVar({}, key {})", w.path, key)));
            e.2 |= c.shaky(&sum) || w.unknown;
        }
    }
    for (func, (trans, writes, low)) in by_fn {
        let name = c.s.g.name(func);
        let mut evidence: Vec<Evidence> = writes.iter().map(|(l, s)| ev(s.clone(), l.line)).collect();
        let (loc, rule) = match &trans {
            Some((l, s)) => {
                evidence.insert(0, ev(s.clone(), l.line));
                (l.clone(), if writes.is_empty() { "R7" } else { "R7+R8" })
            }
            None => (writes[0].0.clone(), "R8"),
        };
        evidence.push(ev(format!("not permissCheck({})", name), loc.line));
        c.report(
            DefectType::UAA,
            rule,
            func,
            &loc,
            format!("`{}` moves value belonging to another account without an authorization check", name),
            low,
            evidence,
        );
    }
}
