//! Staking role extraction: which variables hold stakes, rewards, times and token
//! addresses, and which functions stake, pay rewards and unstake.

pub mod heuristic;
pub mod llm;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::graphs::ContractGraphs;
use crate::ir::*;
use crate::summary::Summaries;
use crate::transfer::Direction;

pub use heuristic::extract_heuristic;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum VarRole {
    UserStakeAmount,
    UserStakeReward,
    UserStakeTime,
    StakeTokenAddress,
    RewardTokenAddress,
}

impl VarRole {
    pub const ALL: [VarRole; 5] = [
        VarRole::UserStakeAmount,
        VarRole::UserStakeReward,
        VarRole::UserStakeTime,
        VarRole::StakeTokenAddress,
        VarRole::RewardTokenAddress,
    ];

    /// Key used in extraction prompts and gold files.
    pub fn label(self) -> &'static str {
        match self {
            VarRole::UserStakeAmount => "User Stake Amount",
            VarRole::UserStakeReward => "User Stake Reward",
            VarRole::UserStakeTime => "User Stake Time",
            VarRole::StakeTokenAddress => "Stake Token Address",
            VarRole::RewardTokenAddress => "Reward Token Address",
        }
    }

    pub fn from_label(s: &str) -> Option<VarRole> {
        let norm: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        VarRole::ALL.into_iter().find(|r| {
            let l: String = r.label().chars().filter(|c| c.is_ascii_alphanumeric()).collect();
            l.to_ascii_lowercase() == norm || format!("{:?}", r).to_ascii_lowercase() == norm
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FuncRole {
    Stake,
    GetReward,
    UnStake,
}

impl FuncRole {
    pub const ALL: [FuncRole; 3] = [FuncRole::Stake, FuncRole::GetReward, FuncRole::UnStake];

    pub fn label(self) -> &'static str {
        match self {
            FuncRole::Stake => "Stake",
            FuncRole::GetReward => "GetReward",
            FuncRole::UnStake => "UnStake",
        }
    }

    pub fn from_label(s: &str) -> Option<FuncRole> {
        let norm: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        FuncRole::ALL.into_iter().find(|r| r.label().to_ascii_lowercase() == norm)
    }

    /// Transfer directions that realize the role.
    pub fn accepts(self, d: Direction) -> bool {
        match self {
            FuncRole::Stake => d == Direction::In,
            FuncRole::GetReward => matches!(d, Direction::Out | Direction::Between | Direction::Mint),
            FuncRole::UnStake => matches!(d, Direction::Out | Direction::Between),
        }
    }
}

/// The statement that moves tokens for a role function.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TransferLocator {
    /// Function whose body holds the statement.
    pub function: String,
    pub stmt: AstId,
    pub line: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleFunction {
    pub name: String,
    pub decl: AstId,
    pub transfers: Vec<TransferLocator>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Heuristic,
    Llm { model: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StakingInfo {
    pub var_roles: BTreeMap<VarRole, Vec<String>>,
    pub func_roles: BTreeMap<FuncRole, Vec<RoleFunction>>,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

impl StakingInfo {
    pub fn empty(provenance: Provenance) -> Self {
        StakingInfo { var_roles: BTreeMap::new(), func_roles: BTreeMap::new(), provenance, diagnostics: Vec::new() }
    }

    pub fn vars(&self, role: VarRole) -> &[String] {
        self.var_roles.get(&role).map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn funcs(&self, role: FuncRole) -> &[RoleFunction] {
        self.func_roles.get(&role).map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn role_of(&self, decl: AstId) -> Option<FuncRole> {
        self.func_roles.iter().find(|(_, fs)| fs.iter().any(|f| f.decl == decl)).map(|(r, _)| *r)
    }

    /// No role functions: the contract is not treated as a staking contract.
    pub fn is_empty(&self) -> bool {
        self.func_roles.values().all(|v| v.is_empty())
    }

    /// Role assignments only, ignoring provenance and diagnostics.
    pub fn same_roles(&self, other: &StakingInfo) -> bool {
        let strip = |i: &StakingInfo| {
            let v: BTreeMap<_, _> = i.var_roles.iter().filter(|(_, v)| !v.is_empty()).collect();
            let f: BTreeMap<_, _> = i.func_roles.iter().filter(|(_, v)| !v.is_empty()).collect();
            (format!("{:?}", v), format!("{:?}", f))
        };
        strip(self) == strip(other)
    }

    fn normalize(&mut self) {
        for v in self.var_roles.values_mut() {
            v.sort();
            v.dedup();
        }
        for v in self.func_roles.values_mut() {
            v.sort_by(|a, b| a.name.cmp(&b.name).then(a.decl.cmp(&b.decl)));
            v.dedup_by(|a, b| a.decl == b.decl);
        }
        self.var_roles.retain(|_, v| !v.is_empty());
        self.func_roles.retain(|_, v| !v.is_empty());
        self.diagnostics.sort();
        self.diagnostics.dedup();
    }
}

/// Transfer statements in `decl`'s own body whose direction fits `role`.
pub fn locators_for(s: &Summaries, decl: AstId, role: FuncRole) -> Vec<TransferLocator> {
    let sum = s.get(decl);
    let mut out: Vec<TransferLocator> = sum
        .sites
        .iter()
        .filter(|x| x.via.is_empty() && role.accepts(x.dir))
        .map(|x| TransferLocator { function: s.g.name(x.site.function), stmt: x.site.stmt, line: x.site.loc.line })
        .collect();
    out.sort();
    out.dedup();
    out
}

/// A variable name as used in role lists: `base` or `base.member`.
pub fn var_names(c: &ContractIR, unit: &SourceUnit) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for v in &c.state_vars {
        out.insert(v.name.clone());
        if let TypeDesc::Struct { decl, name } = v.type_desc.innermost() {
            if let Some(s) = unit.structs.get(decl).or_else(|| unit.struct_by_name(name)) {
                for (m, _) in &s.members {
                    out.insert(format!("{}.{}", v.name, m));
                }
            }
        }
    }
    out
}

/// Drops names that do not exist in the contract. Bare struct member names are
/// kept and resolved later.
pub fn validate(info: &mut StakingInfo, g: &ContractGraphs) {
    let names = var_names(g.contract, g.unit);
    let mut diags = Vec::new();
    for (role, vars) in info.var_roles.iter_mut() {
        let mut kept = Vec::new();
        for v in vars.drain(..) {
            if names.contains(&v) {
                kept.push(v);
                continue;
            }
            let suffix = format!(".{}", v);
            if names.iter().any(|n| n.ends_with(&suffix)) {
                kept.push(v);
            } else {
                diags.push(format!("{}: {} `{}` not found; dropped", g.contract.name, role.label(), v));
            }
        }
        *vars = kept;
    }
    let by_name: HashMap<&str, AstId> = g
        .contract
        .functions
        .iter()
        .filter(|f| f.body.is_some())
        .map(|f| (f.name.as_str(), f.decl_id))
        .collect();
    for (role, fs) in info.func_roles.iter_mut() {
        fs.retain_mut(|f| match g.function(f.decl).map(|x| x.name.as_str()) {
            Some(n) if n == f.name => true,
            _ => match by_name.get(f.name.as_str()) {
                Some(d) => {
                    f.decl = *d;
                    true
                }
                None => {
                    diags.push(format!("{}: {} function `{}` not found; dropped", g.contract.name, role.label(), f.name));
                    false
                }
            },
        });
    }
    info.diagnostics.extend(diags);
    info.normalize();
}

/// Moves roles of internal helpers to their externally callable wrappers and drops
/// roles on functions nobody can reach.
pub fn refine_roles(mut info: StakingInfo, s: &Summaries) -> StakingInfo {
    let g = s.g;
    let cg = &g.callgraph;
    let mut out: BTreeMap<FuncRole, Vec<RoleFunction>> = BTreeMap::new();
    let mut assigned: BTreeSet<AstId> = info.func_roles.values().flatten().map(|f| f.decl).collect();
    for (role, fs) in std::mem::take(&mut info.func_roles) {
        for f in fs {
            let is_entry = g.function(f.decl).is_some_and(|x| x.is_entry());
            if is_entry {
                out.entry(role).or_default().push(f);
                continue;
            }
            if !cg.is_reachable(f.decl) {
                info.diagnostics.push(format!("{}: {} function `{}` is not externally reachable; role dropped", g.contract.name, role.label(), f.name));
                continue;
            }
            // Walk callers up to entry points.
            let mut wrappers = BTreeSet::new();
            let mut seen = BTreeSet::from([f.decl]);
            let mut stack = vec![f.decl];
            while let Some(d) = stack.pop() {
                for c in cg.callers_of(d) {
                    if !seen.insert(c) {
                        continue;
                    }
                    if g.function(c).is_some_and(|x| x.is_entry()) {
                        wrappers.insert(c);
                    } else {
                        stack.push(c);
                    }
                }
            }
            for w in wrappers {
                if assigned.contains(&w) {
                    continue;
                }
                assigned.insert(w);
                out.entry(role).or_default().push(RoleFunction { name: g.name(w), decl: w, transfers: f.transfers.clone() });
            }
        }
    }
    info.func_roles = out;
    info.normalize();
    info
}
