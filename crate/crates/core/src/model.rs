//! The staking model: role-tagged paths and functions plus one calculation
//! dependency graph (CDG) per transfer statement.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::rc::Rc;

use serde::Serialize;

use crate::callgraph::{resolve_call, CallTarget};
use crate::defs::DefIndex;
use crate::defuse::{key_shape, AddrClass, Scope, VariablePath};
use crate::error::{Error, Result};
use crate::extract::{FuncRole, RoleFunction, StakingInfo, TransferLocator, VarRole};
use crate::facts::is_pool_type;
use crate::ir::*;
use crate::summary::Summaries;
use crate::transfer::{transfers_in, TransferSite};

pub const DEFAULT_MAX_DEPTH: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum EdgeKind {
    Cal,
    Con,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BalanceKind {
    Native,
    Token,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CdgNode {
    StateVar { path: VariablePath },
    /// `chain` lists the call expressions through which a callee local was reached.
    Local { function: String, func: AstId, decl: AstId, name: String, chain: Vec<AstId> },
    Param { function: String, func: AstId, decl: AstId, name: String },
    Balance { balance: BalanceKind, token: Option<String> },
    ExternalSource { receiver: String, target_type: Option<String>, callee: String },
    Constant { value: String },
    Timestamp { source: String },
    MsgValue,
}

impl fmt::Display for CdgNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CdgNode::StateVar { path } => write!(f, "{}", path),
            CdgNode::Local { function, name, .. } => write!(f, "{}::{}", function, name),
            CdgNode::Param { function, name, .. } => write!(f, "{}({})", function, name),
            CdgNode::Balance { balance: BalanceKind::Native, .. } => f.write_str("this.balance"),
            CdgNode::Balance { token, .. } => write!(f, "{}.balanceOf(this)", token.as_deref().unwrap_or("token")),
            CdgNode::ExternalSource { receiver, callee, .. } => write!(f, "{}.{}()", receiver, callee),
            CdgNode::Constant { value } => f.write_str(value),
            CdgNode::Timestamp { source } => f.write_str(source),
            CdgNode::MsgValue => f.write_str("msg.value"),
        }
    }
}

impl CdgNode {
    /// Short name used in walkthrough checks: the variable name without qualifiers.
    pub fn short_name(&self) -> String {
        match self {
            CdgNode::StateVar { path } => match &path.member {
                Some(m) => format!("{}.{}", path.base, m),
                None => path.base.clone(),
            },
            CdgNode::Local { name, .. } | CdgNode::Param { name, .. } => name.clone(),
            other => other.to_string(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Cdg {
    pub root: usize,
    pub nodes: Vec<CdgNode>,
    /// First location where each node was seen.
    pub locs: Vec<Loc>,
    pub edges: BTreeSet<(usize, usize, EdgeKind)>,
    pub state_dep: BTreeSet<VariablePath>,
    pub depends_on_balance: bool,
    pub balance_kinds: BTreeSet<BalanceKind>,
    /// ExternalSource nodes whose target is a liquidity pool.
    pub pool_sources: Vec<usize>,
    pub time_dep: bool,
    pub depth_exceeded: bool,
}

impl Cdg {
    pub fn node_id(&self, n: &CdgNode) -> Option<usize> {
        self.nodes.iter().position(|x| x == n)
    }

    /// Distinct pool receivers.
    pub fn pools(&self) -> BTreeSet<String> {
        self.pool_sources
            .iter()
            .filter_map(|i| match &self.nodes[*i] {
                CdgNode::ExternalSource { receiver, .. } => Some(receiver.clone()),
                _ => None,
            })
            .collect()
    }

    pub fn reaches(&self, from: usize, to: usize) -> bool {
        if from == to {
            return true;
        }
        let mut seen = BTreeSet::from([from]);
        let mut q = VecDeque::from([from]);
        while let Some(n) = q.pop_front() {
            for &(a, b, _) in &self.edges {
                if a == n && seen.insert(b) {
                    if b == to {
                        return true;
                    }
                    q.push_back(b);
                }
            }
        }
        false
    }

    pub fn depends_on_state(&self, p: &VariablePath) -> bool {
        self.state_dep.iter().any(|s| s.same_slot(p))
    }

    pub fn has_native_balance(&self) -> bool {
        self.balance_kinds.contains(&BalanceKind::Native)
    }

    pub fn to_dot(&self, title: &str) -> String {
        let mut out = format!("digraph \"{}\" {{\n", title.replace('"', "'"));
        for (i, n) in self.nodes.iter().enumerate() {
            let shape = if i == self.root { "doublecircle" } else { "box" };
            let label = format!("{}\\n{}:{}", n.to_string().replace('"', "'"), self.locs[i].file, self.locs[i].line);
            out.push_str(&format!("  n{} [label=\"{}\", shape={}];\n", i, label, shape));
        }
        for (a, b, k) in &self.edges {
            out.push_str(&format!("  n{} -> n{} [label=\"{:?}\"];\n", a, b, k));
        }
        out.push_str("}\n");
        out
    }
}

struct Ctx<'g> {
    func: AstId,
    chain: Vec<AstId>,
    args: Vec<&'g Expr>,
    parent: Option<Rc<Ctx<'g>>>,
}

impl<'g> Ctx<'g> {
    fn free(func: AstId) -> Rc<Self> {
        Rc::new(Ctx { func, chain: Vec::new(), args: Vec::new(), parent: None })
    }

    fn calls(&self, func: AstId) -> bool {
        self.func == func || self.parent.as_ref().is_some_and(|p| p.calls(func))
    }
}

struct Builder<'s, 'g, 'a> {
    s: &'s Summaries<'g, 'a>,
    defs: &'s DefIndex<'g>,
    max_depth: usize,
    cdg: Cdg,
    index: HashMap<CdgNode, usize>,
    ctxs: HashMap<usize, Rc<Ctx<'g>>>,
    synthetic: HashMap<usize, &'g Expr>,
    work: VecDeque<usize>,
}

impl<'s, 'g, 'a> Builder<'s, 'g, 'a> {
    fn scope(&self, func: AstId) -> Option<&'g Scope<'a>> {
        self.s.g.scope(func)
    }

    fn fname(&self, func: AstId) -> String {
        match self.s.g.graphs(func) {
            Some(fg) if fg.owner.kind == ContractKind::Library => format!("{}.{}", fg.owner.name, fg.func.name),
            Some(fg) => fg.func.display_name(),
            None => format!("#{}", func),
        }
    }

    fn node(&mut self, n: CdgNode, loc: &Loc, ctx: Option<Rc<Ctx<'g>>>) -> usize {
        if let Some(i) = self.index.get(&n) {
            return *i;
        }
        let i = self.cdg.nodes.len();
        self.cdg.nodes.push(n.clone());
        self.cdg.locs.push(loc.clone());
        self.index.insert(n, i);
        if let Some(c) = ctx {
            self.ctxs.insert(i, c);
        }
        self.work.push_back(i);
        i
    }

    fn edge(&mut self, from: usize, to: usize, kind: EdgeKind) {
        if from != to {
            self.cdg.edges.insert((from, to, kind));
        }
    }

    fn is_constant_state(&self, name: &str) -> bool {
        self.s.g.contract.state_var(name).is_some_and(|v| v.is_constant_or_immutable)
    }

    /// Nodes that `e`, evaluated in `ctx`, directly depends on.
    fn deps(&mut self, e: &'g Expr, ctx: &Rc<Ctx<'g>>, out: &mut Vec<usize>) {
        let Some(scope) = self.scope(ctx.func) else { return };
        match &e.kind {
            ExprKind::Ident { binding: Binding::State { name }, .. } => {
                if self.is_constant_state(name) {
                    return;
                }
                if let Some(a) = scope.resolve_access(e) {
                    out.push(self.node(CdgNode::StateVar { path: a.path }, &e.loc, None));
                }
            }
            ExprKind::Ident { binding: Binding::Local { decl } | Binding::Param { decl }, name } => {
                if scope.aliases.contains_key(decl) {
                    if let Some(a) = scope.resolve_access(e).filter(|a| !a.unknown) {
                        out.push(self.node(CdgNode::StateVar { path: a.path }, &e.loc, None));
                    }
                    return;
                }
                let param = scope.function.param_index(*decl);
                match (param, &ctx.parent) {
                    (Some(i), Some(parent)) => {
                        if let Some(arg) = ctx.args.get(i).copied() {
                            let parent = parent.clone();
                            self.deps(arg, &parent, out);
                        }
                    }
                    (Some(_), None) => {
                        let n = CdgNode::Param { function: self.fname(ctx.func), func: ctx.func, decl: *decl, name: name.clone() };
                        out.push(self.node(n, &e.loc, Some(ctx.clone())));
                    }
                    (None, _) => {
                        let n = CdgNode::Local {
                            function: self.fname(ctx.func),
                            func: ctx.func,
                            decl: *decl,
                            name: name.clone(),
                            chain: ctx.chain.clone(),
                        };
                        out.push(self.node(n, &e.loc, Some(ctx.clone())));
                    }
                }
            }
            ExprKind::Index { base, index } => {
                if let Some(a) = scope.resolve_access(e).filter(|a| !a.unknown) {
                    if !self.is_constant_state(&a.path.base) {
                        out.push(self.node(CdgNode::StateVar { path: a.path }, &e.loc, None));
                    }
                    return;
                }
                self.deps(base, ctx, out);
                if !base.ty.starts_with("mapping") {
                    if let Some(i) = index {
                        if !i.ty.starts_with("uint") && !i.ty.starts_with("int") && !i.ty.starts_with("address") {
                            self.deps(i, ctx, out);
                        }
                    }
                }
            }
            ExprKind::Member { base, member, .. } => {
                if let Some(a) = scope.resolve_access(e).filter(|a| !a.unknown) {
                    if !self.is_constant_state(&a.path.base) {
                        out.push(self.node(CdgNode::StateVar { path: a.path }, &e.loc, None));
                    }
                    return;
                }
                if member == "balance" && scope.classify(base) == AddrClass::This {
                    out.push(self.node(CdgNode::Balance { balance: BalanceKind::Native, token: None }, &e.loc, None));
                    return;
                }
                self.deps(base, ctx, out);
            }
            ExprKind::Special { special } => {
                let n = match special {
                    SpecialRef::BlockTimestamp | SpecialRef::BlockNumber => CdgNode::Timestamp { source: special.text().into() },
                    SpecialRef::MsgValue => CdgNode::MsgValue,
                    SpecialRef::ThisBalance => CdgNode::Balance { balance: BalanceKind::Native, token: None },
                    _ => return,
                };
                out.push(self.node(n, &e.loc, None));
            }
            ExprKind::Call { callee, args, kind: CallKind::Call, .. } => self.call_deps(e, callee, args, ctx, scope, out),
            ExprKind::Call { args, .. } => {
                for a in args {
                    self.deps(a, ctx, out);
                }
            }
            ExprKind::Assign { rhs, .. } => self.deps(rhs, ctx, out),
            _ => {
                for c in e.children() {
                    self.deps(c, ctx, out);
                }
            }
        }
    }

    fn call_deps(
        &mut self,
        call: &'g Expr,
        callee: &'g Expr,
        args: &'g [Expr],
        ctx: &Rc<Ctx<'g>>,
        scope: &'g Scope<'a>,
        out: &mut Vec<usize>,
    ) {
        let unit = self.s.g.unit;
        match resolve_call(unit, scope.contract, callee) {
            CallTarget::Internal { func, bound, .. } if self.s.g.graphs(func.decl_id).is_some() => {
                if ctx.calls(func.decl_id) {
                    return;
                }
                if ctx.chain.len() + 1 > self.max_depth {
                    self.cdg.depth_exceeded = true;
                    return;
                }
                let mut chain = ctx.chain.clone();
                chain.push(call.id);
                let inner = Rc::new(Ctx {
                    func: func.decl_id,
                    chain,
                    args: bound.into_iter().chain(args.iter()).collect(),
                    parent: Some(ctx.clone()),
                });
                let returns: Vec<&'g Expr> = self.defs.returns.get(&func.decl_id).cloned().unwrap_or_default();
                for r in returns {
                    self.deps(r, &inner, out);
                }
                for p in func.returns.iter().filter(|p| !p.name.is_empty()) {
                    let n = CdgNode::Local {
                        function: self.fname(func.decl_id),
                        func: func.decl_id,
                        decl: p.decl,
                        name: p.name.clone(),
                        chain: inner.chain.clone(),
                    };
                    out.push(self.node(n, &call.loc, Some(inner.clone())));
                }
            }
            CallTarget::External { receiver, target, name } => {
                if name == "balanceOf" && args.len() == 1 && scope.classify(&args[0]) == AddrClass::This {
                    let token = receiver.strip_conversions().render();
                    out.push(self.node(CdgNode::Balance { balance: BalanceKind::Token, token: Some(token) }, &call.loc, None));
                    return;
                }
                let n = CdgNode::ExternalSource { receiver: receiver.strip_conversions().render(), target_type: target, callee: name };
                out.push(self.node(n, &call.loc, None));
                for a in args.iter().filter(|a| !a.ty.starts_with("address") && !a.ty.starts_with("contract")) {
                    self.deps(a, ctx, out);
                }
            }
            CallTarget::LowLevel { .. } => {}
            _ => {
                for a in args {
                    self.deps(a, ctx, out);
                }
            }
        }
    }

    /// Con edges from `from` to everything read by guards over `node` in `func`.
    fn guard_edges(&mut self, from: usize, func: AstId, node: usize, ctx: &Rc<Ctx<'g>>) {
        let Some(fg) = self.s.g.graphs(func) else { return };
        let conds: Vec<&'g Expr> = fg.cfg.guards_over(node).map(|g| &g.cond).collect();
        for c in conds {
            let mut t = Vec::new();
            self.deps(c, ctx, &mut t);
            for x in t {
                self.edge(from, x, EdgeKind::Con);
            }
        }
    }

    fn expand(&mut self, i: usize) {
        let node = self.cdg.nodes[i].clone();
        if let Some(e) = self.synthetic.get(&i).copied() {
            let ctx = self.ctxs[&i].clone();
            let mut t = Vec::new();
            self.deps(e, &ctx, &mut t);
            for x in t {
                self.edge(i, x, EdgeKind::Cal);
            }
            return;
        }
        match node {
            CdgNode::StateVar { path } => {
                let defs: Vec<_> = self.defs.state_defs(&path).cloned().collect();
                for d in defs {
                    let ctx = Ctx::free(d.func);
                    let mut t = Vec::new();
                    self.deps(d.value, &ctx, &mut t);
                    for x in t {
                        self.edge(i, x, EdgeKind::Cal);
                    }
                    self.guard_edges(i, d.func, d.node, &ctx);
                }
            }
            CdgNode::Local { func, decl, .. } => {
                let ctx = self.ctxs[&i].clone();
                let defs = self.defs.local_defs(func, decl).to_vec();
                for d in defs {
                    let mut t = Vec::new();
                    self.deps(d.value, &ctx, &mut t);
                    for x in t {
                        self.edge(i, x, EdgeKind::Cal);
                    }
                    self.guard_edges(i, func, d.node, &ctx);
                }
            }
            CdgNode::Param { func, decl, .. } => {
                let f = self.s.g.graphs(func).map(|fg| fg.func);
                let Some(f) = f else { return };
                if f.is_entry() || f.kind != FunctionKind::Function {
                    return;
                }
                let Some(pi) = f.param_index(decl) else { return };
                let sites = self.defs.call_sites.get(&func).cloned().unwrap_or_default();
                for site in sites {
                    let Some(arg) = site.args.get(pi).copied() else { continue };
                    let ctx = Ctx::free(site.caller);
                    let mut t = Vec::new();
                    self.deps(arg, &ctx, &mut t);
                    for x in t {
                        self.edge(i, x, EdgeKind::Cal);
                    }
                }
            }
            _ => {}
        }
    }
}

/// The expression a transfer moves, for the statement `stmt` inside `func`.
pub fn locate_transfer_amount(s: &Summaries, func: AstId, stmt: AstId) -> Result<TransferSite> {
    transfers_in(s.g, func).into_iter().find(|t| t.stmt == stmt).ok_or_else(|| {
        let text = s
            .g
            .graphs(func)
            .and_then(|fg| fg.cfg.nodes.iter().find(|n| n.stmt.id == stmt))
            .map(|n| crate::cfg::stmt_label(&n.stmt))
            .unwrap_or_else(|| format!("statement #{}", stmt));
        Error::NotATransfer(text)
    })
}

/// Builds the CDG rooted at the amount moved by `site`.
pub fn build_cdg<'g>(s: &Summaries<'g, '_>, defs: &DefIndex<'g>, site: &TransferSite, time_paths: &[VariablePath], max_depth: usize) -> Cdg {
    let Some(fg) = s.g.graphs(site.function) else { return Cdg::default() };
    // The site's amount expression is cloned out of the body; find the original so
    // borrowed sub-expressions live as long as the graphs.
    let amount: Option<&'g Expr> = fg.cfg.nodes.get(site.node).and_then(|n| {
        let mut found = None;
        for e in n.stmt.exprs() {
            e.walk(&mut |x| {
                if found.is_none() && x.id == site.amount.id && *x == site.amount {
                    found = Some(x);
                }
            });
        }
        found
    });
    let mut b = Builder {
        s,
        defs,
        max_depth,
        cdg: Cdg::default(),
        index: HashMap::new(),
        ctxs: HashMap::new(),
        synthetic: HashMap::new(),
        work: VecDeque::new(),
    };
    let ctx = Ctx::free(site.function);
    let root = match amount {
        Some(e) => root_node(&mut b, e, &ctx),
        None => {
            // Helper transfers carry a synthesized amount; fall back to its rendering.
            b.node(CdgNode::Constant { value: site.amount.render() }, &site.amount.loc, None)
        }
    };
    b.cdg.root = root;
    b.guard_edges(root, site.function, site.node, &ctx);
    while let Some(i) = b.work.pop_front() {
        b.expand(i);
    }
    let mut cdg = b.cdg;
    for n in &cdg.nodes {
        match n {
            CdgNode::StateVar { path } => {
                cdg.state_dep.insert(path.clone());
            }
            CdgNode::Balance { balance, .. } => {
                cdg.depends_on_balance = true;
                cdg.balance_kinds.insert(*balance);
            }
            CdgNode::Timestamp { .. } => cdg.time_dep = true,
            _ => {}
        }
    }
    cdg.pool_sources = cdg
        .nodes
        .iter()
        .enumerate()
        .filter(|(_, n)| matches!(n, CdgNode::ExternalSource { target_type: Some(t), .. } if is_pool_type(s.g.unit, t)))
        .map(|(i, _)| i)
        .collect();
    if cdg.state_dep.iter().any(|p| time_paths.iter().any(|t| t.same_slot(p))) {
        cdg.time_dep = true;
    }
    cdg
}

fn root_node<'g>(b: &mut Builder<'_, 'g, '_>, e: &'g Expr, ctx: &Rc<Ctx<'g>>) -> usize {
    let inner = e.strip_conversions();
    match &inner.kind {
        ExprKind::Literal { value } => return b.node(CdgNode::Constant { value: value.clone() }, &inner.loc, None),
        ExprKind::Ident { .. } | ExprKind::Index { .. } | ExprKind::Member { .. } => {
            let mut t = Vec::new();
            b.deps(inner, ctx, &mut t);
            if let [one] = t.as_slice() {
                return *one;
            }
        }
        _ => {}
    }
    // Synthetic local bound to the amount expression.
    let n = CdgNode::Local {
        function: b.fname(ctx.func),
        func: ctx.func,
        decl: e.id,
        name: e.render(),
        chain: Vec::new(),
    };
    let i = b.node(n, &e.loc, Some(ctx.clone()));
    b.synthetic.insert(i, e);
    i
}

/// One transfer statement with its CDG.
#[derive(Debug, Clone, Serialize)]
pub struct TransferModel {
    pub locator: TransferLocator,
    pub site: TransferSite,
    /// Role functions whose transfers include this statement.
    pub roles: Vec<(FuncRole, AstId)>,
    pub cdg: Cdg,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct StakingModel {
    pub contract: String,
    pub rewards: BTreeSet<VariablePath>,
    pub stake_times: BTreeSet<VariablePath>,
    pub amounts: BTreeSet<VariablePath>,
    pub stake_token: Vec<String>,
    pub reward_token: Vec<String>,
    pub stake_funcs: Vec<RoleFunction>,
    pub getreward_funcs: Vec<RoleFunction>,
    pub unstake_funcs: Vec<RoleFunction>,
    pub transfers: Vec<TransferModel>,
    /// Paths named by an ambiguous role entry.
    pub ambiguous: BTreeSet<VariablePath>,
    pub diagnostics: Vec<String>,
}

/// Role-tagged names to paths.
pub fn resolve_paths(info: &StakingInfo, unit: &SourceUnit, c: &ContractIR) -> StakingModel {
    let mut m = StakingModel { contract: c.name.clone(), ..Default::default() };
    for role in [VarRole::UserStakeAmount, VarRole::UserStakeReward, VarRole::UserStakeTime] {
        for name in info.vars(role) {
            let paths = resolve_name(unit, c, name);
            if paths.is_empty() {
                m.diagnostics.push(format!("{}: {} `{}` matches no declaration; dropped", c.name, role.label(), name));
                continue;
            }
            if paths.len() > 1 {
                m.diagnostics.push(format!("{}: {} `{}` is ambiguous", c.name, role.label(), name));
                m.ambiguous.extend(paths.iter().cloned());
            }
            let set = match role {
                VarRole::UserStakeAmount => &mut m.amounts,
                VarRole::UserStakeReward => &mut m.rewards,
                _ => &mut m.stake_times,
            };
            set.extend(paths);
        }
    }
    m.stake_token = info.vars(VarRole::StakeTokenAddress).iter().filter(|n| c.state_var(n).is_some()).cloned().collect();
    m.reward_token = info.vars(VarRole::RewardTokenAddress).iter().filter(|n| c.state_var(n).is_some()).cloned().collect();
    m.stake_funcs = info.funcs(FuncRole::Stake).to_vec();
    m.getreward_funcs = info.funcs(FuncRole::GetReward).to_vec();
    m.unstake_funcs = info.funcs(FuncRole::UnStake).to_vec();
    m
}

fn resolve_name(unit: &SourceUnit, c: &ContractIR, name: &str) -> Vec<VariablePath> {
    let members_of = |t: &TypeDesc| -> Vec<String> {
        match t.innermost() {
            TypeDesc::Struct { decl, name } => unit
                .structs
                .get(decl)
                .or_else(|| unit.struct_by_name(name))
                .map(|s| s.members.iter().map(|(m, _)| m.clone()).collect())
                .unwrap_or_default(),
            _ => Vec::new(),
        }
    };
    if let Some((base, member)) = name.split_once('.') {
        return match c.state_var(base) {
            Some(v) if members_of(&v.type_desc).iter().any(|m| m == member) => vec![VariablePath {
                base: base.into(),
                member: Some(member.into()),
                key_shape: key_shape(&v.type_desc),
            }],
            _ => Vec::new(),
        };
    }
    if let Some(v) = c.state_var(name) {
        return vec![VariablePath { base: name.into(), member: None, key_shape: key_shape(&v.type_desc) }];
    }
    c.state_vars
        .iter()
        .filter(|v| members_of(&v.type_desc).iter().any(|m| m == name))
        .map(|v| VariablePath { base: v.name.clone(), member: Some(name.into()), key_shape: key_shape(&v.type_desc) })
        .collect()
}

impl StakingModel {
    pub fn funcs(&self, role: FuncRole) -> &[RoleFunction] {
        match role {
            FuncRole::Stake => &self.stake_funcs,
            FuncRole::GetReward => &self.getreward_funcs,
            FuncRole::UnStake => &self.unstake_funcs,
        }
    }

    pub fn role_of(&self, decl: AstId) -> Option<FuncRole> {
        FuncRole::ALL.into_iter().find(|r| self.funcs(*r).iter().any(|f| f.decl == decl))
    }

    pub fn is_reward(&self, p: &VariablePath) -> bool {
        self.rewards.iter().any(|r| r.same_slot(p))
    }

    pub fn is_amount(&self, p: &VariablePath) -> bool {
        self.amounts.iter().any(|r| r.same_slot(p))
    }

    /// StakeTime holds for time-role paths and for the block clock.
    pub fn is_stake_time(&self, n: &CdgNode) -> bool {
        match n {
            CdgNode::StateVar { path } => self.stake_times.iter().any(|r| r.same_slot(path)),
            CdgNode::Timestamp { .. } => true,
            _ => false,
        }
    }

    pub fn is_unstake(&self, decl: AstId) -> bool {
        self.unstake_funcs.iter().any(|f| f.decl == decl)
    }

    pub fn cal_depend(&self, cdg: &Cdg, a: usize, b: usize) -> bool {
        cdg.reaches(a, b)
    }

    pub fn depends_on_balance(&self, cdg: &Cdg) -> bool {
        cdg.depends_on_balance
    }

    /// Transfers made by role functions of `role`, own body or tagged locators.
    pub fn role_transfers(&self, role: FuncRole) -> impl Iterator<Item = (&TransferModel, AstId)> {
        self.transfers
            .iter()
            .flat_map(move |t| t.roles.iter().filter(move |(r, _)| *r == role).map(move |(_, d)| (t, *d)))
    }
}

/// Full model: paths from `info` and a CDG for every transfer in the contract.
pub fn build_model<'g>(s: &Summaries<'g, '_>, defs: &DefIndex<'g>, info: &StakingInfo, max_depth: usize) -> StakingModel {
    let g = s.g;
    let mut m = resolve_paths(info, g.unit, g.contract);
    let time_paths: Vec<VariablePath> = m.stake_times.iter().cloned().collect();
    let mut seen = BTreeSet::new();
    for f in g.contract.functions.iter().filter(|f| f.body.is_some()) {
        for site in transfers_in(g, f.decl_id) {
            if !seen.insert((site.function, site.stmt, site.call)) {
                continue;
            }
            let locator = TransferLocator { function: g.name(site.function), stmt: site.stmt, line: site.loc.line };
            let mut roles = Vec::new();
            for role in FuncRole::ALL {
                for rf in m.funcs(role) {
                    if rf.transfers.iter().any(|l| l.stmt == site.stmt) {
                        roles.push((role, rf.decl));
                    }
                }
            }
            let cdg = build_cdg(s, defs, &site, &time_paths, max_depth);
            m.transfers.push(TransferModel { locator, site, roles, cdg });
        }
    }
    m
}
