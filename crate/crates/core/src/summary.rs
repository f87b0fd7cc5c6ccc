//! Transitive per-function summaries: writes, reads, guards and transfers,
//! with callee parameters replaced by call-site arguments.

use std::cell::RefCell;
use std::collections::{BTreeSet, HashMap};
use std::rc::Rc;

use serde::Serialize;

use crate::callgraph::{resolve_call, CallTarget};
use crate::cfg::{GuardOrigin, NodeId};
use crate::defuse::{AddrClass, Scope, Var, VariablePath};
use crate::graphs::ContractGraphs;
use crate::ir::*;
use crate::transfer::{helper_functions, transfers_in, Direction, TransferSite};

pub const MAX_DEPTH: usize = 16;

/// Where a written value comes from: a numeric parameter or `msg.value`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Src {
    Param(usize),
    Env,
}

#[derive(Debug, Clone, Serialize)]
pub struct SWrite {
    pub path: VariablePath,
    pub key: Option<AddrClass>,
    pub loc: Loc,
    pub func: AstId,
    #[serde(skip)]
    pub node: NodeId,
    pub srcs: BTreeSet<Src>,
    pub unknown: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SRead {
    pub path: VariablePath,
    pub key: Option<AddrClass>,
    pub loc: Loc,
    pub func: AstId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GuardKind {
    Require,
    Modifier,
    If,
    Loop,
    /// Checked subtraction that reverts on underflow.
    Arith,
    /// Applied modifier whose body is not available, named like an access check.
    RoleModifier,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PermKind {
    Equality,
    Role,
    Allowance,
    Origin,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Perm {
    pub who: AddrClass,
    pub kind: PermKind,
}

#[derive(Debug, Clone, Serialize)]
pub struct SGuard {
    pub kind: GuardKind,
    pub reads: Vec<(VariablePath, Option<AddrClass>)>,
    /// Variables of the summarized function read by the condition (direct guards only).
    #[serde(skip)]
    pub vars: Vec<Var>,
    #[serde(skip)]
    pub params: BTreeSet<usize>,
    pub perms: Vec<Perm>,
    pub loc: Loc,
    pub func: AstId,
    #[serde(skip)]
    pub node: NodeId,
    pub text: String,
    pub direct: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SSite {
    pub site: TransferSite,
    pub from: AddrClass,
    pub to: AddrClass,
    pub dir: Direction,
    /// Internal calls leading from the summarized function to the site.
    pub via: Vec<AstId>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Summary {
    pub writes: Vec<SWrite>,
    pub reads: Vec<SRead>,
    pub guards: Vec<SGuard>,
    pub sites: Vec<SSite>,
    pub low_level: bool,
    pub unanalyzed: bool,
    pub depth_exceeded: bool,
    pub callees: BTreeSet<AstId>,
}

impl Summary {
    pub fn writes_slot(&self, p: &VariablePath) -> bool {
        self.writes.iter().any(|w| w.path.same_slot(p) || (w.path.base == p.base && w.path.member.is_none()))
    }

    pub fn guard_reads_slot(&self, p: &VariablePath) -> bool {
        self.guards.iter().any(|g| g.reads.iter().any(|(r, _)| r.same_slot(p)))
    }

    pub fn perms(&self) -> impl Iterator<Item = &Perm> {
        self.guards.iter().flat_map(|g| g.perms.iter())
    }
}

pub struct Summaries<'g, 'a> {
    pub g: &'g ContractGraphs<'a>,
    pub helpers: BTreeSet<AstId>,
    checked: bool,
    memo: RefCell<HashMap<AstId, Rc<Summary>>>,
    stack: RefCell<Vec<AstId>>,
}

fn allowance_like(name: &str) -> bool {
    let n = name.to_ascii_lowercase();
    ["allowance", "allowed", "approv", "delegat", "operator"].iter().any(|w| n.contains(w))
}

fn is_numeric(t: &TypeDesc) -> bool {
    t.is_uint() || t.is_bool()
}

/// Parameter indices of `f` read anywhere in `e`.
fn params_read(f: &FunctionIR, e: &Expr) -> BTreeSet<usize> {
    let mut out = BTreeSet::new();
    e.walk(&mut |x| {
        if let ExprKind::Ident { binding: Binding::Param { decl }, .. } = &x.kind {
            if let Some(i) = f.param_index(*decl) {
                out.insert(i);
            }
        }
    });
    out
}

/// State read by the initializers of locals a guard tests.
fn init_reads(scope: &Scope, vars: &[Var], depth: usize, out: &mut Vec<(VariablePath, Option<AddrClass>)>) {
    if depth > 4 {
        return;
    }
    for v in vars {
        let Var::Local { decl, .. } = v else { continue };
        let Some(init) = scope.init_of(*decl) else { continue };
        let (mut reads, mut writes) = (Vec::new(), Vec::new());
        scope.accesses(init, &mut reads, &mut writes);
        for r in reads.into_iter().filter(|r| !r.unknown) {
            let key = r.key.as_ref().map(|k| scope.classify(k));
            if !out.iter().any(|(p, k)| *p == r.path && *k == key) {
                out.push((r.path, key));
            }
        }
        let mut inner = Vec::new();
        scope.used_vars(init, &mut inner);
        init_reads(scope, &inner, depth + 1, out);
    }
}

/// Access-control facts established by a guard condition.
pub fn perms_of(cond: &Expr, scope: &Scope) -> Vec<Perm> {
    let mut out = Vec::new();
    cond.walk(&mut |x| match &x.kind {
        ExprKind::Binary { op, lhs, rhs } if op == "==" || op == "!=" => {
            let (cl, cr) = (scope.classify(lhs), scope.classify(rhs));
            for (a, b) in [(&cl, &cr), (&cr, &cl)] {
                if *a == AddrClass::Caller && *b != AddrClass::Caller {
                    out.push(Perm { who: b.clone(), kind: PermKind::Equality });
                } else if *a == AddrClass::Origin && *b != AddrClass::Origin {
                    out.push(Perm { who: b.clone(), kind: PermKind::Origin });
                }
            }
        }
        ExprKind::Index { base, index: Some(k2) } => {
            if let ExprKind::Index { base: inner, index: Some(k1) } = &base.kind {
                if let ExprKind::Ident { binding: Binding::State { name }, .. } = &inner.kind {
                    if allowance_like(name) && scope.classify(k2) == AddrClass::Caller {
                        out.push(Perm { who: scope.classify(k1), kind: PermKind::Allowance });
                    }
                }
            }
        }
        ExprKind::Call { callee, args, .. } => {
            let Some(name) = callee.callee_name() else { return };
            let lower = name.to_ascii_lowercase();
            let caller_arg = args.iter().any(|a| scope.classify(a) == AddrClass::Caller);
            if !caller_arg {
                return;
            }
            if (lower.contains("approvedforall") || lower == "allowance") && args.len() >= 2 {
                out.push(Perm { who: scope.classify(&args[0]), kind: PermKind::Allowance });
            } else if ["role", "owner", "admin", "authorized", "whitelist", "operator", "governance", "minter"]
                .iter()
                .any(|w| lower.contains(w))
            {
                out.push(Perm { who: AddrClass::StateRef(name.to_string()), kind: PermKind::Role });
            }
        }
        _ => {}
    });
    out.sort();
    out.dedup();
    out
}

impl<'g, 'a> Summaries<'g, 'a> {
    pub fn new(g: &'g ContractGraphs<'a>) -> Self {
        Summaries {
            g,
            helpers: helper_functions(g),
            checked: g.unit.pragma.contains("0.8"),
            memo: RefCell::new(HashMap::new()),
            stack: RefCell::new(Vec::new()),
        }
    }

    pub fn get(&self, decl: AstId) -> Rc<Summary> {
        if let Some(s) = self.memo.borrow().get(&decl) {
            return s.clone();
        }
        let depth = self.stack.borrow().len();
        self.stack.borrow_mut().push(decl);
        let s = Rc::new(self.compute(decl, depth));
        self.stack.borrow_mut().pop();
        self.memo.borrow_mut().insert(decl, s.clone());
        s
    }

    /// Value sources of every local, iterated to a fixpoint.
    fn local_srcs(&self, scope: &Scope, body: &[Stmt]) -> HashMap<AstId, BTreeSet<Src>> {
        let mut defs: Vec<(AstId, &Expr)> = Vec::new();
        for s in body {
            s.walk(&mut |s| match &s.kind {
                StmtKind::Declare { vars, init: Some(i) } => {
                    for v in vars.iter().flatten() {
                        defs.push((v.decl, i));
                    }
                }
                StmtKind::Assign { lhs, rhs, .. } => {
                    if let ExprKind::Ident { binding: Binding::Local { decl }, .. } = &lhs.kind {
                        defs.push((*decl, rhs));
                    }
                }
                _ => {}
            });
        }
        let mut map: HashMap<AstId, BTreeSet<Src>> = HashMap::new();
        for _ in 0..8 {
            let mut changed = false;
            for (d, e) in &defs {
                let mut s = BTreeSet::new();
                self.srcs(scope, &map, e, &mut s);
                let entry = map.entry(*d).or_default();
                let before = entry.len();
                entry.extend(s);
                changed |= entry.len() != before;
            }
            if !changed {
                break;
            }
        }
        map
    }

    fn srcs(&self, scope: &Scope, locals: &HashMap<AstId, BTreeSet<Src>>, e: &Expr, out: &mut BTreeSet<Src>) {
        match &e.kind {
            ExprKind::Ident { binding: Binding::Param { decl }, .. } => {
                if let Some(i) = scope.function.param_index(*decl) {
                    if is_numeric(&scope.function.params[i].type_desc) {
                        out.insert(Src::Param(i));
                    }
                }
            }
            ExprKind::Ident { binding: Binding::Local { decl }, .. } => {
                if let Some(s) = locals.get(decl) {
                    out.extend(s.iter().copied());
                }
            }
            ExprKind::Special { special: SpecialRef::MsgValue } => {
                out.insert(Src::Env);
            }
            ExprKind::Index { base, .. } => self.srcs(scope, locals, base, out),
            _ => {
                for c in e.children() {
                    self.srcs(scope, locals, c, out);
                }
            }
        }
    }

    fn compute(&self, decl: AstId, depth: usize) -> Summary {
        let mut sum = Summary::default();
        let Some(fg) = self.g.graphs(decl) else { return sum };
        let scope = &fg.scope;
        let func = fg.func;
        let locals = self.local_srcs(scope, &fg.body);

        for (node_id, node) in fg.cfg.nodes.iter().enumerate() {
            let stmt = &node.stmt;
            if matches!(stmt.kind, StmtKind::Unanalyzed { .. }) {
                sum.unanalyzed = true;
            }
            let mut value_srcs = BTreeSet::new();
            match &stmt.kind {
                StmtKind::Assign { rhs, .. } => self.srcs(scope, &locals, rhs, &mut value_srcs),
                _ => {
                    for e in stmt.exprs() {
                        self.srcs(scope, &locals, e, &mut value_srcs);
                    }
                }
            }
            for w in fg.defuse.state_writes.iter().filter(|w| w.node == node_id) {
                sum.writes.push(SWrite {
                    path: w.path.clone(),
                    key: w.key.clone(),
                    loc: w.loc.clone(),
                    func: decl,
                    node: node_id,
                    srcs: value_srcs.clone(),
                    unknown: w.unknown,
                });
            }
            if self.checked && !self.g.unit.unchecked.contains(&stmt.id) {
                self.arith_guards(scope, stmt, decl, node_id, &mut sum);
            }
            for e in stmt.exprs() {
                let mut calls = Vec::new();
                e.walk(&mut |x| {
                    if matches!(x.kind, ExprKind::Call { kind: CallKind::Call, .. }) {
                        calls.push(x);
                    }
                });
                for call in calls {
                    self.merge_call(scope, &locals, call, decl, depth, &mut sum);
                }
            }
        }
        for r in &fg.defuse.state_reads {
            sum.reads.push(SRead { path: r.path.clone(), key: r.key.clone(), loc: r.loc.clone(), func: decl });
        }
        for g in &fg.cfg.guards {
            let kind = match g.origin {
                GuardOrigin::Require => GuardKind::Require,
                GuardOrigin::Modifier => GuardKind::Modifier,
                GuardOrigin::If => GuardKind::If,
                GuardOrigin::Loop => GuardKind::Loop,
            };
            let mut vars = Vec::new();
            scope.used_vars(&g.cond, &mut vars);
            let mut reads: Vec<_> = fg.defuse.reads_at(g.node).map(|r| (r.path.clone(), r.key.clone())).collect();
            init_reads(scope, &vars, 0, &mut reads);
            sum.guards.push(SGuard {
                kind,
                reads,
                vars,
                params: params_read(func, &g.cond),
                perms: perms_of(&g.cond, scope),
                loc: g.loc.clone(),
                func: decl,
                node: g.node,
                text: g.cond.render(),
                direct: true,
            });
        }
        for m in &func.modifiers_applied {
            let known = fg.owner.modifiers.iter().any(|x| Some(x.decl_id) == m.decl || x.name == m.name);
            if !known && m.name.starts_with("only") {
                sum.guards.push(SGuard {
                    kind: GuardKind::RoleModifier,
                    reads: vec![],
                    vars: vec![],
                    params: BTreeSet::new(),
                    perms: vec![Perm { who: AddrClass::StateRef(m.name.clone()), kind: PermKind::Role }],
                    loc: m.loc.clone(),
                    func: decl,
                    node: 0,
                    text: m.name.clone(),
                    direct: true,
                });
            }
        }
        if !self.helpers.contains(&decl) || depth == 0 {
            for site in transfers_in(self.g, decl) {
                let from = site.from.as_ref().map(|e| scope.classify(e)).unwrap_or(AddrClass::This);
                let to = site.to.as_ref().map(|e| scope.classify(e)).unwrap_or(AddrClass::This);
                let dir = site.direction(scope);
                sum.sites.push(SSite { site, from, to, dir, via: vec![] });
            }
        }
        sum
    }

    fn arith_guards(&self, scope: &Scope, stmt: &Stmt, decl: AstId, node: NodeId, sum: &mut Summary) {
        let mut targets: Vec<&Expr> = Vec::new();
        if let StmtKind::Assign { lhs, op, .. } = &stmt.kind {
            if op == "-=" {
                targets.push(lhs);
            }
        }
        for e in stmt.exprs() {
            e.walk(&mut |x| match &x.kind {
                ExprKind::Binary { op, lhs, .. } if op == "-" => targets.push(lhs),
                ExprKind::Assign { op, lhs, .. } if op == "-=" => targets.push(lhs),
                _ => {}
            });
        }
        for t in targets {
            let Some(acc) = scope.resolve_access(t) else { continue };
            if acc.unknown {
                continue;
            }
            let mut perms = Vec::new();
            if let ExprKind::Index { base, index: Some(k2) } = &t.kind {
                if let ExprKind::Index { base: inner, index: Some(k1) } = &base.kind {
                    if let ExprKind::Ident { binding: Binding::State { name }, .. } = &inner.kind {
                        if allowance_like(name) && scope.classify(k2) == AddrClass::Caller {
                            perms.push(Perm { who: scope.classify(k1), kind: PermKind::Allowance });
                        }
                    }
                }
            }
            sum.guards.push(SGuard {
                kind: GuardKind::Arith,
                reads: vec![(acc.path.clone(), acc.key.as_ref().map(|k| scope.classify(k)))],
                vars: vec![],
                params: BTreeSet::new(),
                perms,
                loc: stmt.loc.clone(),
                func: decl,
                node,
                text: format!("{} - ..", t.render()),
                direct: true,
            });
        }
    }

    fn merge_call(
        &self,
        scope: &Scope,
        locals: &HashMap<AstId, BTreeSet<Src>>,
        call: &Expr,
        decl: AstId,
        depth: usize,
        sum: &mut Summary,
    ) {
        let ExprKind::Call { callee, args, .. } = &call.kind else { return };
        let (func, bound) = match resolve_call(self.g.unit, scope.contract, callee) {
            CallTarget::Internal { func, bound, .. } => (func, bound),
            CallTarget::LowLevel { .. } => {
                sum.low_level = true;
                return;
            }
            _ => return,
        };
        let target = func.decl_id;
        if target == decl || self.g.graphs(target).is_none() || self.stack.borrow().contains(&target) {
            return;
        }
        if depth + 1 >= MAX_DEPTH {
            sum.depth_exceeded = true;
            return;
        }
        let cs = self.get(target);
        sum.callees.insert(target);
        sum.callees.extend(cs.callees.iter().copied());
        let actual: Vec<&Expr> = bound.into_iter().chain(args.iter()).collect();
        let classes: HashMap<&str, AddrClass> = func
            .params
            .iter()
            .zip(actual.iter())
            .map(|(p, a)| (p.name.as_str(), scope.classify(a)))
            .collect();
        let subst = |c: &AddrClass| match c {
            AddrClass::Param(n) => classes.get(n.as_str()).cloned().unwrap_or_else(|| c.clone()),
            other => other.clone(),
        };
        let subst_srcs = |s: &BTreeSet<Src>| {
            let mut out = BTreeSet::new();
            for x in s {
                match x {
                    Src::Param(i) => {
                        if let Some(a) = actual.get(*i) {
                            self.srcs(scope, locals, a, &mut out);
                        }
                    }
                    Src::Env => {
                        out.insert(Src::Env);
                    }
                }
            }
            out
        };
        for w in &cs.writes {
            sum.writes.push(SWrite { key: w.key.as_ref().map(subst), srcs: subst_srcs(&w.srcs), ..w.clone() });
        }
        for r in &cs.reads {
            sum.reads.push(SRead { key: r.key.as_ref().map(subst), ..r.clone() });
        }
        for gd in &cs.guards {
            let mut reads: Vec<_> = gd.reads.iter().map(|(p, k)| (p.clone(), k.as_ref().map(subst))).collect();
            let mut params = BTreeSet::new();
            for i in &gd.params {
                if let Some(a) = actual.get(*i) {
                    let (mut rs, mut ws) = (Vec::new(), Vec::new());
                    scope.accesses(a, &mut rs, &mut ws);
                    reads.extend(rs.into_iter().filter(|r| !r.unknown).map(|r| {
                        let k = r.key.as_ref().map(|k| scope.classify(k));
                        (r.path, k)
                    }));
                    params.extend(params_read(scope.function, a));
                }
            }
            let perms = gd.perms.iter().map(|p| Perm { who: subst(&p.who), kind: p.kind }).collect();
            sum.guards.push(SGuard { reads, params, perms, vars: vec![], direct: false, ..gd.clone() });
        }
        if !self.helpers.contains(&target) {
            for s in &cs.sites {
                let mut via = vec![target];
                via.extend(s.via.iter().copied());
                sum.sites.push(SSite { site: s.site.clone(), from: subst(&s.from), to: subst(&s.to), dir: s.dir, via });
            }
        }
        sum.low_level |= cs.low_level;
        sum.unanalyzed |= cs.unanalyzed;
        sum.depth_exceeded |= cs.depth_exceeded;
    }
}
