//! Per-function control-flow graphs with modifier inlining and guard nodes.

use std::collections::{BTreeSet, HashMap, VecDeque};

use serde::Serialize;

use crate::ir::*;

pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Fallthrough,
    True,
    False,
    LoopBack,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GuardOrigin {
    Require,
    Modifier,
    If,
    Loop,
}

/// One executed statement. Compound statements appear as their condition only;
/// nested bodies become their own nodes.
#[derive(Debug, Clone)]
pub struct CfgNode {
    pub stmt: Stmt,
}

#[derive(Debug, Clone)]
pub struct BasicBlock {
    pub nodes: Vec<NodeId>,
}

#[derive(Debug, Clone)]
pub struct GuardNode {
    pub node: NodeId,
    pub cond: Expr,
    pub origin: GuardOrigin,
    /// Statements control dependent on this guard.
    pub dominated: BTreeSet<NodeId>,
    pub loc: Loc,
}

#[derive(Debug, Clone)]
pub struct Cfg {
    pub function: String,
    pub nodes: Vec<CfgNode>,
    pub blocks: Vec<BasicBlock>,
    pub edges: Vec<(usize, usize, EdgeKind)>,
    pub entry: usize,
    pub exit: usize,
    pub guards: Vec<GuardNode>,
    /// Blocks not reachable from entry.
    pub dead: BTreeSet<usize>,
    pub block_of: Vec<usize>,
}

impl Cfg {
    pub fn node(&self, id: NodeId) -> &Stmt {
        &self.nodes[id].stmt
    }

    /// Guards whose dominated set contains `node`.
    pub fn guards_over(&self, node: NodeId) -> impl Iterator<Item = &GuardNode> {
        self.guards.iter().filter(move |g| g.dominated.contains(&node))
    }

    pub fn reachable_blocks(&self, skip: Option<(usize, usize, EdgeKind)>) -> BTreeSet<usize> {
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::from([self.entry]);
        seen.insert(self.entry);
        while let Some(b) = queue.pop_front() {
            for &e in &self.edges {
                if e.0 != b || Some(e) == skip {
                    continue;
                }
                if seen.insert(e.1) {
                    queue.push_back(e.1);
                }
            }
        }
        seen
    }

    pub fn reachable_nodes(&self, skip: Option<(usize, usize, EdgeKind)>) -> BTreeSet<NodeId> {
        let blocks = self.reachable_blocks(skip);
        blocks.iter().flat_map(|b| self.blocks[*b].nodes.iter().copied()).collect()
    }

    /// Node ids whose statement carries the given AST id.
    pub fn nodes_for(&self, ast: AstId) -> Vec<NodeId> {
        (0..self.nodes.len()).filter(|i| self.nodes[*i].stmt.id == ast).collect()
    }

    pub fn to_dot(&self) -> String {
        let mut out = format!("digraph \"{}\" {{\n  node [shape=box, fontname=monospace];\n", self.function);
        for (i, b) in self.blocks.iter().enumerate() {
            let mut label = if i == self.entry {
                "ENTRY\\l".to_string()
            } else if i == self.exit {
                "EXIT\\l".to_string()
            } else {
                String::new()
            };
            for n in &b.nodes {
                let s = &self.nodes[*n].stmt;
                label.push_str(&format!("{}: {}\\l", s.loc.line, escape(&stmt_label(s))));
            }
            let style = if self.dead.contains(&i) { ", style=dashed" } else { "" };
            out.push_str(&format!("  b{} [label=\"{}\"{}];\n", i, label, style));
        }
        for (a, b, k) in &self.edges {
            let label = match k {
                EdgeKind::Fallthrough => "",
                EdgeKind::True => "true",
                EdgeKind::False => "false",
                EdgeKind::LoopBack => "back",
            };
            out.push_str(&format!("  b{} -> b{} [label=\"{}\"];\n", a, b, label));
        }
        out.push_str("}\n");
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// One-line rendering of a CFG node.
pub fn stmt_label(s: &Stmt) -> String {
    match &s.kind {
        StmtKind::Assign { lhs, op, rhs } => {
            if op == "delete" {
                format!("delete {}", lhs.render())
            } else {
                format!("{} {} {}", lhs.render(), op, rhs.render())
            }
        }
        StmtKind::Declare { vars, init } => {
            let names: Vec<String> = vars.iter().map(|v| v.as_ref().map(|v| v.name.clone()).unwrap_or_default()).collect();
            match init {
                Some(i) => format!("{} = {}", names.join(", "), i.render()),
                None => names.join(", "),
            }
        }
        StmtKind::Require { cond, .. } => format!("require({})", cond.render()),
        StmtKind::Revert => "revert".into(),
        StmtKind::If { cond, .. } => format!("if ({})", cond.render()),
        StmtKind::Loop { cond, .. } => format!("loop ({})", cond.as_ref().map(Expr::render).unwrap_or_default()),
        StmtKind::Return { value } => format!("return {}", value.as_ref().map(Expr::render).unwrap_or_default()),
        StmtKind::Emit { event } => format!("emit {}", event.render()),
        StmtKind::Expr { expr } => expr.render(),
        StmtKind::Break => "break".into(),
        StmtKind::Continue => "continue".into(),
        StmtKind::Placeholder => "_".into(),
        StmtKind::Unanalyzed { what } => format!("<unanalyzed {}>", what),
        StmtKind::Block { .. } => "{..}".into(),
    }
}

/// Rewrites an expression bottom-up; `f` may replace any node.
pub fn map_expr(e: &Expr, f: &dyn Fn(&Expr) -> Option<Expr>) -> Expr {
    if let Some(r) = f(e) {
        return r;
    }
    let b = |x: &Expr| Box::new(map_expr(x, f));
    let kind = match &e.kind {
        ExprKind::Member { base, member, member_decl } => {
            ExprKind::Member { base: b(base), member: member.clone(), member_decl: *member_decl }
        }
        ExprKind::Index { base, index } => ExprKind::Index { base: b(base), index: index.as_ref().map(|i| b(i)) },
        ExprKind::Binary { op, lhs, rhs } => ExprKind::Binary { op: op.clone(), lhs: b(lhs), rhs: b(rhs) },
        ExprKind::Unary { op, prefix, operand } => ExprKind::Unary { op: op.clone(), prefix: *prefix, operand: b(operand) },
        ExprKind::Call { callee, args, names, kind, options } => ExprKind::Call {
            callee: b(callee),
            args: args.iter().map(|a| map_expr(a, f)).collect(),
            names: names.clone(),
            kind: *kind,
            options: options.iter().map(|(k, v)| (k.clone(), map_expr(v, f))).collect(),
        },
        ExprKind::Conditional { cond, then, otherwise } => {
            ExprKind::Conditional { cond: b(cond), then: b(then), otherwise: b(otherwise) }
        }
        ExprKind::Tuple { items } => {
            ExprKind::Tuple { items: items.iter().map(|i| i.as_ref().map(|x| map_expr(x, f))).collect() }
        }
        ExprKind::Assign { op, lhs, rhs } => ExprKind::Assign { op: op.clone(), lhs: b(lhs), rhs: b(rhs) },
        other => other.clone(),
    };
    Expr { id: e.id, loc: e.loc.clone(), ty: e.ty.clone(), kind }
}

fn map_stmt(s: &Stmt, f: &dyn Fn(&Expr) -> Option<Expr>) -> Stmt {
    let m = |e: &Expr| map_expr(e, f);
    let ms = |v: &[Stmt]| v.iter().map(|s| map_stmt(s, f)).collect::<Vec<_>>();
    let kind = match &s.kind {
        StmtKind::Assign { lhs, op, rhs } => StmtKind::Assign { lhs: m(lhs), op: op.clone(), rhs: m(rhs) },
        StmtKind::Declare { vars, init } => StmtKind::Declare { vars: vars.clone(), init: init.as_ref().map(m) },
        StmtKind::Require { cond, check } => StmtKind::Require { cond: m(cond), check: *check },
        StmtKind::If { cond, then_branch, else_branch } => {
            StmtKind::If { cond: m(cond), then_branch: ms(then_branch), else_branch: ms(else_branch) }
        }
        StmtKind::Loop { kind, init, cond, update, body } => StmtKind::Loop {
            kind: *kind,
            init: init.as_ref().map(|i| Box::new(map_stmt(i, f))),
            cond: cond.as_ref().map(m),
            update: update.as_ref().map(|u| Box::new(map_stmt(u, f))),
            body: ms(body),
        },
        StmtKind::Return { value } => StmtKind::Return { value: value.as_ref().map(m) },
        StmtKind::Emit { event } => StmtKind::Emit { event: m(event) },
        StmtKind::Expr { expr } => StmtKind::Expr { expr: m(expr) },
        StmtKind::Block { body } => StmtKind::Block { body: ms(body) },
        other => other.clone(),
    };
    Stmt { id: s.id, loc: s.loc.clone(), kind, origin: s.origin.clone() }
}

fn tag_origin(stmts: &mut [Stmt], origin: &str) {
    for s in stmts {
        if s.origin.is_none() {
            s.origin = Some(origin.to_string());
        }
        match &mut s.kind {
            StmtKind::If { then_branch, else_branch, .. } => {
                tag_origin(then_branch, origin);
                tag_origin(else_branch, origin);
            }
            StmtKind::Loop { init, update, body, .. } => {
                if let Some(i) = init {
                    tag_origin(std::slice::from_mut(i), origin);
                }
                if let Some(u) = update {
                    tag_origin(std::slice::from_mut(u), origin);
                }
                tag_origin(body, origin);
            }
            _ => {}
        }
    }
}

fn replace_placeholder(stmts: &[Stmt], inner: &[Stmt]) -> Vec<Stmt> {
    stmts
        .iter()
        .map(|s| {
            let mut s = s.clone();
            s.kind = match s.kind {
                StmtKind::Placeholder => StmtKind::Block { body: inner.to_vec() },
                StmtKind::If { cond, then_branch, else_branch } => StmtKind::If {
                    cond,
                    then_branch: replace_placeholder(&then_branch, inner),
                    else_branch: replace_placeholder(&else_branch, inner),
                },
                StmtKind::Loop { kind, init, cond, update, body } => {
                    StmtKind::Loop { kind, init, cond, update, body: replace_placeholder(&body, inner) }
                }
                other => other,
            };
            s
        })
        .collect()
}

/// The function body with applied modifiers expanded around it, first modifier outermost.
/// Modifier parameters are replaced by the invocation arguments.
pub fn inline_modifiers(f: &FunctionIR, c: &ContractIR, notes: &mut Vec<String>) -> Vec<Stmt> {
    let mut body = f.body.clone().unwrap_or_default();
    for call in f.modifiers_applied.iter().rev() {
        let m = call
            .decl
            .and_then(|d| c.modifiers.iter().find(|m| m.decl_id == d))
            .or_else(|| c.modifier(&call.name));
        let Some(m) = m else {
            notes.push(format!("{}.{}: modifier `{}` not found", c.name, f.name, call.name));
            continue;
        };
        let subst: HashMap<AstId, Expr> =
            m.params.iter().zip(call.args.iter()).map(|(p, a)| (p.decl, a.clone())).collect();
        let mut mbody: Vec<Stmt> = if subst.is_empty() {
            m.body.clone()
        } else {
            m.body
                .iter()
                .map(|s| {
                    map_stmt(s, &|e| match &e.kind {
                        ExprKind::Ident { binding: Binding::Param { decl }, .. } => subst.get(decl).cloned(),
                        _ => None,
                    })
                })
                .collect()
        };
        tag_origin(&mut mbody, &m.name);
        body = replace_placeholder(&mbody, &body);
    }
    body
}

struct Builder {
    nodes: Vec<CfgNode>,
    blocks: Vec<Vec<NodeId>>,
    edges: Vec<(usize, usize, EdgeKind)>,
    exit: usize,
    loops: Vec<(usize, usize)>,
    conds: Vec<(NodeId, Expr, GuardOrigin)>,
}

impl Builder {
    fn block(&mut self) -> usize {
        self.blocks.push(Vec::new());
        self.blocks.len() - 1
    }

    fn push(&mut self, b: usize, s: &Stmt) -> NodeId {
        let mut stmt = s.clone();
        stmt.kind = match &s.kind {
            StmtKind::If { cond, .. } => StmtKind::If { cond: cond.clone(), then_branch: vec![], else_branch: vec![] },
            StmtKind::Loop { kind, cond, .. } => {
                StmtKind::Loop { kind: *kind, init: None, cond: cond.clone(), update: None, body: vec![] }
            }
            other => other.clone(),
        };
        self.nodes.push(CfgNode { stmt });
        let id = self.nodes.len() - 1;
        self.blocks[b].push(id);
        id
    }

    fn origin(s: &Stmt, base: GuardOrigin) -> GuardOrigin {
        if s.origin.is_some() {
            GuardOrigin::Modifier
        } else {
            base
        }
    }

    fn open(&mut self, cur: Option<usize>) -> usize {
        match cur {
            Some(b) => b,
            None => self.block(),
        }
    }

    fn seq(&mut self, stmts: &[Stmt], mut cur: Option<usize>) -> Option<usize> {
        for s in stmts {
            cur = self.stmt(s, cur);
        }
        cur
    }

    fn stmt(&mut self, s: &Stmt, cur: Option<usize>) -> Option<usize> {
        match &s.kind {
            StmtKind::Block { body } => self.seq(body, cur),
            StmtKind::Require { cond, .. } => {
                let b = self.open(cur);
                let n = self.push(b, s);
                self.conds.push((n, cond.clone(), Self::origin(s, GuardOrigin::Require)));
                let next = self.block();
                self.edges.push((b, next, EdgeKind::True));
                self.edges.push((b, self.exit, EdgeKind::False));
                Some(next)
            }
            StmtKind::Revert | StmtKind::Return { .. } => {
                let b = self.open(cur);
                self.push(b, s);
                self.edges.push((b, self.exit, EdgeKind::Fallthrough));
                None
            }
            StmtKind::Break | StmtKind::Continue => {
                let b = self.open(cur);
                self.push(b, s);
                if let Some(&(cont, brk)) = self.loops.last() {
                    if matches!(s.kind, StmtKind::Break) {
                        self.edges.push((b, brk, EdgeKind::Fallthrough));
                    } else {
                        self.edges.push((b, cont, EdgeKind::LoopBack));
                    }
                }
                None
            }
            StmtKind::If { cond, then_branch, else_branch } => {
                let b = self.open(cur);
                let n = self.push(b, s);
                self.conds.push((n, cond.clone(), Self::origin(s, GuardOrigin::If)));
                let tb = self.block();
                self.edges.push((b, tb, EdgeKind::True));
                let t_end = self.seq(then_branch, Some(tb));
                let join = self.block();
                if else_branch.is_empty() {
                    self.edges.push((b, join, EdgeKind::False));
                } else {
                    let eb = self.block();
                    self.edges.push((b, eb, EdgeKind::False));
                    if let Some(e_end) = self.seq(else_branch, Some(eb)) {
                        self.edges.push((e_end, join, EdgeKind::Fallthrough));
                    }
                }
                if let Some(t) = t_end {
                    self.edges.push((t, join, EdgeKind::Fallthrough));
                }
                Some(join)
            }
            StmtKind::Loop { init, cond, update, body, .. } => {
                let mut b = self.open(cur);
                if let Some(i) = init {
                    b = self.stmt(i, Some(b)).unwrap_or(b);
                }
                let header = self.block();
                self.edges.push((b, header, EdgeKind::Fallthrough));
                let n = self.push(header, s);
                if let Some(c) = cond {
                    self.conds.push((n, c.clone(), Self::origin(s, GuardOrigin::Loop)));
                }
                let body_b = self.block();
                let after = self.block();
                self.edges.push((header, body_b, EdgeKind::True));
                self.edges.push((header, after, EdgeKind::False));
                let cont = match update {
                    Some(u) => {
                        let ub = self.block();
                        let end = self.stmt(u, Some(ub)).unwrap_or(ub);
                        self.edges.push((end, header, EdgeKind::LoopBack));
                        ub
                    }
                    None => header,
                };
                self.loops.push((cont, after));
                let end = self.seq(body, Some(body_b));
                self.loops.pop();
                if let Some(e) = end {
                    let kind = if cont == header { EdgeKind::LoopBack } else { EdgeKind::Fallthrough };
                    self.edges.push((e, cont, kind));
                }
                Some(after)
            }
            _ => {
                let b = self.open(cur);
                self.push(b, s);
                Some(b)
            }
        }
    }
}

/// Builds the CFG of an already inlined body.
pub fn build_cfg_from(name: &str, body: &[Stmt]) -> Cfg {
    let mut b = Builder { nodes: vec![], blocks: vec![], edges: vec![], exit: 0, loops: vec![], conds: vec![] };
    let entry = b.block();
    b.exit = b.block();
    if let Some(end) = b.seq(body, Some(entry)) {
        b.edges.push((end, b.exit, EdgeKind::Fallthrough));
    }
    let exit = b.exit;
    let (blocks, edges, entry, exit) = prune(b.blocks, b.edges, entry, exit);

    let mut block_of = vec![0; b.nodes.len()];
    for (i, blk) in blocks.iter().enumerate() {
        for n in blk {
            block_of[*n] = i;
        }
    }
    let mut cfg = Cfg {
        function: name.to_string(),
        nodes: b.nodes,
        blocks: blocks.into_iter().map(|nodes| BasicBlock { nodes }).collect(),
        edges,
        entry,
        exit,
        guards: vec![],
        dead: BTreeSet::new(),
        block_of,
    };
    let all_blocks = cfg.reachable_blocks(None);
    cfg.dead = (0..cfg.blocks.len()).filter(|i| !all_blocks.contains(i)).collect();
    let all = cfg.reachable_nodes(None);
    for (node, cond, origin) in b.conds {
        let blk = cfg.block_of[node];
        let mut dominated = BTreeSet::new();
        let outs: Vec<_> = cfg
            .edges
            .iter()
            .copied()
            .filter(|e| e.0 == blk && matches!(e.2, EdgeKind::True | EdgeKind::False))
            .collect();
        for e in outs {
            let without = cfg.reachable_nodes(Some(e));
            dominated.extend(all.difference(&without).copied());
        }
        let loc = cfg.nodes[node].stmt.loc.clone();
        cfg.guards.push(GuardNode { node, cond, origin, dominated, loc });
    }
    cfg
}

/// Removes empty pass-through blocks and renumbers the rest.
fn prune(
    mut blocks: Vec<Vec<NodeId>>,
    mut edges: Vec<(usize, usize, EdgeKind)>,
    entry: usize,
    exit: usize,
) -> (Vec<Vec<NodeId>>, Vec<(usize, usize, EdgeKind)>, usize, usize) {
    let mut removed = vec![false; blocks.len()];
    loop {
        let mut changed = false;
        for b in 0..blocks.len() {
            if removed[b] || b == entry || b == exit || !blocks[b].is_empty() {
                continue;
            }
            let outs: Vec<_> = edges.iter().copied().filter(|e| e.0 == b).collect();
            let has_in = edges.iter().any(|e| e.1 == b);
            if outs.len() > 1 {
                continue;
            }
            if outs.len() == 1 && outs[0].1 == b {
                continue;
            }
            let succ = outs.first().map(|e| (e.1, e.2));
            if has_in && succ.is_none() {
                continue;
            }
            let mut next = Vec::with_capacity(edges.len());
            for e in edges.iter().copied() {
                if e.0 == b {
                    continue;
                }
                if e.1 == b {
                    if let Some((s, k)) = succ {
                        let kind = if k == EdgeKind::LoopBack { EdgeKind::LoopBack } else { e.2 };
                        next.push((e.0, s, kind));
                    }
                    continue;
                }
                next.push(e);
            }
            edges = next;
            removed[b] = true;
            changed = true;
        }
        if !changed {
            break;
        }
    }
    let mut map = vec![usize::MAX; blocks.len()];
    let mut out = Vec::new();
    for (i, blk) in blocks.iter_mut().enumerate() {
        if !removed[i] {
            map[i] = out.len();
            out.push(std::mem::take(blk));
        }
    }
    let mut new_edges: Vec<(usize, usize, EdgeKind)> = Vec::new();
    for (a, b, k) in edges {
        let e = (map[a], map[b], k);
        if !new_edges.contains(&e) {
            new_edges.push(e);
        }
    }
    (out, new_edges, map[entry], map[exit])
}

pub fn build_cfg(f: &FunctionIR, c: &ContractIR) -> Cfg {
    let mut notes = Vec::new();
    let body = inline_modifiers(f, c, &mut notes);
    build_cfg_from(&f.display_name(), &body)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn loc() -> Loc {
        Loc::unknown(&Arc::from("t.sol"))
    }

    fn ident(name: &str) -> Expr {
        Expr { id: -1, loc: loc(), ty: "uint256".into(), kind: ExprKind::Ident { name: name.into(), binding: Binding::Unresolved } }
    }

    fn lit(v: &str) -> Expr {
        Expr { id: -1, loc: loc(), ty: String::new(), kind: ExprKind::Literal { value: v.into() } }
    }

    fn st(id: AstId, kind: StmtKind) -> Stmt {
        Stmt { id, loc: loc(), kind, origin: None }
    }

    fn assign(id: AstId, var: &str, v: &str) -> Stmt {
        st(id, StmtKind::Assign { lhs: ident(var), op: "=".into(), rhs: lit(v) })
    }

    #[test]
    fn empty_body_is_entry_to_exit() {
        let cfg = build_cfg_from("f", &[]);
        assert_eq!(cfg.blocks.len(), 2);
        assert_eq!(cfg.edges, vec![(cfg.entry, cfg.exit, EdgeKind::Fallthrough)]);
        assert!(cfg.guards.is_empty());
    }

    #[test]
    fn if_else_is_a_diamond() {
        let body = vec![st(
            1,
            StmtKind::If { cond: ident("c"), then_branch: vec![assign(2, "a", "1")], else_branch: vec![assign(3, "a", "2")] },
        )];
        let cfg = build_cfg_from("f", &body);
        assert_eq!(cfg.blocks.len(), 4);
        assert_eq!(cfg.guards.len(), 1);
        let g = &cfg.guards[0];
        let then_n = cfg.nodes_for(2)[0];
        let else_n = cfg.nodes_for(3)[0];
        assert_eq!(g.dominated, BTreeSet::from([then_n, else_n]));
        assert_eq!(g.origin, GuardOrigin::If);
    }

    #[test]
    fn require_dominates_the_rest() {
        let body = vec![
            assign(1, "a", "1"),
            st(2, StmtKind::Require { cond: ident("ok"), check: CheckKind::Require }),
            assign(3, "b", "1"),
            assign(4, "c", "1"),
        ];
        let cfg = build_cfg_from("f", &body);
        let g = &cfg.guards[0];
        let expect: BTreeSet<_> = [3, 4].iter().map(|i| cfg.nodes_for(*i)[0]).collect();
        assert_eq!(g.dominated, expect);
    }

    #[test]
    fn statements_after_return_are_dead() {
        let body = vec![st(1, StmtKind::Return { value: None }), assign(2, "a", "1")];
        let cfg = build_cfg_from("f", &body);
        assert_eq!(cfg.dead.len(), 1);
    }

    #[test]
    fn loop_guards_its_body() {
        let body = vec![st(
            1,
            StmtKind::Loop {
                kind: LoopKind::While,
                init: None,
                cond: Some(ident("c")),
                update: None,
                body: vec![assign(2, "a", "1")],
            },
        )];
        let cfg = build_cfg_from("f", &body);
        assert_eq!(cfg.guards[0].origin, GuardOrigin::Loop);
        assert!(cfg.guards[0].dominated.contains(&cfg.nodes_for(2)[0]));
        assert!(cfg.edges.iter().any(|e| e.2 == EdgeKind::LoopBack));
    }
}
