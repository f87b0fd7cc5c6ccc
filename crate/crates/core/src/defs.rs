//! Flow-insensitive definition index: which expressions assign each state
//! path, local and internal-function parameter.

use std::collections::HashMap;

use crate::callgraph::{resolve_call, CallTarget};
use crate::cfg::NodeId;
use crate::defuse::{key_shape, VariablePath};
use crate::graphs::ContractGraphs;
use crate::ir::*;

#[derive(Debug, Clone)]
pub struct StateDef<'g> {
    pub path: VariablePath,
    pub func: AstId,
    pub node: NodeId,
    pub value: &'g Expr,
    pub loc: Loc,
}

#[derive(Debug, Clone)]
pub struct LocalDef<'g> {
    pub func: AstId,
    pub node: NodeId,
    pub value: &'g Expr,
}

#[derive(Debug, Clone)]
pub struct CallSite<'g> {
    pub caller: AstId,
    pub node: NodeId,
    pub call: &'g Expr,
    /// Bound receiver first for `using for` calls.
    pub args: Vec<&'g Expr>,
}

#[derive(Debug, Default)]
pub struct DefIndex<'g> {
    pub state: Vec<StateDef<'g>>,
    pub locals: HashMap<(AstId, AstId), Vec<LocalDef<'g>>>,
    pub returns: HashMap<AstId, Vec<&'g Expr>>,
    pub call_sites: HashMap<AstId, Vec<CallSite<'g>>>,
}

impl<'g> DefIndex<'g> {
    /// Definitions of a state path. A write to the whole record defines its members,
    /// and a member write defines the bare record.
    pub fn state_defs<'s>(&'s self, p: &'s VariablePath) -> impl Iterator<Item = &'s StateDef<'g>> + 's {
        self.state.iter().filter(move |d| {
            d.path.base == p.base && (d.path.member.is_none() || p.member.is_none() || d.path.member == p.member)
        })
    }

    pub fn local_defs(&self, func: AstId, decl: AstId) -> &[LocalDef<'g>] {
        self.locals.get(&(func, decl)).map(|v| v.as_slice()).unwrap_or(&[])
    }
}

fn struct_members<'u>(unit: &'u SourceUnit, t: &TypeDesc) -> Option<&'u [(String, TypeDesc)]> {
    match t.innermost() {
        TypeDesc::Struct { decl, name } => {
            unit.structs.get(decl).or_else(|| unit.struct_by_name(name)).map(|s| s.members.as_slice())
        }
        _ => None,
    }
}

pub fn index_defs<'g>(g: &'g ContractGraphs) -> DefIndex<'g> {
    let mut idx = DefIndex::default();
    for (decl, fg) in g.fns.iter().chain(g.lib_fns.iter()) {
        let scope = &fg.scope;
        let in_contract = g.fns.contains_key(decl);
        for (node, n) in fg.cfg.nodes.iter().enumerate() {
            let s = &n.stmt;
            let assign = |lhs: &'g Expr, rhs: &'g Expr, idx: &mut DefIndex<'g>| {
                let pairs: Vec<(&'g Expr, &'g Expr)> = match (&lhs.kind, &rhs.kind) {
                    (ExprKind::Tuple { items: l }, ExprKind::Tuple { items: r }) if l.len() == r.len() => l
                        .iter()
                        .zip(r)
                        .filter_map(|(a, b)| Some((a.as_ref()?, b.as_ref()?)))
                        .collect(),
                    (ExprKind::Tuple { items }, _) => items.iter().flatten().map(|a| (a, rhs)).collect(),
                    _ => vec![(lhs, rhs)],
                };
                for (l, r) in pairs {
                    if let ExprKind::Ident { binding: Binding::Local { decl: d }, .. } = &l.kind {
                        if !scope.aliases.contains_key(d) {
                            idx.locals.entry((*decl, *d)).or_default().push(LocalDef { func: *decl, node, value: r });
                            continue;
                        }
                    }
                    if in_contract {
                        if let Some(a) = scope.resolve_access(l) {
                            if !a.unknown {
                                idx.state.push(StateDef { path: a.path, func: *decl, node, value: r, loc: s.loc.clone() });
                            }
                        }
                    }
                }
            };
            match &s.kind {
                StmtKind::Assign { lhs, rhs, .. } => assign(lhs, rhs, &mut idx),
                StmtKind::Declare { vars, init: Some(init) } => {
                    let items: Vec<Option<&'g Expr>> = match &init.kind {
                        ExprKind::Tuple { items } if items.len() == vars.len() => items.iter().map(|i| i.as_ref()).collect(),
                        _ => vec![Some(init); vars.len()],
                    };
                    for (v, e) in vars.iter().zip(items) {
                        if let (Some(v), Some(e)) = (v, e) {
                            if v.storage != "storage" {
                                idx.locals.entry((*decl, v.decl)).or_default().push(LocalDef { func: *decl, node, value: e });
                            }
                        }
                    }
                }
                StmtKind::Return { value: Some(v) } => idx.returns.entry(*decl).or_default().push(v),
                _ => {}
            }
            for e in s.exprs() {
                e.walk(&mut |x| match &x.kind {
                    ExprKind::Assign { lhs, rhs, .. } => assign(lhs, rhs, &mut idx),
                    ExprKind::Call { callee, args, kind: CallKind::Call, .. } => {
                        if let ExprKind::Member { base, member, .. } = &callee.kind {
                            if member == "push" && in_contract {
                                push_defs(g, scope, *decl, node, &s.loc, base, args, &mut idx);
                            }
                        }
                        if let CallTarget::Internal { func, bound, .. } = resolve_call(g.unit, scope.contract, callee) {
                            let args = bound.into_iter().chain(args.iter()).collect();
                            idx.call_sites
                                .entry(func.decl_id)
                                .or_default()
                                .push(CallSite { caller: *decl, node, call: x, args });
                        }
                    }
                    _ => {}
                });
            }
        }
    }
    idx
}

#[allow(clippy::too_many_arguments)]
fn push_defs<'g>(
    g: &'g ContractGraphs,
    scope: &crate::defuse::Scope,
    func: AstId,
    node: NodeId,
    loc: &Loc,
    base: &'g Expr,
    args: &'g [Expr],
    idx: &mut DefIndex<'g>,
) {
    let Some(acc) = scope.resolve_access(base) else { return };
    if acc.unknown {
        return;
    }
    let [arg] = args else { return };
    if let ExprKind::Call { kind: CallKind::StructConstructor, args: fields, names, .. } = &arg.kind {
        if let Some(members) = scope.state_type(&acc.path.base).and_then(|t| struct_members(g.unit, t)) {
            let shape = scope.state_type(&acc.path.base).map(key_shape).unwrap_or(acc.path.key_shape);
            for (i, f) in fields.iter().enumerate() {
                let member = match names.get(i) {
                    Some(n) if !n.is_empty() => n.clone(),
                    _ => match members.get(i) {
                        Some((m, _)) => m.clone(),
                        None => continue,
                    },
                };
                let path = VariablePath { base: acc.path.base.clone(), member: Some(member), key_shape: shape };
                idx.state.push(StateDef { path, func, node, value: f, loc: loc.clone() });
            }
            return;
        }
    }
    idx.state.push(StateDef { path: acc.path, func, node, value: arg, loc: loc.clone() });
}
