//! Call resolution and the per-contract call graph.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::Serialize;

use crate::ir::*;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CallEdgeKind {
    Internal,
    External { target: Option<String> },
    LowLevel,
}

#[derive(Debug, Clone, Serialize)]
pub struct CallEdge {
    pub caller: AstId,
    /// Resolved callee for internal calls.
    pub callee: Option<AstId>,
    pub callee_name: String,
    pub kind: CallEdgeKind,
    pub loc: Loc,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct CallGraph {
    pub contract: String,
    pub functions: BTreeMap<AstId, String>,
    pub edges: Vec<CallEdge>,
    pub ext_reachable: BTreeSet<AstId>,
}

impl CallGraph {
    pub fn is_reachable(&self, f: AstId) -> bool {
        self.ext_reachable.contains(&f)
    }

    pub fn callers_of(&self, f: AstId) -> impl Iterator<Item = AstId> + '_ {
        self.edges
            .iter()
            .filter(move |e| e.kind == CallEdgeKind::Internal && e.callee == Some(f))
            .map(|e| e.caller)
    }

    pub fn callees_of(&self, f: AstId) -> impl Iterator<Item = AstId> + '_ {
        self.edges
            .iter()
            .filter(move |e| e.kind == CallEdgeKind::Internal && e.caller == f)
            .filter_map(|e| e.callee)
    }

    pub fn to_dot(&self) -> String {
        let mut out = format!("digraph \"{}\" {{\n", self.contract);
        for (id, name) in &self.functions {
            let style = if self.ext_reachable.contains(id) { "bold" } else { "dashed" };
            out.push_str(&format!("  f{} [label=\"{}\", style={}];\n", id.unsigned_abs(), name, style));
        }
        for e in &self.edges {
            match (&e.kind, e.callee) {
                (CallEdgeKind::Internal, Some(c)) if self.functions.contains_key(&c) => {
                    out.push_str(&format!("  f{} -> f{};\n", e.caller.unsigned_abs(), c.unsigned_abs()));
                }
                _ => {}
            }
        }
        out.push_str("}\n");
        out
    }
}

/// What a call expression invokes.
#[derive(Debug, Clone)]
pub enum CallTarget<'a> {
    /// Function with a body in this unit. `bound` is the receiver of a `using for` call.
    Internal { func: &'a FunctionIR, owner: &'a ContractIR, bound: Option<&'a Expr> },
    External { receiver: &'a Expr, target: Option<String>, name: String },
    LowLevel { receiver: &'a Expr, name: String },
    Other,
}

/// `contract IERC20` / `contract IERC20[]` / `address` style type strings to a contract name.
pub fn contract_type_name(ty: &str) -> Option<String> {
    let t = ty.strip_prefix("contract ").or_else(|| ty.strip_prefix("interface "))?;
    let t = t.split_whitespace().next()?;
    if t.ends_with(']') {
        return None;
    }
    Some(t.to_string())
}

fn override_of<'a>(contract: &'a ContractIR, f: &'a FunctionIR) -> &'a FunctionIR {
    let sig = f.signature();
    contract.functions.iter().find(|g| g.signature() == sig).unwrap_or(f)
}

pub fn resolve_call<'a>(unit: &'a SourceUnit, contract: &'a ContractIR, callee: &'a Expr) -> CallTarget<'a> {
    let lookup = |decl: AstId| -> Option<(&'a ContractIR, &'a FunctionIR)> {
        if let Some(f) = contract.functions.iter().find(|f| f.decl_id == decl) {
            return Some((contract, f));
        }
        unit.function_by_decl(decl)
    };
    match &callee.kind {
        ExprKind::Ident { binding: Binding::Function { decl }, name } => match lookup(*decl) {
            Some((owner, f)) if owner.kind == ContractKind::Library => CallTarget::Internal { func: f, owner, bound: None },
            Some((_, f)) => CallTarget::Internal { func: override_of(contract, f), owner: contract, bound: None },
            None => match contract.function(name) {
                Some(f) => CallTarget::Internal { func: f, owner: contract, bound: None },
                None => CallTarget::Other,
            },
        },
        ExprKind::Member { base, member, member_decl } => {
            if let Some(SpecialRef::This) = base.special() {
                return match contract.function(member) {
                    Some(f) => CallTarget::Internal { func: f, owner: contract, bound: None },
                    None => CallTarget::Other,
                };
            }
            if let ExprKind::Ident { name, binding } = &base.kind {
                if name == "super" || matches!(binding, Binding::Contract { .. }) {
                    return match member_decl.and_then(lookup) {
                        Some((owner, f)) if owner.kind == ContractKind::Library => {
                            CallTarget::Internal { func: f, owner, bound: None }
                        }
                        Some((_, f)) => CallTarget::Internal { func: f, owner: contract, bound: None },
                        None => CallTarget::Other,
                    };
                }
            }
            if let Some((owner, f)) = member_decl.and_then(lookup) {
                if owner.kind == ContractKind::Library {
                    return CallTarget::Internal { func: f, owner, bound: Some(base) };
                }
            }
            if base.ty.starts_with("address") {
                return match member.as_str() {
                    "call" | "delegatecall" | "staticcall" => CallTarget::LowLevel { receiver: base, name: member.clone() },
                    _ => CallTarget::Other,
                };
            }
            if base.ty.starts_with("contract ") || base.ty.starts_with("interface ") {
                return CallTarget::External { receiver: base, target: contract_type_name(&base.ty), name: member.clone() };
            }
            CallTarget::Other
        }
        _ => CallTarget::Other,
    }
}

/// Calls made by a statement list, in source order.
pub fn calls_in(stmts: &[Stmt]) -> Vec<&Expr> {
    let mut out = Vec::new();
    for s in stmts {
        s.walk(&mut |s| {
            for e in s.exprs() {
                e.walk(&mut |x| {
                    if let ExprKind::Call { kind: CallKind::Call, .. } = x.kind {
                        out.push(x);
                    }
                });
            }
        });
    }
    out
}

/// `bodies` holds each function's body with modifiers inlined, keyed by declaration id.
pub fn build_callgraph(unit: &SourceUnit, contract: &ContractIR, bodies: &BTreeMap<AstId, Vec<Stmt>>) -> CallGraph {
    let mut g = CallGraph { contract: contract.name.clone(), ..Default::default() };
    for f in &contract.functions {
        g.functions.insert(f.decl_id, f.display_name());
    }
    for f in &contract.functions {
        let Some(body) = bodies.get(&f.decl_id) else { continue };
        for call in calls_in(body) {
            let ExprKind::Call { callee, .. } = &call.kind else { continue };
            let (kind, target, name) = match resolve_call(unit, contract, callee) {
                CallTarget::Internal { func, .. } => (CallEdgeKind::Internal, Some(func.decl_id), func.name.clone()),
                CallTarget::External { target, name, .. } => (CallEdgeKind::External { target }, None, name),
                CallTarget::LowLevel { name, .. } => (CallEdgeKind::LowLevel, None, name),
                CallTarget::Other => continue,
            };
            g.edges.push(CallEdge { caller: f.decl_id, callee: target, callee_name: name, kind, loc: call.loc.clone() });
        }
    }
    let mut queue: VecDeque<AstId> = contract.functions.iter().filter(|f| f.is_entry()).map(|f| f.decl_id).collect();
    g.ext_reachable.extend(queue.iter().copied());
    while let Some(f) = queue.pop_front() {
        let next: Vec<AstId> = g.callees_of(f).collect();
        for c in next {
            if g.functions.contains_key(&c) && g.ext_reachable.insert(c) {
                queue.push_back(c);
            }
        }
    }
    g
}
