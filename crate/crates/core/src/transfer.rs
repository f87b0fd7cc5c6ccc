//! Recognition of token-moving calls.

use serde::Serialize;

use crate::callgraph::{resolve_call, CallTarget};
use crate::cfg::NodeId;
use crate::defuse::{AddrClass, Scope};
use crate::graphs::ContractGraphs;
use crate::ir::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferKind {
    Transfer,
    TransferFrom,
    SafeTransfer,
    SafeTransferFrom,
    Mint,
    Burn,
    NativeTransfer,
    NativeSend,
    NativeCall,
    /// Call to an internal function that performs the transfer with its arguments.
    Helper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    In,
    Out,
    /// Between two accounts other than the contract.
    Between,
    Mint,
    Burn,
}

#[derive(Debug, Clone, Serialize)]
pub struct TransferSite {
    /// Function whose body holds the statement.
    pub function: AstId,
    #[serde(skip)]
    pub node: NodeId,
    pub stmt: AstId,
    pub call: AstId,
    pub loc: Loc,
    pub kind: TransferKind,
    pub callee: String,
    #[serde(skip)]
    pub token: Option<Expr>,
    #[serde(skip)]
    pub from: Option<Expr>,
    #[serde(skip)]
    pub to: Option<Expr>,
    #[serde(skip)]
    pub amount: Expr,
    pub native: bool,
    pub helper: Option<AstId>,
}

impl TransferSite {
    pub fn direction(&self, scope: &Scope) -> Direction {
        match self.kind {
            TransferKind::Mint => return Direction::Mint,
            TransferKind::Burn => return Direction::Burn,
            _ => {}
        }
        let from = self.from.as_ref().map(|e| scope.classify(e)).unwrap_or(AddrClass::This);
        let to = self.to.as_ref().map(|e| scope.classify(e)).unwrap_or(AddrClass::This);
        match (from == AddrClass::This, to == AddrClass::This) {
            (_, true) => Direction::In,
            (true, false) => Direction::Out,
            (false, false) => Direction::Between,
        }
    }

    /// Name of the token contract expression, when one is known.
    pub fn token_name(&self) -> Option<String> {
        self.token.as_ref().map(|t| t.strip_conversions().render())
    }
}

/// Raw shape of a recognized call before it is tied to a statement.
#[derive(Debug, Clone)]
pub struct Recognized {
    pub kind: TransferKind,
    pub callee: String,
    pub token: Option<Expr>,
    pub from: Option<Expr>,
    pub to: Option<Expr>,
    pub amount: Expr,
    pub native: bool,
    pub helper: Option<AstId>,
}

fn is_amount_like(e: &Expr) -> bool {
    e.ty.starts_with("uint") || e.ty.starts_with("int") || e.ty.starts_with("rational") || e.is_literal()
}

fn this_expr(at: &Expr) -> Expr {
    Expr { id: at.id, loc: at.loc.clone(), ty: "address".into(), kind: ExprKind::Special { special: SpecialRef::AddressThis } }
}

/// Recognizes `call` as a token transfer, mint, burn or native send.
pub fn recognize(unit: &SourceUnit, contract: &ContractIR, call: &Expr) -> Option<Recognized> {
    recognize_depth(unit, contract, call, 0)
}

fn recognize_depth(unit: &SourceUnit, contract: &ContractIR, call: &Expr, depth: usize) -> Option<Recognized> {
    let ExprKind::Call { callee, args, options, kind: CallKind::Call, .. } = &call.kind else { return None };
    let name = callee.callee_name()?.to_string();
    let rec = |kind, token: Option<&Expr>, from: Option<&Expr>, to: Option<&Expr>, amount: &Expr, native| Recognized {
        kind,
        callee: name.clone(),
        token: token.cloned(),
        from: from.cloned(),
        to: to.cloned(),
        amount: amount.clone(),
        native,
        helper: None,
    };
    let target = resolve_call(unit, contract, callee);
    match &target {
        CallTarget::LowLevel { receiver, name: n } if n == "call" => {
            let value = options.iter().find(|(k, _)| k == "value")?;
            return Some(rec(TransferKind::NativeCall, None, None, Some(receiver), &value.1, true));
        }
        CallTarget::LowLevel { .. } => return None,
        _ => {}
    }
    if let ExprKind::Member { base, member, .. } = &callee.kind {
        if base.ty.starts_with("address") && !matches!(target, CallTarget::Internal { .. }) {
            return match (member.as_str(), args.as_slice()) {
                ("transfer", [amt]) => Some(rec(TransferKind::NativeTransfer, None, None, Some(base), amt, true)),
                ("send", [amt]) => Some(rec(TransferKind::NativeSend, None, None, Some(base), amt, true)),
                _ => None,
            };
        }
    }
    let (receiver, internal) = match &target {
        CallTarget::External { receiver, .. } => (Some(*receiver), None),
        CallTarget::Internal { bound: Some(b), .. } => (Some(*b), None),
        CallTarget::Internal { func, owner, bound: None } => (None, Some((*func, *owner))),
        _ => return None,
    };
    if let Some(token) = receiver {
        let lower = name.to_ascii_lowercase();
        return match (lower.as_str(), args.as_slice()) {
            ("transfer", [to, amt]) => Some(rec(TransferKind::Transfer, Some(token), None, Some(to), amt, false)),
            ("transferfrom", [from, to, amt]) => {
                Some(rec(TransferKind::TransferFrom, Some(token), Some(from), Some(to), amt, false))
            }
            ("safetransfer", [to, amt]) => Some(rec(TransferKind::SafeTransfer, Some(token), None, Some(to), amt, false)),
            ("safetransferfrom", [from, to, amt]) if is_amount_like(amt) => {
                Some(rec(TransferKind::SafeTransferFrom, Some(token), Some(from), Some(to), amt, false))
            }
            ("mint", [to, amt]) => Some(rec(TransferKind::Mint, Some(token), None, Some(to), amt, false)),
            ("burn", [from, amt]) => Some(rec(TransferKind::Burn, Some(token), Some(from), None, amt, false)),
            ("burn", [amt]) => Some(rec(TransferKind::Burn, Some(token), None, None, amt, false)),
            _ => None,
        };
    }
    // Unbound library form: SafeERC20.safeTransfer(token, to, amount).
    let (func, owner) = internal?;
    if owner.kind == ContractKind::Library {
        let lower = name.to_ascii_lowercase();
        return match (lower.as_str(), args.as_slice()) {
            ("safetransfer", [token, to, amt]) => {
                Some(rec(TransferKind::SafeTransfer, Some(token), None, Some(to), amt, false))
            }
            ("safetransferfrom", [token, from, to, amt]) => {
                Some(rec(TransferKind::SafeTransferFrom, Some(token), Some(from), Some(to), amt, false))
            }
            _ => None,
        };
    }
    helper_call(unit, contract, func, &name, args, call, depth)
}

/// An internal function counts as a transfer helper when one of its transfers moves
/// an amount taken directly from its parameters; mint/burn-named helpers always do.
fn helper_call(
    unit: &SourceUnit,
    contract: &ContractIR,
    func: &FunctionIR,
    name: &str,
    args: &[Expr],
    call: &Expr,
    depth: usize,
) -> Option<Recognized> {
    if func.is_entry() || depth > 4 || args.len() < 2 || !is_amount_like(args.last()?) {
        return None;
    }
    let arg_for = |e: &Expr| -> Option<Expr> {
        match &e.strip_conversions().kind {
            ExprKind::Ident { binding: Binding::Param { decl }, .. } => func.param_index(*decl).and_then(|i| args.get(i).cloned()),
            _ => None,
        }
    };
    let mut best: Option<(usize, Recognized)> = None;
    if let Some(body) = &func.body {
        for inner in crate::callgraph::calls_in(body) {
            let Some(r) = recognize_depth(unit, contract, inner, depth + 1) else { continue };
            let Some(amount) = arg_for(&r.amount) else { continue };
            let from = r.from.as_ref().and_then(arg_for);
            let to = r.to.as_ref().and_then(arg_for);
            let score = 1 + from.is_some() as usize + to.is_some() as usize;
            if best.as_ref().is_some_and(|(s, _)| *s >= score) {
                continue;
            }
            let from = from.or_else(|| match r.kind {
                TransferKind::Transfer | TransferKind::SafeTransfer | TransferKind::NativeTransfer
                | TransferKind::NativeSend | TransferKind::NativeCall => Some(this_expr(call)),
                _ => r.from.clone(),
            });
            let rec = Recognized {
                kind: TransferKind::Helper,
                callee: name.to_string(),
                token: r.token.clone(),
                from,
                to: to.or(r.to.clone()),
                amount,
                native: r.native,
                helper: Some(func.decl_id),
            };
            best = Some((score, rec));
        }
    }
    if let Some((_, r)) = best {
        return Some(r);
    }
    let kind = is_mint_burn(name)?;
    let (who, amt) = (&args[0], args.last()?);
    Some(Recognized {
        kind,
        callee: name.to_string(),
        token: None,
        from: (kind == TransferKind::Burn).then(|| who.clone()),
        to: (kind == TransferKind::Mint).then(|| who.clone()),
        amount: amt.clone(),
        native: false,
        helper: Some(func.decl_id),
    })
}

fn is_mint_burn(name: &str) -> Option<TransferKind> {
    let n = name.trim_start_matches('_').to_ascii_lowercase();
    if n == "mint" || n == "safemint" {
        Some(TransferKind::Mint)
    } else if n == "burn" {
        Some(TransferKind::Burn)
    } else {
        None
    }
}

/// Transfer sites in one function body, in CFG node order.
pub fn transfers_in(g: &ContractGraphs, decl: AstId) -> Vec<TransferSite> {
    let Some(fg) = g.graphs(decl) else { return Vec::new() };
    let mut out = Vec::new();
    for (id, node) in fg.cfg.nodes.iter().enumerate() {
        let s = &node.stmt;
        for e in s.exprs() {
            let mut calls = Vec::new();
            e.walk(&mut |x| {
                if matches!(x.kind, ExprKind::Call { kind: CallKind::Call, .. }) {
                    calls.push(x);
                }
            });
            for call in calls {
                if let Some(r) = recognize(g.unit, g.contract, call) {
                    out.push(TransferSite {
                        function: decl,
                        node: id,
                        stmt: s.id,
                        call: call.id,
                        loc: s.loc.clone(),
                        kind: r.kind,
                        callee: r.callee,
                        token: r.token,
                        from: r.from,
                        to: r.to,
                        amount: r.amount,
                        native: r.native,
                        helper: r.helper,
                    });
                }
            }
        }
    }
    out
}

/// Internal functions invoked as transfer helpers anywhere in the contract.
pub fn helper_functions(g: &ContractGraphs) -> std::collections::BTreeSet<AstId> {
    g.fns.keys().flat_map(|d| transfers_in(g, *d)).filter_map(|t| t.helper).collect()
}
