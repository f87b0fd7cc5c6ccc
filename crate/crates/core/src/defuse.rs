//! Def-use facts, resolved state paths and address classification.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::cfg::{Cfg, NodeId};
use crate::ir::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyShape {
    None,
    AddressKeyed,
    IdKeyed,
}

/// A state variable, or a member of the struct stored in it.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VariablePath {
    pub base: String,
    pub member: Option<String>,
    pub key_shape: KeyShape,
}

impl VariablePath {
    pub fn plain(base: &str) -> Self {
        VariablePath { base: base.to_string(), member: None, key_shape: KeyShape::None }
    }

    /// Same base and member, ignoring the key shape.
    pub fn same_slot(&self, other: &VariablePath) -> bool {
        self.base == other.base && self.member == other.member
    }

    pub fn is_keyed(&self) -> bool {
        self.key_shape != KeyShape::None
    }
}

impl fmt::Display for VariablePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.base)?;
        if self.is_keyed() {
            f.write_str("[*]")?;
        }
        if let Some(m) = &self.member {
            write!(f, ".{}", m)?;
        }
        Ok(())
    }
}

/// Syntactic class of an address-valued expression.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "class", content = "name", rename_all = "snake_case")]
pub enum AddrClass {
    Caller,
    /// `tx.origin`; treated like the caller with an advisory.
    Origin,
    Param(String),
    Constant(String),
    StateRef(String),
    This,
    Unknown(String),
}

impl fmt::Display for AddrClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AddrClass::Caller => f.write_str("caller"),
            AddrClass::Origin => f.write_str("tx.origin"),
            AddrClass::Param(p) => write!(f, "param {}", p),
            AddrClass::Constant(c) => write!(f, "constant {}", c),
            AddrClass::StateRef(s) => write!(f, "state {}", s),
            AddrClass::This => f.write_str("this"),
            AddrClass::Unknown(u) => write!(f, "unknown {}", u),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Var {
    State { name: String },
    Local { decl: AstId, name: String },
    Param { decl: AstId, name: String },
}

impl Var {
    pub fn name(&self) -> &str {
        match self {
            Var::State { name } | Var::Local { name, .. } | Var::Param { name, .. } => name,
        }
    }
}

/// A resolved read or write of contract storage.
#[derive(Debug, Clone, PartialEq)]
pub struct Access {
    pub path: VariablePath,
    pub key: Option<Expr>,
    /// The path could not be traced through a storage pointer.
    pub unknown: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct StateAccess {
    pub path: VariablePath,
    pub key: Option<AddrClass>,
    pub node: NodeId,
    pub loc: Loc,
    pub unknown: bool,
}

#[derive(Debug, Clone, Default)]
pub struct DefUse {
    pub defs: BTreeSet<(Var, NodeId)>,
    pub uses: BTreeSet<(Var, NodeId)>,
    pub state_reads: Vec<StateAccess>,
    pub state_writes: Vec<StateAccess>,
    pub diagnostics: Vec<String>,
}

impl DefUse {
    pub fn read_paths(&self) -> BTreeSet<VariablePath> {
        self.state_reads.iter().map(|a| a.path.clone()).collect()
    }

    pub fn write_paths(&self) -> BTreeSet<VariablePath> {
        self.state_writes.iter().map(|a| a.path.clone()).collect()
    }

    pub fn reads_at(&self, node: NodeId) -> impl Iterator<Item = &StateAccess> {
        self.state_reads.iter().filter(move |a| a.node == node)
    }
}

#[derive(Debug, Clone)]
pub struct Alias {
    pub access: Option<Access>,
}

/// Name resolution for one function body: storage aliases and address classes of locals.
pub struct Scope<'a> {
    pub unit: &'a SourceUnit,
    pub contract: &'a ContractIR,
    pub function: &'a FunctionIR,
    pub aliases: HashMap<AstId, Alias>,
    local_inits: HashMap<AstId, Expr>,
    pub diagnostics: Vec<String>,
}

pub fn key_shape(t: &TypeDesc) -> KeyShape {
    match t {
        TypeDesc::Mapping { key, .. } if key.is_address() => KeyShape::AddressKeyed,
        TypeDesc::Mapping { .. } | TypeDesc::Array { .. } => KeyShape::IdKeyed,
        _ => KeyShape::None,
    }
}

/// Names of helpers that return `msg.sender`.
pub fn is_sender_helper(unit: &SourceUnit, contract: &ContractIR, callee: &Expr) -> bool {
    let name = match &callee.kind {
        ExprKind::Ident { name, .. } => name.as_str(),
        _ => return false,
    };
    if matches!(name, "_msgSender" | "msgSender") {
        return true;
    }
    let decl = match &callee.kind {
        ExprKind::Ident { binding: Binding::Function { decl }, .. } => *decl,
        _ => return false,
    };
    let f = contract
        .functions
        .iter()
        .find(|f| f.decl_id == decl)
        .or_else(|| unit.function_by_decl(decl).map(|(_, f)| f));
    match f.and_then(|f| f.body.as_deref()) {
        Some([s]) => matches!(&s.kind, StmtKind::Return { value: Some(v) } if v.special() == Some(SpecialRef::MsgSender)),
        _ => false,
    }
}

impl<'a> Scope<'a> {
    pub fn new(unit: &'a SourceUnit, contract: &'a ContractIR, function: &'a FunctionIR, body: &[Stmt]) -> Self {
        let mut scope = Scope {
            unit,
            contract,
            function,
            aliases: HashMap::new(),
            local_inits: HashMap::new(),
            diagnostics: Vec::new(),
        };
        for p in &function.params {
            if p.storage == "storage" {
                scope.aliases.insert(p.decl, Alias { access: None });
            }
        }
        let mut pending: Vec<(AstId, String, Option<Expr>)> = Vec::new();
        let mut storage_locals = HashSet::new();
        for s in body {
            s.walk(&mut |s| match &s.kind {
                StmtKind::Declare { vars, init } => {
                    if let [Some(v)] = vars.as_slice() {
                        if v.storage == "storage" {
                            storage_locals.insert(v.decl);
                            pending.push((v.decl, v.name.clone(), init.clone()));
                        } else if let Some(i) = init {
                            scope.local_inits.insert(v.decl, i.clone());
                        }
                    } else {
                        for v in vars.iter().flatten() {
                            if v.storage == "storage" {
                                storage_locals.insert(v.decl);
                                pending.push((v.decl, v.name.clone(), None));
                            }
                        }
                    }
                }
                StmtKind::Assign { lhs, op, rhs } if op == "=" => {
                    if let ExprKind::Ident { binding: Binding::Local { decl }, name } = &lhs.kind {
                        pending.push((*decl, name.clone(), Some(rhs.clone())));
                    }
                }
                _ => {}
            });
        }
        for (decl, name, init) in pending {
            if !storage_locals.contains(&decl) {
                continue;
            }
            let access = match &init {
                Some(e) if Self::is_alias_ref(e, &storage_locals) => {
                    scope.diagnostics.push(format!(
                        "{}.{}: storage pointer `{}` aliases another pointer; path unknown",
                        contract.name, function.display_name(), name
                    ));
                    None
                }
                Some(e) => scope.resolve_access(e),
                None => None,
            };
            if access.is_none() && init.is_some() && !scope.diagnostics.iter().any(|d| d.contains(&format!("`{}`", name))) {
                scope.diagnostics.push(format!(
                    "{}.{}: storage pointer `{}` has an untraceable base; path unknown",
                    contract.name, function.display_name(), name
                ));
            }
            let entry = scope.aliases.entry(decl).or_insert(Alias { access: None });
            if entry.access.is_none() {
                entry.access = access;
            }
        }
        scope
    }

    fn is_alias_ref(e: &Expr, storage_locals: &HashSet<AstId>) -> bool {
        let mut root = e;
        loop {
            match &root.kind {
                ExprKind::Index { base, .. } | ExprKind::Member { base, .. } => root = base,
                ExprKind::Ident { binding: Binding::Local { decl }, .. } => return storage_locals.contains(decl),
                _ => return false,
            }
        }
    }

    pub fn state_type(&self, name: &str) -> Option<&'a TypeDesc> {
        self.contract.state_var(name).map(|v| &v.type_desc)
    }

    fn struct_has(&self, t: &TypeDesc, member: &str) -> bool {
        match t.innermost() {
            TypeDesc::Struct { decl, name } => self
                .unit
                .structs
                .get(decl)
                .or_else(|| self.unit.struct_by_name(name))
                .is_some_and(|s| s.members.iter().any(|(m, _)| m == member)),
            _ => false,
        }
    }

    /// Resolves an lvalue-like expression to the storage path it touches.
    pub fn resolve_access(&self, e: &Expr) -> Option<Access> {
        match &e.kind {
            ExprKind::Ident { binding: Binding::State { name }, .. } => {
                let t = self.state_type(name)?;
                Some(Access {
                    path: VariablePath { base: name.clone(), member: None, key_shape: key_shape(t) },
                    key: None,
                    unknown: false,
                })
            }
            ExprKind::Ident { binding: Binding::Local { decl } | Binding::Param { decl }, name } => {
                let alias = self.aliases.get(decl)?;
                Some(alias.access.clone().unwrap_or(Access {
                    path: VariablePath::plain(&format!("<{}>", name)),
                    key: None,
                    unknown: true,
                }))
            }
            ExprKind::Index { base, index } => {
                let mut acc = self.resolve_access(base)?;
                if acc.key.is_none() && acc.path.member.is_none() && acc.path.is_keyed() {
                    acc.key = index.as_deref().cloned();
                }
                Some(acc)
            }
            ExprKind::Member { base, member, .. } => {
                let mut acc = self.resolve_access(base)?;
                if acc.path.member.is_none() && !acc.unknown {
                    if let Some(t) = self.state_type(&acc.path.base) {
                        if self.struct_has(t, member) {
                            acc.path.member = Some(member.clone());
                        }
                    }
                }
                Some(acc)
            }
            _ => None,
        }
    }

    /// Syntactic address class; unknown expressions keep their rendering.
    /// Initializer of a non-storage local declared with one.
    pub fn init_of(&self, decl: AstId) -> Option<&Expr> {
        self.local_inits.get(&decl)
    }

    pub fn classify(&self, e: &Expr) -> AddrClass {
        self.classify_depth(e, 0)
    }

    fn classify_depth(&self, e: &Expr, depth: usize) -> AddrClass {
        let e = e.strip_conversions();
        match &e.kind {
            ExprKind::Special { special } => match special {
                SpecialRef::MsgSender => AddrClass::Caller,
                SpecialRef::TxOrigin => AddrClass::Origin,
                SpecialRef::This | SpecialRef::AddressThis => AddrClass::This,
                _ => AddrClass::Unknown(e.render()),
            },
            ExprKind::Literal { value } => AddrClass::Constant(value.clone()),
            ExprKind::Call { callee, args, .. } if args.is_empty() && is_sender_helper(self.unit, self.contract, callee) => {
                AddrClass::Caller
            }
            ExprKind::Ident { binding: Binding::Param { decl }, name } => {
                if self.aliases.contains_key(decl) {
                    AddrClass::Unknown(name.clone())
                } else {
                    AddrClass::Param(name.clone())
                }
            }
            ExprKind::Ident { binding: Binding::State { name }, .. } => AddrClass::StateRef(name.clone()),
            ExprKind::Ident { binding: Binding::Local { decl }, name } => match self.local_inits.get(decl) {
                Some(init) if depth < 8 => match self.classify_depth(init, depth + 1) {
                    AddrClass::Unknown(_) => AddrClass::Unknown(name.clone()),
                    c => c,
                },
                _ => AddrClass::Unknown(name.clone()),
            },
            ExprKind::Index { .. } | ExprKind::Member { .. } => match self.resolve_access(e) {
                Some(a) if !a.unknown => AddrClass::StateRef(e.render()),
                _ => AddrClass::Unknown(e.render()),
            },
            _ => AddrClass::Unknown(e.render()),
        }
    }

    pub fn var_of(&self, e: &Expr) -> Option<Var> {
        match &e.kind {
            ExprKind::Ident { binding, name } => match binding {
                Binding::State { name } => Some(Var::State { name: name.clone() }),
                Binding::Local { decl } | Binding::Param { decl } if self.aliases.contains_key(decl) => {
                    match &self.aliases[decl].access {
                        Some(a) => Some(Var::State { name: a.path.base.clone() }),
                        None => Some(Var::Local { decl: *decl, name: name.clone() }),
                    }
                }
                Binding::Local { decl } => Some(Var::Local { decl: *decl, name: name.clone() }),
                Binding::Param { decl } => Some(Var::Param { decl: *decl, name: name.clone() }),
                _ => None,
            },
            _ => None,
        }
    }

    /// Variable written by an lvalue.
    pub fn root_vars(&self, lhs: &Expr, out: &mut Vec<Var>) {
        match &lhs.kind {
            ExprKind::Ident { .. } => out.extend(self.var_of(lhs)),
            ExprKind::Index { base, .. } | ExprKind::Member { base, .. } => self.root_vars(base, out),
            ExprKind::Tuple { items } => {
                for i in items.iter().flatten() {
                    self.root_vars(i, out);
                }
            }
            _ => {}
        }
    }

    /// Every variable read by `e`.
    pub fn used_vars(&self, e: &Expr, out: &mut Vec<Var>) {
        e.walk(&mut |x| {
            if let Some(v) = self.var_of(x) {
                out.push(v);
            }
        });
    }

    /// Variables read by an lvalue: index keys only.
    pub fn lvalue_uses(&self, lhs: &Expr, out: &mut Vec<Var>) {
        match &lhs.kind {
            ExprKind::Index { base, index } => {
                if let Some(i) = index {
                    self.used_vars(i, out);
                }
                self.lvalue_uses(base, out);
            }
            ExprKind::Member { base, .. } => self.lvalue_uses(base, out),
            ExprKind::Tuple { items } => {
                for i in items.iter().flatten() {
                    self.lvalue_uses(i, out);
                }
            }
            _ => {}
        }
    }

    /// Collects storage reads and writes of an expression.
    pub fn accesses(&self, e: &Expr, reads: &mut Vec<Access>, writes: &mut Vec<Access>) {
        match &e.kind {
            ExprKind::Ident { .. } | ExprKind::Index { .. } | ExprKind::Member { .. } => {
                if let Some(a) = self.resolve_access(e) {
                    reads.push(a);
                    self.key_accesses(e, reads, writes);
                    return;
                }
                match &e.kind {
                    ExprKind::Index { base, index } => {
                        self.accesses(base, reads, writes);
                        if let Some(i) = index {
                            self.accesses(i, reads, writes);
                        }
                    }
                    ExprKind::Member { base, .. } => self.accesses(base, reads, writes),
                    _ => {}
                }
            }
            ExprKind::Assign { op, lhs, rhs } => {
                self.lvalue(lhs, op, reads, writes);
                self.accesses(rhs, reads, writes);
            }
            ExprKind::Call { callee, args, options, .. } => {
                if let ExprKind::Member { base, member, .. } = &callee.kind {
                    if matches!(member.as_str(), "push" | "pop") {
                        if let Some(a) = self.resolve_access(base) {
                            writes.push(a);
                        }
                    }
                    self.accesses(base, reads, writes);
                }
                for a in args {
                    self.accesses(a, reads, writes);
                }
                for (_, o) in options {
                    self.accesses(o, reads, writes);
                }
            }
            ExprKind::Binary { lhs, rhs, .. } => {
                self.accesses(lhs, reads, writes);
                self.accesses(rhs, reads, writes);
            }
            ExprKind::Unary { operand, .. } => self.accesses(operand, reads, writes),
            ExprKind::Conditional { cond, then, otherwise } => {
                self.accesses(cond, reads, writes);
                self.accesses(then, reads, writes);
                self.accesses(otherwise, reads, writes);
            }
            ExprKind::Tuple { items } => {
                for i in items.iter().flatten() {
                    self.accesses(i, reads, writes);
                }
            }
            _ => {}
        }
    }

    fn key_accesses(&self, e: &Expr, reads: &mut Vec<Access>, writes: &mut Vec<Access>) {
        match &e.kind {
            ExprKind::Index { base, index } => {
                if let Some(i) = index {
                    self.accesses(i, reads, writes);
                }
                self.key_accesses(base, reads, writes);
            }
            ExprKind::Member { base, .. } => self.key_accesses(base, reads, writes),
            _ => {}
        }
    }

    pub fn lvalue(&self, lhs: &Expr, op: &str, reads: &mut Vec<Access>, writes: &mut Vec<Access>) {
        if let ExprKind::Tuple { items } = &lhs.kind {
            for i in items.iter().flatten() {
                self.lvalue(i, op, reads, writes);
            }
            return;
        }
        if let Some(a) = self.resolve_access(lhs) {
            if op != "=" && op != "delete" {
                reads.push(a.clone());
            }
            writes.push(a);
        }
        self.key_accesses(lhs, reads, writes);
    }
}

pub fn build_defuse(scope: &Scope, cfg: &Cfg) -> DefUse {
    let mut du = DefUse { diagnostics: scope.diagnostics.clone(), ..Default::default() };
    for (id, node) in cfg.nodes.iter().enumerate() {
        let s = &node.stmt;
        let mut defs = Vec::new();
        let mut uses = Vec::new();
        let mut reads = Vec::new();
        let mut writes = Vec::new();
        match &s.kind {
            StmtKind::Assign { lhs, op, rhs } => {
                scope.root_vars(lhs, &mut defs);
                scope.lvalue_uses(lhs, &mut uses);
                if op != "=" && op != "delete" {
                    scope.root_vars(lhs, &mut uses);
                }
                scope.used_vars(rhs, &mut uses);
                scope.lvalue(lhs, op, &mut reads, &mut writes);
                scope.accesses(rhs, &mut reads, &mut writes);
            }
            StmtKind::Declare { vars, init } => {
                for v in vars.iter().flatten() {
                    defs.push(Var::Local { decl: v.decl, name: v.name.clone() });
                }
                if let Some(i) = init {
                    scope.used_vars(i, &mut uses);
                    scope.accesses(i, &mut reads, &mut writes);
                }
            }
            _ => {
                for e in s.exprs() {
                    scope.used_vars(e, &mut uses);
                    scope.accesses(e, &mut reads, &mut writes);
                    e.walk(&mut |x| {
                        if let ExprKind::Assign { lhs, .. } = &x.kind {
                            scope.root_vars(lhs, &mut defs);
                        }
                    });
                }
            }
        }
        du.defs.extend(defs.into_iter().map(|v| (v, id)));
        du.uses.extend(uses.into_iter().map(|v| (v, id)));
        let conv = |a: Access| StateAccess {
            key: a.key.as_ref().map(|k| scope.classify(k)),
            path: a.path,
            node: id,
            loc: s.loc.clone(),
            unknown: a.unknown,
        };
        du.state_reads.extend(reads.into_iter().map(conv));
        du.state_writes.extend(writes.into_iter().map(conv));
    }
    du.state_reads.sort();
    du.state_reads.dedup();
    du.state_writes.sort();
    du.state_writes.dedup();
    du
}
