//! Normalized contract representation.
//!
//! Everything downstream of ingestion works on these types rather than on the
//! compiler's JSON. Nodes keep the compiler's AST ids so that facts, graph
//! nodes and findings can point back to the exact statement and line.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

/// Compiler AST node id. Unique within one loaded source unit.
pub type AstId = i64;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Loc {
    pub file: Arc<str>,
    pub line: u32,
    pub offset: u32,
    pub len: u32,
}

impl Loc {
    pub fn unknown(file: &Arc<str>) -> Self {
        Loc { file: file.clone(), line: 0, offset: 0, len: 0 }
    }
}

impl fmt::Display for Loc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.file, self.line)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceUnit {
    pub path: String,
    pub pragma: String,
    pub source_hash: String,
    pub contracts: Vec<ContractIR>,
    /// Notes produced while loading or flattening (unresolved bases, skipped nodes).
    pub notes: Vec<String>,
    /// Struct definitions visible in the unit, keyed by declaration id.
    pub structs: BTreeMap<AstId, StructDef>,
    /// Statements inside `unchecked { .. }` blocks.
    #[serde(default)]
    pub unchecked: BTreeSet<AstId>,
}

impl SourceUnit {
    pub fn contract(&self, name: &str) -> Option<&ContractIR> {
        self.contracts.iter().find(|c| c.name == name)
    }

    pub fn struct_by_name(&self, name: &str) -> Option<&StructDef> {
        self.structs.values().find(|s| s.name == name || s.canonical_name == name)
    }

    /// Finds the function a declaration id refers to, searching every contract.
    pub fn function_by_decl(&self, decl: AstId) -> Option<(&ContractIR, &FunctionIR)> {
        self.contracts
            .iter()
            .find_map(|c| c.functions.iter().find(|f| f.decl_id == decl).map(|f| (c, f)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructDef {
    pub id: AstId,
    pub name: String,
    pub canonical_name: String,
    pub members: Vec<(String, TypeDesc)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContractKind {
    Contract,
    Interface,
    Library,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractIR {
    pub id: AstId,
    pub name: String,
    pub kind: ContractKind,
    pub is_abstract: bool,
    pub file: Arc<str>,
    pub loc: Loc,
    /// Direct bases in declaration order (`contract X is A, B` gives `[A, B]`).
    pub bases: Vec<String>,
    pub state_vars: Vec<StateVarDecl>,
    pub functions: Vec<FunctionIR>,
    pub modifiers: Vec<ModifierIR>,
    /// Set once inheritance has been flattened into this contract.
    pub flattened: bool,
}

impl ContractIR {
    pub fn state_var(&self, name: &str) -> Option<&StateVarDecl> {
        self.state_vars.iter().find(|v| v.name == name)
    }

    pub fn function(&self, name: &str) -> Option<&FunctionIR> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn function_index(&self, name: &str) -> Option<usize> {
        self.functions.iter().position(|f| f.name == name)
    }

    pub fn modifier(&self, name: &str) -> Option<&ModifierIR> {
        self.modifiers.iter().rev().find(|m| m.name == name)
    }

    pub fn is_concrete(&self) -> bool {
        self.kind == ContractKind::Contract
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TypeDesc {
    Elementary { name: String },
    Mapping { key: Box<TypeDesc>, value: Box<TypeDesc> },
    Struct { name: String, decl: AstId },
    Array { elem: Box<TypeDesc> },
    ContractRef { name: String },
    Enum { name: String },
    Function,
    Unknown { text: String },
}

impl TypeDesc {
    pub fn is_address(&self) -> bool {
        matches!(self, TypeDesc::Elementary { name } if name.starts_with("address"))
    }

    pub fn is_uint(&self) -> bool {
        matches!(self, TypeDesc::Elementary { name } if name.starts_with("uint") || name.starts_with("int"))
    }

    pub fn is_bool(&self) -> bool {
        matches!(self, TypeDesc::Elementary { name } if name == "bool")
    }

    pub fn is_token_like(&self) -> bool {
        self.is_address() || matches!(self, TypeDesc::ContractRef { .. })
    }

    /// The value type reached after indexing through every mapping/array layer.
    pub fn innermost(&self) -> &TypeDesc {
        match self {
            TypeDesc::Mapping { value, .. } => value.innermost(),
            TypeDesc::Array { elem } => elem.innermost(),
            other => other,
        }
    }

    pub fn mapping_key(&self) -> Option<&TypeDesc> {
        match self {
            TypeDesc::Mapping { key, .. } => Some(key),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Visibility {
    External,
    Public,
    Internal,
    Private,
}

impl Visibility {
    pub fn parse(s: &str) -> Self {
        match s {
            "external" => Visibility::External,
            "public" => Visibility::Public,
            "private" => Visibility::Private,
            _ => Visibility::Internal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVarDecl {
    pub id: AstId,
    pub name: String,
    pub type_desc: TypeDesc,
    pub type_string: String,
    pub visibility: Visibility,
    pub is_constant_or_immutable: bool,
    pub init: Option<Expr>,
    pub loc: Loc,
    /// Contract that declared the variable (differs from the owner after flattening).
    pub declared_in: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mutability {
    Payable,
    View,
    Pure,
    Nonpayable,
}

impl Mutability {
    pub fn parse(s: &str) -> Self {
        match s {
            "payable" => Mutability::Payable,
            "view" | "constant" => Mutability::View,
            "pure" => Mutability::Pure,
            _ => Mutability::Nonpayable,
        }
    }

    pub fn is_read_only(self) -> bool {
        matches!(self, Mutability::View | Mutability::Pure)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FunctionKind {
    Function,
    Constructor,
    Fallback,
    Receive,
    Free,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub decl: AstId,
    pub name: String,
    pub type_desc: TypeDesc,
    pub type_string: String,
    pub storage: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModifierCall {
    pub name: String,
    pub decl: Option<AstId>,
    pub args: Vec<Expr>,
    pub loc: Loc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionIR {
    pub decl_id: AstId,
    pub name: String,
    pub kind: FunctionKind,
    pub params: Vec<Param>,
    pub returns: Vec<Param>,
    pub visibility: Visibility,
    pub mutability: Mutability,
    pub modifiers_applied: Vec<ModifierCall>,
    pub body: Option<Vec<Stmt>>,
    pub loc: Loc,
    pub declared_in: String,
    /// Filled by call-graph construction.
    pub is_externally_reachable: bool,
}

impl FunctionIR {
    /// `name(type,type)` used for override resolution during flattening.
    pub fn signature(&self) -> String {
        let types: Vec<&str> = self.params.iter().map(|p| p.type_string.as_str()).collect();
        format!("{}({})", self.display_name(), types.join(","))
    }

    pub fn is_entry(&self) -> bool {
        matches!(self.visibility, Visibility::Public | Visibility::External)
            && matches!(self.kind, FunctionKind::Function | FunctionKind::Fallback | FunctionKind::Receive)
    }

    pub fn param_index(&self, decl: AstId) -> Option<usize> {
        self.params.iter().position(|p| p.decl == decl)
    }

    /// Display name that stays readable for constructors and fallbacks.
    pub fn display_name(&self) -> String {
        match self.kind {
            FunctionKind::Constructor => "constructor".into(),
            FunctionKind::Fallback => "fallback".into(),
            FunctionKind::Receive => "receive".into(),
            _ => self.name.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModifierIR {
    pub decl_id: AstId,
    pub name: String,
    pub params: Vec<Param>,
    pub body: Vec<Stmt>,
    pub loc: Loc,
    pub declared_in: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpecialRef {
    MsgSender,
    MsgValue,
    TxOrigin,
    BlockTimestamp,
    BlockNumber,
    This,
    AddressThis,
    ThisBalance,
}

impl SpecialRef {
    pub fn text(self) -> &'static str {
        match self {
            SpecialRef::MsgSender => "msg.sender",
            SpecialRef::MsgValue => "msg.value",
            SpecialRef::TxOrigin => "tx.origin",
            SpecialRef::BlockTimestamp => "block.timestamp",
            SpecialRef::BlockNumber => "block.number",
            SpecialRef::This => "this",
            SpecialRef::AddressThis => "address(this)",
            SpecialRef::ThisBalance => "this.balance",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Binding {
    State { name: String },
    Local { decl: AstId },
    Param { decl: AstId },
    Function { decl: AstId },
    Modifier { decl: AstId },
    Contract { name: String },
    Type,
    Event,
    Magic { name: String },
    Unresolved,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expr {
    pub id: AstId,
    pub loc: Loc,
    /// Compiler type string, e.g. `contract IERC20` or `uint256`.
    pub ty: String,
    pub kind: ExprKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallKind {
    Call,
    TypeConversion,
    StructConstructor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "expr", rename_all = "snake_case")]
pub enum ExprKind {
    Ident { name: String, binding: Binding },
    Member { base: Box<Expr>, member: String, member_decl: Option<AstId> },
    Index { base: Box<Expr>, index: Option<Box<Expr>> },
    Binary { op: String, lhs: Box<Expr>, rhs: Box<Expr> },
    Unary { op: String, prefix: bool, operand: Box<Expr> },
    Call { callee: Box<Expr>, args: Vec<Expr>, names: Vec<String>, kind: CallKind, options: Vec<(String, Expr)> },
    Literal { value: String },
    Special { special: SpecialRef },
    Conditional { cond: Box<Expr>, then: Box<Expr>, otherwise: Box<Expr> },
    Tuple { items: Vec<Option<Expr>> },
    /// Assignment nested inside a larger expression.
    Assign { op: String, lhs: Box<Expr>, rhs: Box<Expr> },
    TypeName { name: String },
    New { type_name: String },
    Opaque { node_type: String },
}

impl Expr {
    pub fn is_literal(&self) -> bool {
        matches!(self.kind, ExprKind::Literal { .. })
    }

    pub fn special(&self) -> Option<SpecialRef> {
        match self.kind {
            ExprKind::Special { special } => Some(special),
            _ => None,
        }
    }

    /// Strips `address(..)`, `payable(..)` and interface casts.
    pub fn strip_conversions(&self) -> &Expr {
        match &self.kind {
            ExprKind::Call { kind: CallKind::TypeConversion, args, .. } if args.len() == 1 => args[0].strip_conversions(),
            _ => self,
        }
    }

    /// Name of the function being called: `f` in `f(..)`, `x.f(..)`, `x.f{value: v}(..)`.
    pub fn callee_name(&self) -> Option<&str> {
        match &self.kind {
            ExprKind::Ident { name, .. } => Some(name),
            ExprKind::Member { member, .. } => Some(member),
            _ => None,
        }
    }

    /// Direct sub-expressions.
    pub fn children(&self) -> Vec<&Expr> {
        match &self.kind {
            ExprKind::Member { base, .. } => vec![base],
            ExprKind::Index { base, index } => std::iter::once(&**base).chain(index.as_deref()).collect(),
            ExprKind::Binary { lhs, rhs, .. } | ExprKind::Assign { lhs, rhs, .. } => vec![lhs, rhs],
            ExprKind::Unary { operand, .. } => vec![operand],
            ExprKind::Call { callee, args, options, .. } => {
                std::iter::once(&**callee).chain(args.iter()).chain(options.iter().map(|(_, o)| o)).collect()
            }
            ExprKind::Conditional { cond, then, otherwise } => vec![cond, then, otherwise],
            ExprKind::Tuple { items } => items.iter().flatten().collect(),
            _ => Vec::new(),
        }
    }

    /// Visits this expression and every sub-expression, parents first.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Expr)) {
        f(self);
        match &self.kind {
            ExprKind::Member { base, .. } => base.walk(f),
            ExprKind::Index { base, index } => {
                base.walk(f);
                if let Some(i) = index {
                    i.walk(f);
                }
            }
            ExprKind::Binary { lhs, rhs, .. } | ExprKind::Assign { lhs, rhs, .. } => {
                lhs.walk(f);
                rhs.walk(f);
            }
            ExprKind::Unary { operand, .. } => operand.walk(f),
            ExprKind::Call { callee, args, options, .. } => {
                callee.walk(f);
                for a in args {
                    a.walk(f);
                }
                for (_, o) in options {
                    o.walk(f);
                }
            }
            ExprKind::Conditional { cond, then, otherwise } => {
                cond.walk(f);
                then.walk(f);
                otherwise.walk(f);
            }
            ExprKind::Tuple { items } => {
                for i in items.iter().flatten() {
                    i.walk(f);
                }
            }
            _ => {}
        }
    }

    /// Short source-like rendering used in evidence text and DOT labels.
    pub fn render(&self) -> String {
        match &self.kind {
            ExprKind::Ident { name, .. } => name.clone(),
            ExprKind::Member { base, member, .. } => format!("{}.{}", base.render(), member),
            ExprKind::Index { base, index } => match index {
                Some(i) => format!("{}[{}]", base.render(), i.render()),
                None => format!("{}[]", base.render()),
            },
            ExprKind::Binary { op, lhs, rhs } => format!("{} {} {}", lhs.render(), op, rhs.render()),
            ExprKind::Unary { op, prefix, operand } => {
                if *prefix {
                    format!("{}{}", op, operand.render())
                } else {
                    format!("{}{}", operand.render(), op)
                }
            }
            ExprKind::Call { callee, args, options, .. } => {
                let args: Vec<String> = args.iter().map(Expr::render).collect();
                let opts = if options.is_empty() {
                    String::new()
                } else {
                    let o: Vec<String> = options.iter().map(|(k, v)| format!("{}: {}", k, v.render())).collect();
                    format!("{{{}}}", o.join(", "))
                };
                format!("{}{}({})", callee.render(), opts, args.join(", "))
            }
            ExprKind::Literal { value } => value.clone(),
            ExprKind::Special { special } => special.text().to_string(),
            ExprKind::Conditional { cond, then, otherwise } => {
                format!("{} ? {} : {}", cond.render(), then.render(), otherwise.render())
            }
            ExprKind::Tuple { items } => {
                let parts: Vec<String> = items.iter().map(|i| i.as_ref().map(Expr::render).unwrap_or_default()).collect();
                format!("({})", parts.join(", "))
            }
            ExprKind::Assign { op, lhs, rhs } => format!("{} {} {}", lhs.render(), op, rhs.render()),
            ExprKind::TypeName { name } => name.clone(),
            ExprKind::New { type_name } => format!("new {}", type_name),
            ExprKind::Opaque { node_type } => format!("<{}>", node_type),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalDecl {
    pub decl: AstId,
    pub name: String,
    pub type_desc: TypeDesc,
    pub type_string: String,
    /// `storage`, `memory`, `calldata` or `default`.
    pub storage: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoopKind {
    For,
    While,
    DoWhile,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Require,
    Assert,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stmt {
    pub id: AstId,
    pub loc: Loc,
    pub kind: StmtKind,
    /// Name of the modifier this statement was inlined from, if any.
    pub origin: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "stmt", rename_all = "snake_case")]
pub enum StmtKind {
    /// `lhs op rhs`; `x++` becomes `x += 1` and `delete x` becomes `x = delete`.
    Assign { lhs: Expr, op: String, rhs: Expr },
    Declare { vars: Vec<Option<LocalDecl>>, init: Option<Expr> },
    Require { cond: Expr, check: CheckKind },
    Revert,
    If { cond: Expr, then_branch: Vec<Stmt>, else_branch: Vec<Stmt> },
    Loop { kind: LoopKind, init: Option<Box<Stmt>>, cond: Option<Expr>, update: Option<Box<Stmt>>, body: Vec<Stmt> },
    Return { value: Option<Expr> },
    Emit { event: Expr },
    Expr { expr: Expr },
    Break,
    Continue,
    Placeholder,
    /// Inline assembly, try/catch and anything else outside the analyzable subset.
    Unanalyzed { what: String },
    /// Sequence produced when a function body is inlined into a modifier placeholder.
    Block { body: Vec<Stmt> },
}

impl Stmt {
    /// Visits this statement and all nested statements, parents first.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Stmt)) {
        f(self);
        match &self.kind {
            StmtKind::If { then_branch, else_branch, .. } => {
                for s in then_branch.iter().chain(else_branch) {
                    s.walk(f);
                }
            }
            StmtKind::Loop { init, update, body, .. } => {
                if let Some(i) = init {
                    i.walk(f);
                }
                for s in body {
                    s.walk(f);
                }
                if let Some(u) = update {
                    u.walk(f);
                }
            }
            StmtKind::Block { body } => {
                for s in body {
                    s.walk(f);
                }
            }
            _ => {}
        }
    }

    /// Expressions directly owned by this statement (not those of nested statements).
    pub fn exprs(&self) -> Vec<&Expr> {
        match &self.kind {
            StmtKind::Assign { lhs, rhs, .. } => vec![lhs, rhs],
            StmtKind::Declare { init, .. } => init.iter().collect(),
            StmtKind::Require { cond, .. } => vec![cond],
            StmtKind::If { cond, .. } => vec![cond],
            StmtKind::Loop { cond, .. } => cond.iter().collect(),
            StmtKind::Return { value } => value.iter().collect(),
            StmtKind::Emit { event } => vec![event],
            StmtKind::Expr { expr } => vec![expr],
            _ => Vec::new(),
        }
    }
}

/// Counts executable statements, treating inlined blocks as transparent.
pub fn count_statements(stmts: &[Stmt]) -> usize {
    let mut n = 0;
    for s in stmts {
        s.walk(&mut |s| {
            if !matches!(s.kind, StmtKind::Block { .. }) {
                n += 1;
            }
        });
    }
    n
}
