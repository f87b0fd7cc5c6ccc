//! Loading of solc compact-AST JSON into [`SourceUnit`]s.
//!
//! Accepted shapes:
//! - a bare `SourceUnit` AST object (`sources[path].ast` of standard JSON),
//! - standard-JSON / combined-JSON output with a `sources` map,
//! - the text printed by `solc --ast-compact-json` (`======= path =======` sections).
//!
//! Line numbers are only known when the original source text can be found; the
//! resolver passed to [`load_ast_with_sources`] is asked for it by absolute path.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;
use std::sync::Arc;

use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ir::*;

/// Resolves an AST `absolutePath` to `(display path, source text)`.
pub type SourceResolver<'a> = dyn Fn(&str) -> Option<(String, String)> + 'a;

/// Load an AST without access to source text (all lines are reported as 0).
pub fn load_ast(json: &[u8]) -> Result<SourceUnit> {
    load_ast_with_sources(json, "<memory>", &|_| None)
}

/// Loads an AST file, reading source text for line numbers from next to it.
pub fn load_ast_file(path: &Path) -> Result<SourceUnit> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    load_ast_with_sources(&bytes, &path.display().to_string(), &|abs| source_near(&dir, abs))
}

/// Finds the source named `abs` relative to `dir`, falling back to its file name.
pub fn source_near(dir: &Path, abs: &str) -> Option<(String, String)> {
    let direct = dir.join(abs);
    let by_name = Path::new(abs).file_name().map(|n| dir.join(n));
    for cand in std::iter::once(direct).chain(by_name) {
        if let Ok(text) = std::fs::read_to_string(&cand) {
            return Some((cand.display().to_string(), text));
        }
    }
    None
}

pub fn load_ast_with_sources(json: &[u8], path: &str, resolver: &SourceResolver<'_>) -> Result<SourceUnit> {
    let (asts, compiler_version) = split_input(json)?;
    if asts.is_empty() {
        return Err(Error::Parse("no SourceUnit found in input".into()));
    }
    for ast in &asts {
        if ast.get("nodeType").is_none() {
            let found = compiler_version.clone().unwrap_or_else(|| "legacy AST format".into());
            return Err(Error::UnsupportedVersion { found });
        }
        if ast.get("nodeType").and_then(Value::as_str) != Some("SourceUnit") {
            return Err(Error::Parse("top-level node is not a SourceUnit".into()));
        }
    }

    let pragma = asts.iter().find_map(|a| pragma_of(a)).unwrap_or_default();
    if let Some(v) = &compiler_version {
        check_version(v, v)?;
    } else if !pragma.is_empty() {
        check_version(&pragma, &pragma)?;
    }

    let mut files = FileTable::default();
    for ast in &asts {
        let abs = ast.get("absolutePath").and_then(Value::as_str).unwrap_or(path).to_string();
        let idx = src_triple(ast.get("src")).map(|(_, _, i)| i).unwrap_or(0);
        let (display, text) = resolver(&abs).unwrap_or_else(|| (abs.clone(), String::new()));
        files.insert(idx, display, &text);
    }

    let mut b = Builder::new(files);
    for ast in &asts {
        b.collect_decls(ast);
    }
    let mut contracts = Vec::new();
    for ast in &asts {
        for node in nodes(ast, "nodes") {
            match node_type(node) {
                "ContractDefinition" => contracts.push(b.contract(node)),
                "FunctionDefinition" => b.notes.push(format!(
                    "free function `{}` is not analyzed",
                    node.get("name").and_then(Value::as_str).unwrap_or("?")
                )),
                _ => {}
            }
        }
    }

    let digest = Sha256::digest(json);
    Ok(SourceUnit {
        path: path.to_string(),
        pragma,
        source_hash: hex::encode(digest),
        contracts,
        notes: b.notes,
        structs: b.structs,
        unchecked: b.unchecked,
    })
}

fn split_input(json: &[u8]) -> Result<(Vec<Value>, Option<String>)> {
    let text = std::str::from_utf8(json).map_err(|e| Error::Parse(format!("input is not UTF-8: {e}")))?;
    let trimmed = text.trim_start();
    if !trimmed.starts_with('{') {
        return split_cli_output(text);
    }
    let value: Value = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let Some(obj) = value.as_object() else {
        return Err(Error::Parse("expected a JSON object".into()));
    };
    if obj.get("nodeType").is_some() {
        return Ok((vec![value], None));
    }
    if obj.get("name").and_then(Value::as_str) == Some("SourceUnit") {
        return Err(Error::UnsupportedVersion { found: "legacy AST format".into() });
    }
    if let Some(sources) = obj.get("sources").and_then(Value::as_object) {
        let version = obj.get("version").and_then(Value::as_str).map(str::to_string);
        let mut asts = Vec::new();
        for src in sources.values() {
            let ast = src.get("ast").or_else(|| src.get("AST")).or_else(|| src.get("legacyAST"));
            if let Some(a) = ast {
                asts.push(a.clone());
            }
        }
        if asts.is_empty() {
            return Err(Error::Parse("`sources` entries carry no AST".into()));
        }
        return Ok((asts, version));
    }
    Err(Error::Parse("JSON is not a solc AST".into()))
}

fn split_cli_output(text: &str) -> Result<(Vec<Value>, Option<String>)> {
    let mut asts = Vec::new();
    let mut rest = text;
    while let Some(pos) = rest.find("=======") {
        rest = &rest[pos..];
        let Some(nl) = rest.find('\n') else { break };
        rest = &rest[nl + 1..];
        let start = match rest.find('{') {
            Some(s) => s,
            None => break,
        };
        let mut stream = serde_json::Deserializer::from_str(&rest[start..]).into_iter::<Value>();
        match stream.next() {
            Some(Ok(v)) => {
                let consumed = stream.byte_offset();
                asts.push(v);
                rest = &rest[start + consumed..];
            }
            Some(Err(e)) => return Err(Error::Parse(e.to_string())),
            None => break,
        }
    }
    if asts.is_empty() {
        return Err(Error::Parse("input is neither JSON nor solc --ast-compact-json output".into()));
    }
    Ok((asts, None))
}

fn pragma_of(ast: &Value) -> Option<String> {
    for node in nodes(ast, "nodes") {
        if node_type(node) != "PragmaDirective" {
            continue;
        }
        let lits: Vec<&str> = node
            .get("literals")
            .and_then(Value::as_array)
            .map(|a| a.iter().filter_map(Value::as_str).collect())
            .unwrap_or_default();
        if lits.first() == Some(&"solidity") {
            return Some(lits[1..].concat());
        }
    }
    None
}

/// Extracts the lowest `major.minor` mentioned in a version or pragma string.
fn lowest_version(s: &str) -> Option<(u32, u32)> {
    let bytes = s.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i].is_ascii_digit() {
            let rest = &s[i..];
            let mut parts = rest.split(|c: char| !c.is_ascii_digit());
            let major = parts.next()?.parse().ok()?;
            let after = &rest[rest.find(|c: char| !c.is_ascii_digit()).unwrap_or(rest.len())..];
            if let Some(stripped) = after.strip_prefix('.') {
                let minor_str: String = stripped.chars().take_while(|c| c.is_ascii_digit()).collect();
                if let Ok(minor) = minor_str.parse() {
                    return Some((major, minor));
                }
            }
            return Some((major, 0));
        }
        i += 1;
    }
    None
}

fn check_version(text: &str, shown: &str) -> Result<()> {
    match lowest_version(text) {
        Some((0, minor)) if (6..=8).contains(&minor) => Ok(()),
        Some(_) => Err(Error::UnsupportedVersion { found: shown.to_string() }),
        None => Ok(()),
    }
}

#[derive(Default)]
struct FileTable {
    files: HashMap<u64, (Arc<str>, Vec<u32>)>,
}

impl FileTable {
    fn insert(&mut self, idx: u64, display: String, text: &str) {
        let mut starts = Vec::new();
        if !text.is_empty() {
            starts.push(0u32);
            for (i, b) in text.bytes().enumerate() {
                if b == b'\n' {
                    starts.push(i as u32 + 1);
                }
            }
        }
        self.files.insert(idx, (Arc::from(display.as_str()), starts));
    }

    fn loc(&self, src: Option<&Value>) -> Loc {
        let (start, len, idx) = src_triple(src).unwrap_or((0, 0, 0));
        let (file, starts) = match self.files.get(&idx) {
            Some(f) => f,
            None => match self.files.values().next() {
                Some(f) => f,
                None => return Loc { file: Arc::from("<unknown>"), line: 0, offset: start, len },
            },
        };
        let line = if starts.is_empty() {
            0
        } else {
            match starts.binary_search(&start) {
                Ok(i) => i as u32 + 1,
                Err(i) => i as u32,
            }
        };
        Loc { file: file.clone(), line, offset: start, len }
    }
}

fn src_triple(src: Option<&Value>) -> Option<(u32, u32, u64)> {
    let s = src?.as_str()?;
    let mut it = s.split(':');
    let start = it.next()?.parse().ok()?;
    let len = it.next()?.parse().ok()?;
    let idx: i64 = it.next().and_then(|x| x.parse().ok()).unwrap_or(0);
    Some((start, len, idx.max(0) as u64))
}

fn node_type(v: &Value) -> &str {
    v.get("nodeType").and_then(Value::as_str).unwrap_or("")
}

fn nodes<'a>(v: &'a Value, key: &str) -> impl Iterator<Item = &'a Value> {
    v.get(key).and_then(Value::as_array).into_iter().flatten()
}

fn str_of<'a>(v: &'a Value, key: &str) -> &'a str {
    v.get(key).and_then(Value::as_str).unwrap_or("")
}

fn id_of(v: &Value) -> AstId {
    v.get("id").and_then(Value::as_i64).unwrap_or(-1)
}

fn ref_decl(v: &Value) -> Option<AstId> {
    v.get("referencedDeclaration").and_then(Value::as_i64)
}

#[derive(Debug, Clone)]
enum Decl {
    StateVar(String),
    Function,
    Modifier,
    Contract(String),
    Struct,
    Type,
    Event,
}

const MAGIC: &[&str] = &[
    "msg", "block", "tx", "this", "now", "super", "abi", "require", "assert", "revert", "keccak256", "sha256",
    "ripemd160", "ecrecover", "addmod", "mulmod", "gasleft", "blockhash", "selfdestruct", "type", "bytes", "string",
];

struct Builder {
    files: FileTable,
    decls: HashMap<AstId, Decl>,
    structs: BTreeMap<AstId, StructDef>,
    struct_nodes: HashMap<AstId, Value>,
    notes: Vec<String>,
    params: HashMap<AstId, ()>,
    locals: HashMap<AstId, ()>,
    unchecked: BTreeSet<AstId>,
    unchecked_depth: usize,
}

impl Builder {
    fn new(files: FileTable) -> Self {
        Builder {
            files,
            decls: HashMap::new(),
            structs: BTreeMap::new(),
            struct_nodes: HashMap::new(),
            notes: Vec::new(),
            params: HashMap::new(),
            locals: HashMap::new(),
            unchecked: BTreeSet::new(),
            unchecked_depth: 0,
        }
    }

    fn collect_decls(&mut self, v: &Value) {
        match v {
            Value::Object(map) => {
                let id = id_of(v);
                match node_type(v) {
                    "VariableDeclaration" if map.get("stateVariable").and_then(Value::as_bool) == Some(true) => {
                        self.decls.insert(id, Decl::StateVar(str_of(v, "name").to_string()));
                    }
                    "FunctionDefinition" => {
                        self.decls.insert(id, Decl::Function);
                    }
                    "ModifierDefinition" => {
                        self.decls.insert(id, Decl::Modifier);
                    }
                    "ContractDefinition" => {
                        self.decls.insert(id, Decl::Contract(str_of(v, "name").to_string()));
                    }
                    "StructDefinition" => {
                        self.decls.insert(id, Decl::Struct);
                        self.struct_nodes.insert(id, v.clone());
                    }
                    "EnumDefinition" | "UserDefinedValueTypeDefinition" => {
                        self.decls.insert(id, Decl::Type);
                    }
                    "EventDefinition" | "ErrorDefinition" => {
                        self.decls.insert(id, Decl::Event);
                    }
                    _ => {}
                }
                for child in map.values() {
                    self.collect_decls(child);
                }
            }
            Value::Array(items) => {
                for i in items {
                    self.collect_decls(i);
                }
            }
            _ => {}
        }
        if node_type(v) == "SourceUnit" {
            let ids: Vec<AstId> = self.struct_nodes.keys().copied().collect();
            for id in ids {
                if !self.structs.contains_key(&id) {
                    let node = self.struct_nodes[&id].clone();
                    let members = nodes(&node, "members")
                        .map(|m| (str_of(m, "name").to_string(), self.type_desc(m)))
                        .collect();
                    self.structs.insert(
                        id,
                        StructDef {
                            id,
                            name: str_of(&node, "name").to_string(),
                            canonical_name: str_of(&node, "canonicalName").to_string(),
                            members,
                        },
                    );
                }
            }
        }
    }

    fn type_desc(&self, decl: &Value) -> TypeDesc {
        match decl.get("typeName") {
            Some(t) if !t.is_null() => self.type_name(t),
            _ => TypeDesc::Unknown { text: type_string(decl).to_string() },
        }
    }

    fn type_name(&self, t: &Value) -> TypeDesc {
        match node_type(t) {
            "ElementaryTypeName" => {
                let mut name = str_of(t, "name").to_string();
                if name == "uint" {
                    name = "uint256".into();
                } else if name == "int" {
                    name = "int256".into();
                }
                TypeDesc::Elementary { name }
            }
            "Mapping" => TypeDesc::Mapping {
                key: Box::new(t.get("keyType").map(|k| self.type_name(k)).unwrap_or(TypeDesc::Function)),
                value: Box::new(t.get("valueType").map(|k| self.type_name(k)).unwrap_or(TypeDesc::Function)),
            },
            "ArrayTypeName" => TypeDesc::Array {
                elem: Box::new(t.get("baseType").map(|k| self.type_name(k)).unwrap_or(TypeDesc::Function)),
            },
            "FunctionTypeName" => TypeDesc::Function,
            "UserDefinedTypeName" => {
                let name = t
                    .get("pathNode")
                    .map(|p| str_of(p, "name"))
                    .filter(|n| !n.is_empty())
                    .unwrap_or_else(|| str_of(t, "name"))
                    .to_string();
                let decl = ref_decl(t).unwrap_or(-1);
                match self.decls.get(&decl) {
                    Some(Decl::Struct) => TypeDesc::Struct { name, decl },
                    Some(Decl::Contract(n)) => TypeDesc::ContractRef { name: n.clone() },
                    Some(Decl::Type) => TypeDesc::Enum { name },
                    _ => {
                        let ts = type_string(t);
                        if ts.starts_with("contract ") {
                            TypeDesc::ContractRef { name }
                        } else {
                            TypeDesc::Unknown { text: ts.to_string() }
                        }
                    }
                }
            }
            _ => TypeDesc::Unknown { text: type_string(t).to_string() },
        }
    }

    fn contract(&mut self, v: &Value) -> ContractIR {
        let name = str_of(v, "name").to_string();
        let kind = match str_of(v, "contractKind") {
            "interface" => ContractKind::Interface,
            "library" => ContractKind::Library,
            _ => ContractKind::Contract,
        };
        let bases = nodes(v, "baseContracts")
            .map(|b| {
                let bn = b.get("baseName").cloned().unwrap_or(Value::Null);
                let n = str_of(&bn, "name");
                if n.is_empty() {
                    str_of(&bn, "namePath").to_string()
                } else {
                    n.to_string()
                }
            })
            .collect();
        let file = self.files.loc(v.get("src")).file;
        let mut c = ContractIR {
            id: id_of(v),
            name: name.clone(),
            kind,
            is_abstract: v.get("abstract").and_then(Value::as_bool).unwrap_or(false),
            file,
            loc: self.files.loc(v.get("src")),
            bases,
            state_vars: Vec::new(),
            functions: Vec::new(),
            modifiers: Vec::new(),
            flattened: false,
        };
        for node in nodes(v, "nodes") {
            match node_type(node) {
                "VariableDeclaration" => {
                    self.params.clear();
                    self.locals.clear();
                    let init = node.get("value").filter(|x| !x.is_null()).map(|x| self.expr(x));
                    let constant = node.get("constant").and_then(Value::as_bool).unwrap_or(false)
                        || matches!(str_of(node, "mutability"), "constant" | "immutable");
                    c.state_vars.push(StateVarDecl {
                        id: id_of(node),
                        name: str_of(node, "name").to_string(),
                        type_desc: self.type_desc(node),
                        type_string: type_string(node).to_string(),
                        visibility: Visibility::parse(str_of(node, "visibility")),
                        is_constant_or_immutable: constant,
                        init,
                        loc: self.files.loc(node.get("src")),
                        declared_in: name.clone(),
                    });
                }
                "FunctionDefinition" => c.functions.push(self.function(node, &name)),
                "ModifierDefinition" => {
                    self.params.clear();
                    self.locals.clear();
                    let params = self.param_list(node.get("parameters"), true);
                    let body = node.get("body").map(|b| self.block(b)).unwrap_or_default();
                    c.modifiers.push(ModifierIR {
                        decl_id: id_of(node),
                        name: str_of(node, "name").to_string(),
                        params,
                        body,
                        loc: self.files.loc(node.get("src")),
                        declared_in: name.clone(),
                    });
                }
                _ => {}
            }
        }
        c
    }

    fn param_list(&mut self, list: Option<&Value>, as_params: bool) -> Vec<Param> {
        let Some(list) = list else { return Vec::new() };
        nodes(list, "parameters")
            .map(|p| {
                let decl = id_of(p);
                if as_params {
                    self.params.insert(decl, ());
                } else {
                    self.locals.insert(decl, ());
                }
                Param {
                    decl,
                    name: str_of(p, "name").to_string(),
                    type_desc: self.type_desc(p),
                    type_string: type_string(p).to_string(),
                    storage: str_of(p, "storageLocation").to_string(),
                }
            })
            .collect()
    }

    fn function(&mut self, v: &Value, contract: &str) -> FunctionIR {
        self.params.clear();
        self.locals.clear();
        let kind = match str_of(v, "kind") {
            "constructor" => FunctionKind::Constructor,
            "fallback" => FunctionKind::Fallback,
            "receive" => FunctionKind::Receive,
            "freeFunction" => FunctionKind::Free,
            _ => {
                if v.get("isConstructor").and_then(Value::as_bool) == Some(true) {
                    FunctionKind::Constructor
                } else {
                    FunctionKind::Function
                }
            }
        };
        let params = self.param_list(v.get("parameters"), true);
        let returns = self.param_list(v.get("returnParameters"), false);
        let mut modifiers_applied = Vec::new();
        for m in nodes(v, "modifiers") {
            if str_of(m, "kind") == "baseConstructorSpecifier" {
                continue;
            }
            let mn = m.get("modifierName").cloned().unwrap_or(Value::Null);
            let decl = ref_decl(&mn);
            if matches!(decl.and_then(|d| self.decls.get(&d)), Some(Decl::Contract(_))) {
                continue;
            }
            let args = nodes(m, "arguments").map(|a| self.expr(a)).collect();
            modifiers_applied.push(ModifierCall {
                name: str_of(&mn, "name").to_string(),
                decl,
                args,
                loc: self.files.loc(m.get("src")),
            });
        }
        let body = v.get("body").filter(|b| !b.is_null()).map(|b| self.block(b));
        FunctionIR {
            decl_id: id_of(v),
            name: str_of(v, "name").to_string(),
            kind,
            params,
            returns,
            visibility: Visibility::parse(str_of(v, "visibility")),
            mutability: Mutability::parse(str_of(v, "stateMutability")),
            modifiers_applied,
            body,
            loc: self.files.loc(v.get("src")),
            declared_in: contract.to_string(),
            is_externally_reachable: false,
        }
    }

    fn block(&mut self, v: &Value) -> Vec<Stmt> {
        let mut out = Vec::new();
        self.push_stmt(v, &mut out);
        out
    }

    /// Converts `v`, splicing plain and unchecked blocks into `out`.
    fn push_stmt(&mut self, v: &Value, out: &mut Vec<Stmt>) {
        match node_type(v) {
            "Block" | "UncheckedBlock" => {
                let unchecked = node_type(v) == "UncheckedBlock";
                self.unchecked_depth += unchecked as usize;
                for s in nodes(v, "statements") {
                    self.push_stmt(s, out);
                }
                self.unchecked_depth -= unchecked as usize;
            }
            _ => {
                if let Some(s) = self.stmt(v) {
                    out.push(s);
                }
            }
        }
    }

    fn stmt(&mut self, v: &Value) -> Option<Stmt> {
        let loc = self.files.loc(v.get("src"));
        let id = id_of(v);
        if self.unchecked_depth > 0 {
            self.unchecked.insert(id);
        }
        let kind = match node_type(v) {
            "ExpressionStatement" => {
                let e = v.get("expression")?;
                self.expr_stmt(e)
            }
            "VariableDeclarationStatement" => {
                let mut vars = Vec::new();
                for d in v.get("declarations").and_then(Value::as_array).into_iter().flatten() {
                    if d.is_null() {
                        vars.push(None);
                        continue;
                    }
                    vars.push(Some(LocalDecl {
                        decl: id_of(d),
                        name: str_of(d, "name").to_string(),
                        type_desc: self.type_desc(d),
                        type_string: type_string(d).to_string(),
                        storage: str_of(d, "storageLocation").to_string(),
                    }));
                }
                let init = v.get("initialValue").filter(|x| !x.is_null()).map(|x| self.expr(x));
                for d in vars.iter().flatten() {
                    self.locals.insert(d.decl, ());
                }
                StmtKind::Declare { vars, init }
            }
            "IfStatement" => {
                let cond = self.expr(v.get("condition")?);
                let then_branch = v.get("trueBody").filter(|x| !x.is_null()).map(|b| self.block(b)).unwrap_or_default();
                let else_branch = v.get("falseBody").filter(|x| !x.is_null()).map(|b| self.block(b)).unwrap_or_default();
                StmtKind::If { cond, then_branch, else_branch }
            }
            "ForStatement" => {
                let init = v
                    .get("initializationExpression")
                    .filter(|x| !x.is_null())
                    .and_then(|x| self.stmt(x))
                    .map(Box::new);
                let cond = v.get("condition").filter(|x| !x.is_null()).map(|x| self.expr(x));
                let update = v.get("loopExpression").filter(|x| !x.is_null()).and_then(|x| self.stmt(x)).map(Box::new);
                let body = v.get("body").map(|b| self.block(b)).unwrap_or_default();
                StmtKind::Loop { kind: LoopKind::For, init, cond, update, body }
            }
            "WhileStatement" | "DoWhileStatement" => {
                let cond = v.get("condition").map(|x| self.expr(x));
                let body = v.get("body").map(|b| self.block(b)).unwrap_or_default();
                let kind = if node_type(v) == "WhileStatement" { LoopKind::While } else { LoopKind::DoWhile };
                StmtKind::Loop { kind, init: None, cond, update: None, body }
            }
            "Return" => StmtKind::Return { value: v.get("expression").filter(|x| !x.is_null()).map(|x| self.expr(x)) },
            "EmitStatement" => StmtKind::Emit { event: self.expr(v.get("eventCall")?) },
            "RevertStatement" => StmtKind::Revert,
            "Break" => StmtKind::Break,
            "Continue" => StmtKind::Continue,
            "PlaceholderStatement" => StmtKind::Placeholder,
            "InlineAssembly" => StmtKind::Unanalyzed { what: "inline assembly".into() },
            "TryStatement" => StmtKind::Unanalyzed { what: "try/catch".into() },
            "Block" | "UncheckedBlock" => StmtKind::Block { body: self.block(v) },
            other => StmtKind::Unanalyzed { what: other.to_string() },
        };
        Some(Stmt { id, loc, kind, origin: None })
    }

    fn expr_stmt(&mut self, e: &Value) -> StmtKind {
        match node_type(e) {
            "Assignment" => StmtKind::Assign {
                lhs: self.expr(&e["leftHandSide"]),
                op: str_of(e, "operator").to_string(),
                rhs: self.expr(&e["rightHandSide"]),
            },
            "UnaryOperation" => {
                let op = str_of(e, "operator");
                let operand = self.expr(&e["subExpression"]);
                let one = |value: &str, operand: &Expr| Expr {
                    id: -1,
                    loc: operand.loc.clone(),
                    ty: operand.ty.clone(),
                    kind: ExprKind::Literal { value: value.to_string() },
                };
                match op {
                    "++" => StmtKind::Assign { rhs: one("1", &operand), lhs: operand, op: "+=".into() },
                    "--" => StmtKind::Assign { rhs: one("1", &operand), lhs: operand, op: "-=".into() },
                    "delete" => StmtKind::Assign { rhs: one("0", &operand), lhs: operand, op: "delete".into() },
                    _ => StmtKind::Expr { expr: self.expr(e) },
                }
            }
            "FunctionCall" => {
                let callee = &e["expression"];
                if node_type(callee) == "Identifier" && ref_decl(callee).map(|d| !self.decls.contains_key(&d)).unwrap_or(true) {
                    match str_of(callee, "name") {
                        "require" | "assert" => {
                            let check = if str_of(callee, "name") == "require" { CheckKind::Require } else { CheckKind::Assert };
                            if let Some(cond) = nodes(e, "arguments").next() {
                                return StmtKind::Require { cond: self.expr(cond), check };
                            }
                        }
                        "revert" => return StmtKind::Revert,
                        _ => {}
                    }
                }
                StmtKind::Expr { expr: self.expr(e) }
            }
            _ => StmtKind::Expr { expr: self.expr(e) },
        }
    }

    fn expr(&mut self, v: &Value) -> Expr {
        let loc = self.files.loc(v.get("src"));
        let id = id_of(v);
        let ty = v
            .get("typeDescriptions")
            .and_then(|t| t.get("typeString"))
            .and_then(Value::as_str)
            .unwrap_or("")
            .to_string();
        let kind = match node_type(v) {
            "Identifier" => {
                let name = str_of(v, "name").to_string();
                match name.as_str() {
                    "this" if self.is_magic(v) => ExprKind::Special { special: SpecialRef::This },
                    "now" if self.is_magic(v) => ExprKind::Special { special: SpecialRef::BlockTimestamp },
                    _ => {
                        let binding = self.bind(v, &name);
                        ExprKind::Ident { name, binding }
                    }
                }
            }
            "MemberAccess" => {
                let base = self.expr(&v["expression"]);
                let member = str_of(v, "memberName").to_string();
                let special = match (&base.kind, member.as_str()) {
                    (ExprKind::Ident { name, binding: Binding::Magic { .. } }, m) => match (name.as_str(), m) {
                        ("msg", "sender") => Some(SpecialRef::MsgSender),
                        ("msg", "value") => Some(SpecialRef::MsgValue),
                        ("tx", "origin") => Some(SpecialRef::TxOrigin),
                        ("block", "timestamp") => Some(SpecialRef::BlockTimestamp),
                        ("block", "number") => Some(SpecialRef::BlockNumber),
                        _ => None,
                    },
                    (ExprKind::Special { special: SpecialRef::This | SpecialRef::AddressThis }, "balance") => {
                        Some(SpecialRef::ThisBalance)
                    }
                    _ => None,
                };
                match special {
                    Some(special) => ExprKind::Special { special },
                    None => ExprKind::Member { base: Box::new(base), member, member_decl: ref_decl(v) },
                }
            }
            "IndexAccess" => ExprKind::Index {
                base: Box::new(self.expr(&v["baseExpression"])),
                index: v.get("indexExpression").filter(|x| !x.is_null()).map(|x| Box::new(self.expr(x))),
            },
            "IndexRangeAccess" => ExprKind::Index { base: Box::new(self.expr(&v["baseExpression"])), index: None },
            "BinaryOperation" => ExprKind::Binary {
                op: str_of(v, "operator").to_string(),
                lhs: Box::new(self.expr(&v["leftExpression"])),
                rhs: Box::new(self.expr(&v["rightExpression"])),
            },
            "UnaryOperation" => ExprKind::Unary {
                op: str_of(v, "operator").to_string(),
                prefix: v.get("prefix").and_then(Value::as_bool).unwrap_or(true),
                operand: Box::new(self.expr(&v["subExpression"])),
            },
            "Assignment" => ExprKind::Assign {
                op: str_of(v, "operator").to_string(),
                lhs: Box::new(self.expr(&v["leftHandSide"])),
                rhs: Box::new(self.expr(&v["rightHandSide"])),
            },
            "FunctionCall" => {
                let kind = match str_of(v, "kind") {
                    "typeConversion" => CallKind::TypeConversion,
                    "structConstructorCall" => CallKind::StructConstructor,
                    _ => CallKind::Call,
                };
                let mut callee_v = &v["expression"];
                let mut options = Vec::new();
                if node_type(callee_v) == "FunctionCallOptions" {
                    let names: Vec<String> = nodes(callee_v, "names").filter_map(Value::as_str).map(str::to_string).collect();
                    let opts: Vec<Value> = nodes(callee_v, "options").cloned().collect();
                    for (n, o) in names.into_iter().zip(opts.iter()) {
                        options.push((n, self.expr(o)));
                    }
                    callee_v = &callee_v["expression"];
                }
                let callee = self.expr(callee_v);
                let args: Vec<Expr> = nodes(v, "arguments").map(|a| self.expr(a)).collect();
                let names = nodes(v, "names").filter_map(Value::as_str).map(str::to_string).collect();
                if kind == CallKind::TypeConversion
                    && args.len() == 1
                    && args[0].special() == Some(SpecialRef::This)
                    && matches!(&callee.kind, ExprKind::TypeName { name } if name.starts_with("address"))
                {
                    ExprKind::Special { special: SpecialRef::AddressThis }
                } else if kind == CallKind::TypeConversion
                    && args.len() == 1
                    && args[0].special() == Some(SpecialRef::AddressThis)
                {
                    ExprKind::Special { special: SpecialRef::AddressThis }
                } else {
                    ExprKind::Call { callee: Box::new(callee), args, names, kind, options }
                }
            }
            "FunctionCallOptions" => {
                let callee = self.expr(&v["expression"]);
                return callee;
            }
            "Literal" => {
                let mut value = str_of(v, "value").to_string();
                if let Some(sub) = v.get("subdenomination").and_then(Value::as_str) {
                    value = format!("{value} {sub}");
                }
                ExprKind::Literal { value }
            }
            "Conditional" => ExprKind::Conditional {
                cond: Box::new(self.expr(&v["condition"])),
                then: Box::new(self.expr(&v["trueExpression"])),
                otherwise: Box::new(self.expr(&v["falseExpression"])),
            },
            "TupleExpression" => {
                let items: Vec<Option<Expr>> = v
                    .get("components")
                    .and_then(Value::as_array)
                    .into_iter()
                    .flatten()
                    .map(|c| if c.is_null() { None } else { Some(self.expr(c)) })
                    .collect();
                if items.len() == 1 && v.get("isInlineArray").and_then(Value::as_bool) != Some(true) {
                    if let Some(Some(inner)) = items.into_iter().next() {
                        return inner;
                    }
                    ExprKind::Tuple { items: Vec::new() }
                } else {
                    ExprKind::Tuple { items }
                }
            }
            "ElementaryTypeNameExpression" => {
                let tn = v.get("typeName");
                let name = match tn {
                    Some(Value::String(s)) => s.clone(),
                    Some(t) => str_of(t, "name").to_string(),
                    None => String::new(),
                };
                ExprKind::TypeName { name }
            }
            "NewExpression" => ExprKind::New { type_name: type_string(v).to_string() },
            other => ExprKind::Opaque { node_type: other.to_string() },
        };
        Expr { id, loc, ty, kind }
    }

    fn is_magic(&self, v: &Value) -> bool {
        ref_decl(v).map(|d| !self.decls.contains_key(&d) && !self.params.contains_key(&d) && !self.locals.contains_key(&d)).unwrap_or(true)
    }

    fn bind(&self, v: &Value, name: &str) -> Binding {
        let Some(decl) = ref_decl(v) else {
            return if MAGIC.contains(&name) { Binding::Magic { name: name.into() } } else { Binding::Unresolved };
        };
        if self.params.contains_key(&decl) {
            return Binding::Param { decl };
        }
        if self.locals.contains_key(&decl) {
            return Binding::Local { decl };
        }
        match self.decls.get(&decl) {
            Some(Decl::StateVar(n)) => Binding::State { name: n.clone() },
            Some(Decl::Function) => Binding::Function { decl },
            Some(Decl::Modifier) => Binding::Modifier { decl },
            Some(Decl::Contract(n)) => Binding::Contract { name: n.clone() },
            Some(Decl::Struct) | Some(Decl::Type) => Binding::Type,
            Some(Decl::Event) => Binding::Event,
            None if MAGIC.contains(&name) => Binding::Magic { name: name.into() },
            None => Binding::Unresolved,
        }
    }
}

fn type_string(v: &Value) -> &str {
    v.get("typeDescriptions").and_then(|t| t.get("typeString")).and_then(Value::as_str).unwrap_or("")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn malformed_bytes_are_a_parse_error() {
        assert!(matches!(load_ast(b"{]"), Err(Error::Parse(_))));
    }

    #[test]
    fn non_ast_json_is_a_parse_error() {
        assert!(matches!(load_ast(br#"{"hello": 1}"#), Err(Error::Parse(_))));
    }

    #[test]
    fn legacy_ast_is_rejected_with_version() {
        let legacy = br#"{"sources":{"a.sol":{"AST":{"name":"SourceUnit","children":[]}}},"version":"0.4.24+commit.e67f0147"}"#;
        match load_ast(legacy) {
            Err(Error::UnsupportedVersion { found }) => assert!(found.starts_with("0.4.24")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn pragma_outside_range_is_rejected() {
        let ast = br#"{"nodeType":"SourceUnit","id":3,"src":"0:10:0","absolutePath":"a.sol","nodes":[
            {"nodeType":"PragmaDirective","id":1,"src":"0:23:0","literals":["solidity","^","0.5",".17"]}]}"#;
        match load_ast(ast) {
            Err(Error::UnsupportedVersion { found }) => assert_eq!(found, "^0.5.17"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn version_bounds() {
        assert_eq!(lowest_version("^0.8.0"), Some((0, 8)));
        assert_eq!(lowest_version(">=0.6.2<0.9.0"), Some((0, 6)));
        assert_eq!(lowest_version("0.7.6+commit.7338295f"), Some((0, 7)));
        assert!(check_version("0.9.1", "0.9.1").is_err());
    }

    #[test]
    fn cli_text_output_is_accepted() {
        let text = "JSON AST (compact format):\n\n\n======= a.sol =======\n{\"nodeType\":\"SourceUnit\",\"id\":1,\"src\":\"0:0:0\",\"absolutePath\":\"a.sol\",\"nodes\":[]}\n";
        let unit = load_ast(text.as_bytes()).unwrap();
        assert!(unit.contracts.is_empty());
    }
}
