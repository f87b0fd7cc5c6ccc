//! Random loop-free staking-like contracts, emitted directly as solc compact-AST
//! JSON, plus a brute-force closure oracle for the state variables a transfer
//! amount depends on.

use std::collections::{BTreeMap, BTreeSet};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::{json, Value};

#[derive(Debug, Clone, PartialEq)]
pub enum Atom {
    State(usize),
    Local(usize),
    Param,
    Lit(u32),
    Helper(usize),
}

/// Sum or product of atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub atoms: Vec<Atom>,
    pub op: &'static str,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    State(usize),
    Local(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stmt {
    Decl { local: usize, value: Term },
    Assign { target: Target, value: Term },
    Require { lhs: Term, rhs: Term },
    If { lhs: Term, rhs: Term, target: Target, value: Term },
    Transfer { amount: Term },
}

#[derive(Debug, Clone)]
pub struct Func {
    pub stmts: Vec<Stmt>,
    pub locals: usize,
}

#[derive(Debug, Clone)]
pub struct Program {
    pub states: usize,
    pub helpers: Vec<Term>,
    pub funcs: Vec<Func>,
}

fn term(rng: &mut StdRng, states: usize, locals: usize, helpers: usize, allow_local_param: bool) -> Term {
    let n = rng.gen_range(1..=3);
    let atoms = (0..n)
        .map(|_| loop {
            match rng.gen_range(0..5) {
                0 | 1 => break Atom::State(rng.gen_range(0..states)),
                2 if allow_local_param && locals > 0 => break Atom::Local(rng.gen_range(0..locals)),
                3 if allow_local_param => break Atom::Param,
                4 if helpers > 0 && rng.gen_bool(0.5) => break Atom::Helper(rng.gen_range(0..helpers)),
                4 => break Atom::Lit(rng.gen_range(1..100)),
                _ => {}
            }
        })
        .collect();
    Term { atoms, op: if rng.gen_bool(0.5) { "+" } else { "*" } }
}

impl Program {
    /// At most `max_assign` assignments across the contract; function 0 ends with the transfer.
    pub fn random(seed: u64, max_assign: usize) -> Program {
        let mut rng = StdRng::seed_from_u64(seed);
        let states = rng.gen_range(2..=6);
        let nh = rng.gen_range(0..=2);
        let helpers: Vec<Term> = (0..nh).map(|_| term(&mut rng, states, 0, 0, false)).collect();
        let nf = rng.gen_range(1..=3);
        let mut budget = max_assign;
        let mut funcs = Vec::new();
        for f in 0..nf {
            let mut stmts = Vec::new();
            let mut locals = 0;
            let len = rng.gen_range(1..=7);
            for _ in 0..len {
                if budget == 0 {
                    break;
                }
                let target = |rng: &mut StdRng, locals: usize| {
                    if locals > 0 && rng.gen_bool(0.4) {
                        Target::Local(rng.gen_range(0..locals))
                    } else {
                        Target::State(rng.gen_range(0..states))
                    }
                };
                match rng.gen_range(0..5) {
                    0 => {
                        let value = term(&mut rng, states, locals, nh, true);
                        stmts.push(Stmt::Decl { local: locals, value });
                        locals += 1;
                        budget -= 1;
                    }
                    1 | 2 => {
                        let t = target(&mut rng, locals);
                        let value = term(&mut rng, states, locals, nh, true);
                        stmts.push(Stmt::Assign { target: t, value });
                        budget -= 1;
                    }
                    3 => {
                        let lhs = term(&mut rng, states, locals, nh, true);
                        let rhs = term(&mut rng, states, locals, nh, true);
                        stmts.push(Stmt::Require { lhs, rhs });
                    }
                    _ => {
                        let lhs = term(&mut rng, states, locals, nh, true);
                        let rhs = term(&mut rng, states, locals, nh, true);
                        let t = target(&mut rng, locals);
                        let value = term(&mut rng, states, locals, nh, true);
                        stmts.push(Stmt::If { lhs, rhs, target: t, value });
                        budget -= 1;
                    }
                }
            }
            if f == 0 {
                let amount = term(&mut rng, states, locals, nh, true);
                stmts.push(Stmt::Transfer { amount });
            }
            funcs.push(Func { stmts, locals });
        }
        Program { states, helpers, funcs }
    }

    pub fn assignments(&self) -> usize {
        self.funcs
            .iter()
            .flat_map(|f| &f.stmts)
            .filter(|s| matches!(s, Stmt::Decl { .. } | Stmt::Assign { .. } | Stmt::If { .. }))
            .count()
    }

    pub fn to_solidity(&self) -> String {
        fn atom(a: &Atom) -> String {
            match a {
                Atom::State(i) => format!("s{}", i),
                Atom::Local(i) => format!("l{}", i),
                Atom::Param => "p".into(),
                Atom::Lit(v) => v.to_string(),
                Atom::Helper(i) => format!("h{}()", i),
            }
        }
        fn t(x: &Term) -> String {
            x.atoms.iter().map(atom).collect::<Vec<_>>().join(&format!(" {} ", x.op))
        }
        fn tg(x: &Target) -> String {
            match x {
                Target::State(i) => format!("s{}", i),
                Target::Local(i) => format!("l{}", i),
            }
        }
        let mut out = String::from("contract Rand {\n    IERC20 token;\n");
        for i in 0..self.states {
            out += &format!("    uint256 s{};\n", i);
        }
        for (i, h) in self.helpers.iter().enumerate() {
            out += &format!("    function h{}() internal view returns (uint256) {{ return {}; }}\n", i, t(h));
        }
        for (i, f) in self.funcs.iter().enumerate() {
            out += &format!("    function f{}(uint256 p) external {{\n", i);
            for s in &f.stmts {
                out += &match s {
                    Stmt::Decl { local, value } => format!("        uint256 l{} = {};\n", local, t(value)),
                    Stmt::Assign { target, value } => format!("        {} = {};\n", tg(target), t(value)),
                    Stmt::Require { lhs, rhs } => format!("        require({} > {});\n", t(lhs), t(rhs)),
                    Stmt::If { lhs, rhs, target, value } => {
                        format!("        if ({} > {}) {{ {} = {}; }}\n", t(lhs), t(rhs), tg(target), t(value))
                    }
                    Stmt::Transfer { amount } => format!("        token.transfer(msg.sender, {});\n", t(amount)),
                };
            }
            out += "    }\n";
        }
        out += "}\n";
        out
    }
}

/// Brute-force oracle: every assignment (declarations included) makes its
/// target depend on the atoms of its value and of every condition guarding it;
/// the result is the set of state variables reachable from the transfer.
pub fn oracle_state_dep(p: &Program) -> BTreeSet<usize> {
    #[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
    enum V {
        State(usize),
        Local(usize, usize),
        Helper(usize),
    }
    let lift = |f: usize, a: &Atom| match a {
        Atom::State(i) => Some(V::State(*i)),
        Atom::Local(i) => Some(V::Local(f, *i)),
        Atom::Helper(i) => Some(V::Helper(*i)),
        Atom::Param | Atom::Lit(_) => None,
    };
    let mut deps: BTreeMap<V, BTreeSet<V>> = BTreeMap::new();
    for (i, h) in p.helpers.iter().enumerate() {
        deps.entry(V::Helper(i)).or_default().extend(h.atoms.iter().filter_map(|a| lift(usize::MAX, a)));
    }
    let mut roots = BTreeSet::new();
    for (fi, f) in p.funcs.iter().enumerate() {
        let mut guards: Vec<V> = Vec::new();
        for s in &f.stmts {
            let tv = |t: &Target| match t {
                Target::State(i) => V::State(*i),
                Target::Local(i) => V::Local(fi, *i),
            };
            match s {
                Stmt::Decl { local, value } => {
                    let e = deps.entry(V::Local(fi, *local)).or_default();
                    e.extend(value.atoms.iter().filter_map(|a| lift(fi, a)));
                    e.extend(guards.iter().copied());
                }
                Stmt::Assign { target, value } => {
                    let e = deps.entry(tv(target)).or_default();
                    e.extend(value.atoms.iter().filter_map(|a| lift(fi, a)));
                    e.extend(guards.iter().copied());
                }
                Stmt::Require { lhs, rhs } => {
                    guards.extend(lhs.atoms.iter().chain(&rhs.atoms).filter_map(|a| lift(fi, a)));
                }
                Stmt::If { lhs, rhs, target, value } => {
                    let e = deps.entry(tv(target)).or_default();
                    e.extend(value.atoms.iter().filter_map(|a| lift(fi, a)));
                    e.extend(guards.iter().copied());
                    e.extend(lhs.atoms.iter().chain(&rhs.atoms).filter_map(|a| lift(fi, a)));
                }
                Stmt::Transfer { amount } => {
                    roots.extend(amount.atoms.iter().filter_map(|a| lift(fi, a)));
                    roots.extend(guards.iter().copied());
                }
            }
        }
    }
    let mut seen = BTreeSet::new();
    let mut stack: Vec<V> = roots.into_iter().collect();
    while let Some(v) = stack.pop() {
        if seen.insert(v) {
            if let Some(d) = deps.get(&v) {
                stack.extend(d.iter().copied());
            }
        }
    }
    seen.into_iter().filter_map(|v| if let V::State(i) = v { Some(i) } else { None }).collect()
}

/// Emits solc-shaped compact AST JSON for a program.
pub struct AstWriter {
    next: i64,
    pos: usize,
}

const UINT: (&str, &str) = ("t_uint256", "uint256");
const BOOL: (&str, &str) = ("t_bool", "bool");

fn td(t: (&str, &str)) -> Value {
    json!({"typeIdentifier": t.0, "typeString": t.1})
}

impl AstWriter {
    fn id(&mut self) -> i64 {
        self.next += 1;
        self.next
    }

    fn src(&mut self) -> String {
        self.pos += 2;
        format!("{}:1:0", self.pos)
    }

    fn ident(&mut self, name: &str, decl: i64, t: (&str, &str)) -> Value {
        json!({"id": self.id(), "name": name, "nodeType": "Identifier", "overloadedDeclarations": [],
               "referencedDeclaration": decl, "src": self.src(), "typeDescriptions": td(t)})
    }

    fn elementary(&mut self, t: (&str, &str)) -> Value {
        json!({"id": self.id(), "name": t.1, "nodeType": "ElementaryTypeName", "src": self.src(), "typeDescriptions": td(t)})
    }

    fn var_decl(&mut self, id: i64, name: &str, scope: i64, state: bool) -> Value {
        let tn = self.elementary(UINT);
        json!({"constant": false, "id": id, "mutability": "mutable", "name": name, "nodeType": "VariableDeclaration",
               "scope": scope, "src": self.src(), "stateVariable": state, "storageLocation": "default",
               "typeDescriptions": td(UINT), "typeName": tn, "visibility": "internal"})
    }

    fn call(&mut self, callee: Value, args: Vec<Value>, ret: (&str, &str)) -> Value {
        json!({"arguments": args, "expression": callee, "id": self.id(), "isConstant": false, "isLValue": false,
               "isPure": false, "kind": "functionCall", "lValueRequested": false, "names": [], "nodeType": "FunctionCall",
               "src": self.src(), "tryCall": false, "typeDescriptions": td(ret)})
    }

    fn binop(&mut self, op: &str, l: Value, r: Value, t: (&str, &str)) -> Value {
        json!({"commonType": td(UINT), "id": self.id(), "isConstant": false, "isLValue": false, "isPure": false,
               "lValueRequested": false, "leftExpression": l, "nodeType": "BinaryOperation", "operator": op,
               "rightExpression": r, "src": self.src(), "typeDescriptions": td(t)})
    }

    fn expr_stmt(&mut self, e: Value) -> Value {
        json!({"expression": e, "id": self.id(), "nodeType": "ExpressionStatement", "src": self.src()})
    }

    fn block(&mut self, stmts: Vec<Value>) -> Value {
        json!({"id": self.id(), "nodeType": "Block", "src": self.src(), "statements": stmts})
    }

    fn params(&mut self, ps: Vec<Value>) -> Value {
        json!({"id": self.id(), "nodeType": "ParameterList", "parameters": ps, "src": self.src()})
    }
}

struct Ids {
    states: Vec<i64>,
    helpers: Vec<i64>,
    token: i64,
    transfer_fn: i64,
    erc20: i64,
}

impl Program {
    pub fn to_ast_json(&self) -> Vec<u8> {
        let mut w = AstWriter { next: 0, pos: 0 };
        // Interface IERC20 { function transfer(address, uint256) external returns (bool); }
        let erc20 = w.id();
        let transfer_fn = w.id();
        let to_decl = w.id();
        let amt_decl = w.id();
        let ret_decl = w.id();
        let addr_tn = w.elementary(("t_address", "address"));
        let amt_tn = w.elementary(UINT);
        let bool_tn = w.elementary(BOOL);
        let vd = |w: &mut AstWriter, id: i64, name: &str, tn: Value, t: (&str, &str)| {
            json!({"constant": false, "id": id, "mutability": "mutable", "name": name, "nodeType": "VariableDeclaration",
                   "scope": transfer_fn, "src": w.src(), "stateVariable": false, "storageLocation": "default",
                   "typeDescriptions": td(t), "typeName": tn, "visibility": "internal"})
        };
        let p_to = vd(&mut w, to_decl, "to", addr_tn, ("t_address", "address"));
        let p_amt = vd(&mut w, amt_decl, "amount", amt_tn, UINT);
        let p_ret = vd(&mut w, ret_decl, "", bool_tn, BOOL);
        let params = w.params(vec![p_to, p_amt]);
        let rets = w.params(vec![p_ret]);
        let transfer_def = json!({"functionSelector": "a9059cbb", "id": transfer_fn, "implemented": false, "kind": "function",
            "modifiers": [], "name": "transfer", "nodeType": "FunctionDefinition", "parameters": params,
            "returnParameters": rets, "scope": erc20, "src": w.src(), "stateMutability": "nonpayable", "virtual": false,
            "visibility": "external"});
        let iface = json!({"abstract": false, "baseContracts": [], "canonicalName": "IERC20", "contractDependencies": [],
            "contractKind": "interface", "fullyImplemented": false, "id": erc20, "linearizedBaseContracts": [erc20],
            "name": "IERC20", "nodeType": "ContractDefinition", "nodes": [transfer_def], "scope": 0, "src": w.src()});

        let contract = w.id();
        let mut nodes = Vec::new();
        let token = w.id();
        let token_tn = json!({"id": w.id(), "pathNode": {"id": w.id(), "name": "IERC20", "nodeType": "IdentifierPath",
            "referencedDeclaration": erc20, "src": w.src()}, "nodeType": "UserDefinedTypeName",
            "referencedDeclaration": erc20, "src": w.src(),
            "typeDescriptions": {"typeIdentifier": format!("t_contract$_IERC20_${}", erc20), "typeString": "contract IERC20"}});
        nodes.push(json!({"constant": false, "id": token, "mutability": "mutable", "name": "token",
            "nodeType": "VariableDeclaration", "scope": contract, "src": w.src(), "stateVariable": true,
            "storageLocation": "default",
            "typeDescriptions": {"typeIdentifier": format!("t_contract$_IERC20_${}", erc20), "typeString": "contract IERC20"},
            "typeName": token_tn, "visibility": "internal"}));
        let mut ids = Ids { states: Vec::new(), helpers: Vec::new(), token, transfer_fn, erc20 };
        for i in 0..self.states {
            let id = w.id();
            ids.states.push(id);
            nodes.push(w.var_decl(id, &format!("s{}", i), contract, true));
        }
        for _ in &self.helpers {
            ids.helpers.push(w.id());
        }
        for (i, h) in self.helpers.iter().enumerate() {
            let id = ids.helpers[i];
            let e = self.term_ast(&mut w, &ids, h, &[], None);
            let ret = json!({"expression": e, "functionReturnParameters": 0, "id": w.id(), "nodeType": "Return", "src": w.src()});
            let body = w.block(vec![ret]);
            let params = w.params(vec![]);
            let rdecl = w.id();
            let rv = w.var_decl(rdecl, "", id, false);
            let rets = w.params(vec![rv]);
            nodes.push(json!({"body": body, "id": id, "implemented": true, "kind": "function", "modifiers": [],
                "name": format!("h{}", i), "nodeType": "FunctionDefinition", "parameters": params,
                "returnParameters": rets, "scope": contract, "src": w.src(), "stateMutability": "view",
                "virtual": false, "visibility": "internal"}));
        }
        for (i, f) in self.funcs.iter().enumerate() {
            let fid = w.id();
            let pid = w.id();
            let locals: Vec<i64> = (0..f.locals).map(|_| w.id()).collect();
            let mut stmts = Vec::new();
            for s in &f.stmts {
                stmts.push(self.stmt_ast(&mut w, &ids, s, &locals, pid, fid));
            }
            let body = w.block(stmts);
            let pv = w.var_decl(pid, "p", fid, false);
            let params = w.params(vec![pv]);
            let rets = w.params(vec![]);
            nodes.push(json!({"body": body, "id": fid, "implemented": true, "kind": "function", "modifiers": [],
                "name": format!("f{}", i), "nodeType": "FunctionDefinition", "parameters": params,
                "returnParameters": rets, "scope": contract, "src": w.src(), "stateMutability": "nonpayable",
                "virtual": false, "visibility": "external"}));
        }
        let c = json!({"abstract": false, "baseContracts": [], "canonicalName": "Rand", "contractDependencies": [],
            "contractKind": "contract", "fullyImplemented": true, "id": contract, "linearizedBaseContracts": [contract],
            "name": "Rand", "nodeType": "ContractDefinition", "nodes": nodes, "scope": 0, "src": w.src()});
        let pragma = json!({"id": w.id(), "literals": ["solidity", "^", "0.8", ".0"], "nodeType": "PragmaDirective", "src": w.src()});
        let unit = json!({"absolutePath": "rand.sol", "exportedSymbols": {}, "id": w.id(), "nodeType": "SourceUnit",
            "nodes": [pragma, iface, c], "src": "0:100000:0"});
        serde_json::to_vec(&unit).expect("serializable")
    }

    fn atom_ast(&self, w: &mut AstWriter, ids: &Ids, a: &Atom, locals: &[i64], param: Option<i64>) -> Value {
        match a {
            Atom::State(i) => w.ident(&format!("s{}", i), ids.states[*i], UINT),
            Atom::Local(i) => w.ident(&format!("l{}", i), locals[*i], UINT),
            Atom::Param => w.ident("p", param.expect("param in scope"), UINT),
            Atom::Lit(v) => {
                let t = format!("t_rational_{}_by_1", v);
                let s = format!("int_const {}", v);
                json!({"hexValue": hex_of(&v.to_string()), "id": w.id(), "isConstant": false, "isLValue": false,
                       "isPure": true, "kind": "number", "lValueRequested": false, "nodeType": "Literal",
                       "src": w.src(), "typeDescriptions": {"typeIdentifier": t, "typeString": s}, "value": v.to_string()})
            }
            Atom::Helper(i) => {
                let callee = w.ident(
                    &format!("h{}", i),
                    ids.helpers[*i],
                    ("t_function_internal_view$__$returns$_t_uint256_$", "function () view returns (uint256)"),
                );
                w.call(callee, vec![], UINT)
            }
        }
    }

    fn term_ast(&self, w: &mut AstWriter, ids: &Ids, t: &Term, locals: &[i64], param: Option<i64>) -> Value {
        let mut it = t.atoms.iter();
        let first = it.next().expect("non-empty term");
        let mut e = self.atom_ast(w, ids, first, locals, param);
        for a in it {
            let r = self.atom_ast(w, ids, a, locals, param);
            e = w.binop(t.op, e, r, UINT);
        }
        e
    }

    fn target_ast(&self, w: &mut AstWriter, ids: &Ids, t: &Target, locals: &[i64]) -> Value {
        match t {
            Target::State(i) => w.ident(&format!("s{}", i), ids.states[*i], UINT),
            Target::Local(i) => w.ident(&format!("l{}", i), locals[*i], UINT),
        }
    }

    fn assign_ast(&self, w: &mut AstWriter, ids: &Ids, t: &Target, v: &Term, locals: &[i64], pid: i64) -> Value {
        let lhs = self.target_ast(w, ids, t, locals);
        let rhs = self.term_ast(w, ids, v, locals, Some(pid));
        let a = json!({"id": w.id(), "isConstant": false, "isLValue": false, "isPure": false, "lValueRequested": false,
            "leftHandSide": lhs, "nodeType": "Assignment", "operator": "=", "rightHandSide": rhs, "src": w.src(),
            "typeDescriptions": td(UINT)});
        w.expr_stmt(a)
    }

    fn stmt_ast(&self, w: &mut AstWriter, ids: &Ids, s: &Stmt, locals: &[i64], pid: i64, fid: i64) -> Value {
        match s {
            Stmt::Decl { local, value } => {
                let decl = w.var_decl(locals[*local], &format!("l{}", local), fid, false);
                let init = self.term_ast(w, ids, value, locals, Some(pid));
                json!({"assignments": [locals[*local]], "declarations": [decl], "id": w.id(), "initialValue": init,
                       "nodeType": "VariableDeclarationStatement", "src": w.src()})
            }
            Stmt::Assign { target, value } => self.assign_ast(w, ids, target, value, locals, pid),
            Stmt::Require { lhs, rhs } => {
                let l = self.term_ast(w, ids, lhs, locals, Some(pid));
                let r = self.term_ast(w, ids, rhs, locals, Some(pid));
                let cond = w.binop(">", l, r, BOOL);
                let callee = w.ident("require", 4294967278, ("t_function_require_pure$_t_bool_$returns$__$", "function (bool) pure"));
                let c = w.call(callee, vec![cond], ("t_tuple$__$", "tuple()"));
                w.expr_stmt(c)
            }
            Stmt::If { lhs, rhs, target, value } => {
                let l = self.term_ast(w, ids, lhs, locals, Some(pid));
                let r = self.term_ast(w, ids, rhs, locals, Some(pid));
                let cond = w.binop(">", l, r, BOOL);
                let a = self.assign_ast(w, ids, target, value, locals, pid);
                let body = w.block(vec![a]);
                json!({"condition": cond, "id": w.id(), "nodeType": "IfStatement", "src": w.src(), "trueBody": body})
            }
            Stmt::Transfer { amount } => {
                let ctype = json!({"typeIdentifier": format!("t_contract$_IERC20_${}", ids.erc20), "typeString": "contract IERC20"});
                let tok = json!({"id": w.id(), "name": "token", "nodeType": "Identifier", "overloadedDeclarations": [],
                    "referencedDeclaration": ids.token, "src": w.src(), "typeDescriptions": ctype});
                let member = json!({"expression": tok, "id": w.id(), "isConstant": false, "isLValue": false, "isPure": false,
                    "lValueRequested": false, "memberName": "transfer", "nodeType": "MemberAccess",
                    "referencedDeclaration": ids.transfer_fn, "src": w.src(),
                    "typeDescriptions": {"typeIdentifier": "t_function_external_nonpayable$_t_address_$_t_uint256_$returns$_t_bool_$",
                                         "typeString": "function (address,uint256) external returns (bool)"}});
                let msg = w.ident("msg", 4294967281, ("t_magic_message", "msg"));
                let sender = json!({"expression": msg, "id": w.id(), "isConstant": false, "isLValue": false, "isPure": false,
                    "lValueRequested": false, "memberName": "sender", "nodeType": "MemberAccess", "src": w.src(),
                    "typeDescriptions": td(("t_address", "address"))});
                let amt = self.term_ast(w, ids, amount, locals, Some(pid));
                let c = w.call(member, vec![sender, amt], BOOL);
                w.expr_stmt(c)
            }
        }
    }
}

fn hex_of(s: &str) -> String {
    s.bytes().map(|b| format!("{:02x}", b)).collect()
}
