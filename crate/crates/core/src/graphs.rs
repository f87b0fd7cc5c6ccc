//! Per-contract bundle of inlined bodies, CFGs, def-use facts and the call graph.

use std::collections::BTreeMap;

use crate::callgraph::{build_callgraph, CallGraph};
use crate::cfg::{build_cfg_from, inline_modifiers, Cfg};
use crate::defuse::{build_defuse, DefUse, Scope};
use crate::ir::*;

pub struct FnGraphs<'a> {
    pub decl: AstId,
    pub func: &'a FunctionIR,
    /// Declaring contract for library functions, otherwise the analyzed contract.
    pub owner: &'a ContractIR,
    pub body: Vec<Stmt>,
    pub scope: Scope<'a>,
    pub cfg: Cfg,
    pub defuse: DefUse,
}

pub struct ContractGraphs<'a> {
    pub unit: &'a SourceUnit,
    pub contract: &'a ContractIR,
    pub fns: BTreeMap<AstId, FnGraphs<'a>>,
    /// Library functions of the unit, analyzed in their own contract.
    pub lib_fns: BTreeMap<AstId, FnGraphs<'a>>,
    pub callgraph: CallGraph,
    pub notes: Vec<String>,
}

impl<'a> ContractGraphs<'a> {
    pub fn function(&self, decl: AstId) -> Option<&'a FunctionIR> {
        self.contract.functions.iter().find(|f| f.decl_id == decl)
    }

    /// Graphs of a contract or library function.
    pub fn graphs(&self, decl: AstId) -> Option<&FnGraphs<'a>> {
        self.fns.get(&decl).or_else(|| self.lib_fns.get(&decl))
    }

    pub fn scope(&self, decl: AstId) -> Option<&Scope<'a>> {
        self.graphs(decl).map(|fg| &fg.scope)
    }

    /// Function name for display, e.g. in findings.
    pub fn name(&self, decl: AstId) -> String {
        self.function(decl).map(|f| f.display_name()).unwrap_or_else(|| format!("#{}", decl))
    }
}

fn fn_graphs<'a>(unit: &'a SourceUnit, owner: &'a ContractIR, f: &'a FunctionIR, notes: &mut Vec<String>) -> FnGraphs<'a> {
    let body = inline_modifiers(f, owner, notes);
    let cfg = build_cfg_from(&f.display_name(), &body);
    let scope = Scope::new(unit, owner, f, &body);
    let defuse = build_defuse(&scope, &cfg);
    notes.extend(defuse.diagnostics.iter().cloned());
    FnGraphs { decl: f.decl_id, func: f, owner, body, scope, cfg, defuse }
}

pub fn build_graphs<'a>(unit: &'a SourceUnit, contract: &'a ContractIR) -> ContractGraphs<'a> {
    let mut notes = Vec::new();
    let mut fns = BTreeMap::new();
    for f in contract.functions.iter().filter(|f| f.body.is_some()) {
        fns.insert(f.decl_id, fn_graphs(unit, contract, f, &mut notes));
    }
    let mut lib_notes = Vec::new();
    let mut lib_fns = BTreeMap::new();
    for lib in unit.contracts.iter().filter(|c| c.kind == ContractKind::Library) {
        for f in lib.functions.iter().filter(|f| f.body.is_some()) {
            lib_fns.insert(f.decl_id, fn_graphs(unit, lib, f, &mut lib_notes));
        }
    }
    let bodies: BTreeMap<AstId, Vec<Stmt>> = fns.iter().map(|(k, v)| (*k, v.body.clone())).collect();
    let callgraph = build_callgraph(unit, contract, &bodies);
    notes.sort();
    notes.dedup();
    ContractGraphs { unit, contract, fns, lib_fns, callgraph, notes }
}
