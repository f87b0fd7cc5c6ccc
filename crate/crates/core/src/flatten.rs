//! Inheritance flattening with Solidity's C3 linearization.

use std::collections::{BTreeSet, HashMap, HashSet};

use crate::error::{Error, Result};
use crate::ir::{ContractIR, ContractKind, FunctionKind, SourceUnit};

/// Linearization of `name`, most derived first. Unknown bases are skipped and
/// reported through `missing`.
pub fn linearize(unit: &SourceUnit, name: &str, missing: &mut BTreeSet<String>) -> Result<Vec<String>> {
    let by_name: HashMap<&str, &ContractIR> = unit.contracts.iter().map(|c| (c.name.as_str(), c)).collect();
    let mut memo = HashMap::new();
    let mut stack = Vec::new();
    lin(&by_name, name, &mut memo, &mut stack, missing)
}

fn lin(
    by_name: &HashMap<&str, &ContractIR>,
    name: &str,
    memo: &mut HashMap<String, Vec<String>>,
    stack: &mut Vec<String>,
    missing: &mut BTreeSet<String>,
) -> Result<Vec<String>> {
    if let Some(l) = memo.get(name) {
        return Ok(l.clone());
    }
    if stack.iter().any(|s| s == name) {
        return Err(Error::CyclicInheritance(name.to_string()));
    }
    let Some(c) = by_name.get(name) else {
        missing.insert(name.to_string());
        return Ok(Vec::new());
    };
    stack.push(name.to_string());
    // Solidity lists bases from "most base-like" to "most derived".
    let mut seqs: Vec<Vec<String>> = Vec::new();
    let mut direct = Vec::new();
    for b in c.bases.iter().rev() {
        let l = lin(by_name, b, memo, stack, missing)?;
        if !l.is_empty() {
            seqs.push(l);
            direct.push(b.clone());
        }
    }
    stack.pop();
    seqs.push(direct);
    let mut out = vec![name.to_string()];
    loop {
        seqs.retain(|s| !s.is_empty());
        if seqs.is_empty() {
            break;
        }
        let head = seqs
            .iter()
            .map(|s| s[0].clone())
            .find(|cand| !seqs.iter().any(|s| s[1..].contains(cand)));
        let Some(head) = head else {
            return Err(Error::CyclicInheritance(name.to_string()));
        };
        for s in seqs.iter_mut() {
            if s[0] == head {
                s.remove(0);
            }
        }
        out.push(head);
    }
    memo.insert(name.to_string(), out.clone());
    Ok(out)
}

/// Copies inherited members into every contract. Overridden functions keep the
/// most derived body; state variables are ordered base-first like storage.
pub fn flatten_inheritance(mut unit: SourceUnit) -> Result<SourceUnit> {
    let mut flattened = Vec::with_capacity(unit.contracts.len());
    let mut notes = Vec::new();
    for c in &unit.contracts {
        let mut missing = BTreeSet::new();
        let order = linearize(&unit, &c.name, &mut missing)?;
        for m in &missing {
            notes.push(format!("{}: unresolved base `{}`", c.name, m));
        }
        let mut out = c.clone();
        out.state_vars.clear();
        out.functions.clear();
        out.modifiers.clear();
        let mut seen_sigs = HashSet::new();
        let mut seen_mods = HashSet::new();
        for base in &order {
            let Some(b) = unit.contract(base) else { continue };
            for f in &b.functions {
                if f.kind == FunctionKind::Constructor && b.name != c.name {
                    continue;
                }
                if seen_sigs.insert(f.signature()) {
                    out.functions.push(f.clone());
                }
            }
            for m in &b.modifiers {
                if seen_mods.insert(m.name.clone()) {
                    out.modifiers.push(m.clone());
                }
            }
        }
        // `modifier()` looks up from the back, so keep the most derived last.
        out.modifiers.reverse();
        for base in order.iter().rev() {
            if let Some(b) = unit.contract(base) {
                out.state_vars.extend(b.state_vars.iter().cloned());
            }
        }
        out.flattened = true;
        flattened.push(out);
    }
    unit.contracts = flattened;
    unit.notes.extend(notes);
    Ok(unit)
}

/// Contracts worth analyzing: concrete and not inherited by another contract in the unit.
pub fn analysis_targets(unit: &SourceUnit) -> Vec<&ContractIR> {
    let used_as_base: HashSet<&str> =
        unit.contracts.iter().flat_map(|c| c.bases.iter().map(String::as_str)).collect();
    unit.contracts
        .iter()
        .filter(|c| c.kind == ContractKind::Contract && !c.is_abstract && !used_as_base.contains(c.name.as_str()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::*;
    use std::sync::Arc;

    fn contract(name: &str, bases: &[&str]) -> ContractIR {
        let file: Arc<str> = Arc::from("t.sol");
        ContractIR {
            id: 0,
            name: name.into(),
            kind: ContractKind::Contract,
            is_abstract: false,
            file: file.clone(),
            loc: Loc::unknown(&file),
            bases: bases.iter().map(|s| s.to_string()).collect(),
            state_vars: vec![],
            functions: vec![],
            modifiers: vec![],
            flattened: false,
        }
    }

    fn func(name: &str, owner: &str) -> FunctionIR {
        let file: Arc<str> = Arc::from("t.sol");
        FunctionIR {
            decl_id: 0,
            name: name.into(),
            kind: FunctionKind::Function,
            params: vec![],
            returns: vec![],
            visibility: Visibility::Public,
            mutability: Mutability::Nonpayable,
            modifiers_applied: vec![],
            body: Some(vec![]),
            loc: Loc::unknown(&file),
            declared_in: owner.into(),
            is_externally_reachable: false,
        }
    }

    fn unit(contracts: Vec<ContractIR>) -> SourceUnit {
        SourceUnit {
            path: "t".into(),
            pragma: String::new(),
            source_hash: String::new(),
            contracts,
            notes: vec![],
            structs: Default::default(),
            unchecked: Default::default(),
        }
    }

    #[test]
    fn diamond_linearization() {
        let u = unit(vec![contract("A", &[]), contract("B", &["A"]), contract("C", &["A"]), contract("D", &["B", "C"])]);
        let l = linearize(&u, "D", &mut BTreeSet::new()).unwrap();
        assert_eq!(l, vec!["D", "C", "B", "A"]);
    }

    #[test]
    fn inherited_and_overridden_functions() {
        let mut a = contract("A", &[]);
        a.functions.push(func("stake", "A"));
        a.functions.push(func("claim", "A"));
        let mut b = contract("B", &["A"]);
        b.functions.push(func("stake", "B"));
        let u = flatten_inheritance(unit(vec![a, b])).unwrap();
        let b = u.contract("B").unwrap();
        let stakes: Vec<_> = b.functions.iter().filter(|f| f.name == "stake").collect();
        assert_eq!(stakes.len(), 1);
        assert_eq!(stakes[0].declared_in, "B");
        assert!(b.function("claim").is_some());
    }

    #[test]
    fn cycle_is_an_error() {
        let u = unit(vec![contract("A", &["B"]), contract("B", &["A"])]);
        assert!(matches!(flatten_inheritance(u), Err(Error::CyclicInheritance(_))));
    }

    #[test]
    fn missing_base_becomes_note() {
        let u = flatten_inheritance(unit(vec![contract("A", &["Ownable"])])).unwrap();
        assert!(u.notes.iter().any(|n| n.contains("Ownable")));
    }
}
