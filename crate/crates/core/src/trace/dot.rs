use std::fmt::Write;

use super::{Trace, TransactionId};

/// Graphviz rendering: po solid, rf dashed, co dotted; rf and co edges are
/// labelled with the variable name.
pub fn to_dot(tr: &Trace, vars: &[String]) -> String {
    let node = |t: TransactionId| match t {
        TransactionId::Init(v) => format!("init_{v}"),
        TransactionId::Txn { process, position } => format!("p{process}_t{position}"),
    };
    let label = |t: TransactionId| match t {
        TransactionId::Init(v) => format!("init_{}", vars[v]),
        other => other.to_string(),
    };
    let mut out = String::from("digraph trace {\n  rankdir=TB;\n  node [shape=box];\n");
    let inits: std::collections::BTreeSet<_> = tr.rf().iter().map(|e| e.0).filter(|t| t.is_init()).collect();
    for t in inits.into_iter().chain(tr.transactions()) {
        let _ = writeln!(out, "  {} [label=\"{}\"];", node(t), label(t));
    }
    for &(a, b) in tr.po() {
        let _ = writeln!(out, "  {} -> {} [style=solid];", node(a), node(b));
    }
    for &(a, b, v) in tr.rf() {
        let _ = writeln!(out, "  {} -> {} [style=dashed, label=\"{}\"];", node(a), node(b), vars[v]);
    }
    for &(a, b, v) in tr.co() {
        let _ = writeln!(out, "  {} -> {} [style=dotted, label=\"{}\"];", node(a), node(b), vars[v]);
    }
    out.push_str("}\n");
    out
}
