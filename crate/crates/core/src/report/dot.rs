//! Graphviz export of the happens-before skeleton.

use std::fmt::Write as _;

use crate::checker::CheckResult;
use crate::event::KernelProgram;
use crate::graph::{EdgeKind, HbGraph};

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// One cluster per stage; PO edges solid, SO dashed, BO bold. Violating pairs
/// of `result`, when given, are drawn as red dotted edges.
pub fn to_dot(program: &KernelProgram, graph: &HbGraph, result: Option<&CheckResult>) -> String {
    let mut out = String::from("digraph hb {\n  rankdir=TB;\n  node [shape=box, fontname=\"monospace\"];\n");
    for (si, &stage) in program.stages.iter().enumerate() {
        let _ = writeln!(out, "  subgraph cluster_{si} {{\n    label={};", quote(program.name(stage)));
        for (i, e) in program.stage_events(stage) {
            let _ = writeln!(out, "    n{i} [label={}];", quote(&program.label(e)));
        }
        out.push_str("  }\n");
    }
    let mut edges: Vec<(usize, usize, EdgeKind)> = graph.edges().collect();
    edges.sort();
    for (a, b, kind) in edges {
        let style = match kind {
            EdgeKind::Po => "solid",
            EdgeKind::So => "dashed",
            EdgeKind::Bo => "bold",
        };
        let _ = writeln!(out, "  n{a} -> n{b} [style={style}, label={}];", quote(&kind.to_string()));
    }
    if let Some(r) = result {
        for v in &r.violations {
            let _ = writeln!(out, "  n{} -> n{} [style=dotted, color=red, constraint=false];", v.write.node, v.read.node);
        }
    }
    out.push_str("}\n");
    out
}
