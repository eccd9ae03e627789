//! Serialization of programs and results: JSON traces, JSON and text check
//! reports, DOT graphs and corpus audits.

pub mod audit;
pub mod dot;
pub mod trace;

use std::fmt::Write as _;

use crate::checker::CheckResult;

/// Pretty JSON with keys in declaration order; wall-clock data sits under
/// `timing` only.
pub fn check_result_json(result: &CheckResult) -> String {
    serde_json::to_string_pretty(result).expect("check result serializes")
}

/// Human-readable report, one violation per line. Diagnostics are left to
/// the caller.
pub fn check_result_text(source: &str, result: &CheckResult) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{source}: {} under {}", result.verdict.as_str(), result.model);
    for v in &result.violations {
        let tag = if v.conservative { " [may-overlap]" } else { "" };
        let _ = writeln!(
            out,
            "  violation {}: {}/{}@{} -> {}/{}@{}: {}{}",
            v.category, v.write.stage, v.write.unit, v.write.t, v.read.stage, v.read.unit, v.read.t, v.message, tag
        );
    }
    let s = &result.stats;
    let _ = writeln!(
        out,
        "  {} events, {} po / {} so / {} bo edges, {} pairs checked, {} violations",
        s.events,
        s.po_edges,
        s.so_edges,
        s.bo_edges,
        s.pairs_checked,
        result.violations.len()
    );
    out
}
