//! Barrier-sufficiency checking: every relevant write-read pair must be
//! happens-before ordered.

use std::borrow::Cow;
use std::time::Instant;

use serde::Serialize;

use crate::diag::{has_errors, Diagnostic};
use crate::event::{Event, EventKind, KernelProgram};
use crate::graph::{EdgeKind, HbGraph};
use crate::hardware::HardwareModel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    #[serde(rename = "SAFE")]
    Safe,
    #[serde(rename = "UNSAFE")]
    Unsafe,
    #[serde(rename = "STRUCTURAL_ERROR")]
    StructuralError,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Safe => "SAFE",
            Verdict::Unsafe => "UNSAFE",
            Verdict::StructuralError => "STRUCTURAL_ERROR",
        }
    }
}

/// One endpoint of a violation, with names resolved.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EventRef {
    pub node: usize,
    pub kind: &'static str,
    pub buffer: String,
    pub stage: String,
    pub t: u32,
    pub unit: String,
}

impl EventRef {
    fn new(program: &KernelProgram, node: usize) -> Self {
        let e = &program.events[node];
        Self {
            node,
            kind: e.kind.tag(),
            buffer: program.name(e.buffer).to_string(),
            stage: program.name(e.stage).to_string(),
            t: e.t,
            unit: e.unit.map_or("-", |u| program.name(u)).to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub buffer: String,
    pub write: EventRef,
    pub read: EventRef,
    pub category: String,
    pub suggested_coverage: Vec<String>,
    /// At least one side is a may-overlap buffer.
    pub conservative: bool,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Stats {
    pub events: usize,
    pub po_edges: usize,
    pub so_edges: usize,
    pub bo_edges: usize,
    pub pairs_checked: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Timing {
    pub elapsed_ms: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub verdict: Verdict,
    pub model: String,
    pub violations: Vec<Violation>,
    pub diagnostics: Vec<Diagnostic>,
    pub stats: Stats,
    pub timing: Timing,
}

impl CheckResult {
    pub fn structural(model: &str, diagnostics: Vec<Diagnostic>, events: usize) -> Self {
        Self {
            verdict: Verdict::StructuralError,
            model: model.to_string(),
            violations: Vec::new(),
            diagnostics,
            stats: Stats { events, ..Stats::default() },
            timing: Timing::default(),
        }
    }
}

fn same_buffer(p: &KernelProgram, w: &Event, r: &Event) -> bool {
    w.buffer == r.buffer || (p.is_may_overlap(w.buffer) && p.is_may_overlap(r.buffer))
}

/// Write-read pairs on one buffer that are either cross-stage, or same-stage
/// on different units with the write first. Node ids, unsorted.
pub fn relevant_pairs(program: &KernelProgram) -> Vec<(usize, usize)> {
    let writes: Vec<usize> = (0..program.len()).filter(|&i| program.events[i].kind == EventKind::Write).collect();
    let reads: Vec<usize> = (0..program.len()).filter(|&i| program.events[i].kind == EventKind::Read).collect();
    let mut out = Vec::new();
    for &wi in &writes {
        let w = &program.events[wi];
        for &ri in &reads {
            let r = &program.events[ri];
            if !same_buffer(program, w, r) {
                continue;
            }
            let cross_stage = w.stage != r.stage;
            if cross_stage || (w.unit != r.unit && w.t < r.t) {
                out.push((wi, ri));
            }
        }
    }
    out
}

/// Rewrites W/R unit names to the model's spelling. Errors name every unit
/// the model does not declare.
fn bind_units<'a>(program: &'a KernelProgram, model: &HardwareModel) -> Result<Cow<'a, KernelProgram>, Vec<Diagnostic>> {
    let mut errors = Vec::new();
    let mut renames = Vec::new();
    for (i, e) in program.events.iter().enumerate() {
        let Some(u) = e.unit else { continue };
        let name = program.name(u);
        match model.unit(name) {
            None => {
                let msg = format!("unit {name} is not declared by model {}", model.name);
                if !errors.iter().any(|d: &Diagnostic| d.message == msg) {
                    errors.push(Diagnostic::error(msg));
                }
            }
            Some(decl) if decl.name != name => renames.push((i, decl.name.clone())),
            Some(_) => {}
        }
    }
    if !errors.is_empty() {
        return Err(errors);
    }
    if renames.is_empty() {
        return Ok(Cow::Borrowed(program));
    }
    let mut p = program.clone();
    for (i, name) in renames {
        let sym = p.intern(&name);
        p.events[i].unit = Some(sym);
    }
    Ok(Cow::Owned(p))
}

fn category(p: &KernelProgram, w: &Event, r: &Event) -> String {
    if w.stage == r.stage {
        format!("{}→{}", p.name(w.unit.unwrap()), p.name(r.unit.unwrap()))
    } else {
        format!("cross-stage {}→{}", p.name(w.stage), p.name(r.stage))
    }
}

/// Builds the happens-before graph and evaluates every relevant pair.
pub fn check(program: &KernelProgram, model: &HardwareModel) -> CheckResult {
    let start = Instant::now();
    let mut diags = program.validate_structure();
    if has_errors(&diags) {
        return CheckResult::structural(&model.name, diags, program.len());
    }
    let program = match bind_units(program, model) {
        Ok(p) => p,
        Err(mut errs) => {
            diags.append(&mut errs);
            return CheckResult::structural(&model.name, diags, program.len());
        }
    };
    let p: &KernelProgram = &program;
    let (mut graph, mut gd) = HbGraph::build(p, model);
    diags.append(&mut gd);
    if has_errors(&diags) {
        return CheckResult::structural(&model.name, diags, p.len());
    }
    if let Err(cycle) = graph.close() {
        let path: Vec<String> = cycle.0.iter().map(|&i| p.label(&p.events[i])).collect();
        diags.push(Diagnostic::error(format!("happens-before cycle: {}", path.join(" -> "))));
        return CheckResult::structural(&model.name, diags, p.len());
    }

    let pairs = relevant_pairs(p);
    let mut violations: Vec<Violation> = Vec::new();
    for &(wi, ri) in &pairs {
        if graph.reaches(wi, ri) {
            continue;
        }
        let (w, r) = (&p.events[wi], &p.events[ri]);
        let mut suggested: Vec<String> = Vec::new();
        if w.stage == r.stage {
            let (wu, ru) = (p.name(w.unit.unwrap()), p.name(r.unit.unwrap()));
            for rule in model.covering_rules(p.name(w.stage), wu, ru) {
                if !suggested.contains(&rule.primitive) {
                    suggested.push(rule.primitive.clone());
                }
            }
        }
        let conservative = p.is_may_overlap(w.buffer) || p.is_may_overlap(r.buffer);
        let write = EventRef::new(p, wi);
        let read = EventRef::new(p, ri);
        let mut message = format!("{} write to {} not visible to {} read", write.unit, write.buffer, read.unit);
        if read.buffer != write.buffer {
            message.push_str(&format!(" of {}", read.buffer));
        }
        if w.stage != r.stage {
            message.push_str(&format!(" in stage {}", read.stage));
        }
        match suggested.as_slice() {
            [] => message.push_str("; no modeled coverage orders this pair"),
            s => message.push_str(&format!("; missing {} coverage", s.join(" or "))),
        }
        violations.push(Violation {
            buffer: write.buffer.clone(),
            category: category(p, w, r),
            suggested_coverage: suggested,
            conservative,
            message,
            write,
            read,
        });
    }
    let stage_idx = |s: &str| p.stage_names().iter().position(|n| *n == s);
    violations.sort_by(|a, b| {
        (&a.buffer, a.write.t, a.read.t, stage_idx(&a.write.stage), stage_idx(&a.read.stage), a.write.node, a.read.node)
            .cmp(&(&b.buffer, b.write.t, b.read.t, stage_idx(&b.write.stage), stage_idx(&b.read.stage), b.write.node, b.read.node))
    });
    let verdict = if violations.is_empty() { Verdict::Safe } else { Verdict::Unsafe };
    CheckResult {
        verdict,
        model: model.name.clone(),
        violations,
        diagnostics: diags,
        stats: Stats {
            events: p.len(),
            po_edges: graph.edge_count(EdgeKind::Po),
            so_edges: graph.edge_count(EdgeKind::So),
            bo_edges: graph.edge_count(EdgeKind::Bo),
            pairs_checked: pairs.len(),
        },
        timing: Timing { elapsed_ms: start.elapsed().as_secs_f64() * 1e3 },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::{tests::softmax, ProgramBuilder};
    use crate::hardware::builtin_model;
    use proptest::prelude::*;

    fn ascend() -> HardwareModel {
        builtin_model("ascend910b2").unwrap()
    }

    fn softmax_with_barrier() -> KernelProgram {
        let mut b = ProgramBuilder::new();
        b.stage("Compute");
        b.deque("inQueueX");
        b.write("maxVal", "VPU");
        b.barrier("V_S");
        b.read("maxVal", "Scalar");
        b.write("result", "VPU");
        b.enque("outQueueY");
        b.finish().program
    }

    #[test]
    fn softmax_pairs() {
        assert_eq!(relevant_pairs(&softmax()), vec![(1, 2)]);
    }

    #[test]
    fn single_unit_program_has_no_pairs() {
        let mut b = ProgramBuilder::new();
        b.stage("S");
        b.write("x", "VPU");
        b.read("x", "VPU");
        b.write("x", "VPU");
        assert!(relevant_pairs(&b.finish().program).is_empty());
    }

    #[test]
    fn softmax_is_unsafe() {
        let r = check(&softmax(), &ascend());
        assert_eq!(r.verdict, Verdict::Unsafe);
        assert_eq!(r.violations.len(), 1);
        let v = &r.violations[0];
        assert_eq!(v.category, "VPU→Scalar");
        assert_eq!(v.suggested_coverage, vec!["V_S", "PIPE_ALL"]);
        assert_eq!((v.write.node, v.read.node), (1, 2));
        assert_eq!(v.buffer, "maxVal");
        assert!(v.message.starts_with("VPU write to maxVal not visible to Scalar read"));
    }

    #[test]
    fn softmax_with_barrier_is_safe() {
        let r = check(&softmax_with_barrier(), &ascend());
        assert_eq!(r.verdict, Verdict::Safe);
        assert_eq!(r.stats.bo_edges, 1);
    }

    #[test]
    fn empty_program_is_safe() {
        let r = check(&KernelProgram::new(), &ascend());
        assert_eq!(r.verdict, Verdict::Safe);
        assert_eq!(r.stats.pairs_checked, 0);
    }

    #[test]
    fn unknown_unit_is_structural() {
        let r = check(&softmax(), &builtin_model("mlu370").unwrap());
        assert_eq!(r.verdict, Verdict::StructuralError);
        assert!(r.diagnostics.iter().any(|d| d.message.contains("unit Scalar")));
    }

    #[test]
    fn unit_case_is_normalized() {
        let mut b = ProgramBuilder::new();
        b.stage("Compute");
        b.write("x", "vpu");
        b.read("x", "VPU");
        assert_eq!(check(&b.finish().program, &ascend()).verdict, Verdict::Safe);
    }

    #[test]
    fn queue_mismatch_is_structural() {
        let mut b = ProgramBuilder::new();
        b.stage("A");
        b.enque("q");
        b.enque("q");
        b.stage("B");
        b.deque("q");
        b.topology("A", "B", "q");
        let r = check(&b.finish().program, &ascend());
        assert_eq!(r.verdict, Verdict::StructuralError);
    }

    #[test]
    fn conservative_pairs_are_tagged() {
        let mut b = ProgramBuilder::new();
        b.stage("Compute");
        b.write("a", "VPU");
        b.read("b", "Scalar");
        b.mark_may_overlap("a");
        b.mark_may_overlap("b");
        let r = check(&b.finish().program, &ascend());
        assert_eq!(r.violations.len(), 1);
        assert!(r.violations[0].conservative);
    }

    #[test]
    fn check_is_deterministic() {
        let a = check(&softmax(), &ascend());
        let b = check(&softmax(), &ascend());
        assert_eq!(a.violations, b.violations);
        assert_eq!(a.stats, b.stats);
    }

    fn brute_pairs(p: &KernelProgram) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, w) in p.events.iter().enumerate() {
            for (j, r) in p.events.iter().enumerate() {
                let kinds = w.kind == EventKind::Write && r.kind == EventKind::Read;
                let buf = w.buffer == r.buffer || (p.may_overlap.contains(&w.buffer) && p.may_overlap.contains(&r.buffer));
                let order = w.stage != r.stage || (w.unit != r.unit && w.t < r.t);
                if kinds && buf && order {
                    out.push((i, j));
                }
            }
        }
        out
    }

    proptest! {
        #[test]
        fn pairs_match_brute_force(seed in any::<u64>()) {
            let p = crate::synth::random_program(seed, &crate::synth::RandomShape::default());
            let mut got = relevant_pairs(&p);
            got.sort();
            prop_assert_eq!(got, brute_pairs(&p));
        }
    }
}
