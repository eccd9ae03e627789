//! Recognizer for the Ascend-C-like source subset.
//!
//! Stage placement follows the enclosing function: `CopyIn*` bodies go to
//! `MTE_in`, `CopyOut*` to `MTE_out`, everything else to `Compute`.

use std::collections::BTreeSet;

use crate::diag::Diagnostic;

use super::clike::{operand_base, parse_call, statements, text_of, tokenize, Call, Statement, Token};
use super::source::{Op, SinkPos, Sink, SourceOutput};

const STAGES: &[&str] = &["MTE_in", "Compute", "MTE_out"];
const COMPUTE: usize = 1;

/// Barrier spellings this frontend emits; every one resolves in the
/// `ascend910b2` model.
pub const EMITTED_PRIMITIVES: &[&str] = &["PIPE_V", "PIPE_M", "PIPE_MTE2", "PIPE_ALL", "V_S", "M_V", "MTE2_V"];

/// Vector-unit APIs; first argument is the destination.
pub const VPU_APIS: &[&str] = &[
    "Add", "Sub", "Mul", "Div", "Max", "Min", "Exp", "Ln", "Log", "Abs", "Sqrt", "Rsqrt", "Reciprocal", "Relu",
    "Adds", "Subs", "Muls", "Maxs", "Mins", "LeakyRelu", "ReduceMax", "ReduceMin", "ReduceSum", "WholeReduceMax",
    "WholeReduceMin", "WholeReduceSum", "BlockReduceMax", "BlockReduceMin", "BlockReduceSum", "Duplicate", "Cast",
    "Select", "Compare", "Axpy", "And", "Or", "Not", "Sigmoid", "Tanh", "Softmax", "Transpose", "Brcb",
];

/// Matrix-unit APIs; first argument is the destination.
pub const CUBE_APIS: &[&str] = &["Mmad", "MatMul"];

/// Calls with no memory effect on tracked tensors.
const BENIGN: &[&str] = &[
    "InitBuffer", "SetGlobalBuffer", "FreeTensor", "AllocTensor", "GetBlockIdx", "GetBlockNum", "GetSize",
    "SetVectorMask", "ResetMask", "printf", "assert",
];

fn stage_of(function: Option<&str>) -> usize {
    let f = function.unwrap_or("").to_ascii_lowercase();
    if f.starts_with("copyin") {
        0
    } else if f.starts_with("copyout") {
        2
    } else {
        COMPUTE
    }
}

fn default_unit(stage: usize) -> &'static str {
    if stage == COMPUTE {
        "VPU"
    } else {
        "MTE"
    }
}

fn last_ident(tokens: &[Token]) -> Option<String> {
    tokens.iter().rev().find(|t| t.is_ident()).map(|t| t.text.clone())
}

/// Drops leading `if (...)`, `for (...)`, `while (...)` and `else`.
pub(crate) fn strip_control(mut toks: &[Token]) -> &[Token] {
    loop {
        match toks.first().map(|t| t.text.as_str()) {
            Some("else") | Some("do") => toks = &toks[1..],
            Some("if") | Some("for") | Some("while") | Some("switch")
                if toks.get(1).is_some_and(|t| t.is("(")) =>
            {
                match super::clike::matching(toks, 1) {
                    Some(close) => toks = &toks[close + 1..],
                    None => return &[],
                }
            }
            _ => return toks,
        }
    }
}

/// Index of the first top-level `=`.
pub(crate) fn assignment_split(toks: &[Token]) -> Option<usize> {
    let mut depth = 0i32;
    for (i, t) in toks.iter().enumerate() {
        match t.text.as_str() {
            "(" | "[" | "{" => depth += 1,
            ")" | "]" | "}" => depth -= 1,
            "=" if depth == 0 => return Some(i),
            _ => {}
        }
    }
    None
}

struct Ascend {
    sink: Sink,
    functions: BTreeSet<String>,
}

impl Ascend {
    fn pos(t: &[Token]) -> SinkPos {
        t.first().map_or((0, 0), |t| (t.line, t.col))
    }

    fn tracked_in(&self, toks: &[Token]) -> Vec<String> {
        let mut out: Vec<String> = toks
            .iter()
            .filter(|t| t.is_ident() && self.sink.env.is_tracked(&t.text))
            .map(|t| t.text.clone())
            .collect();
        out.dedup();
        out
    }

    fn resolve(&mut self, name: &str) -> String {
        self.sink.env.resolve(name).buffer
    }

    fn statement(&mut self, s: &Statement) {
        let toks = strip_control(&s.tokens);
        if toks.is_empty() || toks[0].is("return") || toks[0].is("using") || toks[0].is("typedef") {
            return;
        }
        let stage = stage_of(s.function.as_deref());
        let pos = Self::pos(toks);

        if let Some(eq) = assignment_split(toks) {
            self.assignment(stage, &toks[..eq], &toks[eq + 1..], pos);
            return;
        }
        if let Some(call) = parse_call(toks).filter(|c| c.end == toks.len()) {
            self.call(stage, &call, pos);
            return;
        }
        if toks.iter().any(|t| t.is("LocalTensor") || t.is("GlobalTensor")) {
            let name_end = toks.iter().position(|t| t.is("[")).unwrap_or(toks.len());
            if let Some(name) = last_ident(&toks[..name_end]) {
                self.sink.env.bind_fresh(&name);
            }
            return;
        }
        if toks.iter().any(|t| t.is("(")) {
            self.unrecognized(toks, None, pos);
        }
    }

    /// Tensor members declared at class or file scope, wherever they appear.
    fn declare_members(&mut self, stmts: &[Statement]) {
        for s in stmts.iter().filter(|s| !s.header && s.function.is_none()) {
            let t = &s.tokens;
            if assignment_split(t).is_none() && t.iter().any(|t| t.is("LocalTensor") || t.is("GlobalTensor")) {
                let name_end = t.iter().position(|t| t.is("[")).unwrap_or(t.len());
                if let Some(name) = last_ident(&t[..name_end]) {
                    self.sink.env.bind_fresh(&name);
                }
            }
        }
    }

    fn assignment(&mut self, stage: usize, lhs: &[Token], rhs: &[Token], pos: SinkPos) {
        if lhs.last().is_some_and(|t| t.is("]")) {
            // element store through an index expression
            self.unrecognized(lhs, Some("indexed store"), pos);
            return;
        }
        let Some(name) = last_ident(lhs) else { return };
        let tensor_decl = lhs.iter().any(|t| t.is("LocalTensor") || t.is("GlobalTensor"));

        if let Some(call) = parse_call(rhs).filter(|c| c.end == rhs.len()) {
            let recv = call.receiver.as_deref().and_then(last_ident);
            match (call.name.as_str(), recv) {
                ("DeQue", Some(q)) => {
                    self.sink.push(stage, Op::DeQue(q), pos);
                    self.sink.env.bind_fresh(&name);
                    return;
                }
                ("AllocTensor", Some(_)) => {
                    self.sink.env.bind_fresh(&name);
                    return;
                }
                ("GetValue", Some(x)) => {
                    let b = self.resolve(&x);
                    self.sink.push(stage, Op::Read(b, "Scalar"), pos);
                    return;
                }
                _ => {}
            }
        }
        if let Some((base, offset)) = operand_base(rhs) {
            let simple = rhs.iter().all(|t| !t.is("("));
            if simple && (tensor_decl || self.sink.env.is_tracked(&base)) {
                self.sink.env.bind_alias(&name, &base);
                if offset {
                    self.sink.env.mark_overlap(&name);
                }
                return;
            }
        }
        if tensor_decl {
            self.sink.env.bind_fresh(&name);
            self.sink.env.mark_overlap(&name);
            self.sink.warn(format!("initializer of tensor {name} not understood; treated as may-overlap"), pos);
            return;
        }
        let has_call = rhs.windows(2).any(|w| w[0].is_ident() && w[1].is("("));
        if has_call || !self.tracked_in(rhs).is_empty() {
            self.unrecognized(rhs, None, pos);
        }
    }

    fn call(&mut self, stage: usize, c: &Call, pos: SinkPos) {
        let recv = c.receiver.as_deref().and_then(last_ident);
        let arg_base = |i: usize| c.args.get(i).and_then(|a| operand_base(a)).map(|(b, _)| b);
        match c.name.as_str() {
            "EnQue" if recv.is_some() => {
                if let Some(x) = arg_base(0) {
                    let b = self.resolve(&x);
                    let unit = self.sink.last_writer(stage, &b).unwrap_or(default_unit(stage));
                    self.sink.push(stage, Op::Read(b, unit), pos);
                }
                self.sink.push(stage, Op::EnQue(recv.unwrap()), pos);
            }
            "DeQue" if recv.is_some() => self.sink.push(stage, Op::DeQue(recv.unwrap()), pos),
            "SetValue" if recv.is_some() => {
                let b = self.resolve(&recv.unwrap());
                self.sink.push(stage, Op::Write(b, "Scalar"), pos);
            }
            "GetValue" if recv.is_some() => {
                let b = self.resolve(&recv.unwrap());
                self.sink.push(stage, Op::Read(b, "Scalar"), pos);
            }
            "PipeBarrier" | "pipe_barrier" => {
                let src = if c.name == "PipeBarrier" { &c.template } else { c.args.first().map_or(&c.template, |a| a) };
                self.barrier(stage, last_ident(src), None, pos);
            }
            "SetFlag" | "WaitFlag" => {
                let flag = c.args.first().map(|a| text_of(a)).filter(|f| !f.is_empty()).unwrap_or_else(|| "0".into());
                self.barrier(stage, last_ident(&c.template), Some((c.name == "SetFlag", flag)), pos);
            }
            "DataCopy" | "DataCopyPad" => {
                let (Some(dst), Some(src)) = (arg_base(0), arg_base(1)) else {
                    self.sink.warn(format!("{} without destination and source", c.name), pos);
                    return;
                };
                let (src, dst) = (self.resolve(&src), self.resolve(&dst));
                self.sink.push(stage, Op::Read(src, "MTE"), pos);
                self.sink.push(stage, Op::Write(dst, "MTE"), pos);
            }
            n if VPU_APIS.contains(&n) || CUBE_APIS.contains(&n) => {
                let unit = if CUBE_APIS.contains(&n) { "Cube" } else { "VPU" };
                let Some(dst) = arg_base(0) else {
                    self.sink.warn(format!("{n} without a destination"), pos);
                    return;
                };
                let mut reads = Vec::new();
                for i in 1..c.args.len() {
                    if let Some(b) = arg_base(i).filter(|b| self.sink.env.is_tracked(b)) {
                        let b = self.resolve(&b);
                        if !reads.contains(&b) {
                            reads.push(b);
                        }
                    }
                }
                let dst = self.resolve(&dst);
                for b in reads {
                    self.sink.push(stage, Op::Read(b, unit), pos);
                }
                self.sink.push(stage, Op::Write(dst, unit), pos);
            }
            n if BENIGN.contains(&n) || self.functions.contains(n) => {}
            _ => {
                let mut toks: Vec<Token> = c.args.concat();
                if let Some(r) = &c.receiver {
                    toks.extend(r.iter().cloned());
                }
                self.unrecognized(&toks, Some(&c.name), pos);
            }
        }
    }

    fn barrier(&mut self, stage: usize, spelling: Option<String>, flag: Option<(bool, String)>, pos: SinkPos) {
        let Some(p) = spelling.filter(|p| EMITTED_PRIMITIVES.contains(&p.as_str())) else {
            self.sink.warn("synchronization spelling not modeled; no barrier emitted", pos);
            return;
        };
        let op = match flag {
            None => Op::Barrier(p),
            Some((true, f)) => Op::SetFlag(p, f),
            Some((false, f)) => Op::WaitFlag(p, f),
        };
        self.sink.push(stage, op, pos);
    }

    fn unrecognized(&mut self, toks: &[Token], what: Option<&str>, pos: SinkPos) {
        let tracked = self.tracked_in(toks);
        let what = what.map_or_else(|| "statement".to_string(), |w| format!("`{w}`"));
        if tracked.is_empty() {
            self.sink.warn(format!("unrecognized {what} skipped"), pos);
        } else {
            for t in &tracked {
                self.sink.env.mark_overlap(t);
            }
            self.sink.warn(format!("unrecognized {what} touches {}; treated as may-overlap", tracked.join(", ")), pos);
        }
    }
}

/// Extracts events from Ascend-C-subset source.
pub fn extract_ascendc(text: &str) -> Result<SourceOutput, Vec<Diagnostic>> {
    let tokens = tokenize(text).map_err(|d| vec![d])?;
    let stmts = statements(&tokens).map_err(|d| vec![d])?;
    let functions = stmts.iter().filter(|s| s.header).filter_map(|s| s.function.clone()).collect();
    let mut a = Ascend { sink: Sink::new(STAGES), functions };
    a.declare_members(&stmts);
    for s in stmts.iter().filter(|s| !s.header) {
        a.statement(s);
    }
    Ok(a.sink.finish("ascend910b2"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::EventKind;

    fn events(src: &str) -> Vec<String> {
        let out = extract_ascendc(src).unwrap();
        let p = &out.program;
        p.events.iter().map(|e| p.label(e)).collect()
    }

    const LISTING: &str = "\
// Stage: Compute (on unified buffer)
LocalTensor<float> tmp = inQueueX.DeQue<float>();
ReduceMax(maxVal, tmp, 0, reduceLen); // VPU write
float s = maxVal.GetValue(0);          // Scalar read
outQueueY.EnQue<float>(result);
";

    #[test]
    fn listing_fragment() {
        assert_eq!(
            events(LISTING),
            vec![
                "DQ/inQueueX/Compute/-@0",
                "R/tmp/Compute/VPU@1",
                "W/maxVal/Compute/VPU@2",
                "R/maxVal/Compute/Scalar@3",
                "R/result/Compute/VPU@4",
                "EQ/outQueueY/Compute/-@5",
            ]
        );
    }

    #[test]
    fn hard_event_pair_adds_one_barrier() {
        let src = LISTING.replace(
            "float s",
            "SetFlag<HardEvent::V_S>(0);\nAscendC::WaitFlag<AscendC::HardEvent::V_S>(0);\nfloat s",
        );
        let out = extract_ascendc(&src).unwrap();
        let p = &out.program;
        let barriers: Vec<_> = p.events.iter().filter(|e| e.kind == EventKind::Barrier).collect();
        assert_eq!(barriers.len(), 1);
        assert_eq!(p.name(barriers[0].buffer), "V_S");
        let others = p.events.iter().filter(|e| e.kind != EventKind::Barrier).count();
        assert_eq!(others, 6);
    }

    #[test]
    fn alias_chain_resolves_to_one_buffer() {
        let out = extract_ascendc("LocalTensor<float> a;\nauto b = a;\nAdd(b, a, a);").unwrap();
        let p = &out.program;
        let names: BTreeSet<_> = p.events.iter().map(|e| p.name(e.buffer)).collect();
        assert_eq!(names.into_iter().collect::<Vec<_>>(), vec!["a"]);
        assert_eq!(p.events.len(), 2);
    }

    #[test]
    fn pipe_barrier_spellings() {
        let out = extract_ascendc("PipeBarrier<PIPE_V>();\npipe_barrier(PIPE_ALL);\nPipeBarrier<PIPE_FIX>();").unwrap();
        let p = &out.program;
        let prims: Vec<_> = p.events.iter().map(|e| p.name(e.buffer)).collect();
        assert_eq!(prims, vec!["PIPE_V", "PIPE_ALL"]);
        assert_eq!(out.diagnostics.len(), 1);
    }

    #[test]
    fn stages_follow_function_names() {
        let src = "
class K {
  __aicore__ inline void CopyIn(int32_t i) {
    LocalTensor<float> xLocal = inQueueX.AllocTensor<float>();
    DataCopy(xLocal, xGm[i * 8], 8);
    inQueueX.EnQue(xLocal);
  }
  __aicore__ inline void Compute(int32_t i) {
    LocalTensor<float> xLocal = inQueueX.DeQue<float>();
    LocalTensor<float> yLocal = outQueueY.AllocTensor<float>();
    Exp(yLocal, xLocal, 8);
    outQueueY.EnQue<float>(yLocal);
    inQueueX.FreeTensor(xLocal);
  }
  __aicore__ inline void CopyOut(int32_t i) {
    LocalTensor<float> yLocal = outQueueY.DeQue<float>();
    DataCopy(zGm[i * 8], yLocal, 8);
    outQueueY.FreeTensor(yLocal);
  }
  GlobalTensor<float> xGm;
  GlobalTensor<float> zGm;
};";
        let out = extract_ascendc(src).unwrap();
        let p = &out.program;
        assert_eq!(p.stage_names(), vec!["MTE_in", "Compute", "MTE_out"]);
        assert_eq!(p.topology.len(), 2);
        assert!(p.validate_structure().is_empty(), "{:?}", p.validate_structure());
        assert!(!p.is_may_overlap(p.lookup("xGm").unwrap()));
        assert!(!p.is_may_overlap(p.lookup("xLocal").unwrap()));
    }

    #[test]
    fn unknown_call_marks_tracked_tensor() {
        let out = extract_ascendc("LocalTensor<float> a;\nMystery(a, 3);\nfoo();").unwrap();
        assert_eq!(out.diagnostics.len(), 2);
        assert!(out.diagnostics[0].message.contains("may-overlap"));
    }

    #[test]
    fn truncated_input_is_an_error() {
        assert!(extract_ascendc("void f() { Add(a, b, c);").is_err());
        assert!(extract_ascendc("Add(a, b, c));").is_err());
    }

    #[test]
    fn line_breaks_inside_arguments_do_not_matter() {
        let a = events("ReduceMax(maxVal, tmp, 0, n);");
        let b = events("ReduceMax(\n  maxVal,\n  tmp,\n  0,\n  n\n);");
        assert_eq!(a, b);
    }
}
