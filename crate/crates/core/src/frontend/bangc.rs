//! Recognizer for the BANG-C-like source subset. All events land in a single
//! `Compute` stage; DMA direction tokens are validated but do not move events
//! between stages.

use std::collections::BTreeSet;

use crate::diag::Diagnostic;

use super::ascendc::{assignment_split, strip_control};
use super::clike::{matching, operand_base, parse_call, split_args, statements, tokenize, Call, Statement, Token};
use super::source::{Op, Sink, SinkPos, SourceOutput};

const STAGES: &[&str] = &["Compute"];

/// Barrier spellings this frontend emits; every one resolves in the `mlu370`
/// model.
pub const EMITTED_PRIMITIVES: &[&str] = &["FULL_SYNC", "SYNC_IO", "SYNC_COMPUTE", "SYNC_IO_MOVE_COMPUTE", "SYNC_MOVE"];

const SYNC_CALLS: &[(&str, &str)] = &[
    ("__sync", "FULL_SYNC"),
    ("__sync_all", "FULL_SYNC"),
    ("__sync_cluster", "FULL_SYNC"),
    ("__sync_io", "SYNC_IO"),
    ("__sync_compute", "SYNC_COMPUTE"),
    ("__sync_io_move_compute", "SYNC_IO_MOVE_COMPUTE"),
    ("__sync_move", "SYNC_MOVE"),
];

/// `__bang_*` calls executed by the matrix unit.
pub const IPU_APIS: &[&str] = &["__bang_conv", "__bang_conv_partial", "__bang_matmul", "__bang_mlp"];

const DIRECTIONS: &[&str] = &[
    "GDRAM2NRAM", "NRAM2GDRAM", "NRAM2NRAM", "GDRAM2WRAM", "WRAM2GDRAM", "NRAM2WRAM", "WRAM2NRAM", "GDRAM2SRAM",
    "SRAM2GDRAM", "SRAM2NRAM", "NRAM2SRAM", "GDRAM2GDRAM", "SRAM2SRAM", "LDRAM2NRAM", "NRAM2LDRAM",
];

const SPACES: &[&str] = &["__nram__", "__wram__", "__sram__", "__mlu_shared__", "__ldram__"];

const BENIGN: &[&str] = &["printf", "__bang_printf", "__abort", "taskId", "coreId", "clusterId"];

fn is_macro(name: &str) -> bool {
    name.chars().all(|c| c.is_ascii_uppercase() || c.is_ascii_digit() || c == '_')
}

struct Bang {
    sink: Sink,
    functions: BTreeSet<String>,
}

impl Bang {
    fn base(&self, arg: Option<&Vec<Token>>) -> Option<String> {
        let (b, _) = operand_base(arg?)?;
        (!is_macro(&b)).then_some(b)
    }

    fn header(&mut self, s: &Statement) {
        // pointer parameters of a function signature are tracked buffers
        let Some(f) = &s.function else { return };
        if !s.tokens.iter().any(|t| t.is(f)) {
            return;
        }
        let Some(open) = s.tokens.iter().position(|t| t.is("(")) else { return };
        let Some(close) = matching(&s.tokens, open) else { return };
        for p in split_args(&s.tokens[open + 1..close]) {
            if p.iter().any(|t| t.is("*")) {
                if let Some(name) = p.iter().rev().find(|t| t.is_ident()) {
                    self.sink.env.bind_fresh(&name.text);
                }
            }
        }
    }

    fn statement(&mut self, s: &Statement) {
        let toks = strip_control(&s.tokens);
        if toks.is_empty() || toks[0].is("return") {
            return;
        }
        let pos = (toks[0].line, toks[0].col);
        let eq = assignment_split(toks);
        let decl_end = eq.unwrap_or(toks.len());
        if toks[..decl_end].iter().any(|t| SPACES.contains(&t.text.as_str())) {
            let end = toks[..decl_end].iter().position(|t| t.is("[")).unwrap_or(decl_end);
            if let Some(name) = toks[..end].iter().rev().find(|t| t.is_ident()) {
                self.sink.env.bind_fresh(&name.text);
            }
            return;
        }
        if let Some(eq) = eq {
            self.assignment(&toks[..eq], &toks[eq + 1..], pos);
            return;
        }
        if let Some(call) = parse_call(toks).filter(|c| c.end == toks.len()) {
            self.call(&call, pos);
            return;
        }
        if toks.iter().any(|t| t.is("(")) {
            self.unrecognized(toks, None, pos);
        }
    }

    fn assignment(&mut self, lhs: &[Token], rhs: &[Token], pos: SinkPos) {
        let Some(name) = lhs.iter().rev().find(|t| t.is_ident()).map(|t| t.text.clone()) else { return };
        let pointer_decl = lhs.len() > 1 && lhs.iter().any(|t| t.is("*"));
        if let Some((base, offset)) = operand_base(rhs) {
            if self.sink.env.is_tracked(&base) {
                self.sink.env.bind_alias(&name, &base);
                if offset {
                    self.sink.env.mark_overlap(&name);
                }
                return;
            }
        }
        if pointer_decl {
            self.sink.env.bind_fresh(&name);
            self.sink.env.mark_overlap(&name);
            self.sink.warn(format!("initializer of pointer {name} not understood; treated as may-overlap"), pos);
            return;
        }
        if let Some(call) = parse_call(rhs).filter(|c| c.end == rhs.len()) {
            self.call(&call, pos);
            return;
        }
        let tracked: Vec<_> = rhs.iter().filter(|t| self.sink.env.is_tracked(&t.text)).collect();
        if !tracked.is_empty() || rhs.iter().any(|t| t.is("(")) {
            self.unrecognized(rhs, None, pos);
        }
    }

    fn call(&mut self, c: &Call, pos: SinkPos) {
        let name = c.name.as_str();
        if let Some((_, prim)) = SYNC_CALLS.iter().find(|(n, _)| *n == name) {
            self.sink.push(0, Op::Barrier(prim.to_string()), pos);
            return;
        }
        match name {
            "__memcpy_async" | "__memcpy" => {
                let (Some(dst), Some(src)) = (self.base(c.args.first()), self.base(c.args.get(1))) else {
                    self.sink.warn(format!("{name} without destination and source"), pos);
                    return;
                };
                let dir = c.args.iter().skip(2).flatten().find(|t| DIRECTIONS.contains(&t.text.as_str()));
                if dir.is_none() {
                    self.sink.warn(format!("{name} has no recognized transfer direction"), pos);
                }
                let (dst, src) = (self.sink.env.resolve(&dst).buffer, self.sink.env.resolve(&src).buffer);
                let blocking = name == "__memcpy";
                if blocking {
                    self.sink.push(0, Op::Barrier("SYNC_COMPUTE".into()), pos);
                }
                self.sink.push(0, Op::Read(src, "DMA"), pos);
                self.sink.push(0, Op::Write(dst, "DMA"), pos);
                if blocking {
                    self.sink.push(0, Op::Barrier("SYNC_IO".into()), pos);
                }
            }
            n if n.starts_with("__bang_") && !BENIGN.contains(&n) => {
                let unit = if IPU_APIS.contains(&n) { "IPU" } else { "VPU" };
                let Some(dst) = self.base(c.args.first()) else {
                    self.sink.warn(format!("{n} without a destination"), pos);
                    return;
                };
                let mut reads = Vec::new();
                for a in c.args.iter().skip(1) {
                    if let Some(b) = self.base(Some(a)).filter(|b| self.sink.env.is_tracked(b)) {
                        let b = self.sink.env.resolve(&b).buffer;
                        if !reads.contains(&b) {
                            reads.push(b);
                        }
                    }
                }
                let dst = self.sink.env.resolve(&dst).buffer;
                for b in reads {
                    self.sink.push(0, Op::Read(b, unit), pos);
                }
                self.sink.push(0, Op::Write(dst, unit), pos);
            }
            n if BENIGN.contains(&n) || self.functions.contains(n) => {}
            _ => {
                let toks = c.args.concat();
                self.unrecognized(&toks, Some(name), pos);
            }
        }
    }

    fn unrecognized(&mut self, toks: &[Token], what: Option<&str>, pos: SinkPos) {
        let mut tracked: Vec<String> =
            toks.iter().filter(|t| t.is_ident() && self.sink.env.is_tracked(&t.text)).map(|t| t.text.clone()).collect();
        tracked.dedup();
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

/// Extracts events from BANG-C-subset source.
pub fn extract_bangc(text: &str) -> Result<SourceOutput, Vec<Diagnostic>> {
    let tokens = tokenize(text).map_err(|d| vec![d])?;
    let stmts = statements(&tokens).map_err(|d| vec![d])?;
    let functions = stmts.iter().filter(|s| s.header).filter_map(|s| s.function.clone()).collect();
    let mut b = Bang { sink: Sink::new(STAGES), functions };
    for s in &stmts {
        if s.header {
            b.header(s);
        } else {
            b.statement(s);
        }
    }
    Ok(b.sink.finish("mlu370"))
}
