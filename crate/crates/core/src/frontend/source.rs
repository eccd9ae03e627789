//! Event sink shared by the C-like dialect recognizers.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::diag::Diagnostic;
use crate::event::{KernelProgram, ProgramBuilder};

use super::alias::AliasEnvironment;

pub(crate) type SinkPos = (usize, usize);

#[derive(Clone, Debug)]
pub(crate) enum Op {
    Write(String, &'static str),
    Read(String, &'static str),
    EnQue(String),
    DeQue(String),
    Barrier(String),
    SetFlag(String, String),
    WaitFlag(String, String),
}

/// Output of a source-dialect extraction.
#[derive(Clone, Debug)]
pub struct SourceOutput {
    pub program: KernelProgram,
    /// Warnings about skipped statements and unpaired flags.
    pub diagnostics: Vec<Diagnostic>,
}

pub(crate) struct Sink {
    stage_order: &'static [&'static str],
    ops: Vec<(usize, Op, (usize, usize))>,
    pub env: AliasEnvironment,
    pub diags: Vec<Diagnostic>,
    /// Unit of the last write per (stage, buffer).
    last_writer: HashMap<(usize, String), &'static str>,
}

impl Sink {
    pub fn new(stage_order: &'static [&'static str]) -> Self {
        Self { stage_order, ops: Vec::new(), env: AliasEnvironment::new(), diags: Vec::new(), last_writer: HashMap::new() }
    }

    pub fn push(&mut self, stage: usize, op: Op, pos: (usize, usize)) {
        if let Op::Write(b, u) = &op {
            self.last_writer.insert((stage, b.clone()), u);
        }
        self.ops.push((stage, op, pos));
    }

    pub fn last_writer(&self, stage: usize, buffer: &str) -> Option<&'static str> {
        self.last_writer.get(&(stage, buffer.to_string())).copied()
    }

    pub fn warn(&mut self, msg: impl Into<String>, pos: (usize, usize)) {
        self.diags.push(Diagnostic::warning(msg).at(pos.0, pos.1));
    }

    /// Replays the recorded operations stage by stage in canonical stage
    /// order and infers queue topology from EnQue/DeQue placement.
    pub fn finish(mut self, hardware: &str) -> SourceOutput {
        let used: BTreeSet<usize> = self.ops.iter().map(|(s, _, _)| *s).collect();
        let mut b = ProgramBuilder::new();
        if !self.ops.is_empty() {
            b.hardware(hardware);
        }
        let mut producers: BTreeMap<String, usize> = BTreeMap::new();
        let mut consumers: BTreeMap<String, usize> = BTreeMap::new();
        let mut buffers = BTreeSet::new();
        let mut flag_pos = HashMap::new();
        for &stage in &used {
            b.stage(self.stage_order[stage]);
            for (_, op, pos) in self.ops.iter().filter(|(s, _, _)| *s == stage) {
                match op {
                    Op::Write(buf, u) => {
                        b.write(buf, u);
                        buffers.insert(buf.clone());
                    }
                    Op::Read(buf, u) => {
                        b.read(buf, u);
                        buffers.insert(buf.clone());
                    }
                    Op::EnQue(q) => {
                        b.enque(q);
                        producers.entry(q.clone()).or_insert(stage);
                    }
                    Op::DeQue(q) => {
                        b.deque(q);
                        consumers.entry(q.clone()).or_insert(stage);
                    }
                    Op::Barrier(p) => {
                        b.barrier(p);
                    }
                    Op::SetFlag(p, f) => {
                        let tok = b.set_flag(p, f);
                        flag_pos.insert(tok, (*pos, p.clone(), f.clone()));
                    }
                    Op::WaitFlag(p, f) => {
                        if b.wait_flag(p, f).is_none() {
                            self.diags.push(
                                Diagnostic::warning(format!("WaitFlag {p} {f} has no matching SetFlag"))
                                    .at(pos.0, pos.1),
                            );
                        }
                    }
                }
            }
        }
        for (q, &from) in &producers {
            if let Some(&to) = consumers.get(q) {
                if from != to {
                    b.topology(self.stage_order[from], self.stage_order[to], q);
                }
            }
        }
        for buf in &buffers {
            if self.env.is_overlapping(buf) {
                b.mark_may_overlap(buf);
            }
        }
        let built = b.finish();
        for tok in built.unmatched_set_flags {
            let ((l, c), p, f) = &flag_pos[&tok];
            self.diags.push(Diagnostic::warning(format!("SetFlag {p} {f} is never waited on")).at(*l, *c));
        }
        self.diags.sort_by_key(|d| d.location);
        SourceOutput { program: built.program, diagnostics: self.diags }
    }
}
