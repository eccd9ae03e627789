//! Event vocabulary and the kernel program representation.
//!
//! A program is a fixed list of stages, each holding a sequence of events with
//! per-stage logical timestamps, plus a static queue topology. Frontends build
//! programs through [`ProgramBuilder`], which owns timestamp assignment and
//! SetFlag/WaitFlag pairing.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::diag::Diagnostic;
use crate::symbol::{BufferId, Interner, QueueId, StageId, Symbol, UnitId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventKind {
    Write,
    Read,
    EnQue,
    DeQue,
    Barrier,
}

impl EventKind {
    pub const ALL: [EventKind; 5] =
        [EventKind::Write, EventKind::Read, EventKind::EnQue, EventKind::DeQue, EventKind::Barrier];

    /// Short tag used in traces and DOT labels.
    pub fn tag(self) -> &'static str {
        match self {
            EventKind::Write => "W",
            EventKind::Read => "R",
            EventKind::EnQue => "EQ",
            EventKind::DeQue => "DQ",
            EventKind::Barrier => "B",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.tag() == tag)
    }

    pub fn is_access(self) -> bool {
        matches!(self, EventKind::Write | EventKind::Read)
    }

    pub fn is_queue(self) -> bool {
        matches!(self, EventKind::EnQue | EventKind::DeQue)
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Ordering interval of a barrier: writes before `t_release` become visible to
/// reads after `t_acquire`. Point barriers have `t_release == t_acquire`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SyncAnnotation {
    pub primitive: Symbol,
    pub t_release: u32,
    pub t_acquire: u32,
    pub flag_id: Option<Symbol>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Event {
    pub kind: EventKind,
    pub buffer: BufferId,
    pub stage: StageId,
    pub t: u32,
    pub unit: Option<UnitId>,
    pub sync: Option<SyncAnnotation>,
}

/// Directed queue connection `producer -> consumer` over `queue`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct QueueLink {
    pub producer: StageId,
    pub consumer: StageId,
    pub queue: QueueId,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LookupError {
    #[error("unknown stage `{0}`")]
    UnknownStage(String),
}

/// Name-resolved view of an event, used for comparisons across programs whose
/// interners differ.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventView<'a> {
    pub kind: EventKind,
    pub buffer: &'a str,
    pub stage: &'a str,
    pub t: u32,
    pub unit: Option<&'a str>,
    pub sync: Option<(&'a str, u32, u32, Option<&'a str>)>,
}

#[derive(Clone, Debug, Default)]
pub struct KernelProgram {
    symbols: Interner,
    pub hardware: Option<String>,
    pub stages: Vec<StageId>,
    /// Grouped by stage in `stages` order, ascending `t` within a stage.
    pub events: Vec<Event>,
    pub topology: Vec<QueueLink>,
    /// Buffers whose identity the frontend could not resolve; they are paired
    /// with every other may-overlap buffer.
    pub may_overlap: BTreeSet<BufferId>,
}

impl KernelProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn symbols(&self) -> &Interner {
        &self.symbols
    }

    pub fn intern(&mut self, name: &str) -> Symbol {
        self.symbols.intern(name)
    }

    pub fn name(&self, sym: Symbol) -> &str {
        self.symbols.resolve(sym)
    }

    pub fn lookup(&self, name: &str) -> Option<Symbol> {
        self.symbols.get(name)
    }

    pub fn stage_names(&self) -> Vec<&str> {
        self.stages.iter().map(|&s| self.name(s)).collect()
    }

    pub fn stage_index(&self, stage: StageId) -> Option<usize> {
        self.stages.iter().position(|&s| s == stage)
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Indexed events of one stage, in stored order.
    pub fn stage_events(&self, stage: StageId) -> impl Iterator<Item = (usize, &Event)> + '_ {
        self.events.iter().enumerate().filter(move |(_, e)| e.stage == stage)
    }

    pub fn view(&self, e: &Event) -> EventView<'_> {
        EventView {
            kind: e.kind,
            buffer: self.name(e.buffer),
            stage: self.name(e.stage),
            t: e.t,
            unit: e.unit.map(|u| self.name(u)),
            sync: e.sync.as_ref().map(|s| {
                (self.name(s.primitive), s.t_release, s.t_acquire, s.flag_id.map(|f| self.name(f)))
            }),
        }
    }

    pub fn views(&self) -> Vec<EventView<'_>> {
        self.events.iter().map(|e| self.view(e)).collect()
    }

    /// Human-readable `kind/buffer/stage/unit@t` label.
    pub fn label(&self, e: &Event) -> String {
        format!(
            "{}/{}/{}/{}@{}",
            e.kind,
            self.name(e.buffer),
            self.name(e.stage),
            e.unit.map(|u| self.name(u)).unwrap_or("-"),
            e.t
        )
    }

    pub fn is_may_overlap(&self, buffer: BufferId) -> bool {
        self.may_overlap.contains(&buffer)
    }

    /// All W/R events of `stage` attributed to `unit`, ascending by timestamp.
    pub fn events_of_unit(&self, stage: &str, unit: &str) -> Result<Vec<&Event>, LookupError> {
        let stage_sym = self
            .lookup(stage)
            .filter(|s| self.stages.contains(s))
            .ok_or_else(|| LookupError::UnknownStage(stage.to_string()))?;
        let Some(unit_sym) = self.lookup(unit) else {
            return Ok(Vec::new());
        };
        let mut out: Vec<&Event> = self
            .events
            .iter()
            .filter(|e| e.stage == stage_sym && e.kind.is_access() && e.unit == Some(unit_sym))
            .collect();
        out.sort_by_key(|e| e.t);
        Ok(out)
    }

    /// Restores the storage invariant (stage grouping, ascending `t`).
    pub fn normalize_order(&mut self) {
        let order: BTreeMap<StageId, usize> =
            self.stages.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        self.events.sort_by_key(|e| (order.get(&e.stage).copied().unwrap_or(usize::MAX), e.t));
    }

    /// Renumbers every stage's timestamps to `0..k`, keeping relative order of
    /// event positions and barrier release points.
    pub fn recompact(&mut self) {
        for &stage in &self.stages {
            let mut points: BTreeSet<u32> = BTreeSet::new();
            for e in self.events.iter().filter(|e| e.stage == stage) {
                points.insert(e.t);
                if let Some(s) = &e.sync {
                    points.insert(s.t_release);
                    points.insert(s.t_acquire);
                }
            }
            let remap: BTreeMap<u32, u32> =
                points.into_iter().enumerate().map(|(i, t)| (t, i as u32)).collect();
            for e in self.events.iter_mut().filter(|e| e.stage == stage) {
                e.t = remap[&e.t];
                if let Some(s) = &mut e.sync {
                    s.t_release = remap[&s.t_release];
                    s.t_acquire = remap[&s.t_acquire];
                }
            }
        }
        self.normalize_order();
    }

    /// Checks the static program restrictions (stage grouping, timestamps,
    /// event shapes, queue balance, barrier intervals).
    /// An empty result means the program is well-formed.
    pub fn validate_structure(&self) -> Vec<Diagnostic> {
        validate_structure(self)
    }
}

/// Structural equality by name: handles may differ between the two programs.
impl PartialEq for KernelProgram {
    fn eq(&self, other: &Self) -> bool {
        let topo = |p: &KernelProgram| -> Vec<(String, String, String)> {
            p.topology
                .iter()
                .map(|l| {
                    (p.name(l.producer).into(), p.name(l.consumer).into(), p.name(l.queue).into())
                })
                .collect()
        };
        let overlap = |p: &KernelProgram| -> BTreeSet<String> {
            p.may_overlap.iter().map(|&b| p.name(b).to_string()).collect()
        };
        self.hardware == other.hardware
            && self.stage_names() == other.stage_names()
            && topo(self) == topo(other)
            && self.views() == other.views()
            && overlap(self) == overlap(other)
    }
}

pub fn validate_structure(p: &KernelProgram) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let declared: BTreeSet<StageId> = p.stages.iter().copied().collect();

    let mut seen = BTreeSet::new();
    for &s in &p.stages {
        if !seen.insert(s) {
            diags.push(Diagnostic::error(format!("stage {} declared twice", p.name(s))));
        }
    }

    // Per-stage ordering and per-kind field shape.
    let mut last_t: BTreeMap<StageId, u32> = BTreeMap::new();
    let mut last_stage_pos: Option<usize> = None;
    for (i, e) in p.events.iter().enumerate() {
        let Some(pos) = p.stage_index(e.stage) else {
            diags.push(Diagnostic::error(format!(
                "event {} references undeclared stage {}",
                i,
                p.name(e.stage)
            )));
            continue;
        };
        if last_stage_pos.is_some_and(|lp| pos < lp) {
            diags.push(Diagnostic::error(format!("event {} is not grouped with its stage", i)));
        }
        last_stage_pos = Some(pos);
        if let Some(&prev) = last_t.get(&e.stage) {
            if e.t <= prev {
                diags.push(Diagnostic::error(format!(
                    "stage {}: timestamp {} does not increase (previous {})",
                    p.name(e.stage),
                    e.t,
                    prev
                )));
            }
        }
        last_t.insert(e.stage, e.t);
        match e.kind {
            EventKind::Write | EventKind::Read if e.unit.is_none() => {
                diags.push(Diagnostic::error(format!("{} has no execution unit", p.label(e))));
            }
            EventKind::EnQue | EventKind::DeQue if e.unit.is_some() => {
                diags.push(Diagnostic::error(format!("{} must not carry a unit", p.label(e))));
            }
            EventKind::Barrier => match &e.sync {
                None => diags.push(Diagnostic::error(format!(
                    "{} has no synchronization annotation",
                    p.label(e)
                ))),
                Some(s) if s.t_release > s.t_acquire || s.t_acquire != e.t => {
                    diags.push(Diagnostic::error(format!(
                        "{}: malformed release/acquire interval {}..{}",
                        p.label(e),
                        s.t_release,
                        s.t_acquire
                    )))
                }
                Some(_) => {}
            },
            _ => {}
        }
    }

    // Topology: declared endpoints, distinct stages, one link per queue.
    let mut links: BTreeMap<QueueId, QueueLink> = BTreeMap::new();
    for l in &p.topology {
        for s in [l.producer, l.consumer] {
            if !declared.contains(&s) {
                diags.push(Diagnostic::error(format!(
                    "topology for queue {} references undeclared stage {}",
                    p.name(l.queue),
                    p.name(s)
                )));
            }
        }
        if l.producer == l.consumer {
            diags.push(Diagnostic::error(format!(
                "queue {} connects stage {} to itself",
                p.name(l.queue),
                p.name(l.producer)
            )));
        }
        if links.insert(l.queue, *l).is_some() {
            diags.push(Diagnostic::error(format!(
                "queue {} appears twice in topology",
                p.name(l.queue)
            )));
        }
    }

    // Queue usage.
    let mut enq: BTreeMap<QueueId, usize> = BTreeMap::new();
    let mut deq: BTreeMap<QueueId, usize> = BTreeMap::new();
    let mut queue_stages: BTreeMap<QueueId, BTreeSet<StageId>> = BTreeMap::new();
    for e in p.events.iter().filter(|e| e.kind.is_queue()) {
        queue_stages.entry(e.buffer).or_default().insert(e.stage);
        let counter = if e.kind == EventKind::EnQue { &mut enq } else { &mut deq };
        *counter.entry(e.buffer).or_default() += 1;
        if let Some(l) = links.get(&e.buffer) {
            let expected = if e.kind == EventKind::EnQue { l.producer } else { l.consumer };
            if e.stage != expected {
                diags.push(Diagnostic::error(format!(
                    "queue {}: {} in stage {}, but the topology places it in {}",
                    p.name(e.buffer),
                    e.kind,
                    p.name(e.stage),
                    p.name(expected)
                )));
            }
        }
    }
    let queues: BTreeSet<QueueId> =
        enq.keys().chain(deq.keys()).chain(links.keys()).copied().collect();
    for q in queues {
        let (ne, nd) = (enq.get(&q).copied().unwrap_or(0), deq.get(&q).copied().unwrap_or(0));
        let in_topology = links.contains_key(&q);
        // Queues with only one side present are open boundaries of a fragment.
        if (in_topology || (ne > 0 && nd > 0)) && ne != nd {
            diags.push(Diagnostic::error(format!(
                "queue {} unmatched: {} EQ vs {} DQ",
                p.name(q),
                ne,
                nd
            )));
        }
        if !in_topology && ne > 0 && nd > 0 {
            let stages = &queue_stages[&q];
            if stages.len() > 1 {
                let names: Vec<&str> = stages.iter().map(|&s| p.name(s)).collect();
                diags.push(Diagnostic::error(format!(
                    "queue {} connects stages {} but is not declared in topology",
                    p.name(q),
                    names.join(", ")
                )));
            }
        }
    }
    diags
}

/// Handle for a SetFlag half, returned so frontends can attach positions to
/// pairing diagnostics.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FlagToken(pub usize);

#[derive(Debug)]
struct PendingFlag {
    primitive: Symbol,
    flag: Symbol,
    t: u32,
    token: FlagToken,
}

#[derive(Debug, Default)]
struct StageBuf {
    events: Vec<Event>,
    next_t: u32,
    pending: Vec<PendingFlag>,
}

/// Output of [`ProgramBuilder::finish`].
#[derive(Debug)]
pub struct Built {
    pub program: KernelProgram,
    /// SetFlag halves that never met a WaitFlag; they contribute no barrier.
    pub unmatched_set_flags: Vec<FlagToken>,
}

/// Incremental construction of a [`KernelProgram`].
///
/// Every operation consumes one tick of the current stage's counter, so a
/// SetFlag occupies a timestamp even though it emits no event of its own.
#[derive(Debug, Default)]
pub struct ProgramBuilder {
    program: KernelProgram,
    bufs: Vec<StageBuf>,
    current: Option<usize>,
    next_token: usize,
}

impl ProgramBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn hardware(&mut self, name: &str) -> &mut Self {
        self.program.hardware = Some(name.to_string());
        self
    }

    /// Selects `name` as the current stage, declaring it on first use.
    /// Returns `false` if the stage had already been declared.
    pub fn stage(&mut self, name: &str) -> bool {
        let sym = self.program.intern(name);
        if let Some(i) = self.program.stage_index(sym) {
            self.current = Some(i);
            false
        } else {
            self.program.stages.push(sym);
            self.bufs.push(StageBuf::default());
            self.current = Some(self.bufs.len() - 1);
            true
        }
    }

    pub fn has_stage(&self, name: &str) -> bool {
        self.program.lookup(name).and_then(|s| self.program.stage_index(s)).is_some()
    }

    fn cur(&mut self) -> (StageId, &mut StageBuf) {
        let i = self.current.expect("ProgramBuilder: no stage selected");
        (self.program.stages[i], &mut self.bufs[i])
    }

    fn push(&mut self, kind: EventKind, buffer: &str, unit: Option<&str>) -> u32 {
        let buffer = self.program.intern(buffer);
        let unit = unit.map(|u| self.program.intern(u));
        let (stage, buf) = self.cur();
        let t = buf.next_t;
        buf.next_t += 1;
        buf.events.push(Event { kind, buffer, stage, t, unit, sync: None });
        t
    }

    pub fn write(&mut self, buffer: &str, unit: &str) -> u32 {
        self.push(EventKind::Write, buffer, Some(unit))
    }

    pub fn read(&mut self, buffer: &str, unit: &str) -> u32 {
        self.push(EventKind::Read, buffer, Some(unit))
    }

    pub fn enque(&mut self, queue: &str) -> u32 {
        self.push(EventKind::EnQue, queue, None)
    }

    pub fn deque(&mut self, queue: &str) -> u32 {
        self.push(EventKind::DeQue, queue, None)
    }

    /// Point barrier: release and acquire at the same position.
    pub fn barrier(&mut self, primitive: &str) -> u32 {
        let prim = self.program.intern(primitive);
        let (stage, buf) = self.cur();
        let t = buf.next_t;
        buf.next_t += 1;
        buf.events.push(Event {
            kind: EventKind::Barrier,
            buffer: prim,
            stage,
            t,
            unit: None,
            sync: Some(SyncAnnotation { primitive: prim, t_release: t, t_acquire: t, flag_id: None }),
        });
        t
    }

    /// Consumes a tick without emitting an event.
    pub fn tick(&mut self) -> u32 {
        let (_, buf) = self.cur();
        buf.next_t += 1;
        buf.next_t - 1
    }

    pub fn set_flag(&mut self, primitive: &str, flag: &str) -> FlagToken {
        let primitive = self.program.intern(primitive);
        let flag = self.program.intern(flag);
        let token = FlagToken(self.next_token);
        self.next_token += 1;
        let (_, buf) = self.cur();
        let t = buf.next_t;
        buf.next_t += 1;
        buf.pending.push(PendingFlag { primitive, flag, t, token });
        token
    }

    /// Pairs with the earliest unmatched SetFlag of the same primitive and flag
    /// in the current stage and emits the interval barrier. Returns `None` for an
    /// orphan WaitFlag, which emits nothing.
    pub fn wait_flag(&mut self, primitive: &str, flag: &str) -> Option<FlagToken> {
        let primitive = self.program.intern(primitive);
        let flag = self.program.intern(flag);
        let (stage, buf) = self.cur();
        let t = buf.next_t;
        buf.next_t += 1;
        let idx = buf.pending.iter().position(|p| p.primitive == primitive && p.flag == flag)?;
        let set = buf.pending.remove(idx);
        buf.events.push(Event {
            kind: EventKind::Barrier,
            buffer: primitive,
            stage,
            t,
            unit: None,
            sync: Some(SyncAnnotation {
                primitive,
                t_release: set.t,
                t_acquire: t,
                flag_id: Some(flag),
            }),
        });
        Some(set.token)
    }

    pub fn topology(&mut self, producer: &str, consumer: &str, queue: &str) -> &mut Self {
        let link = QueueLink {
            producer: self.program.intern(producer),
            consumer: self.program.intern(consumer),
            queue: self.program.intern(queue),
        };
        self.program.topology.push(link);
        self
    }

    pub fn mark_may_overlap(&mut self, buffer: &str) {
        let b = self.program.intern(buffer);
        self.program.may_overlap.insert(b);
    }

    pub fn finish(mut self) -> Built {
        let mut unmatched = Vec::new();
        for buf in &mut self.bufs {
            self.program.events.append(&mut buf.events);
            unmatched.extend(buf.pending.iter().map(|p| p.token));
        }
        Built { program: self.program, unmatched_set_flags: unmatched }
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// The five-event Compute fragment: DQ, W maxVal@VPU, R maxVal@Scalar,
    /// W result@VPU, EQ.
    pub(crate) fn softmax() -> KernelProgram {
        let mut b = ProgramBuilder::new();
        b.hardware("ascend910b2");
        b.stage("Compute");
        b.deque("inQueueX");
        b.write("maxVal", "VPU");
        b.read("maxVal", "Scalar");
        b.write("result", "VPU");
        b.enque("outQueueY");
        b.finish().program
    }

    #[test]
    fn softmax_is_well_formed() {
        let p = softmax();
        assert_eq!(p.len(), 5);
        assert!(p.validate_structure().is_empty());
    }

    #[test]
    fn empty_program_is_well_formed() {
        assert!(KernelProgram::new().validate_structure().is_empty());
    }

    #[test]
    fn queue_count_mismatch_is_reported_once() {
        let mut b = ProgramBuilder::new();
        b.stage("A");
        for _ in 0..3 {
            b.enque("q");
        }
        b.stage("B");
        for _ in 0..2 {
            b.deque("q");
        }
        b.topology("A", "B", "q");
        let diags = b.finish().program.validate_structure();
        assert_eq!(diags.len(), 1, "{diags:?}");
        assert_eq!(diags[0].message, "queue q unmatched: 3 EQ vs 2 DQ");
    }

    #[test]
    fn boundary_queues_are_not_balanced() {
        // softmax only dequeues inQueueX and only enqueues outQueueY
        assert!(softmax().validate_structure().is_empty());
    }

    #[test]
    fn topology_to_undeclared_stage() {
        let mut b = ProgramBuilder::new();
        b.stage("A");
        b.enque("q");
        b.topology("A", "Ghost", "q");
        let diags = b.finish().program.validate_structure();
        assert!(diags.iter().any(|d| d.message.contains("undeclared stage Ghost")));
    }

    #[test]
    fn undeclared_cross_stage_queue() {
        let mut b = ProgramBuilder::new();
        b.stage("A");
        b.enque("q");
        b.stage("B");
        b.deque("q");
        let diags = b.finish().program.validate_structure();
        assert_eq!(diags.len(), 1);
        assert!(diags[0].message.contains("not declared in topology"));
    }

    #[test]
    fn queue_op_on_wrong_side() {
        let mut b = ProgramBuilder::new();
        b.stage("A");
        b.deque("q");
        b.stage("B");
        b.enque("q");
        b.topology("A", "B", "q");
        let diags = b.finish().program.validate_structure();
        assert_eq!(diags.len(), 2);
    }

    #[test]
    fn events_of_unit_filters_and_sorts() {
        let p = softmax();
        let vpu = p.events_of_unit("Compute", "VPU").unwrap();
        assert_eq!(vpu.len(), 2);
        assert_eq!(p.name(vpu[0].buffer), "maxVal");
        assert_eq!(p.name(vpu[1].buffer), "result");
        assert!(p.events_of_unit("Compute", "Cube").unwrap().is_empty());
        assert_eq!(
            p.events_of_unit("Nowhere", "VPU").unwrap_err(),
            LookupError::UnknownStage("Nowhere".into())
        );
    }

    #[test]
    fn flag_pair_becomes_interval_barrier() {
        let mut b = ProgramBuilder::new();
        b.stage("Compute");
        b.write("x", "VPU");
        let tok = b.set_flag("V_S", "0");
        assert_eq!(b.wait_flag("V_S", "0"), Some(tok));
        b.read("x", "Scalar");
        let built = b.finish();
        assert!(built.unmatched_set_flags.is_empty());
        let p = built.program;
        assert_eq!(p.len(), 3);
        let s = p.events[1].sync.as_ref().unwrap();
        assert_eq!((s.t_release, s.t_acquire, p.events[1].t), (1, 2, 2));
        assert!(p.validate_structure().is_empty());
    }

    #[test]
    fn first_unmatched_setflag_wins() {
        let mut b = ProgramBuilder::new();
        b.stage("S");
        let first = b.set_flag("V_S", "0");
        let second = b.set_flag("V_S", "0");
        assert_eq!(b.wait_flag("V_S", "0"), Some(first));
        assert_eq!(b.wait_flag("V_S", "1"), None);
        let built = b.finish();
        assert_eq!(built.unmatched_set_flags, vec![second]);
    }

    #[test]
    fn recompact_preserves_relative_order() {
        let mut b = ProgramBuilder::new();
        b.stage("S");
        b.write("x", "VPU");
        b.set_flag("V_S", "0");
        b.tick();
        b.wait_flag("V_S", "0");
        b.read("x", "Scalar");
        let mut p = b.finish().program;
        p.recompact();
        let ts: Vec<u32> = p.events.iter().map(|e| e.t).collect();
        assert_eq!(ts, vec![0, 2, 3]);
        let s = p.events[1].sync.as_ref().unwrap();
        assert_eq!(s.t_release, 1);
    }
}
