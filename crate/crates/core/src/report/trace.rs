//! JSON event traces: a neutral program interchange format.
//!
//! ```json
//! { "hardware": "ascend910b2",
//!   "stages": ["Compute"],
//!   "topology": [{"from": "MTE_in", "to": "Compute", "queue": "inQueueX"}],
//!   "events": [{"kind": "W", "buffer": "maxVal", "stage": "Compute", "t": 1, "unit": "VPU"},
//!              {"kind": "B", "buffer": "V_S", "stage": "Compute", "t": 2,
//!               "sync": {"primitive": "V_S", "t_release": 2, "t_acquire": 2}}],
//!   "may_overlap": ["tmp"] }
//! ```

use serde::{Deserialize, Serialize};

use crate::diag::Diagnostic;
use crate::event::{Event, EventKind, KernelProgram, QueueLink, SyncAnnotation};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TraceDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    hardware: Option<String>,
    stages: Vec<String>,
    #[serde(default)]
    topology: Vec<TraceLink>,
    events: Vec<TraceEvent>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    may_overlap: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TraceLink {
    from: String,
    to: String,
    queue: String,
}

#[derive(Serialize, Deserialize, Clone, Copy)]
enum TraceKind {
    W,
    R,
    EQ,
    DQ,
    B,
}

impl From<EventKind> for TraceKind {
    fn from(k: EventKind) -> Self {
        match k {
            EventKind::Write => TraceKind::W,
            EventKind::Read => TraceKind::R,
            EventKind::EnQue => TraceKind::EQ,
            EventKind::DeQue => TraceKind::DQ,
            EventKind::Barrier => TraceKind::B,
        }
    }
}

impl From<TraceKind> for EventKind {
    fn from(k: TraceKind) -> Self {
        match k {
            TraceKind::W => EventKind::Write,
            TraceKind::R => EventKind::Read,
            TraceKind::EQ => EventKind::EnQue,
            TraceKind::DQ => EventKind::DeQue,
            TraceKind::B => EventKind::Barrier,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TraceEvent {
    kind: TraceKind,
    buffer: String,
    stage: String,
    t: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    unit: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sync: Option<TraceSync>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TraceSync {
    primitive: String,
    t_release: u32,
    t_acquire: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    flag: Option<String>,
}

pub fn export_trace(program: &KernelProgram) -> String {
    let p = program;
    let doc = TraceDoc {
        hardware: p.hardware.clone(),
        stages: p.stage_names().into_iter().map(String::from).collect(),
        topology: p
            .topology
            .iter()
            .map(|l| TraceLink {
                from: p.name(l.producer).into(),
                to: p.name(l.consumer).into(),
                queue: p.name(l.queue).into(),
            })
            .collect(),
        events: p
            .events
            .iter()
            .map(|e| TraceEvent {
                kind: e.kind.into(),
                buffer: p.name(e.buffer).into(),
                stage: p.name(e.stage).into(),
                t: e.t,
                unit: e.unit.map(|u| p.name(u).into()),
                sync: e.sync.as_ref().map(|s| TraceSync {
                    primitive: p.name(s.primitive).into(),
                    t_release: s.t_release,
                    t_acquire: s.t_acquire,
                    flag: s.flag_id.map(|f| p.name(f).into()),
                }),
            })
            .collect(),
        may_overlap: p.may_overlap.iter().map(|&b| p.name(b).to_string()).collect(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("trace serializes");
    s.push('\n');
    s
}

/// Parses a trace. Schema violations report the JSON path of the offending
/// value; references to undeclared stages are rejected here, deeper checks
/// are left to structural validation.
pub fn import_trace(text: &str) -> Result<KernelProgram, Diagnostic> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: TraceDoc = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let d = Diagnostic::error(format!("trace schema error at {path}: {inner}"));
        if inner.line() > 0 {
            d.at(inner.line(), inner.column())
        } else {
            d
        }
    })?;

    let mut p = KernelProgram::new();
    p.hardware = doc.hardware;
    for s in &doc.stages {
        let sym = p.intern(s);
        if p.stages.contains(&sym) {
            return Err(Diagnostic::error(format!("trace schema error at stages: duplicate stage {s}")));
        }
        p.stages.push(sym);
    }
    let stage = |p: &mut KernelProgram, name: &str, path: String| {
        let sym = p.intern(name);
        if p.stages.contains(&sym) {
            Ok(sym)
        } else {
            Err(Diagnostic::error(format!("trace schema error at {path}: undeclared stage {name}")))
        }
    };
    for (i, l) in doc.topology.iter().enumerate() {
        let producer = stage(&mut p, &l.from, format!("topology[{i}].from"))?;
        let consumer = stage(&mut p, &l.to, format!("topology[{i}].to"))?;
        let queue = p.intern(&l.queue);
        p.topology.push(QueueLink { producer, consumer, queue });
    }
    for (i, e) in doc.events.iter().enumerate() {
        let st = stage(&mut p, &e.stage, format!("events[{i}].stage"))?;
        let ev = Event {
            kind: e.kind.into(),
            buffer: p.intern(&e.buffer),
            stage: st,
            t: e.t,
            unit: e.unit.as_deref().map(|u| p.intern(u)),
            sync: e.sync.as_ref().map(|s| SyncAnnotation {
                primitive: p.intern(&s.primitive),
                t_release: s.t_release,
                t_acquire: s.t_acquire,
                flag_id: s.flag.as_deref().map(|f| p.intern(f)),
            }),
        };
        p.events.push(ev);
    }
    for b in &doc.may_overlap {
        let sym = p.intern(b);
        p.may_overlap.insert(sym);
    }
    p.normalize_order();
    Ok(p)
}
