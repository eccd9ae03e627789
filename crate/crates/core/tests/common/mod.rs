//! Reference semantics written straight from the ordering rules, with no
//! shared code beyond the program and model data types.

#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use pipesync::event::{EventKind, KernelProgram};
use pipesync::hardware::{HardwareModel, Scope};

pub fn corpus(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(rel)
}

fn scope_ok(s: &Scope, name: &str) -> bool {
    match s {
        Scope::Any => true,
        Scope::Named(n) => n.eq_ignore_ascii_case(name),
    }
}

fn unit_key(p: &KernelProgram, i: usize) -> Option<String> {
    p.events[i].unit.map(|u| p.name(u).to_ascii_lowercase())
}

/// Every happens-before edge of `p` under `m`, unclosed. Barrier order is the
/// full write x read product.
pub fn reference_edges(p: &KernelProgram, m: &HardwareModel) -> Vec<(usize, usize)> {
    let n = p.len();
    let mut edges = Vec::new();
    let same_stage = |a: usize, b: usize| p.events[a].stage == p.events[b].stage;
    for a in 0..n {
        for b in 0..n {
            if a == b || !same_stage(a, b) {
                continue;
            }
            let (ea, eb) = (&p.events[a], &p.events[b]);
            let before = a < b;
            let same_unit = ea.unit.is_some() && unit_key(p, a) == unit_key(p, b);
            if before && (same_unit || ea.kind == EventKind::DeQue || eb.kind == EventKind::EnQue) {
                edges.push((a, b));
            }
        }
    }
    for link in &p.topology {
        let of = |stage, kind| -> Vec<usize> {
            (0..n).filter(|&i| p.events[i].stage == stage && p.events[i].kind == kind && p.events[i].buffer == link.queue).collect()
        };
        let enq = of(link.producer, EventKind::EnQue);
        let deq = of(link.consumer, EventKind::DeQue);
        edges.extend(enq.into_iter().zip(deq));
    }
    for (bi, b) in p.events.iter().enumerate() {
        let Some(sync) = &b.sync else { continue };
        let Some(canon) = m.canonical_primitive(p.name(sync.primitive)) else { continue };
        let stage = p.name(b.stage);
        for rule in m.rules.iter().filter(|r| r.primitive == canon && scope_ok(&r.stage, stage)) {
            for w in (0..n).filter(|&w| same_stage(w, bi)) {
                let ew = &p.events[w];
                if ew.kind != EventKind::Write || ew.t >= sync.t_release || !scope_ok(&rule.writer, p.name(ew.unit.unwrap())) {
                    continue;
                }
                for r in (0..n).filter(|&r| same_stage(r, bi)) {
                    let er = &p.events[r];
                    if er.kind == EventKind::Read && er.t > sync.t_acquire && scope_ok(&rule.reader, p.name(er.unit.unwrap())) {
                        edges.push((w, r));
                    }
                }
            }
        }
    }
    edges
}

/// Strict reachability by Warshall's algorithm.
#[allow(clippy::needless_range_loop)]
pub fn reference_reach(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<bool>> {
    let mut r = vec![vec![false; n]; n];
    for &(a, b) in edges {
        r[a][b] = true;
    }
    for k in 0..n {
        for i in 0..n {
            if r[i][k] {
                for j in 0..n {
                    if r[k][j] {
                        r[i][j] = true;
                    }
                }
            }
        }
    }
    r
}

pub fn reference_relevant(p: &KernelProgram) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (w, ew) in p.events.iter().enumerate().filter(|(_, e)| e.kind == EventKind::Write) {
        for (r, er) in p.events.iter().enumerate().filter(|(_, e)| e.kind == EventKind::Read) {
            let buffers = ew.buffer == er.buffer || (p.may_overlap.contains(&ew.buffer) && p.may_overlap.contains(&er.buffer));
            let cross_stage = ew.stage != er.stage;
            let cross_unit = unit_key(p, w) != unit_key(p, r) && ew.t < er.t;
            if buffers && (cross_stage || cross_unit) {
                out.push((w, r));
            }
        }
    }
    out
}

/// Relevant pairs with no happens-before path.
pub fn reference_unordered(p: &KernelProgram, m: &HardwareModel) -> BTreeSet<(usize, usize)> {
    let reach = reference_reach(p.len(), &reference_edges(p, m));
    reference_relevant(p).into_iter().filter(|&(w, r)| !reach[w][r]).collect()
}

/// Multiset of (kind, buffer, stage, unit) tuples.
pub fn event_multiset(p: &KernelProgram) -> Vec<(String, String, String, String)> {
    let mut v: Vec<_> = p
        .events
        .iter()
        .map(|e| {
            (e.kind.tag().to_string(), p.name(e.buffer).to_string(), p.name(e.stage).to_string(), e.unit.map_or("-", |u| p.name(u)).to_string())
        })
        .collect();
    v.sort();
    v
}
