//! Typed happens-before graph and its reachability closure.
//!
//! Node ids are indices into `KernelProgram::events`. Barrier order is stored
//! as a skeleton: for each (barrier, rule, writer unit, reader unit) only the
//! edge from the last qualifying write to the first qualifying read is
//! materialized. Together with the per-unit program-order chains this has the
//! same closure as the full write x read product.

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::fmt;

use fixedbitset::FixedBitSet;
use serde::Serialize;

use crate::diag::Diagnostic;
use crate::event::{EventKind, KernelProgram};
use crate::hardware::HardwareModel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum EdgeKind {
    #[serde(rename = "PO")]
    Po,
    #[serde(rename = "SO")]
    So,
    #[serde(rename = "BO")]
    Bo,
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EdgeKind::Po => "PO",
            EdgeKind::So => "SO",
            EdgeKind::Bo => "BO",
        })
    }
}

#[derive(Clone, Debug)]
pub struct HbGraph {
    adj: Vec<Vec<(usize, EdgeKind)>>,
    seen: HashSet<(usize, usize)>,
    counts: [usize; 3],
    reach: Option<Vec<FixedBitSet>>,
}

/// A cycle found while closing the graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cycle(pub Vec<usize>);

impl HbGraph {
    pub fn new(nodes: usize) -> Self {
        Self { adj: vec![Vec::new(); nodes], seen: HashSet::new(), counts: [0; 3], reach: None }
    }

    /// Graph with po, so and bo edges for `program` under `model`, not yet
    /// closed. Diagnostics come from so pairing and primitive resolution.
    pub fn build(program: &KernelProgram, model: &HardwareModel) -> (Self, Vec<Diagnostic>) {
        let mut g = Self::new(program.len());
        let mut diags = Vec::new();
        g.add_po_edges(program);
        g.add_so_edges(program, &mut diags);
        g.add_bo_edges(program, model, &mut diags);
        (g, diags)
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    /// Adds `a -> b` unless an edge between the two already exists.
    pub fn add_edge(&mut self, a: usize, b: usize, kind: EdgeKind) -> bool {
        assert!(a < self.len() && b < self.len(), "edge endpoint out of range");
        if !self.seen.insert((a, b)) {
            return false;
        }
        self.adj[a].push((b, kind));
        self.counts[kind as usize] += 1;
        self.reach = None;
        true
    }

    pub fn edge_count(&self, kind: EdgeKind) -> usize {
        self.counts[kind as usize]
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, EdgeKind)> + '_ {
        self.adj.iter().enumerate().flat_map(|(a, out)| out.iter().map(move |&(b, k)| (a, b, k)))
    }

    pub fn successors(&self, a: usize) -> impl Iterator<Item = usize> + '_ {
        self.adj[a].iter().map(|&(b, _)| b)
    }

    /// Program order: consecutive events of each (stage, unit); every DeQue
    /// before all later events of its stage; every earlier event of a stage
    /// before each EnQue.
    pub fn add_po_edges(&mut self, program: &KernelProgram) -> usize {
        let mut added = 0;
        for &stage in &program.stages {
            let ev: Vec<usize> = program.stage_events(stage).map(|(i, _)| i).collect();
            let mut last_of_unit: Vec<(crate::symbol::Symbol, usize)> = Vec::new();
            for &i in &ev {
                if let Some(u) = program.events[i].unit {
                    match last_of_unit.iter_mut().find(|(lu, _)| *lu == u) {
                        Some(slot) => {
                            added += self.add_edge(slot.1, i, EdgeKind::Po) as usize;
                            slot.1 = i;
                        }
                        None => last_of_unit.push((u, i)),
                    }
                }
            }
            for (k, &i) in ev.iter().enumerate() {
                match program.events[i].kind {
                    EventKind::DeQue => {
                        for &j in &ev[k + 1..] {
                            added += self.add_edge(i, j, EdgeKind::Po) as usize;
                        }
                    }
                    EventKind::EnQue => {
                        for &j in &ev[..k] {
                            added += self.add_edge(j, i, EdgeKind::Po) as usize;
                        }
                    }
                    _ => {}
                }
            }
        }
        added
    }

    /// Synchronization order: the k-th EnQue on a topology queue in the
    /// producer stage precedes the k-th DeQue in the consumer stage.
    pub fn add_so_edges(&mut self, program: &KernelProgram, diags: &mut Vec<Diagnostic>) -> usize {
        let mut added = 0;
        for link in &program.topology {
            let pick = |stage, kind| -> Vec<usize> {
                program
                    .stage_events(stage)
                    .filter(|(_, e)| e.kind == kind && e.buffer == link.queue)
                    .map(|(i, _)| i)
                    .collect()
            };
            let enq = pick(link.producer, EventKind::EnQue);
            let deq = pick(link.consumer, EventKind::DeQue);
            if enq.len() != deq.len() {
                diags.push(Diagnostic::error(format!(
                    "queue {} unmatched: {} EQ vs {} DQ",
                    program.name(link.queue),
                    enq.len(),
                    deq.len()
                )));
                continue;
            }
            for (a, b) in enq.into_iter().zip(deq) {
                added += self.add_edge(a, b, EdgeKind::So) as usize;
            }
        }
        added
    }

    /// Barrier order, materialized as the skeleton described in the module
    /// docs. Barriers whose primitive the model does not know contribute no
    /// edges and produce one warning per spelling.
    pub fn add_bo_edges(&mut self, program: &KernelProgram, model: &HardwareModel, diags: &mut Vec<Diagnostic>) -> usize {
        let mut added = 0;
        let mut unknown = BTreeSet::new();
        for b in &program.events {
            let Some(sync) = b.sync.as_ref().filter(|_| b.kind == EventKind::Barrier) else { continue };
            let spelling = program.name(sync.primitive);
            let Some(canon) = model.canonical_primitive(spelling) else {
                unknown.insert(spelling.to_string());
                continue;
            };
            let stage_name = program.name(b.stage);
            let stage: Vec<usize> = program.stage_events(b.stage).map(|(i, _)| i).collect();
            for rule in model.rules_for(canon).filter(|r| r.stage.matches(stage_name)) {
                // last write per writer unit before the release point
                let mut writers: Vec<(crate::symbol::Symbol, usize)> = Vec::new();
                let mut readers: Vec<(crate::symbol::Symbol, usize)> = Vec::new();
                for &i in &stage {
                    let e = &program.events[i];
                    let Some(u) = e.unit else { continue };
                    if e.kind == EventKind::Write && e.t < sync.t_release && rule.writer.matches(program.name(u)) {
                        match writers.iter_mut().find(|(wu, _)| *wu == u) {
                            Some(slot) => slot.1 = i,
                            None => writers.push((u, i)),
                        }
                    }
                    if e.kind == EventKind::Read
                        && e.t > sync.t_acquire
                        && rule.reader.matches(program.name(u))
                        && !readers.iter().any(|(ru, _)| *ru == u)
                    {
                        readers.push((u, i));
                    }
                }
                for &(_, w) in &writers {
                    for &(_, r) in &readers {
                        added += self.add_edge(w, r, EdgeKind::Bo) as usize;
                    }
                }
            }
        }
        for p in unknown {
            diags.push(Diagnostic::warning(format!(
                "unknown primitive {p} for model {}; barrier contributes no ordering",
                model.name
            )));
        }
        added
    }

    /// Computes the strict reachability closure. On a cycle, returns the nodes
    /// of one cycle in edge order.
    pub fn close(&mut self) -> Result<(), Cycle> {
        let n = self.len();
        let mut indeg = vec![0usize; n];
        for (_, b, _) in self.edges() {
            indeg[b] += 1;
        }
        let mut queue: VecDeque<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &(s, _) in &self.adj[v] {
                indeg[s] -= 1;
                if indeg[s] == 0 {
                    queue.push_back(s);
                }
            }
        }
        if order.len() < n {
            return Err(self.find_cycle(&indeg));
        }
        let mut reach = vec![FixedBitSet::with_capacity(n); n];
        for &v in order.iter().rev() {
            let mut row = FixedBitSet::with_capacity(n);
            for &(s, _) in &self.adj[v] {
                row.insert(s);
                row.union_with(&reach[s]);
            }
            reach[v] = row;
        }
        self.reach = Some(reach);
        Ok(())
    }

    /// Walks forward among nodes left over by Kahn's algorithm; every such node
    /// has a predecessor in the leftover set, so walking backwards must repeat.
    fn find_cycle(&self, indeg: &[usize]) -> Cycle {
        let n = self.len();
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (a, b, _) in self.edges() {
            if indeg[a] > 0 && indeg[b] > 0 {
                preds[b].push(a);
            }
        }
        let start = (0..n).find(|&v| indeg[v] > 0).expect("leftover node");
        let mut pos = vec![usize::MAX; n];
        let mut path = Vec::new();
        let mut v = start;
        while pos[v] == usize::MAX {
            pos[v] = path.len();
            path.push(v);
            v = preds[v][0];
        }
        let mut cycle = path[pos[v]..].to_vec();
        cycle.reverse();
        Cycle(cycle)
    }

    pub fn is_closed(&self) -> bool {
        self.reach.is_some()
    }

    /// `a ->hb b`. Panics if the graph has not been closed.
    pub fn reaches(&self, a: usize, b: usize) -> bool {
        self.reach.as_ref().expect("graph not closed")[a].contains(b)
    }

    pub fn reach_row(&self, a: usize) -> &FixedBitSet {
        &self.reach.as_ref().expect("graph not closed")[a]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::{tests::softmax, ProgramBuilder};
    use crate::hardware::builtin_model;
    use proptest::prelude::*;

    fn floyd_warshall(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<bool>> {
        let mut m = vec![vec![false; n]; n];
        for &(a, b) in edges {
            m[a][b] = true;
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if m[i][k] && m[k][j] {
                        m[i][j] = true;
                    }
                }
            }
        }
        m
    }

    fn po_set(p: &KernelProgram) -> BTreeSet<(usize, usize)> {
        let mut g = HbGraph::new(p.len());
        g.add_po_edges(p);
        g.edges().map(|(a, b, _)| (a, b)).collect()
    }

    #[test]
    fn softmax_program_order() {
        let p = softmax();
        let got = po_set(&p);
        let want: BTreeSet<_> = [(0, 1), (0, 2), (0, 3), (0, 4), (1, 3), (1, 4), (2, 4), (3, 4)].into_iter().collect();
        assert_eq!(got, want);
        assert!(!got.contains(&(1, 2)) && !got.contains(&(2, 1)));
    }

    #[test]
    fn single_event_stage_has_no_po() {
        let mut b = ProgramBuilder::new();
        b.stage("S");
        b.write("x", "VPU");
        assert!(po_set(&b.finish().program).is_empty());
    }

    #[test]
    fn softmax_closure() {
        let p = softmax();
        let m = builtin_model("ascend910b2").unwrap();
        let (mut g, d) = HbGraph::build(&p, &m);
        assert!(d.is_empty());
        assert_eq!(g.edge_count(EdgeKind::Bo), 0);
        g.close().unwrap();
        assert!(g.reaches(0, 4));
        assert!(!g.reaches(1, 2));
        for v in 0..p.len() {
            assert!(!g.reaches(v, v));
        }
    }

    #[test]
    fn softmax_with_barrier_gets_bo_edge() {
        let mut b = ProgramBuilder::new();
        b.stage("Compute");
        b.deque("inQueueX");
        b.write("maxVal", "VPU");
        b.barrier("V_S");
        b.read("maxVal", "Scalar");
        b.write("result", "VPU");
        b.enque("outQueueY");
        let p = b.finish().program;
        let m = builtin_model("ascend910b2").unwrap();
        let (mut g, _) = HbGraph::build(&p, &m);
        let bo: Vec<_> = g.edges().filter(|e| e.2 == EdgeKind::Bo).map(|(a, b, _)| (a, b)).collect();
        assert_eq!(bo, vec![(1, 3)]);
        g.close().unwrap();
        assert!(g.reaches(1, 3));
    }

    #[test]
    fn edgeless_graph_closes_empty() {
        let mut g = HbGraph::new(4);
        g.close().unwrap();
        assert!((0..4).all(|a| g.reach_row(a).count_ones(..) == 0));
    }

    #[test]
    fn full_sync_between_two_units() {
        let mut b = ProgramBuilder::new();
        b.stage("Compute");
        b.write("a", "VPU");
        b.write("b", "IPU");
        b.barrier("FULL_SYNC");
        b.read("a", "VPU");
        b.read("b", "IPU");
        let p = b.finish().program;
        let (g, _) = HbGraph::build(&p, &builtin_model("mlu370").unwrap());
        // same-unit pairs are already program-ordered, so only the cross pairs are new
        assert_eq!(g.edge_count(EdgeKind::Bo), 2);
        let bo: Vec<_> = g.edges().filter(|e| e.2 == EdgeKind::Bo).map(|e| (e.0, e.1)).collect();
        assert!(bo.contains(&(0, 4)) && bo.contains(&(1, 3)));
    }

    #[test]
    fn three_pair_queue_zips_fifo() {
        let mut b = ProgramBuilder::new();
        b.stage("A");
        for _ in 0..3 {
            b.enque("q");
        }
        b.stage("B");
        for _ in 0..3 {
            b.deque("q");
        }
        b.topology("A", "B", "q");
        let p = b.finish().program;
        let mut g = HbGraph::new(p.len());
        let mut d = Vec::new();
        assert_eq!(g.add_so_edges(&p, &mut d), 3);
        let so: Vec<_> = g.edges().filter(|e| e.2 == EdgeKind::So).map(|(a, b, _)| (a, b)).collect();
        assert_eq!(so, vec![(0, 3), (1, 4), (2, 5)]);
    }

    #[test]
    fn unknown_primitive_is_reported() {
        let mut b = ProgramBuilder::new();
        b.stage("Compute");
        b.barrier("MYSTERY");
        let p = b.finish().program;
        let (_, d) = HbGraph::build(&p, &builtin_model("ascend910b2").unwrap());
        assert_eq!(d.len(), 1);
        assert!(d[0].message.contains("unknown primitive MYSTERY"));
    }

    #[test]
    fn cycle_is_reported() {
        let mut g = HbGraph::new(4);
        g.add_edge(0, 1, EdgeKind::Po);
        g.add_edge(1, 2, EdgeKind::Po);
        g.add_edge(2, 3, EdgeKind::So);
        g.add_edge(3, 1, EdgeKind::So);
        let Cycle(c) = g.close().unwrap_err();
        assert_eq!(c.len(), 3);
        for w in 0..c.len() {
            let (a, b) = (c[w], c[(w + 1) % c.len()]);
            assert!(g.successors(a).any(|s| s == b));
        }
    }

    proptest! {
        #[test]
        #[allow(clippy::needless_range_loop)]
        fn closure_matches_floyd_warshall(n in 1usize..11, raw in proptest::collection::vec((0usize..11, 0usize..11), 0..30)) {
            let edges: Vec<(usize, usize)> = raw.into_iter()
                .filter(|&(a, b)| a < n && b < n && a < b)
                .collect();
            let mut g = HbGraph::new(n);
            for &(a, b) in &edges {
                g.add_edge(a, b, EdgeKind::Po);
            }
            g.close().unwrap();
            let fw = floyd_warshall(n, &edges);
            for a in 0..n {
                for b in 0..n {
                    prop_assert_eq!(g.reaches(a, b), fw[a][b]);
                }
            }
            let before: Vec<_> = (0..n).map(|a| g.reach_row(a).clone()).collect();
            g.close().unwrap();
            for a in 0..n {
                prop_assert_eq!(g.reach_row(a), &before[a]);
            }
        }
    }
}
