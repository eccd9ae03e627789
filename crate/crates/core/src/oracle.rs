//! Brute-force ordering oracle over linear extensions.
//!
//! A pair is ordered iff the write precedes the read in every topological
//! ordering of the edge relation. Nothing here consults the reachability
//! closure.

use serde::Serialize;
use thiserror::Error;

use crate::checker::relevant_pairs;
use crate::event::KernelProgram;
use crate::graph::HbGraph;
use crate::hardware::HardwareModel;

pub const DEFAULT_CAP: usize = 9;
pub const HARD_CAP: usize = 12;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("{nodes} events exceeds the oracle cap of {cap}")]
    TooLarge { nodes: usize, cap: usize },
    #[error("edge relation is cyclic")]
    Cyclic,
    #[error("structural error: {0}")]
    Structural(String),
}

/// Plain successor lists; the oracle's only view of a graph.
#[derive(Clone, Debug)]
pub struct EdgeRelation {
    pub succ: Vec<Vec<usize>>,
}

impl EdgeRelation {
    pub fn from_graph(g: &HbGraph) -> Self {
        let mut succ = vec![Vec::new(); g.len()];
        for (a, b, _) in g.edges() {
            succ[a].push(b);
        }
        Self { succ }
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut succ = vec![Vec::new(); n];
        for &(a, b) in edges {
            succ[a].push(b);
        }
        Self { succ }
    }

    pub fn len(&self) -> usize {
        self.succ.len()
    }

    pub fn is_empty(&self) -> bool {
        self.succ.is_empty()
    }

    fn pred_masks(&self) -> Vec<u32> {
        let mut m = vec![0u32; self.len()];
        for (a, out) in self.succ.iter().enumerate() {
            for &b in out {
                m[b] |= 1 << a;
            }
        }
        m
    }

    /// Every edge goes forward in `order`.
    pub fn respects(&self, order: &[usize]) -> bool {
        let mut pos = vec![usize::MAX; self.len()];
        for (i, &v) in order.iter().enumerate() {
            pos[v] = i;
        }
        order.len() == self.len()
            && pos.iter().all(|&p| p != usize::MAX)
            && self.succ.iter().enumerate().all(|(a, out)| out.iter().all(|&b| pos[a] < pos[b]))
    }

    fn check_size(&self, cap: usize) -> Result<(), OracleError> {
        let cap = cap.min(HARD_CAP);
        if self.len() > cap {
            return Err(OracleError::TooLarge { nodes: self.len(), cap });
        }
        Ok(())
    }

    /// Cycle test by repeatedly removing sources.
    fn is_acyclic(&self) -> bool {
        let preds = self.pred_masks();
        let full = if self.len() == 32 { u32::MAX } else { (1u32 << self.len()) - 1 };
        let mut placed = 0u32;
        while placed != full {
            let ready = (0..self.len()).find(|&v| placed & (1 << v) == 0 && preds[v] & !placed == 0);
            match ready {
                Some(v) => placed |= 1 << v,
                None => return false,
            }
        }
        true
    }
}

/// Lazy enumeration of all topological orderings.
pub struct LinearExtensions {
    preds: Vec<u32>,
    prefix: Vec<usize>,
    placed: u32,
    /// Next candidate to try at each depth.
    cursor: Vec<usize>,
    done: bool,
}

impl Iterator for LinearExtensions {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let n = self.preds.len();
        if self.done {
            return None;
        }
        if n == 0 {
            self.done = true;
            return Some(Vec::new());
        }
        loop {
            let depth = self.prefix.len();
            if depth == n {
                let out = self.prefix.clone();
                // backtrack one level so the next call advances
                let v = self.prefix.pop().unwrap();
                self.placed &= !(1 << v);
                return Some(out);
            }
            let start = self.cursor[depth];
            let pick = (start..n).find(|&v| self.placed & (1 << v) == 0 && self.preds[v] & !self.placed == 0);
            match pick {
                Some(v) => {
                    self.cursor[depth] = v + 1;
                    if depth + 1 < n {
                        self.cursor[depth + 1] = 0;
                    }
                    self.prefix.push(v);
                    self.placed |= 1 << v;
                }
                None => {
                    if depth == 0 {
                        self.done = true;
                        return None;
                    }
                    let v = self.prefix.pop().unwrap();
                    self.placed &= !(1 << v);
                }
            }
        }
    }
}

pub fn enumerate_linear_extensions(rel: &EdgeRelation, max_events: usize) -> Result<LinearExtensions, OracleError> {
    rel.check_size(max_events)?;
    if !rel.is_acyclic() {
        return Err(OracleError::Cyclic);
    }
    let n = rel.len();
    Ok(LinearExtensions { preds: rel.pred_masks(), prefix: Vec::with_capacity(n), placed: 0, cursor: vec![0; n], done: false })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OracleVerdict {
    pub pair: (usize, usize),
    pub ordered: bool,
    /// A linear extension placing the read before the write.
    pub witness: Option<Vec<usize>>,
}

/// Searches schedules for one that runs `read` while `write` is still pending.
/// Explores each set of already-scheduled events at most once.
pub fn oracle_check_pair_capped(
    rel: &EdgeRelation,
    write: usize,
    read: usize,
    cap: usize,
) -> Result<OracleVerdict, OracleError> {
    rel.check_size(cap)?;
    if !rel.is_acyclic() {
        return Err(OracleError::Cyclic);
    }
    let n = rel.len();
    let preds = rel.pred_masks();
    let mut visited = vec![false; 1usize << n];
    let mut stack: Vec<(u32, Vec<usize>)> = vec![(0, Vec::new())];
    let mut found: Option<Vec<usize>> = None;
    while let Some((placed, prefix)) = stack.pop() {
        if placed & (1 << read) != 0 {
            found = Some(prefix);
            break;
        }
        for (v, &pred) in preds.iter().enumerate() {
            if v == write || placed & (1 << v) != 0 || pred & !placed != 0 {
                continue;
            }
            let next = placed | (1 << v);
            if !visited[next as usize] {
                visited[next as usize] = true;
                let mut p = prefix.clone();
                p.push(v);
                stack.push((next, p));
            }
        }
    }
    let Some(mut witness) = found else {
        return Ok(OracleVerdict { pair: (write, read), ordered: true, witness: None });
    };
    // finish the schedule with any ready event
    let mut placed: u32 = witness.iter().fold(0, |m, &v| m | (1 << v));
    while witness.len() < n {
        let v = (0..n).find(|&v| placed & (1 << v) == 0 && preds[v] & !placed == 0).expect("acyclic");
        placed |= 1 << v;
        witness.push(v);
    }
    assert!(rel.respects(&witness), "oracle produced an invalid witness");
    Ok(OracleVerdict { pair: (write, read), ordered: false, witness: Some(witness) })
}

pub fn oracle_check_pair(rel: &EdgeRelation, write: usize, read: usize) -> Result<OracleVerdict, OracleError> {
    oracle_check_pair_capped(rel, write, read, DEFAULT_CAP)
}

/// Exhaustive variant: walks every linear extension.
pub fn oracle_check_pair_exhaustive(rel: &EdgeRelation, write: usize, read: usize, cap: usize) -> Result<OracleVerdict, OracleError> {
    for ext in enumerate_linear_extensions(rel, cap)? {
        let pw = ext.iter().position(|&v| v == write).unwrap();
        let pr = ext.iter().position(|&v| v == read).unwrap();
        if pr < pw {
            return Ok(OracleVerdict { pair: (write, read), ordered: false, witness: Some(ext) });
        }
    }
    Ok(OracleVerdict { pair: (write, read), ordered: true, witness: None })
}

/// Relevant pairs of `program` that the oracle finds unordered, in the order
/// [`relevant_pairs`] yields them. The program must pass structural checks.
pub fn unordered_pairs(program: &KernelProgram, model: &HardwareModel, cap: usize) -> Result<Vec<(usize, usize)>, OracleError> {
    let structural = crate::checker::check(program, model);
    if structural.verdict == crate::checker::Verdict::StructuralError {
        let msg = structural.diagnostics.iter().find(|d| d.is_error()).map_or_else(String::new, |d| d.message.clone());
        return Err(OracleError::Structural(msg));
    }
    let bound = bind(program, model);
    let (g, _) = HbGraph::build(&bound, model);
    let rel = EdgeRelation::from_graph(&g);
    let mut out = Vec::new();
    for (w, r) in relevant_pairs(&bound) {
        if !oracle_check_pair_capped(&rel, w, r, cap)?.ordered {
            out.push((w, r));
        }
    }
    Ok(out)
}

/// Unit names rewritten to the model's spelling, as the checker does.
fn bind(program: &KernelProgram, model: &HardwareModel) -> KernelProgram {
    let mut p = program.clone();
    for i in 0..p.events.len() {
        if let Some(u) = p.events[i].unit {
            if let Some(decl) = model.unit(p.name(u)) {
                let name = decl.name.clone();
                let sym = p.intern(&name);
                p.events[i].unit = Some(sym);
            }
        }
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::tests::softmax;
    use crate::hardware::builtin_model;
    use proptest::prelude::*;

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for i in 0..=p.len() {
                let mut q = p.clone();
                q.insert(i, n - 1);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn chain_has_one_extension() {
        let rel = EdgeRelation::from_edges(3, &[(0, 1), (1, 2)]);
        assert_eq!(enumerate_linear_extensions(&rel, 9).unwrap().count(), 1);
    }

    #[test]
    fn antichain_has_factorial_extensions() {
        let rel = EdgeRelation::from_edges(3, &[]);
        let all: Vec<_> = enumerate_linear_extensions(&rel, 9).unwrap().collect();
        assert_eq!(all.len(), 6);
        let distinct: std::collections::BTreeSet<_> = all.into_iter().collect();
        assert_eq!(distinct.len(), 6);
    }

    #[test]
    fn softmax_extension_count_matches_permutation_filter() {
        let p = softmax();
        let (g, _) = HbGraph::build(&p, &builtin_model("ascend910b2").unwrap());
        let rel = EdgeRelation::from_graph(&g);
        let filtered = permutations(5).into_iter().filter(|o| rel.respects(o)).count();
        assert_eq!(enumerate_linear_extensions(&rel, 9).unwrap().count(), filtered);
        assert_eq!(filtered, 3);
    }

    #[test]
    fn softmax_pair_is_unordered_with_witness() {
        let p = softmax();
        let (g, _) = HbGraph::build(&p, &builtin_model("ascend910b2").unwrap());
        let rel = EdgeRelation::from_graph(&g);
        let v = oracle_check_pair(&rel, 1, 2).unwrap();
        assert!(!v.ordered);
        let w = v.witness.unwrap();
        assert!(w.iter().position(|&x| x == 2) < w.iter().position(|&x| x == 1));
        assert!(rel.respects(&w));
    }

    #[test]
    fn direct_edge_is_ordered() {
        let rel = EdgeRelation::from_edges(4, &[(0, 3)]);
        assert!(oracle_check_pair(&rel, 0, 3).unwrap().ordered);
    }

    #[test]
    fn size_and_cycle_errors() {
        let rel = EdgeRelation::from_edges(10, &[]);
        assert_eq!(oracle_check_pair(&rel, 0, 1).unwrap_err(), OracleError::TooLarge { nodes: 10, cap: 9 });
        assert!(oracle_check_pair_capped(&rel, 0, 1, 10).is_ok());
        let big = EdgeRelation::from_edges(13, &[]);
        assert!(matches!(enumerate_linear_extensions(&big, 20), Err(OracleError::TooLarge { cap: 12, .. })));
        let cyc = EdgeRelation::from_edges(2, &[(0, 1), (1, 0)]);
        assert_eq!(oracle_check_pair(&cyc, 0, 1).unwrap_err(), OracleError::Cyclic);
    }

    proptest! {
        #[test]
        fn search_agrees_with_exhaustive(n in 2usize..8, raw in proptest::collection::vec((0usize..8, 0usize..8), 0..14)) {
            let edges: Vec<_> = raw.into_iter().filter(|&(a, b)| a < n && b < n && a < b).collect();
            let rel = EdgeRelation::from_edges(n, &edges);
            for w in 0..n {
                for r in 0..n {
                    if w == r { continue; }
                    let fast = oracle_check_pair(&rel, w, r).unwrap();
                    let slow = oracle_check_pair_exhaustive(&rel, w, r, 9).unwrap();
                    prop_assert_eq!(fast.ordered, slow.ordered);
                }
            }
        }

        #[test]
        fn extensions_match_permutation_filter(n in 1usize..7, raw in proptest::collection::vec((0usize..7, 0usize..7), 0..10)) {
            let edges: Vec<_> = raw.into_iter().filter(|&(a, b)| a < n && b < n && a < b).collect();
            let rel = EdgeRelation::from_edges(n, &edges);
            let got: std::collections::BTreeSet<_> = enumerate_linear_extensions(&rel, 9).unwrap().collect();
            let want: std::collections::BTreeSet<_> = permutations(n).into_iter().filter(|o| rel.respects(o)).collect();
            prop_assert_eq!(got, want);
        }
    }
}
