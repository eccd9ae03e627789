//! Program generators: small random programs for oracle cross-checking and
//! Ascend-shaped pipeline kernels of arbitrary size for timing.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::event::{KernelProgram, ProgramBuilder};
use crate::hardware::HardwareModel;

/// Parameters of [`random_program`].
#[derive(Clone, Debug)]
pub struct RandomShape {
    pub max_events: usize,
    pub max_stages: usize,
    pub max_barriers: usize,
    pub buffers: usize,
    pub stages: Vec<String>,
    pub units: Vec<String>,
    pub primitives: Vec<String>,
    pub hardware: String,
}

impl Default for RandomShape {
    fn default() -> Self {
        Self {
            max_events: 9,
            max_stages: 3,
            max_barriers: 3,
            buffers: 3,
            stages: vec!["Compute".into(), "MTE_out".into(), "MTE_in".into()],
            units: vec!["VPU".into(), "Scalar".into(), "Cube".into(), "MTE".into()],
            primitives: vec!["V_S".into(), "CUBE_V".into(), "MTE2_V".into(), "PIPE_ALL".into(), "PIPE_V".into()],
            hardware: "ascend910b2".into(),
        }
    }
}

impl RandomShape {
    /// Shape drawing units and primitives from `model`; the stage list keeps
    /// the model's `Compute`-like stage first so stage-scoped rules can fire.
    pub fn for_model(model: &HardwareModel) -> Self {
        let mut stages = model.stages.clone();
        if let Some(i) = stages.iter().position(|s| s.eq_ignore_ascii_case("compute")) {
            let c = stages.remove(i);
            stages.insert(0, c);
        }
        if stages.is_empty() {
            stages = vec!["S0".into(), "S1".into(), "S2".into()];
        }
        let mut primitives: Vec<String> = Vec::new();
        for r in &model.rules {
            if !primitives.contains(&r.primitive) {
                primitives.push(r.primitive.clone());
            }
        }
        Self {
            stages,
            units: model.units.iter().map(|u| u.name.clone()).collect(),
            primitives,
            hardware: model.name.clone(),
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug)]
enum Slot {
    Access(bool, usize, usize),
    Enque(usize),
    Deque(usize),
    Barrier(usize),
    Flag(usize, usize),
}

/// A random well-formed program: 1 to `max_stages` stages chained by queues,
/// at most `max_events` events and `max_barriers` barriers.
pub fn random_program(seed: u64, shape: &RandomShape) -> KernelProgram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_stages = rng.gen_range(1..=shape.max_stages.min(shape.stages.len()).max(1));
    let total = rng.gen_range(1..=shape.max_events);
    let mut plan: Vec<Vec<Slot>> = vec![Vec::new(); n_stages];
    let mut budget = total;
    let mut links = Vec::new();

    for s in 0..n_stages.saturating_sub(1) {
        if budget < 2 || rng.gen_bool(0.2) {
            continue;
        }
        let pairs = rng.gen_range(1..=(budget / 2).min(2));
        let q = links.len();
        links.push((s, s + 1));
        for _ in 0..pairs {
            plan[s].push(Slot::Enque(q));
            plan[s + 1].push(Slot::Deque(q));
        }
        budget -= 2 * pairs;
    }
    let barriers = rng.gen_range(0..=shape.max_barriers.min(budget));
    for _ in 0..barriers {
        let s = rng.gen_range(0..n_stages);
        let p = rng.gen_range(0..shape.primitives.len());
        if rng.gen_bool(0.3) {
            plan[s].push(Slot::Flag(p, rng.gen_range(0..2)));
        } else {
            plan[s].push(Slot::Barrier(p));
        }
    }
    budget -= barriers;
    for _ in 0..budget {
        let s = rng.gen_range(0..n_stages);
        let write = rng.gen_bool(0.5);
        plan[s].push(Slot::Access(write, rng.gen_range(0..shape.buffers), rng.gen_range(0..shape.units.len())));
    }

    let mut b = ProgramBuilder::new();
    b.hardware(&shape.hardware);
    for (s, slots) in plan.iter_mut().enumerate() {
        slots.shuffle(&mut rng);
        b.stage(&shape.stages[s]);
        // flags open a SetFlag slot somewhere before their WaitFlag
        for slot in slots.iter() {
            match *slot {
                Slot::Access(true, buf, u) => {
                    b.write(&format!("b{buf}"), &shape.units[u]);
                }
                Slot::Access(false, buf, u) => {
                    b.read(&format!("b{buf}"), &shape.units[u]);
                }
                Slot::Enque(q) => {
                    b.enque(&format!("q{q}"));
                }
                Slot::Deque(q) => {
                    b.deque(&format!("q{q}"));
                }
                Slot::Barrier(p) => {
                    b.barrier(&shape.primitives[p]);
                }
                Slot::Flag(p, f) => {
                    let (prim, flag) = (&shape.primitives[p], format!("f{f}"));
                    b.set_flag(prim, &flag);
                    let gap = rng.gen_range(0..2);
                    for _ in 0..gap {
                        b.tick();
                    }
                    b.wait_flag(prim, &flag);
                }
            }
        }
    }
    for (q, &(from, to)) in links.iter().enumerate() {
        b.topology(&shape.stages[from], &shape.stages[to], &format!("q{q}"));
    }
    if rng.gen_bool(0.15) {
        let n = rng.gen_range(1..=2);
        for k in 0..n {
            b.mark_may_overlap(&format!("b{}", (k + seed as usize) % shape.buffers));
        }
    }
    let mut p = b.finish().program;
    // drop overlap marks on buffers that were never accessed
    let used: std::collections::BTreeSet<_> = p.events.iter().map(|e| e.buffer).collect();
    p.may_overlap.retain(|b| used.contains(b));
    p
}

/// Events per tile of [`synthetic_kernel`].
pub const TILE_EVENTS: usize = 15;

/// A SAFE three-stage Ascend-shaped pipeline with exactly `events` events:
/// `events / 15` tiles of copy-in, vector compute with a scalar readback
/// behind a V_S barrier, and copy-out, padded with vector writes.
pub fn synthetic_kernel(events: usize) -> KernelProgram {
    let tiles = events / TILE_EVENTS;
    let mut b = ProgramBuilder::new();
    b.hardware("ascend910b2");
    b.stage("MTE_in");
    for k in 0..tiles {
        b.read(&format!("xGm{k}"), "MTE");
        b.write(&format!("x{k}"), "MTE");
        b.enque("inQueueX");
    }
    b.stage("Compute");
    for k in 0..tiles {
        b.deque("inQueueX");
        b.read(&format!("x{k}"), "VPU");
        b.write(&format!("y{k}"), "VPU");
        b.read(&format!("y{k}"), "VPU");
        b.write(&format!("s{k}"), "VPU");
        b.barrier("V_S");
        b.read(&format!("s{k}"), "Scalar");
        b.write(&format!("z{k}"), "VPU");
        b.enque("outQueueZ");
    }
    for k in 0..events - tiles * TILE_EVENTS {
        b.write(&format!("pad{k}"), "VPU");
    }
    b.stage("MTE_out");
    for k in 0..tiles {
        b.deque("outQueueZ");
        b.read(&format!("z{k}"), "MTE");
        b.write(&format!("zGm{k}"), "MTE");
    }
    if tiles > 0 {
        b.topology("MTE_in", "Compute", "inQueueX");
        b.topology("Compute", "MTE_out", "outQueueZ");
    }
    b.finish().program
}

/// Deep vector pipeline followed by scalar readbacks of four result groups.
/// With `barrier`, one V_S barrier precedes the first scalar read.
pub fn case_study_kernel(barrier: bool) -> KernelProgram {
    let mut b = ProgramBuilder::new();
    b.hardware("ascend910b2");
    b.stage("Compute");
    b.deque("inQueueX");
    for i in 0..14 {
        b.read(if i == 0 { "x" } else { "acc" }, "VPU");
        b.write(&format!("g{}", i % 4), "VPU");
    }
    if barrier {
        b.barrier("V_S");
    }
    for g in 0..4 {
        b.read(&format!("g{g}"), "Scalar");
    }
    b.write("result", "VPU");
    b.enque("outQueueY");
    b.finish().program
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checker::{check, Verdict};
    use crate::hardware::builtin_model;

    #[test]
    fn random_programs_are_well_formed() {
        for m in ["ascend910b2", "mlu370"] {
            let model = builtin_model(m).unwrap();
            let shape = RandomShape::for_model(&model);
            for seed in 0..500 {
                let p = random_program(seed, &shape);
                assert!(p.len() <= 9 && !p.is_empty());
                assert!(p.validate_structure().is_empty(), "{seed}: {:?}", p.validate_structure());
                assert_ne!(check(&p, &model).verdict, Verdict::StructuralError, "seed {seed}");
            }
        }
    }

    #[test]
    fn synthetic_kernels_are_safe_and_exact() {
        let m = builtin_model("ascend910b2").unwrap();
        for n in [16, 64, 274, 1024] {
            let p = synthetic_kernel(n);
            assert_eq!(p.len(), n);
            assert_eq!(check(&p, &m).verdict, Verdict::Safe);
        }
    }

    #[test]
    fn same_seed_same_program() {
        let s = RandomShape::default();
        assert_eq!(random_program(7, &s), random_program(7, &s));
    }
}
