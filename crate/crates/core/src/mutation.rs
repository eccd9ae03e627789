//! Event-level mutation operators and the detection campaign.

use std::fmt;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::checker::{check, Verdict};
use crate::event::{Event, EventKind, KernelProgram};
use crate::hardware::{HardwareModel, UnitRole};
use crate::oracle::{unordered_pairs, HARD_CAP};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum MutationOperator {
    #[serde(rename = "M1")]
    RemoveDeQue,
    #[serde(rename = "M2")]
    RemoveEnQue,
    #[serde(rename = "M3")]
    SwapUnitAttribution,
    #[serde(rename = "M4")]
    InsertUnguardedScalarRead,
}

impl MutationOperator {
    pub const ALL: [MutationOperator; 4] = [
        MutationOperator::RemoveDeQue,
        MutationOperator::RemoveEnQue,
        MutationOperator::SwapUnitAttribution,
        MutationOperator::InsertUnguardedScalarRead,
    ];

    pub fn code(self) -> &'static str {
        match self {
            MutationOperator::RemoveDeQue => "M1",
            MutationOperator::RemoveEnQue => "M2",
            MutationOperator::SwapUnitAttribution => "M3",
            MutationOperator::InsertUnguardedScalarRead => "M4",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            MutationOperator::RemoveDeQue => "Remove DeQue",
            MutationOperator::RemoveEnQue => "Remove EnQue",
            MutationOperator::SwapUnitAttribution => "Swap unit attribution",
            MutationOperator::InsertUnguardedScalarRead => "Insert unguarded scalar read",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|o| o.code().eq_ignore_ascii_case(code.trim()))
    }
}

impl fmt::Display for MutationOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Equivalent,
    NonEquivalent,
    Invalid,
}

#[derive(Clone, Debug)]
pub struct Mutant {
    pub operator: MutationOperator,
    /// Index of the removed or re-attributed event, or the insertion position.
    pub site: usize,
    pub description: String,
    pub program: KernelProgram,
    pub classification: Option<Classification>,
    pub detected: Option<bool>,
}

fn removed(p: &KernelProgram, i: usize) -> KernelProgram {
    let mut m = p.clone();
    m.events.remove(i);
    m.recompact();
    m
}

/// Mutants of `program` for the selected operators, unclassified.
pub fn generate_mutants(program: &KernelProgram, model: &HardwareModel, ops: &[MutationOperator]) -> Vec<Mutant> {
    let mut out = Vec::new();
    let mk = |operator, site, description: String, program| Mutant {
        operator,
        site,
        description,
        program,
        classification: None,
        detected: None,
    };
    for &op in ops {
        match op {
            MutationOperator::RemoveDeQue | MutationOperator::RemoveEnQue => {
                let kind = if op == MutationOperator::RemoveDeQue { EventKind::DeQue } else { EventKind::EnQue };
                for (i, e) in program.events.iter().enumerate().filter(|(_, e)| e.kind == kind) {
                    let desc = format!("remove {}", program.label(e));
                    out.push(mk(op, i, desc, removed(program, i)));
                }
            }
            MutationOperator::SwapUnitAttribution => {
                for (i, e) in program.events.iter().enumerate().filter(|(_, e)| e.kind.is_access()) {
                    let current = program.name(e.unit.unwrap());
                    for u in model.units.iter().filter(|u| !u.name.eq_ignore_ascii_case(current)) {
                        let mut m = program.clone();
                        let sym = m.intern(&u.name);
                        m.events[i].unit = Some(sym);
                        let desc = format!("{} unit {} -> {}", program.label(e), current, u.name);
                        out.push(mk(op, i, desc, m));
                    }
                }
            }
            MutationOperator::InsertUnguardedScalarRead => {
                let Some(scalar) = model.unit_with_role(UnitRole::Scalar) else { continue };
                for (site, buffer, stage) in m4_sites(program, &scalar.name) {
                    let mut m = program.clone();
                    let unit = m.intern(&scalar.name);
                    // double the stage's time axis so the gap after the preceding event is free
                    let t_prev = program.events[site - 1].t;
                    for e in m.events.iter_mut().filter(|e| e.stage == stage) {
                        e.t *= 2;
                        if let Some(s) = &mut e.sync {
                            s.t_release *= 2;
                            s.t_acquire *= 2;
                        }
                    }
                    let ev = Event { kind: EventKind::Read, buffer, stage, t: 2 * t_prev + 1, unit: Some(unit), sync: None };
                    m.events.insert(site, ev);
                    m.recompact();
                    let desc = format!("insert {} read of {} at position {}", scalar.name, program.name(buffer), site);
                    out.push(mk(op, site, desc, m));
                }
            }
        }
    }
    out
}

/// Insertion sites: gaps between consecutive events of a Compute stage, each
/// paired with the buffer most recently written before the gap by a unit other
/// than `scalar`. Returns (insert position, buffer, stage).
fn m4_sites(p: &KernelProgram, scalar: &str) -> Vec<(usize, crate::symbol::BufferId, crate::symbol::StageId)> {
    let mut out = Vec::new();
    for &stage in &p.stages {
        if !p.name(stage).eq_ignore_ascii_case("compute") {
            continue;
        }
        let idx: Vec<usize> = p.stage_events(stage).map(|(i, _)| i).collect();
        let mut last_foreign = None;
        for w in idx.windows(2) {
            let e = &p.events[w[0]];
            if e.kind == EventKind::Write && !e.unit.is_some_and(|u| p.name(u).eq_ignore_ascii_case(scalar)) {
                last_foreign = Some(e.buffer);
            }
            if let Some(b) = last_foreign {
                out.push((w[1], b, stage));
            }
        }
    }
    out
}

/// Oracle-backed within the size cap, checker-backed above it. Structural
/// failures make a mutant invalid.
pub fn classify_mutant(mutant: &Mutant, model: &HardwareModel) -> Classification {
    let p = &mutant.program;
    if check(p, model).verdict == Verdict::StructuralError {
        return Classification::Invalid;
    }
    let unordered = if p.len() <= HARD_CAP {
        match unordered_pairs(p, model, HARD_CAP) {
            Ok(u) => !u.is_empty(),
            Err(_) => return Classification::Invalid,
        }
    } else {
        check(p, model).verdict == Verdict::Unsafe
    };
    if unordered {
        Classification::NonEquivalent
    } else {
        Classification::Equivalent
    }
}

/// A seed kernel and the model it is checked under.
#[derive(Clone, Debug)]
pub struct Seed {
    pub name: String,
    pub program: KernelProgram,
    pub model: HardwareModel,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct OperatorRow {
    pub operator: String,
    pub description: String,
    pub total: usize,
    pub invalid: usize,
    pub equivalent: usize,
    pub non_equivalent: usize,
    pub detected: usize,
    /// Equivalent mutants with only resolved buffers that the checker flagged.
    pub false_alarms: usize,
    pub oracle_classified: usize,
}

impl OperatorRow {
    fn add(&mut self, o: &OperatorRow) {
        self.total += o.total;
        self.invalid += o.invalid;
        self.equivalent += o.equivalent;
        self.non_equivalent += o.non_equivalent;
        self.detected += o.detected;
        self.false_alarms += o.false_alarms;
        self.oracle_classified += o.oracle_classified;
    }

    pub fn detection_rate(&self) -> Option<f64> {
        (self.non_equivalent > 0).then(|| self.detected as f64 / self.non_equivalent as f64)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct CampaignReport {
    pub seeds: usize,
    pub skipped: Vec<SkippedSeed>,
    pub rows: Vec<OperatorRow>,
    pub total: OperatorRow,
    pub detection_rate: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SkippedSeed {
    pub name: String,
    pub reason: String,
}

impl CampaignReport {
    /// Every non-equivalent mutant detected and no false alarms.
    pub fn is_complete(&self) -> bool {
        self.total.detected == self.total.non_equivalent && self.total.false_alarms == 0
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let header = ["Op", "Description", "Total", "Invalid", "Equiv", "Non-equiv", "Detected", "Rate"];
        let mut lines: Vec<[String; 8]> = Vec::new();
        let row = |r: &OperatorRow| -> [String; 8] {
            [
                r.operator.clone(),
                r.description.clone(),
                r.total.to_string(),
                r.invalid.to_string(),
                r.equivalent.to_string(),
                r.non_equivalent.to_string(),
                r.detected.to_string(),
                r.detection_rate().map_or("-".into(), |x| format!("{:.1}%", x * 100.0)),
            ]
        };
        lines.push(header.map(String::from));
        lines.extend(self.rows.iter().map(row));
        lines.push(row(&self.total));
        let widths: Vec<usize> = (0..8).map(|c| lines.iter().map(|l| l[c].chars().count()).max().unwrap_or(0)).collect();
        for (i, l) in lines.iter().enumerate() {
            let cells: Vec<String> = l
                .iter()
                .enumerate()
                .map(|(c, s)| if c < 2 { format!("{:<w$}", s, w = widths[c]) } else { format!("{:>w$}", s, w = widths[c]) })
                .collect();
            let _ = writeln!(out, "{}", cells.join("  ").trim_end());
            if i == 0 || i == lines.len() - 2 {
                let _ = writeln!(out, "{}", "-".repeat(widths.iter().sum::<usize>() + 2 * 7));
            }
        }
        let _ = writeln!(out, "seeds: {}  skipped: {}", self.seeds, self.skipped.len());
        out
    }
}

/// Classifies and checks every mutant of every SAFE seed. Seeds that are not
/// SAFE are skipped and listed.
pub fn run_campaign(seeds: &[Seed], ops: &[MutationOperator]) -> CampaignReport {
    let mut report = CampaignReport::default();
    let mut rows: Vec<OperatorRow> = ops
        .iter()
        .map(|o| OperatorRow { operator: o.code().into(), description: o.description().into(), ..OperatorRow::default() })
        .collect();
    for seed in seeds {
        let r = check(&seed.program, &seed.model);
        if r.verdict != Verdict::Safe {
            report.skipped.push(SkippedSeed { name: seed.name.clone(), reason: format!("seed is {}", r.verdict.as_str()) });
            continue;
        }
        report.seeds += 1;
        let mutants = generate_mutants(&seed.program, &seed.model, ops);
        let results: Vec<(MutationOperator, OperatorRow)> = mutants
            .par_iter()
            .map(|m| {
                let class = classify_mutant(m, &seed.model);
                let flagged = check(&m.program, &seed.model).verdict != Verdict::Safe;
                let mut row = OperatorRow { total: 1, ..OperatorRow::default() };
                row.oracle_classified = usize::from(class != Classification::Invalid && m.program.len() <= HARD_CAP);
                match class {
                    Classification::Invalid => row.invalid = 1,
                    Classification::Equivalent => {
                        row.equivalent = 1;
                        row.false_alarms = usize::from(flagged && m.program.may_overlap.is_empty());
                    }
                    Classification::NonEquivalent => {
                        row.non_equivalent = 1;
                        row.detected = usize::from(flagged);
                    }
                }
                (m.operator, row)
            })
            .collect();
        for (op, r) in results {
            let i = ops.iter().position(|o| *o == op).unwrap();
            rows[i].add(&r);
        }
    }
    let mut total = OperatorRow { operator: "Total".into(), ..OperatorRow::default() };
    for r in &rows {
        total.add(r);
    }
    report.detection_rate = total.detection_rate();
    report.total = total;
    report.rows = rows;
    report
}
