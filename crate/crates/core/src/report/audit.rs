//! Corpus audit: check every recognized file under a directory in parallel.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use walkdir::WalkDir;

use crate::checker::{check, Verdict};
use crate::diag::Diagnostic;
use crate::event::KernelProgram;
use crate::frontend::{load_path, Dialect, LoadError};
use crate::hardware::{resolve_model, HardwareModel};

/// The model to check `program` under: the explicit choice if any, else the
/// program's own hardware directive.
pub fn model_for(program: &KernelProgram, explicit: Option<&HardwareModel>) -> Result<HardwareModel, String> {
    if let Some(m) = explicit {
        return Ok(m.clone());
    }
    match &program.hardware {
        Some(name) => resolve_model(name).map_err(|e| e.to_string()),
        None => Err("no hardware model given and the input names none".into()),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct KernelOutcome {
    pub path: String,
    pub verdict: Verdict,
    pub model: Option<String>,
    pub violations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(skip)]
    pub elapsed_ms: f64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct AuditTiming {
    pub total_ms: f64,
    pub median_ms: f64,
    pub p95_ms: f64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct AuditSummary {
    pub scanned: usize,
    pub safe: usize,
    #[serde(rename = "unsafe")]
    pub unsafe_: usize,
    pub structural_excluded: usize,
    pub kernels: Vec<KernelOutcome>,
    pub timing: AuditTiming,
}

impl AuditSummary {
    pub fn is_clean(&self) -> bool {
        self.unsafe_ == 0 && self.structural_excluded == 0
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("audit summary serializes")
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for k in &self.kernels {
            let _ = write!(out, "{:<17} {}", k.verdict.as_str(), k.path);
            match (&k.reason, k.violations) {
                (Some(r), _) => {
                    let _ = write!(out, "  ({r})");
                }
                (None, n) if n > 0 => {
                    let _ = write!(out, "  ({n} violation{})", if n == 1 { "" } else { "s" });
                }
                _ => {}
            }
            out.push('\n');
        }
        let _ = writeln!(
            out,
            "scanned {}  safe {}  unsafe {}  excluded {}",
            self.scanned, self.safe, self.unsafe_, self.structural_excluded
        );
        let _ = writeln!(
            out,
            "time {:.1} ms total, {:.2} ms median, {:.2} ms p95 per kernel",
            self.timing.total_ms, self.timing.median_ms, self.timing.p95_ms
        );
        out
    }
}

/// Recognized input files under `dir`, sorted.
pub fn collect_inputs(dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in WalkDir::new(dir).follow_links(true) {
        let entry = entry.map_err(std::io::Error::other)?;
        if entry.file_type().is_file() && Dialect::from_path(entry.path()).is_some() {
            files.push(entry.into_path());
        }
    }
    files.sort();
    Ok(files)
}

fn first_error(diags: &[Diagnostic]) -> String {
    diags.iter().find(|d| d.is_error()).or(diags.first()).map_or_else(|| "structural error".into(), |d| d.to_string())
}

/// Checks one file. Anything short of a clean check is reported as excluded,
/// never as SAFE.
pub fn audit_file(path: &Path, explicit: Option<&HardwareModel>) -> KernelOutcome {
    let start = Instant::now();
    let excluded = |model: Option<String>, reason: String| KernelOutcome {
        path: path.display().to_string(),
        verdict: Verdict::StructuralError,
        model,
        violations: 0,
        reason: Some(reason),
        elapsed_ms: 0.0,
    };
    let mut out = match load_path(path, None) {
        Err(LoadError::Parse(d)) => excluded(None, first_error(&d)),
        Err(e) => excluded(None, e.to_string()),
        Ok(loaded) => match model_for(&loaded.program, explicit) {
            Err(reason) => excluded(None, reason),
            Ok(model) => {
                let r = check(&loaded.program, &model);
                KernelOutcome {
                    path: path.display().to_string(),
                    verdict: r.verdict,
                    model: Some(model.name.clone()),
                    violations: r.violations.len(),
                    reason: (r.verdict == Verdict::StructuralError).then(|| first_error(&r.diagnostics)),
                    elapsed_ms: 0.0,
                }
            }
        },
    };
    out.elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    out
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

/// Audits `dir` with `jobs` workers (0 means one per logical processor).
pub fn run_audit(dir: &Path, explicit: Option<&HardwareModel>, jobs: usize) -> std::io::Result<AuditSummary> {
    let start = Instant::now();
    let files = collect_inputs(dir)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build().map_err(std::io::Error::other)?;
    let kernels: Vec<KernelOutcome> = pool.install(|| files.par_iter().map(|f| audit_file(f, explicit)).collect());
    let mut s = AuditSummary { scanned: kernels.len(), ..AuditSummary::default() };
    for k in &kernels {
        match k.verdict {
            Verdict::Safe => s.safe += 1,
            Verdict::Unsafe => s.unsafe_ += 1,
            Verdict::StructuralError => s.structural_excluded += 1,
        }
    }
    let mut times: Vec<f64> = kernels.iter().map(|k| k.elapsed_ms).collect();
    times.sort_by(f64::total_cmp);
    s.timing = AuditTiming {
        total_ms: start.elapsed().as_secs_f64() * 1e3,
        median_ms: percentile(&times, 0.5),
        p95_ms: percentile(&times, 0.95),
    };
    s.kernels = kernels;
    Ok(s)
}
