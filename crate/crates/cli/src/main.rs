use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use pipesync::checker::{check, Verdict};
use pipesync::frontend::{load_path, Dialect, LoadError};
use pipesync::graph::HbGraph;
use pipesync::hardware::{resolve_model, HardwareModel};
use pipesync::mutation::{run_campaign, MutationOperator, Seed, SkippedSeed};
use pipesync::report::audit::{collect_inputs, model_for, run_audit};
use pipesync::report::{check_result_json, check_result_text, dot, trace};

const EXIT_SAFE: u8 = 0;
const EXIT_UNSAFE: u8 = 1;
const EXIT_STRUCTURAL: u8 = 2;
const EXIT_USAGE: u8 = 3;

#[derive(Parser)]
#[command(name = "pipesync", version, about = "Synchronization-coverage checker for accelerator pipeline kernels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Check one kernel (.pkdl, .cpp/.h, .mlu, .trace.json).
    Check {
        path: PathBuf,
        /// Hardware model: a built-in name or a model file.
        #[arg(long, env = "PIPESYNC_HW")]
        hw: Option<String>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        /// Write the happens-before graph in DOT format.
        #[arg(long)]
        dot: Option<PathBuf>,
        /// Write the lowered program as a JSON trace.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Override the frontend chosen from the file name.
        #[arg(long)]
        dialect: Option<String>,
    },
    /// Check every recognized file under a directory.
    Audit {
        dir: PathBuf,
        #[arg(long, env = "PIPESYNC_HW")]
        hw: Option<String>,
        /// Worker threads; defaults to the number of logical processors.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Run the mutation campaign over a directory of SAFE seed kernels.
    Mutate {
        seed_dir: PathBuf,
        #[arg(long, env = "PIPESYNC_HW")]
        hw: Option<String>,
        /// Comma-separated operators, e.g. M1,M4.
        #[arg(long, default_value = "M1,M2,M3,M4")]
        ops: String,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
}

fn usage(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("pipesync: {msg}");
    ExitCode::from(EXIT_USAGE)
}

fn explicit_model(hw: Option<&str>) -> Result<Option<HardwareModel>, ExitCode> {
    match hw {
        None => Ok(None),
        Some(spec) => resolve_model(spec).map(Some).map_err(usage),
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), ExitCode> {
    std::fs::write(path, text).map_err(|e| usage(format!("cannot write {}: {e}", path.display())))
}

fn cmd_check(
    path: &Path,
    hw: Option<&str>,
    format: Format,
    dot_out: Option<&Path>,
    trace_out: Option<&Path>,
    dialect: Option<&str>,
) -> Result<u8, ExitCode> {
    let explicit = explicit_model(hw)?;
    let dialect = match dialect {
        Some(d) => Some(Dialect::from_name(d).ok_or_else(|| usage(format!("unknown dialect {d}")))?),
        None => None,
    };
    let loaded = match load_path(path, dialect) {
        Ok(l) => l,
        Err(LoadError::Parse(diags)) => {
            for d in diags {
                eprintln!("{}:{d}", path.display());
            }
            return Ok(EXIT_STRUCTURAL);
        }
        Err(e) => return Err(usage(e)),
    };
    let model = model_for(&loaded.program, explicit.as_ref()).map_err(usage)?;
    let mut result = check(&loaded.program, &model);
    let mut diags = loaded.diagnostics;
    diags.append(&mut result.diagnostics);
    result.diagnostics = diags;

    for d in &result.diagnostics {
        eprintln!("{}:{d}", path.display());
    }
    match format {
        Format::Json => println!("{}", check_result_json(&result)),
        Format::Text => print!("{}", check_result_text(&path.display().to_string(), &result)),
    }
    if let Some(out) = trace_out {
        write_file(out, &trace::export_trace(&loaded.program))?;
    }
    if let Some(out) = dot_out {
        let (graph, _) = HbGraph::build(&loaded.program, &model);
        write_file(out, &dot::to_dot(&loaded.program, &graph, Some(&result)))?;
    }
    Ok(match result.verdict {
        Verdict::Safe => EXIT_SAFE,
        Verdict::Unsafe => EXIT_UNSAFE,
        Verdict::StructuralError => EXIT_STRUCTURAL,
    })
}

fn cmd_audit(dir: &Path, hw: Option<&str>, jobs: usize, format: Format) -> Result<u8, ExitCode> {
    let explicit = explicit_model(hw)?;
    if !dir.is_dir() {
        return Err(usage(format!("{} is not a directory", dir.display())));
    }
    let summary = run_audit(dir, explicit.as_ref(), jobs).map_err(usage)?;
    match format {
        Format::Json => println!("{}", summary.to_json()),
        Format::Text => print!("{}", summary.to_text()),
    }
    Ok(if summary.is_clean() { 0 } else { 1 })
}

fn parse_ops(spec: &str) -> Result<Vec<MutationOperator>, ExitCode> {
    let mut ops = Vec::new();
    for code in spec.split(',').filter(|s| !s.trim().is_empty()) {
        let op = MutationOperator::from_code(code).ok_or_else(|| usage(format!("unknown mutation operator {code}")))?;
        if !ops.contains(&op) {
            ops.push(op);
        }
    }
    if ops.is_empty() {
        return Err(usage("no mutation operators selected"));
    }
    Ok(ops)
}

fn cmd_mutate(seed_dir: &Path, hw: Option<&str>, ops: &str, format: Format) -> Result<u8, ExitCode> {
    let explicit = explicit_model(hw)?;
    let ops = parse_ops(ops)?;
    if !seed_dir.is_dir() {
        return Err(usage(format!("{} is not a directory", seed_dir.display())));
    }
    let mut seeds = Vec::new();
    let mut unloadable = Vec::new();
    for path in collect_inputs(seed_dir).map_err(usage)? {
        let name = path.display().to_string();
        let loaded = load_path(&path, None).map_err(|e| e.to_string());
        match loaded.and_then(|l| model_for(&l.program, explicit.as_ref()).map(|m| (l.program, m))) {
            Ok((program, model)) => seeds.push(Seed { name, program, model }),
            Err(reason) => unloadable.push(SkippedSeed { name, reason }),
        }
    }
    let mut report = run_campaign(&seeds, &ops);
    report.skipped.extend(unloadable);
    for s in &report.skipped {
        eprintln!("pipesync: warning: skipping seed {}: {}", s.name, s.reason);
    }
    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&report).expect("report serializes")),
        Format::Text => print!("{}", report.to_table()),
    }
    Ok(if report.total.detected == report.total.non_equivalent { 0 } else { 1 })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match &cli.command {
        Command::Check { path, hw, format, dot, trace, dialect } => {
            cmd_check(path, hw.as_deref(), *format, dot.as_deref(), trace.as_deref(), dialect.as_deref())
        }
        Command::Audit { dir, hw, jobs, format } => cmd_audit(dir, hw.as_deref(), *jobs, *format),
        Command::Mutate { seed_dir, hw, ops, format } => cmd_mutate(seed_dir, hw.as_deref(), ops, *format),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(code) => code,
    }
}
