//! Frontends lowering kernel sources to a [`KernelProgram`].

pub mod alias;
pub mod ascendc;
pub mod bangc;
pub mod clike;
pub mod pkdl;
mod source;

use std::fmt;
use std::path::Path;

use thiserror::Error;

use crate::diag::Diagnostic;
use crate::event::KernelProgram;

pub use source::SourceOutput;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Dialect {
    Pkdl,
    AscendC,
    BangC,
    Trace,
}

impl Dialect {
    /// Picks the frontend from a file name.
    pub fn from_path(path: &Path) -> Option<Self> {
        let name = path.file_name()?.to_str()?.to_ascii_lowercase();
        if name.ends_with(".trace.json") {
            return Some(Dialect::Trace);
        }
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "pkdl" => Some(Dialect::Pkdl),
            "cpp" | "cc" | "h" | "hpp" => Some(Dialect::AscendC),
            "mlu" => Some(Dialect::BangC),
            _ => None,
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "pkdl" => Some(Dialect::Pkdl),
            "ascendc" | "ascend-c" | "cpp" => Some(Dialect::AscendC),
            "bangc" | "bang-c" | "mlu" => Some(Dialect::BangC),
            "trace" | "json" => Some(Dialect::Trace),
            _ => None,
        }
    }
}

impl fmt::Display for Dialect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dialect::Pkdl => "pkdl",
            Dialect::AscendC => "ascendc",
            Dialect::BangC => "bangc",
            Dialect::Trace => "trace",
        })
    }
}

/// A lowered program and the frontend's warnings.
#[derive(Debug)]
pub struct Loaded {
    pub program: KernelProgram,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("unsupported input {0}")]
    Unsupported(String),
    #[error("{}", .0.first().map_or("parse error".to_string(), |d| d.to_string()))]
    Parse(Vec<Diagnostic>),
}

pub fn parse_source(text: &str, dialect: Dialect) -> Result<Loaded, LoadError> {
    match dialect {
        Dialect::Pkdl => pkdl::parse_pkdl(text)
            .map(|o| Loaded { program: o.program, diagnostics: o.warnings })
            .map_err(LoadError::Parse),
        Dialect::AscendC => ascendc::extract_ascendc(text)
            .map(|o| Loaded { program: o.program, diagnostics: o.diagnostics })
            .map_err(LoadError::Parse),
        Dialect::BangC => bangc::extract_bangc(text)
            .map(|o| Loaded { program: o.program, diagnostics: o.diagnostics })
            .map_err(LoadError::Parse),
        Dialect::Trace => crate::report::trace::import_trace(text)
            .map(|program| Loaded { program, diagnostics: Vec::new() })
            .map_err(|e| LoadError::Parse(vec![e])),
    }
}

/// Reads and lowers `path`, choosing the frontend from its name unless given.
pub fn load_path(path: &Path, dialect: Option<Dialect>) -> Result<Loaded, LoadError> {
    let dialect = dialect
        .or_else(|| Dialect::from_path(path))
        .ok_or_else(|| LoadError::Unsupported(path.display().to_string()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|source| LoadError::Io { path: path.display().to_string(), source })?;
    parse_source(&text, dialect)
}
