//! Static synchronization-coverage checking for accelerator pipeline kernels.
//!
//! Frontends lower PKDL, Ascend-C-style and BANG-C-style sources (or JSON
//! traces) to a [`KernelProgram`]; [`check`] builds the happens-before graph
//! under a [`HardwareModel`] and reports every cross-unit or cross-stage
//! write-read pair it leaves unordered.

pub mod checker;
pub mod diag;
pub mod event;
pub mod frontend;
pub mod graph;
pub mod hardware;
pub mod mutation;
pub mod oracle;
pub mod symbol;
pub mod synth;

pub use checker::{check, CheckResult, Verdict, Violation};
pub use diag::{Diagnostic, Severity};
pub use event::{Event, EventKind, KernelProgram, ProgramBuilder};
pub use graph::{EdgeKind, HbGraph};
pub use hardware::{builtin_model, resolve_model, HardwareModel};
pub mod report;
