//! Pluggable hardware models: stages, execution units and the directional
//! coverage rules that decide which barriers order which unit pairs.
//!
//! Models are plain data. The two built-in models are constructed in code and
//! the same content ships as text files in the model description format, so
//! new backends need no code changes.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::event::{Event, EventKind, KernelProgram};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Scope {
    Any,
    Named(String),
}

impl Scope {
    pub fn matches(&self, name: &str) -> bool {
        match self {
            Scope::Any => true,
            Scope::Named(n) => n.eq_ignore_ascii_case(name),
        }
    }

    fn render(&self, wildcard: &str) -> String {
        match self {
            Scope::Any => wildcard.to_string(),
            Scope::Named(n) => n.clone(),
        }
    }
}

/// `(primitive, stage, writer unit, reader unit)`: a barrier of `primitive`
/// makes earlier writes by `writer` visible to later reads by `reader`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoverageRule {
    pub primitive: String,
    pub stage: Scope,
    pub writer: Scope,
    pub reader: Scope,
}

impl CoverageRule {
    pub fn is_full_barrier(&self) -> bool {
        self.writer == Scope::Any && self.reader == Scope::Any
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnitRole {
    Compute,
    Dma,
    Scalar,
    Matrix,
}

impl UnitRole {
    pub fn as_str(self) -> &'static str {
        match self {
            UnitRole::Compute => "compute",
            UnitRole::Dma => "dma",
            UnitRole::Scalar => "scalar",
            UnitRole::Matrix => "matrix",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "compute" => Some(UnitRole::Compute),
            "dma" => Some(UnitRole::Dma),
            "scalar" => Some(UnitRole::Scalar),
            "matrix" => Some(UnitRole::Matrix),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnitDecl {
    pub name: String,
    pub role: UnitRole,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HardwareModel {
    pub name: String,
    pub stages: Vec<String>,
    pub units: Vec<UnitDecl>,
    /// Declared rules followed by the expansion of every composite primitive.
    pub rules: Vec<CoverageRule>,
    declared_rules: usize,
    pub primitive_aliases: Vec<(String, String)>,
    pub composites: Vec<(String, Vec<String>)>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("{line}:{column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("line {line}: {message}")]
    Semantic { line: usize, message: String },
    #[error("unknown hardware model `{name}` (available: {})", available.join(", "))]
    NotFound { name: String, available: Vec<String> },
    #[error("cannot read model file {path}: {message}")]
    Io { path: String, message: String },
}

pub const BUILTIN_MODELS: [&str; 2] = ["ascend910b2", "mlu370"];

impl HardwareModel {
    pub fn unit(&self, name: &str) -> Option<&UnitDecl> {
        self.units.iter().find(|u| u.name.eq_ignore_ascii_case(name))
    }

    pub fn unit_with_role(&self, role: UnitRole) -> Option<&UnitDecl> {
        self.units.iter().find(|u| u.role == role)
    }

    pub fn has_stage(&self, name: &str) -> bool {
        self.stages.iter().any(|s| s.eq_ignore_ascii_case(name))
    }

    fn is_primitive(&self, name: &str) -> Option<&str> {
        self.rules
            .iter()
            .map(|r| r.primitive.as_str())
            .chain(self.composites.iter().map(|(c, _)| c.as_str()))
            .find(|p| p.eq_ignore_ascii_case(name))
    }

    /// Resolves a frontend spelling to its canonical primitive.
    pub fn canonical_primitive(&self, spelling: &str) -> Option<&str> {
        if let Some(p) = self.is_primitive(spelling) {
            return Some(p);
        }
        self.primitive_aliases
            .iter()
            .find(|(s, _)| s == spelling)
            .or_else(|| self.primitive_aliases.iter().find(|(s, _)| s.eq_ignore_ascii_case(spelling)))
            .map(|(_, p)| p.as_str())
    }

    pub fn rules_for<'a>(&'a self, primitive: &'a str) -> impl Iterator<Item = &'a CoverageRule> + 'a {
        self.rules.iter().filter(move |r| r.primitive == primitive)
    }

    /// Barrier-order test for one rule: same primitive, all three events in the
    /// rule's stage scope, matching units, and `t_w < t_release`,
    /// `t_acquire < t_r`.
    pub fn rule_matches(
        &self,
        rule: &CoverageRule,
        program: &KernelProgram,
        barrier: &Event,
        writer: &Event,
        reader: &Event,
    ) -> bool {
        if barrier.kind != EventKind::Barrier
            || writer.kind != EventKind::Write
            || reader.kind != EventKind::Read
        {
            return false;
        }
        let Some(sync) = &barrier.sync else { return false };
        let Some(canon) = self.canonical_primitive(program.name(sync.primitive)) else {
            return false;
        };
        if canon != rule.primitive {
            return false;
        }
        if writer.stage != barrier.stage || reader.stage != barrier.stage {
            return false;
        }
        if !rule.stage.matches(program.name(barrier.stage)) {
            return false;
        }
        let (Some(wu), Some(ru)) = (writer.unit, reader.unit) else { return false };
        rule.writer.matches(program.name(wu))
            && rule.reader.matches(program.name(ru))
            && writer.t < sync.t_release
            && sync.t_acquire < reader.t
    }

    /// Rules that could order a write by `writer` before a read by `reader` in `stage`.
    pub fn covering_rules(&self, stage: &str, writer: &str, reader: &str) -> Vec<&CoverageRule> {
        self.rules
            .iter()
            .filter(|r| r.stage.matches(stage) && r.writer.matches(writer) && r.reader.matches(reader))
            .collect()
    }

    /// Renders the model in the description format accepted by [`parse_model`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "model {}", self.name);
        if !self.stages.is_empty() {
            let _ = writeln!(out, "stages {}", self.stages.join(" "));
        }
        for u in &self.units {
            let _ = writeln!(out, "unit {} role {}", u.name, u.role.as_str());
        }
        for r in &self.rules[..self.declared_rules] {
            let _ = writeln!(
                out,
                "rule {} stage {} writer {} reader {}",
                r.primitive,
                r.stage.render("any"),
                r.writer.render("*"),
                r.reader.render("*")
            );
        }
        for (name, parts) in &self.composites {
            let _ = writeln!(out, "composite {} = {}", name, parts.join(" + "));
        }
        for (s, p) in &self.primitive_aliases {
            let _ = writeln!(out, "alias {} = {}", s, p);
        }
        out
    }
}

struct ModelDraft {
    name: String,
    stages: Vec<String>,
    units: Vec<UnitDecl>,
    rules: Vec<CoverageRule>,
    aliases: Vec<(String, String)>,
    composites: Vec<(String, Vec<String>)>,
}

impl ModelDraft {
    fn rule(&mut self, p: &str, stage: Option<&str>, w: Option<&str>, r: Option<&str>) {
        let scope = |s: Option<&str>| s.map_or(Scope::Any, |n| Scope::Named(n.to_string()));
        self.rules.push(CoverageRule {
            primitive: p.to_string(),
            stage: scope(stage),
            writer: scope(w),
            reader: scope(r),
        });
    }

    fn unit(&mut self, name: &str, role: UnitRole) {
        self.units.push(UnitDecl { name: name.to_string(), role });
    }

    fn alias(&mut self, spelling: &str, target: &str) {
        self.aliases.push((spelling.to_string(), target.to_string()));
    }

    fn composite(&mut self, name: &str, parts: &[&str]) {
        self.composites.push((name.to_string(), parts.iter().map(|s| s.to_string()).collect()));
    }

    /// Composite primitives become the union of their constituents' rules.
    fn finish(self) -> HardwareModel {
        let declared_rules = self.rules.len();
        let mut rules = self.rules;
        for (name, parts) in &self.composites {
            let mut added = Vec::new();
            for part in parts {
                for r in rules.iter().filter(|r| &r.primitive == part) {
                    let mut r = r.clone();
                    r.primitive = name.clone();
                    if !added.contains(&r) {
                        added.push(r);
                    }
                }
            }
            rules.extend(added);
        }
        HardwareModel {
            name: self.name,
            stages: self.stages,
            units: self.units,
            rules,
            declared_rules,
            primitive_aliases: self.aliases,
            composites: self.composites,
        }
    }
}

fn draft(name: &str, stages: &[&str]) -> ModelDraft {
    ModelDraft {
        name: name.to_string(),
        stages: stages.iter().map(|s| s.to_string()).collect(),
        units: Vec::new(),
        rules: Vec::new(),
        aliases: Vec::new(),
        composites: Vec::new(),
    }
}

fn ascend910b2() -> HardwareModel {
    let mut m = draft("ascend910b2", &["MTE_in", "Compute", "MTE_out"]);
    m.unit("VPU", UnitRole::Compute);
    m.unit("Cube", UnitRole::Matrix);
    m.unit("Scalar", UnitRole::Scalar);
    m.unit("MTE", UnitRole::Dma);
    m.rule("V_S", Some("Compute"), Some("VPU"), Some("Scalar"));
    m.rule("CUBE_V", Some("Compute"), Some("Cube"), Some("VPU"));
    m.rule("MTE2_V", Some("Compute"), Some("MTE"), Some("VPU"));
    m.composite("PIPE_ALL", &["V_S", "CUBE_V", "MTE2_V"]);
    m.alias("HardEvent::V_S", "V_S");
    m.alias("PIPE_V", "V_S");
    m.alias("M_V", "CUBE_V");
    m.alias("HardEvent::M_V", "CUBE_V");
    m.alias("PIPE_M", "CUBE_V");
    m.alias("HardEvent::MTE2_V", "MTE2_V");
    m.alias("PIPE_MTE2", "MTE2_V");
    m.finish()
}

fn mlu370() -> HardwareModel {
    let mut m = draft("mlu370", &["IO_in", "Compute", "IO_out"]);
    m.unit("DMA", UnitRole::Dma);
    m.unit("VPU", UnitRole::Compute);
    m.unit("IPU", UnitRole::Matrix);
    m.rule("FULL_SYNC", None, None, None);
    m.rule("SYNC_IO", None, Some("DMA"), None);
    m.rule("SYNC_COMPUTE", None, Some("VPU"), Some("DMA"));
    m.rule("SYNC_COMPUTE", None, Some("IPU"), Some("DMA"));
    m.composite("SYNC_IO_MOVE_COMPUTE", &["SYNC_IO", "SYNC_COMPUTE"]);
    m.composite("SYNC_MOVE", &["SYNC_IO", "SYNC_COMPUTE"]);
    m.alias("__sync", "FULL_SYNC");
    m.alias("__sync_all", "FULL_SYNC");
    m.alias("__sync_io", "SYNC_IO");
    m.alias("__sync_compute", "SYNC_COMPUTE");
    m.alias("__sync_io_move_compute", "SYNC_IO_MOVE_COMPUTE");
    m.alias("__sync_move", "SYNC_MOVE");
    m.finish()
}

pub fn builtin_model(name: &str) -> Result<HardwareModel, ModelError> {
    match name.to_ascii_lowercase().as_str() {
        "ascend910b2" => Ok(ascend910b2()),
        "mlu370" => Ok(mlu370()),
        _ => Err(ModelError::NotFound {
            name: name.to_string(),
            available: BUILTIN_MODELS.iter().map(|s| s.to_string()).collect(),
        }),
    }
}

/// A built-in name, or a path to a model description file.
pub fn resolve_model(spec: &str) -> Result<HardwareModel, ModelError> {
    match builtin_model(spec) {
        Ok(m) => Ok(m),
        Err(not_found) => {
            let path = Path::new(spec);
            if path.is_file() {
                load_model_file(path)
            } else {
                Err(not_found)
            }
        }
    }
}

pub fn load_model_file(path: &Path) -> Result<HardwareModel, ModelError> {
    let text = std::fs::read_to_string(path).map_err(|e| ModelError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_model(&text)
}

/// Parses the model description format:
///
/// ```text
/// model <name>
/// stages <s1> <s2> ...
/// unit <name> role <compute|dma|scalar|matrix>
/// rule <primitive> stage <stage|any> writer <unit|*> reader <unit|*>
/// alias <spelling> = <primitive>
/// composite <primitive> = <primitive> + <primitive> ...
/// ```
pub fn parse_model(text: &str) -> Result<HardwareModel, ModelError> {
    let mut m: Option<ModelDraft> = None;
    let mut pending_stages: Option<Vec<String>> = None;
    // Deferred semantic checks carry their line number.
    let mut rule_lines = Vec::new();
    let mut alias_lines = Vec::new();
    let mut composite_lines = Vec::new();

    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let content = raw.split('#').next().unwrap_or("");
        let toks = tokens(content);
        let Some(&(col, head)) = toks.first() else { continue };
        let syntax = |column: usize, message: String| ModelError::Syntax { line, column, message };
        let arg = |i: usize, what: &str| -> Result<&str, ModelError> {
            toks.get(i).map(|t| t.1).ok_or_else(|| {
                let column = toks.last().map_or(1, |t| t.0 + t.1.len());
                syntax(column, format!("expected {what}"))
            })
        };
        let keyword = |i: usize, kw: &str| -> Result<(), ModelError> {
            match toks.get(i) {
                Some(&(_, t)) if t == kw => Ok(()),
                Some(&(c, t)) => Err(syntax(c, format!("expected `{kw}`, found `{t}`"))),
                None => Err(syntax(
                    toks.last().map_or(1, |t| t.0 + t.1.len()),
                    format!("expected `{kw}`"),
                )),
            }
        };
        let no_more = |n: usize| -> Result<(), ModelError> {
            match toks.get(n) {
                Some(&(c, t)) => Err(syntax(c, format!("unexpected `{t}`"))),
                None => Ok(()),
            }
        };

        if head != "model" && m.is_none() {
            return Err(syntax(col, "expected `model <name>` before other directives".into()));
        }
        match head {
            "model" => {
                if m.is_some() {
                    return Err(syntax(col, "duplicate `model` directive".into()));
                }
                let name = arg(1, "model name")?;
                no_more(2)?;
                m = Some(draft(name, &[]));
            }
            "stages" => {
                if toks.len() < 2 {
                    return Err(syntax(col + head.len(), "expected at least one stage".into()));
                }
                pending_stages = Some(toks[1..].iter().map(|t| t.1.to_string()).collect());
            }
            "unit" => {
                let name = arg(1, "unit name")?;
                keyword(2, "role")?;
                let role_tok = arg(3, "unit role")?;
                let role = UnitRole::parse(role_tok)
                    .ok_or_else(|| syntax(toks[3].0, format!("unknown role `{role_tok}`")))?;
                no_more(4)?;
                let d = m.as_mut().expect("model checked above");
                if d.units.iter().any(|u| u.name.eq_ignore_ascii_case(name)) {
                    return Err(ModelError::Semantic { line, message: format!("unit {name} declared twice") });
                }
                d.unit(name, role);
            }
            "rule" => {
                let p = arg(1, "primitive")?;
                keyword(2, "stage")?;
                let s = arg(3, "stage name or `any`")?;
                keyword(4, "writer")?;
                let w = arg(5, "writer unit or `*`")?;
                keyword(6, "reader")?;
                let r = arg(7, "reader unit or `*`")?;
                no_more(8)?;
                let d = m.as_mut().expect("model checked above");
                d.rule(
                    p,
                    (s != "any").then_some(s),
                    (w != "*").then_some(w),
                    (r != "*").then_some(r),
                );
                rule_lines.push(line);
            }
            "alias" => {
                let spelling = arg(1, "spelling")?;
                keyword(2, "=")?;
                let target = arg(3, "primitive")?;
                no_more(4)?;
                m.as_mut().expect("model checked above").alias(spelling, target);
                alias_lines.push(line);
            }
            "composite" => {
                let name = arg(1, "composite name")?;
                keyword(2, "=")?;
                let mut parts = vec![arg(3, "primitive")?];
                let mut i = 4;
                while i < toks.len() {
                    keyword(i, "+")?;
                    parts.push(arg(i + 1, "primitive")?);
                    i += 2;
                }
                m.as_mut().expect("model checked above").composite(name, &parts);
                composite_lines.push(line);
            }
            other => return Err(syntax(col, format!("unknown directive `{other}`"))),
        }
    }

    let Some(mut d) = m else {
        return Err(ModelError::Syntax { line: 1, column: 1, message: "missing `model` directive".into() });
    };
    d.stages = pending_stages.unwrap_or_default();

    let semantic = |line: usize, message: String| ModelError::Semantic { line, message };
    for (r, &line) in d.rules.iter().zip(&rule_lines) {
        if let Scope::Named(s) = &r.stage {
            if !d.stages.iter().any(|x| x.eq_ignore_ascii_case(s)) {
                return Err(semantic(line, format!("rule {} references undeclared stage {}", r.primitive, s)));
            }
        }
        for scope in [&r.writer, &r.reader] {
            if let Scope::Named(u) = scope {
                if !d.units.iter().any(|x| x.name.eq_ignore_ascii_case(u)) {
                    return Err(semantic(line, format!("rule {} references undeclared unit {}", r.primitive, u)));
                }
            }
        }
    }
    let mut known: Vec<String> = d.rules.iter().map(|r| r.primitive.clone()).collect();
    for ((name, parts), &line) in d.composites.iter().zip(&composite_lines) {
        for part in parts {
            if !known.contains(part) {
                return Err(semantic(line, format!("composite {name} references unknown primitive {part}")));
            }
        }
        known.push(name.clone());
    }
    for ((s, target), &line) in d.aliases.iter().zip(&alias_lines) {
        if !known.contains(target) {
            return Err(semantic(line, format!("alias {s} targets unknown primitive {target}")));
        }
    }
    Ok(d.finish())
}

/// Whitespace tokens with their 1-based column.
fn tokens(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in line.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = start.take() {
                out.push((s + 1, &line[s..i]));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((s + 1, &line[s..]));
    }
    out
}
