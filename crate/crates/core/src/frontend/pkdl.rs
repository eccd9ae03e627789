//! Parser for the pipeline-kernel description language (PKDL).
//!
//! ```text
//! hardware <model>
//! stage <name>
//!   deque <queue>
//!   enque <queue>
//!   write <buffer> @<unit>
//!   read  <buffer> @<unit>
//!   barrier <primitive>
//!   setflag <primitive> <flag>
//!   waitflag <primitive> <flag>
//! end
//! topology <producer> -> <consumer> : <queue>
//! ```
//!
//! One directive per line, `#` starts a comment.

use std::collections::{BTreeSet, HashMap};

use crate::diag::{has_errors, Diagnostic};
use crate::event::{FlagToken, KernelProgram, ProgramBuilder};

/// Successful parse: the program plus any warnings.
#[derive(Debug)]
pub struct PkdlOutput {
    pub program: KernelProgram,
    pub warnings: Vec<Diagnostic>,
}

struct Tok<'a> {
    col: usize,
    text: &'a str,
}

fn split(line: &str) -> Vec<Tok<'_>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in line.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = start.take() {
                out.push(Tok { col: s + 1, text: &line[s..i] });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(Tok { col: s + 1, text: &line[s..] });
    }
    out
}

struct TopoLine {
    line: usize,
    producer: (String, usize),
    consumer: (String, usize),
    queue: (String, usize),
}

/// Parses PKDL text. Errors prevent emission; the `Err` side carries every
/// diagnostic (errors and warnings) in source order.
pub fn parse_pkdl(text: &str) -> Result<PkdlOutput, Vec<Diagnostic>> {
    let mut diags = Vec::new();
    let mut b = ProgramBuilder::new();
    let mut in_stage: Option<(String, usize)> = None;
    let mut flag_sites: HashMap<usize, (usize, usize, String, String)> = HashMap::new();
    let mut topo: Vec<TopoLine> = Vec::new();
    let mut used_queues: BTreeSet<String> = BTreeSet::new();
    let mut saw_hardware = false;

    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let content = raw.split('#').next().unwrap_or("");
        let toks = split(content);
        let Some(head) = toks.first() else { continue };
        let end_col = toks.last().map_or(1, |t| t.col + t.text.len());

        let expect_args = |n: usize, what: &str, diags: &mut Vec<Diagnostic>| -> bool {
            if toks.len() < n + 1 {
                diags.push(Diagnostic::error(format!("`{}` expects {}", head.text, what)).at(line, end_col));
                return false;
            }
            if let Some(extra) = toks.get(n + 1) {
                diags.push(Diagnostic::error(format!("unexpected `{}`", extra.text)).at(line, extra.col));
                return false;
            }
            true
        };

        let is_op = matches!(
            head.text,
            "deque" | "enque" | "write" | "read" | "barrier" | "setflag" | "waitflag"
        );
        if is_op && in_stage.is_none() {
            diags.push(
                Diagnostic::error(format!("`{}` outside of a stage block", head.text)).at(line, head.col),
            );
            continue;
        }

        match head.text {
            "hardware" => {
                if in_stage.is_some() {
                    diags.push(Diagnostic::error("`hardware` inside a stage block").at(line, head.col));
                } else if saw_hardware {
                    diags.push(Diagnostic::error("duplicate `hardware` directive").at(line, head.col));
                } else if expect_args(1, "a model name", &mut diags) {
                    b.hardware(toks[1].text);
                    saw_hardware = true;
                }
            }
            "stage" => {
                if let Some((open, open_line)) = &in_stage {
                    diags.push(
                        Diagnostic::error(format!(
                            "stage {} opened before stage {} (line {}) was closed",
                            toks.get(1).map_or("", |t| t.text),
                            open,
                            open_line
                        ))
                        .at(line, head.col),
                    );
                    continue;
                }
                if expect_args(1, "a stage name", &mut diags) {
                    let name = toks[1].text;
                    if !b.stage(name) {
                        diags.push(
                            Diagnostic::error(format!("duplicate stage {name}")).at(line, toks[1].col),
                        );
                    }
                    in_stage = Some((name.to_string(), line));
                }
            }
            "end" => {
                if in_stage.take().is_none() {
                    diags.push(Diagnostic::error("`end` without an open stage").at(line, head.col));
                } else {
                    expect_args(0, "no arguments", &mut diags);
                }
            }
            "deque" | "enque" => {
                if expect_args(1, "a queue name", &mut diags) {
                    let q = toks[1].text;
                    used_queues.insert(q.to_string());
                    if head.text == "deque" {
                        b.deque(q);
                    } else {
                        b.enque(q);
                    }
                }
            }
            "write" | "read" => {
                if expect_args(2, "a buffer and an @unit", &mut diags) {
                    let Some(unit) = toks[2].text.strip_prefix('@').filter(|u| !u.is_empty()) else {
                        diags.push(
                            Diagnostic::error(format!("expected @unit, found `{}`", toks[2].text))
                                .at(line, toks[2].col),
                        );
                        continue;
                    };
                    if head.text == "write" {
                        b.write(toks[1].text, unit);
                    } else {
                        b.read(toks[1].text, unit);
                    }
                }
            }
            "barrier" => {
                if expect_args(1, "a primitive", &mut diags) {
                    b.barrier(toks[1].text);
                }
            }
            "setflag" => {
                if expect_args(2, "a primitive and a flag id", &mut diags) {
                    let tok = b.set_flag(toks[1].text, toks[2].text);
                    flag_sites.insert(
                        tok.0,
                        (line, head.col, toks[1].text.to_string(), toks[2].text.to_string()),
                    );
                }
            }
            "waitflag" => {
                if expect_args(2, "a primitive and a flag id", &mut diags)
                    && b.wait_flag(toks[1].text, toks[2].text).is_none()
                {
                    diags.push(
                        Diagnostic::warning(format!(
                            "waitflag {} {} has no matching setflag; no ordering is assumed",
                            toks[1].text, toks[2].text
                        ))
                        .at(line, head.col),
                    );
                }
            }
            "topology" => {
                if in_stage.is_some() {
                    diags.push(Diagnostic::error("`topology` inside a stage block").at(line, head.col));
                    continue;
                }
                match parse_topology(content, head.col - 1 + head.text.len()) {
                    Ok((p, c, q)) => topo.push(TopoLine { line, producer: p, consumer: c, queue: q }),
                    Err((col, msg)) => diags.push(Diagnostic::error(msg).at(line, col)),
                }
            }
            other => {
                diags.push(Diagnostic::error(format!("unknown directive `{other}`")).at(line, head.col));
            }
        }
    }

    if let Some((name, line)) = in_stage {
        diags.push(Diagnostic::error(format!("stage {name} is missing `end`")).at(line, 1));
    }

    for t in &topo {
        for (name, col) in [&t.producer, &t.consumer] {
            if !b.has_stage(name) {
                diags.push(Diagnostic::error(format!("topology references undeclared stage {name}")).at(t.line, *col));
            }
        }
        if !used_queues.contains(&t.queue.0) {
            diags.push(
                Diagnostic::error(format!("topology queue {} is never enqueued or dequeued", t.queue.0))
                    .at(t.line, t.queue.1),
            );
        }
        b.topology(&t.producer.0, &t.consumer.0, &t.queue.0);
    }

    let built = b.finish();
    for FlagToken(tok) in &built.unmatched_set_flags {
        let (line, col, prim, flag) = &flag_sites[tok];
        diags.push(
            Diagnostic::warning(format!("setflag {prim} {flag} has no matching waitflag; it provides no ordering"))
                .at(*line, *col),
        );
    }
    diags.sort_by_key(|d| d.location);

    if has_errors(&diags) {
        Err(diags)
    } else {
        Ok(PkdlOutput { program: built.program, warnings: diags })
    }
}

type Named = (String, usize);

/// `<p> -> <c> : <q>` following the keyword; `offset` is the byte index just
/// past `topology`.
fn parse_topology(line: &str, offset: usize) -> Result<(Named, Named, Named), (usize, String)> {
    let rest = &line[offset..];
    let base = offset;
    let arrow = rest.find("->").ok_or((base + 1, "expected `<producer> -> <consumer> : <queue>`".to_string()))?;
    let after = &rest[arrow + 2..];
    let colon = after.find(':').ok_or((base + arrow + 3, "expected `: <queue>`".to_string()))?;
    let field = |s: &str, start: usize, what: &str| -> Result<Named, (usize, String)> {
        let toks = split(s);
        match toks.as_slice() {
            [one] => Ok((one.text.to_string(), start + one.col)),
            [] => Err((start + 1, format!("missing {what}"))),
            [_, extra, ..] => Err((start + extra.col, format!("unexpected `{}`", extra.text))),
        }
    };
    let producer = field(&rest[..arrow], base, "producer stage")?;
    let consumer = field(&after[..colon], base + arrow + 2, "consumer stage")?;
    let queue = field(&after[colon + 1..], base + arrow + 2 + colon + 1, "queue name")?;
    Ok((producer, consumer, queue))
}
