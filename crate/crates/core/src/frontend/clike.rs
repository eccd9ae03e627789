//! Tokenizer and statement splitter shared by the C-like source frontends.
//!
//! This is deliberately not a C++ parser: it produces a flat stream of
//! statements, each tagged with the innermost enclosing function, which the
//! dialect recognizers pattern-match. Line breaks carry no meaning.

use crate::diag::Diagnostic;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TokKind {
    Ident,
    Number,
    Literal,
    Punct,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub kind: TokKind,
    pub text: String,
    pub line: usize,
    pub col: usize,
}

impl Token {
    pub fn is(&self, s: &str) -> bool {
        self.text == s
    }

    pub fn is_ident(&self) -> bool {
        self.kind == TokKind::Ident
    }
}

const TWO_CHAR: [&str; 12] = ["::", "->", "==", "!=", "<=", ">=", "&&", "||", "+=", "-=", "*=", "/="];

pub fn tokenize(src: &str) -> Result<Vec<Token>, Diagnostic> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let mut at_line_start = true;

    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
                at_line_start = true;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }

    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            bump!();
            continue;
        }
        // preprocessor directive, with backslash continuations
        if c == '#' && at_line_start {
            while i < chars.len() && chars[i] != '\n' {
                if chars[i] == '\\' && chars.get(i + 1) == Some(&'\n') {
                    bump!();
                }
                bump!();
            }
            continue;
        }
        at_line_start = false;
        let (tl, tc) = (line, col);
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                bump!();
            }
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'*') {
            bump!();
            bump!();
            loop {
                if i >= chars.len() {
                    return Err(Diagnostic::error("unterminated block comment").at(tl, tc));
                }
                if chars[i] == '*' && chars.get(i + 1) == Some(&'/') {
                    bump!();
                    bump!();
                    break;
                }
                bump!();
            }
            continue;
        }
        if c == '"' || c == '\'' {
            let start = i;
            bump!();
            loop {
                if i >= chars.len() || chars[i] == '\n' {
                    return Err(Diagnostic::error("unterminated literal").at(tl, tc));
                }
                if chars[i] == '\\' {
                    bump!();
                    if i < chars.len() {
                        bump!();
                    }
                    continue;
                }
                if chars[i] == c {
                    bump!();
                    break;
                }
                bump!();
            }
            let text: String = chars[start..i].iter().collect();
            out.push(Token { kind: TokKind::Literal, text, line: tl, col: tc });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                bump!();
            }
            let text: String = chars[start..i].iter().collect();
            out.push(Token { kind: TokKind::Ident, text, line: tl, col: tc });
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '.' || chars[i] == '_') {
                bump!();
            }
            let text: String = chars[start..i].iter().collect();
            out.push(Token { kind: TokKind::Number, text, line: tl, col: tc });
            continue;
        }
        let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        if TWO_CHAR.contains(&two.as_str()) {
            bump!();
            bump!();
            out.push(Token { kind: TokKind::Punct, text: two, line: tl, col: tc });
            continue;
        }
        bump!();
        out.push(Token { kind: TokKind::Punct, text: c.to_string(), line: tl, col: tc });
    }
    Ok(out)
}

/// A `;`-terminated statement or a block header, with the innermost enclosing
/// function (if any).
#[derive(Clone, Debug)]
pub struct Statement {
    pub tokens: Vec<Token>,
    pub function: Option<String>,
    /// True for a block header such as a function signature or `for (...)`.
    pub header: bool,
}

impl Statement {
    pub fn line(&self) -> usize {
        self.tokens.first().map_or(0, |t| t.line)
    }

    pub fn col(&self) -> usize {
        self.tokens.first().map_or(0, |t| t.col)
    }
}

const CONTROL: [&str; 9] = ["if", "for", "while", "switch", "catch", "do", "else", "try", "return"];

/// Name of the function a block header introduces, if it is one.
fn function_name(header: &[Token]) -> Option<String> {
    let first = header.first()?;
    if ["class", "struct", "namespace", "union", "enum"].contains(&first.text.as_str())
        || CONTROL.contains(&first.text.as_str())
    {
        return None;
    }
    let mut depth = 0i32;
    for (i, t) in header.iter().enumerate() {
        match t.text.as_str() {
            "(" if depth == 0 => {
                let name = header[..i].iter().rev().find(|t| t.is_ident())?;
                return (!CONTROL.contains(&name.text.as_str())).then(|| name.text.clone());
            }
            "<" => depth += 1,
            ">" => depth -= 1,
            _ => {}
        }
    }
    None
}

/// Splits a token stream into statements. Brace initializers (`= {...}`) stay
/// inside their statement.
pub fn statements(tokens: &[Token]) -> Result<Vec<Statement>, Diagnostic> {
    let mut out = Vec::new();
    let mut scopes: Vec<Option<String>> = Vec::new();
    let mut open_braces: Vec<&Token> = Vec::new();
    let mut cur: Vec<Token> = Vec::new();
    let mut paren: Vec<&Token> = Vec::new();
    let mut init_depth = 0usize;
    let current_fn = |scopes: &[Option<String>]| scopes.iter().rev().find_map(|s| s.clone());

    for t in tokens {
        if init_depth > 0 {
            match t.text.as_str() {
                "{" => init_depth += 1,
                "}" => init_depth -= 1,
                _ => {}
            }
            cur.push(t.clone());
            continue;
        }
        match t.text.as_str() {
            "(" | "[" => {
                paren.push(t);
                cur.push(t.clone());
            }
            ")" | "]" => {
                let want = if t.text == ")" { "(" } else { "[" };
                match paren.pop() {
                    Some(open) if open.text == want => cur.push(t.clone()),
                    _ => return Err(Diagnostic::error(format!("unbalanced `{}`", t.text)).at(t.line, t.col)),
                }
            }
            ";" if paren.is_empty() => {
                if !cur.is_empty() {
                    out.push(Statement {
                        tokens: std::mem::take(&mut cur),
                        function: current_fn(&scopes),
                        header: false,
                    });
                }
            }
            "{" if cur.last().is_some_and(|p| p.is("=") || p.is(",") || p.is("(") || p.is("return"))
                || !paren.is_empty() =>
            {
                init_depth = 1;
                cur.push(t.clone());
            }
            "{" => {
                let name = function_name(&cur);
                if !cur.is_empty() {
                    let function = name.clone().or_else(|| current_fn(&scopes));
                    out.push(Statement { tokens: std::mem::take(&mut cur), function, header: true });
                }
                scopes.push(name);
                open_braces.push(t);
            }
            "}" => {
                if !cur.is_empty() {
                    // last statement of a block without a trailing `;`
                    out.push(Statement {
                        tokens: std::mem::take(&mut cur),
                        function: current_fn(&scopes),
                        header: false,
                    });
                }
                if scopes.pop().is_none() {
                    return Err(Diagnostic::error("unbalanced `}`").at(t.line, t.col));
                }
                open_braces.pop();
            }
            _ => cur.push(t.clone()),
        }
    }
    if let Some(open) = paren.last() {
        return Err(Diagnostic::error(format!("truncated input: `{}` is never closed", open.text)).at(open.line, open.col));
    }
    if let Some(open) = open_braces.last() {
        return Err(Diagnostic::error("truncated input: `{` is never closed").at(open.line, open.col));
    }
    if init_depth > 0 {
        return Err(Diagnostic::error("truncated input inside a brace initializer"));
    }
    if let Some(t) = cur.first() {
        // a trailing `;`-less fragment is accepted only if it closes nothing
        let function = current_fn(&scopes);
        let _ = t;
        out.push(Statement { tokens: cur, function, header: false });
    }
    Ok(out)
}

/// Splits `tokens` (without the surrounding parentheses) at top-level commas.
pub fn split_args(tokens: &[Token]) -> Vec<Vec<Token>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    let mut depth = 0i32;
    for t in tokens {
        match t.text.as_str() {
            "(" | "[" | "{" => depth += 1,
            ")" | "]" | "}" => depth -= 1,
            "," if depth == 0 => {
                out.push(std::mem::take(&mut cur));
                continue;
            }
            _ => {}
        }
        cur.push(t.clone());
    }
    if !cur.is_empty() || !out.is_empty() {
        out.push(cur);
    }
    out
}

/// Index of the token closing the bracket opened at `open`.
pub fn matching(tokens: &[Token], open: usize) -> Option<usize> {
    let (o, c) = match tokens.get(open)?.text.as_str() {
        "(" => ("(", ")"),
        "[" => ("[", "]"),
        "<" => ("<", ">"),
        "{" => ("{", "}"),
        _ => return None,
    };
    let mut depth = 0i32;
    for (i, t) in tokens.iter().enumerate().skip(open) {
        if t.is(o) {
            depth += 1;
        } else if t.is(c) {
            depth -= 1;
            if depth == 0 {
                return Some(i);
            }
        }
    }
    None
}

/// A recognized call expression `[recv .] [ns ::]* name [<tmpl>] (args)`.
#[derive(Clone, Debug)]
pub struct Call {
    pub receiver: Option<Vec<Token>>,
    pub name: String,
    pub template: Vec<Token>,
    pub args: Vec<Vec<Token>>,
    /// Index one past the closing parenthesis.
    pub end: usize,
}

/// Parses a call starting at `tokens[0]`, ignoring a leading `this->`.
pub fn parse_call(tokens: &[Token]) -> Option<Call> {
    let mut i = 0;
    if tokens.len() >= 2 && tokens[0].is("this") && tokens[1].is("->") {
        i = 2;
    }
    let mut receiver = None;
    // receiver: ident ([...])? followed by `.` or `->`
    if tokens.get(i).is_some_and(Token::is_ident) {
        let mut j = i + 1;
        if tokens.get(j).is_some_and(|t| t.is("[")) {
            j = matching(tokens, j)? + 1;
        }
        if tokens.get(j).is_some_and(|t| t.is(".") || t.is("->")) {
            receiver = Some(tokens[i..j].to_vec());
            i = j + 1;
        }
    }
    // qualified name
    let mut name = tokens.get(i).filter(|t| t.is_ident())?.text.clone();
    i += 1;
    while tokens.get(i).is_some_and(|t| t.is("::")) && tokens.get(i + 1).is_some_and(Token::is_ident) {
        name = tokens[i + 1].text.clone();
        i += 2;
    }
    let mut template = Vec::new();
    if tokens.get(i).is_some_and(|t| t.is("<")) {
        let close = matching(tokens, i)?;
        template = tokens[i + 1..close].to_vec();
        i = close + 1;
    }
    if !tokens.get(i).is_some_and(|t| t.is("(")) {
        return None;
    }
    let close = matching(tokens, i)?;
    Some(Call { receiver, name, template, args: split_args(&tokens[i + 1..close]), end: close + 1 })
}

pub fn text_of(tokens: &[Token]) -> String {
    tokens.iter().map(|t| t.text.as_str()).collect::<Vec<_>>().join("")
}

/// Base identifier of an operand expression such as `&x[i]`, `(float *)p`,
/// `this->buf` or `buf + off`, plus whether an offset follows the base.
/// Returns `None` for literals and expressions with no identifier.
pub fn operand_base(tokens: &[Token]) -> Option<(String, bool)> {
    let mut i = 0;
    loop {
        match tokens.get(i)?.text.as_str() {
            "&" | "*" => i += 1,
            "(" => {
                let close = matching(tokens, i)?;
                let inner = &tokens[i + 1..close];
                let is_cast = close + 1 < tokens.len()
                    && inner.iter().all(|t| t.is_ident() || t.is("*") || t.is("::") || t.is("<") || t.is(">"));
                if is_cast {
                    i = close + 1;
                } else if close + 1 == tokens.len() {
                    return operand_base(inner);
                } else {
                    return None;
                }
            }
            "this" if tokens.get(i + 1).is_some_and(|t| t.is("->")) => i += 2,
            _ => break,
        }
    }
    let mut t = tokens.get(i).filter(|t| t.is_ident())?;
    while tokens.get(i + 1).is_some_and(|n| n.is("::")) && tokens.get(i + 2).is_some_and(Token::is_ident) {
        i += 2;
        t = &tokens[i];
    }
    let rest = &tokens[i + 1..];
    if rest.first().is_some_and(|n| n.is("(") || n.is(".") || n.is("->")) {
        return None;
    }
    Some((t.text.clone(), !rest.is_empty()))
}
