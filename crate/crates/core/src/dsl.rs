//! The `.ctc` circuit language and the `matrix` / `states` file formats.
//!
//! A circuit file is one directive per line; `#` starts a comment that runs
//! to the end of the line, and blank lines are ignored.
//!
//! ```text
//! # ctcsim v1
//! system A 2
//! system CTC 2
//! input pure A : 1 0
//! gate swap A CTC
//! ```
//!
//! Directives:
//!
//! - `system <name> <dim>`
//! - `input pure <name>... : <complex>...`
//! - `input mixed <name>... : <row> ; <row> ; ...`
//! - `gate swap <r1> <r2>`, `gate csum <ctrl> <tgt>`,
//!   `gate select <ctrl> <tgt> @<file>`, `gate select_adj <ctrl> <tgt> @<file>`,
//!   `gate unitary <reg> @<file>`
//!
//! Complex literals are `<float>`, `<float>+<float>i` or `<float>-<float>i`
//! with no spaces inside. Gates apply in file order, top first. Pure inputs
//! within 1e-6 of unit norm are accepted and normalized when lowered.
//!
//! Matrix files start with a header `matrix <side> <count>` followed by
//! `count · side²` complex literals in row-major order, separated by
//! whitespace or `;`. State files use the header `states <dim> <count>`
//! followed by `count · dim` amplitudes.

use std::fmt;
use std::path::Path;

use crate::ctc_engine::DeutschProblem;
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, Complex64, Dims};
use crate::quantum::{
    csum_gate, embed_unitary, select_gate, swap_gate, DensityMatrix, Layout, PureState, Register,
    Unitary, CTC,
};

/// Pure inputs may miss unit norm by this much.
pub const NORM_SLACK: f64 = 1e-6;
/// Lowering refuses circuits whose total dimension exceeds this.
pub const MAX_LOWERED_DIM: usize = 1024;
/// Unitarity tolerance for gates loaded from files.
pub const FILE_UNITARY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Span {
    pub line: usize,
    pub column: usize,
}

/// A parsed element with its source location; equality ignores the location.
#[derive(Debug, Clone)]
pub struct Located<T> {
    pub node: T,
    pub span: Span,
}

impl<T: PartialEq> PartialEq for Located<T> {
    fn eq(&self, other: &Self) -> bool {
        self.node == other.node
    }
}

impl<T> Located<T> {
    pub fn new(node: T, span: Span) -> Self {
        Self { node, span }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemDecl {
    pub name: String,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StateLiteral {
    /// Amplitudes as written.
    Pure(Vec<Complex64>),
    /// Rows of the density matrix.
    Mixed(Vec<Vec<Complex64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct InputDecl {
    pub registers: Vec<String>,
    pub state: StateLiteral,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GateDecl {
    Swap {
        a: String,
        b: String,
    },
    Csum {
        ctrl: String,
        tgt: String,
    },
    Select {
        ctrl: String,
        tgt: String,
        file: String,
        adjoint: bool,
    },
    Unitary {
        reg: String,
        file: String,
    },
}

impl GateDecl {
    fn registers(&self) -> Vec<&str> {
        match self {
            Self::Swap { a, b } => vec![a, b],
            Self::Csum { ctrl, tgt } | Self::Select { ctrl, tgt, .. } => vec![ctrl, tgt],
            Self::Unitary { reg, .. } => vec![reg],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CircuitSpec {
    pub systems: Vec<Located<SystemDecl>>,
    pub inputs: Vec<Located<InputDecl>>,
    pub gates: Vec<Located<GateDecl>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
    pub expected: String,
}

impl ParseError {
    fn new(span: Span, message: impl Into<String>, expected: impl Into<String>) -> Self {
        Self {
            line: span.line,
            column: span.column,
            message: message.into(),
            expected: expected.into(),
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)?;
        if !self.expected.is_empty() {
            write!(f, " (expected {})", self.expected)?;
        }
        Ok(())
    }
}

impl std::error::Error for ParseError {}

/// Joins diagnostics into one [`Error::Parse`], one per line.
pub fn errors_to_error(context: &str, errors: &[ParseError]) -> Error {
    let lines: Vec<String> = errors.iter().map(|e| format!("{context}:{e}")).collect();
    Error::Parse(lines.join("\n"))
}

// ---------------------------------------------------------------------------
// Tokens and literals

#[derive(Debug, Clone, Copy)]
struct Token<'a> {
    text: &'a str,
    span: Span,
}

fn tokenize(line: &str, line_no: usize) -> Vec<Token<'_>> {
    let code = line.split('#').next().unwrap_or("");
    let mut tokens = Vec::new();
    let mut start: Option<(usize, usize)> = None;
    let mut column = 0;
    let mut at_path = false;
    for (byte, ch) in code.char_indices() {
        column += 1;
        let separator = ch.is_whitespace() || (!at_path && (ch == ':' || ch == ';'));
        if separator {
            if let Some((b, c)) = start.take() {
                tokens.push(Token {
                    text: &code[b..byte],
                    span: Span {
                        line: line_no,
                        column: c,
                    },
                });
            }
            at_path = false;
            if !ch.is_whitespace() {
                tokens.push(Token {
                    text: &code[byte..byte + ch.len_utf8()],
                    span: Span {
                        line: line_no,
                        column,
                    },
                });
            }
        } else if start.is_none() {
            start = Some((byte, column));
            at_path = ch == '@';
        }
    }
    if let Some((b, c)) = start {
        tokens.push(Token {
            text: &code[b..],
            span: Span {
                line: line_no,
                column: c,
            },
        });
    }
    tokens
}

fn parse_float(s: &str) -> Option<f64> {
    let allowed = |c: char| c.is_ascii_digit() || matches!(c, '+' | '-' | '.' | 'e' | 'E');
    if s.is_empty() || !s.chars().all(allowed) || !s.chars().any(|c| c.is_ascii_digit()) {
        return None;
    }
    s.parse::<f64>().ok().filter(|x| x.is_finite())
}

/// Parses `<float>`, `<float>+<float>i` or `<float>-<float>i`.
pub fn parse_complex(s: &str) -> Option<Complex64> {
    let Some(body) = s.strip_suffix('i') else {
        return parse_float(s).map(|re| Complex64::new(re, 0.0));
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| matches!(bytes[k], b'+' | b'-') && !matches!(bytes[k - 1], b'e' | b'E'))?;
    let re = parse_float(&body[..split])?;
    let im = parse_float(&body[split..])?;
    Some(Complex64::new(re, im))
}

/// Shortest round-trip rendering; exponent form outside `[1e-5, 1e16)`.
pub fn format_float(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || (1e-5..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn format_complex(z: Complex64) -> String {
    if z.im == 0.0 && !z.im.is_sign_negative() {
        format_float(z.re)
    } else if z.im.is_sign_negative() {
        format!("{}-{}i", format_float(z.re), format_float(-z.im))
    } else {
        format!("{}+{}i", format_float(z.re), format_float(z.im))
    }
}

fn is_name(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

// ---------------------------------------------------------------------------
// Circuit parser

struct Cursor<'a> {
    tokens: Vec<Token<'a>>,
    pos: usize,
    end: Span,
}

impl<'a> Cursor<'a> {
    fn new(tokens: Vec<Token<'a>>, line_no: usize, line_len: usize) -> Self {
        Self {
            tokens,
            pos: 0,
            end: Span {
                line: line_no,
                column: line_len.max(1),
            },
        }
    }

    fn peek(&self) -> Option<Token<'a>> {
        self.tokens.get(self.pos).copied()
    }

    fn here(&self) -> Span {
        self.peek().map_or(self.end, |t| t.span)
    }

    fn next(&mut self, expected: &str) -> std::result::Result<Token<'a>, ParseError> {
        let t = self
            .peek()
            .ok_or_else(|| ParseError::new(self.end, "unexpected end of line", expected))?;
        self.pos += 1;
        Ok(t)
    }

    fn name(&mut self) -> std::result::Result<Located<String>, ParseError> {
        let t = self.next("register name")?;
        if !is_name(t.text) {
            return Err(ParseError::new(
                t.span,
                format!("`{}` is not a valid name", t.text),
                "register name",
            ));
        }
        Ok(Located::new(t.text.to_string(), t.span))
    }

    fn keyword(&mut self, kw: &str) -> std::result::Result<(), ParseError> {
        let t = self.next(&format!("`{kw}`"))?;
        if t.text != kw {
            return Err(ParseError::new(
                t.span,
                format!("unexpected `{}`", t.text),
                format!("`{kw}`"),
            ));
        }
        Ok(())
    }

    fn file(&mut self) -> std::result::Result<String, ParseError> {
        let t = self.next("`@<file>`")?;
        match t.text.strip_prefix('@') {
            Some(path) if !path.is_empty() => Ok(path.to_string()),
            _ => Err(ParseError::new(
                t.span,
                format!("unexpected `{}`", t.text),
                "`@<file>`",
            )),
        }
    }

    fn complex(&mut self) -> std::result::Result<Complex64, ParseError> {
        let t = self.next("complex literal")?;
        parse_complex(t.text).ok_or_else(|| {
            ParseError::new(
                t.span,
                format!("malformed complex literal `{}`", t.text),
                "complex literal such as 0.5, 1+2i or 1e-3-0.5i",
            )
        })
    }

    fn finish(&self) -> std::result::Result<(), ParseError> {
        match self.peek() {
            None => Ok(()),
            Some(t) => Err(ParseError::new(
                t.span,
                format!("unexpected `{}`", t.text),
                "end of line",
            )),
        }
    }
}

fn parse_dim(t: Token<'_>) -> std::result::Result<usize, ParseError> {
    match t.text.parse::<usize>() {
        Ok(d) if d >= 2 => Ok(d),
        _ => Err(ParseError::new(
            t.span,
            format!("`{}` is not a valid dimension", t.text),
            "integer dimension >= 2",
        )),
    }
}

enum Directive {
    System(Located<SystemDecl>),
    Input(Located<InputDecl>, Vec<Located<String>>),
    Gate(Located<GateDecl>, Vec<Located<String>>),
}

fn parse_line(cur: &mut Cursor<'_>) -> std::result::Result<Directive, ParseError> {
    let head = cur.next("directive")?;
    let directive = match head.text {
        "system" => {
            let name = cur.name()?;
            let dim = parse_dim(cur.next("integer dimension >= 2")?)?;
            Directive::System(Located::new(
                SystemDecl {
                    name: name.node,
                    dim,
                },
                head.span,
            ))
        }
        "input" => parse_input(cur, head.span)?,
        "gate" => parse_gate(cur, head.span)?,
        other => {
            return Err(ParseError::new(
                head.span,
                format!("unknown directive `{other}`"),
                "`system`, `input` or `gate`",
            ))
        }
    };
    cur.finish()?;
    Ok(directive)
}

fn parse_input(cur: &mut Cursor<'_>, span: Span) -> std::result::Result<Directive, ParseError> {
    let kind = cur.next("`pure` or `mixed`")?;
    if kind.text != "pure" && kind.text != "mixed" {
        return Err(ParseError::new(
            kind.span,
            format!("unknown input kind `{}`", kind.text),
            "`pure` or `mixed`",
        ));
    }
    let mut names = Vec::new();
    while cur.peek().is_some_and(|t| t.text != ":") {
        names.push(cur.name()?);
    }
    if names.is_empty() {
        return Err(ParseError::new(
            cur.here(),
            "input lists no registers",
            "register name",
        ));
    }
    cur.keyword(":")?;
    let state = if kind.text == "pure" {
        let start = cur.here();
        let mut amps = Vec::new();
        while cur.peek().is_some() {
            amps.push(cur.complex()?);
        }
        if amps.is_empty() {
            return Err(ParseError::new(
                start,
                "pure input has no amplitudes",
                "complex literal",
            ));
        }
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > NORM_SLACK {
            return Err(ParseError::new(
                start,
                format!("pure input has norm {norm}, more than {NORM_SLACK:e} from 1"),
                "unit-norm amplitudes",
            ));
        }
        StateLiteral::Pure(amps)
    } else {
        let mut rows = vec![Vec::new()];
        while let Some(t) = cur.peek() {
            if t.text == ";" {
                cur.pos += 1;
                rows.push(Vec::new());
            } else {
                let z = cur.complex()?;
                rows.last_mut().expect("rows is never empty").push(z);
            }
        }
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(ParseError::new(
                span,
                format!("mixed input has {n} rows but a row of length {}", bad.len()),
                "square matrix rows separated by `;`",
            ));
        }
        StateLiteral::Mixed(rows)
    };
    let refs = names.clone();
    let decl = InputDecl {
        registers: names.into_iter().map(|n| n.node).collect(),
        state,
    };
    Ok(Directive::Input(Located::new(decl, span), refs))
}

fn parse_gate(cur: &mut Cursor<'_>, span: Span) -> std::result::Result<Directive, ParseError> {
    let kind = cur.next("gate kind")?;
    let expected = "`swap`, `csum`, `select`, `select_adj` or `unitary`";
    let (decl, refs) = match kind.text {
        "swap" => {
            let (a, b) = (cur.name()?, cur.name()?);
            let decl = GateDecl::Swap {
                a: a.node.clone(),
                b: b.node.clone(),
            };
            (decl, vec![a, b])
        }
        "csum" => {
            let (c, t) = (cur.name()?, cur.name()?);
            let decl = GateDecl::Csum {
                ctrl: c.node.clone(),
                tgt: t.node.clone(),
            };
            (decl, vec![c, t])
        }
        "select" | "select_adj" => {
            let (c, t) = (cur.name()?, cur.name()?);
            let decl = GateDecl::Select {
                ctrl: c.node.clone(),
                tgt: t.node.clone(),
                file: cur.file()?,
                adjoint: kind.text == "select_adj",
            };
            (decl, vec![c, t])
        }
        "unitary" => {
            let r = cur.name()?;
            let decl = GateDecl::Unitary {
                reg: r.node.clone(),
                file: cur.file()?,
            };
            (decl, vec![r])
        }
        other => {
            return Err(ParseError::new(
                kind.span,
                format!("unknown gate `{other}`"),
                expected,
            ));
        }
    };
    Ok(Directive::Gate(Located::new(decl, span), refs))
}

fn literal_dim(state: &StateLiteral) -> usize {
    match state {
        StateLiteral::Pure(a) => a.len(),
        StateLiteral::Mixed(rows) => rows.len(),
    }
}

/// Parses a circuit, collecting every diagnostic.
pub fn parse(text: &str) -> std::result::Result<CircuitSpec, Vec<ParseError>> {
    let mut spec = CircuitSpec::default();
    let mut errors = Vec::new();
    let mut input_refs = Vec::new();
    let mut gate_refs = Vec::new();
    let mut last_line = 1;
    let mut broken = Broken::default();

    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        last_line = line_no;
        let tokens = tokenize(line, line_no);
        if tokens.is_empty() {
            continue;
        }
        let head = tokens[0].text;
        let mut cur = Cursor::new(tokens, line_no, line.chars().count());
        match parse_line(&mut cur) {
            Ok(Directive::System(s)) => spec.systems.push(s),
            Ok(Directive::Input(inp, refs)) => {
                spec.inputs.push(inp);
                input_refs.push(refs);
            }
            Ok(Directive::Gate(g, refs)) => {
                spec.gates.push(g);
                gate_refs.push(refs);
            }
            Err(e) => {
                match head {
                    "system" => broken.systems = true,
                    "input" => broken.inputs = true,
                    _ => {}
                }
                errors.push(e);
            }
        }
    }

    check_semantics(
        &spec,
        &input_refs,
        &gate_refs,
        last_line,
        broken,
        &mut errors,
    );
    if errors.is_empty() {
        Ok(spec)
    } else {
        errors.sort_by_key(|e| (e.line, e.column));
        Err(errors)
    }
}

/// Parses raw bytes, rejecting invalid UTF-8 with a positioned error.
pub fn parse_bytes(bytes: &[u8]) -> std::result::Result<CircuitSpec, Vec<ParseError>> {
    match std::str::from_utf8(bytes) {
        Ok(text) => parse(text),
        Err(e) => {
            let before = &bytes[..e.valid_up_to()];
            let line = before.iter().filter(|&&b| b == b'\n').count() + 1;
            let line_start = before
                .iter()
                .rposition(|&b| b == b'\n')
                .map_or(0, |p| p + 1);
            let column = String::from_utf8_lossy(&before[line_start..])
                .chars()
                .count()
                + 1;
            Err(vec![ParseError::new(
                Span { line, column },
                "input is not valid UTF-8",
                "UTF-8 text",
            )])
        }
    }
}

/// Lines that failed to parse; their follow-on errors would only be noise.
#[derive(Debug, Clone, Copy, Default)]
struct Broken {
    systems: bool,
    inputs: bool,
}

fn check_semantics(
    spec: &CircuitSpec,
    input_refs: &[Vec<Located<String>>],
    gate_refs: &[Vec<Located<String>>],
    last_line: usize,
    broken: Broken,
    errors: &mut Vec<ParseError>,
) {
    let mut seen: Vec<&str> = Vec::new();
    for s in &spec.systems {
        if seen.contains(&s.node.name.as_str()) {
            errors.push(ParseError::new(
                s.span,
                format!("duplicate system `{}`", s.node.name),
                "unique system name",
            ));
        } else {
            seen.push(&s.node.name);
        }
    }
    let dim_of = |name: &str| {
        spec.systems
            .iter()
            .find(|s| s.node.name == name)
            .map(|s| s.node.dim)
    };
    if !broken.systems && dim_of(CTC).is_none() {
        errors.push(ParseError::new(
            Span {
                line: last_line,
                column: 1,
            },
            "circuit declares no CTC system",
            "`system CTC <dim>`",
        ));
    }

    let mut covered: Vec<&str> = Vec::new();
    for (inp, refs) in spec.inputs.iter().zip(input_refs) {
        let mut group_dim: Option<usize> = Some(1);
        let mut resolved = true;
        for r in refs {
            if r.node == CTC {
                errors.push(ParseError::new(
                    r.span,
                    "CTC register takes no input; its state is solved",
                    "a chronology-respecting register",
                ));
                resolved = false;
            } else if let Some(d) = dim_of(&r.node) {
                if covered.contains(&r.node.as_str()) {
                    errors.push(ParseError::new(
                        r.span,
                        format!("register `{}` already has an input", r.node),
                        "one input per register",
                    ));
                } else {
                    covered.push(&r.node);
                }
                group_dim = group_dim.and_then(|g| g.checked_mul(d));
            } else {
                if !broken.systems {
                    errors.push(unresolved(r));
                }
                resolved = false;
            }
        }
        if resolved {
            let got = literal_dim(&inp.node.state);
            if group_dim != Some(got) {
                let want =
                    group_dim.map_or("an overflowing dimension".to_string(), |d| d.to_string());
                errors.push(ParseError::new(
                    inp.span,
                    format!("input literal has dimension {got}, registers need {want}"),
                    "one amplitude (or row) per basis state",
                ));
            }
        }
    }
    for s in spec
        .systems
        .iter()
        .filter(|_| !broken.systems && !broken.inputs)
    {
        if s.node.name != CTC && !covered.contains(&s.node.name.as_str()) {
            errors.push(ParseError::new(
                s.span,
                format!("system `{}` has no input", s.node.name),
                "an `input` directive covering it",
            ));
        }
    }

    for (gate, refs) in spec.gates.iter().zip(gate_refs) {
        for r in refs {
            if !broken.systems && dim_of(&r.node).is_none() {
                errors.push(unresolved(r));
            }
        }
        let regs = gate.node.registers();
        if regs.len() == 2 && regs[0] == regs[1] {
            errors.push(ParseError::new(
                refs[1].span,
                format!("gate uses `{}` twice", regs[0]),
                "two distinct registers",
            ));
        }
    }
}

fn unresolved(r: &Located<String>) -> ParseError {
    ParseError::new(
        r.span,
        format!("unknown register `{}`", r.node),
        "a declared system",
    )
}

// ---------------------------------------------------------------------------
// Serializer

fn join_complex(values: &[Complex64]) -> String {
    values
        .iter()
        .map(|&z| format_complex(z))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Canonical text: header, systems, inputs, gates.
pub fn serialize(spec: &CircuitSpec) -> String {
    let mut out = String::from("# ctcsim v1\n");
    for s in &spec.systems {
        out.push_str(&format!("system {} {}\n", s.node.name, s.node.dim));
    }
    for inp in &spec.inputs {
        let regs = inp.node.registers.join(" ");
        let body = match &inp.node.state {
            StateLiteral::Pure(a) => format!("pure {regs} : {}", join_complex(a)),
            StateLiteral::Mixed(rows) => {
                let rows: Vec<String> = rows.iter().map(|r| join_complex(r)).collect();
                format!("mixed {regs} : {}", rows.join(" ; "))
            }
        };
        out.push_str(&format!("input {body}\n"));
    }
    for g in &spec.gates {
        let line = match &g.node {
            GateDecl::Swap { a, b } => format!("swap {a} {b}"),
            GateDecl::Csum { ctrl, tgt } => format!("csum {ctrl} {tgt}"),
            GateDecl::Select {
                ctrl,
                tgt,
                file,
                adjoint,
            } => {
                let kw = if *adjoint { "select_adj" } else { "select" };
                format!("{kw} {ctrl} {tgt} @{file}")
            }
            GateDecl::Unitary { reg, file } => format!("unitary {reg} @{file}"),
        };
        out.push_str(&format!("gate {line}\n"));
    }
    out
}

// ---------------------------------------------------------------------------
// Matrix and state files

fn parse_block_file(
    text: &str,
    keyword: &str,
    entries_per_item: impl Fn(usize) -> usize,
) -> std::result::Result<(usize, usize, Vec<Complex64>), Vec<ParseError>> {
    let mut header: Option<(usize, usize)> = None;
    let mut values = Vec::new();
    let mut errors = Vec::new();
    let mut end = Span { line: 1, column: 1 };
    for (i, line) in text.lines().enumerate() {
        let tokens = tokenize(line, i + 1);
        end = Span {
            line: i + 1,
            column: 1,
        };
        let mut iter = tokens.into_iter().filter(|t| t.text != ";").peekable();
        if header.is_none() {
            let Some(first) = iter.next() else { continue };
            if first.text != keyword {
                errors.push(ParseError::new(
                    first.span,
                    format!("unexpected `{}`", first.text),
                    format!("`{keyword} <dim> <count>` header"),
                ));
                return Err(errors);
            }
            let side = iter.next().ok_or_else(|| {
                vec![ParseError::new(
                    first.span,
                    "header is incomplete",
                    "dimension",
                )]
            })?;
            let count = iter
                .next()
                .ok_or_else(|| vec![ParseError::new(side.span, "header is incomplete", "count")])?;
            let side_v = parse_dim(side).map_err(|e| vec![e])?;
            let count_v = match count.text.parse::<usize>() {
                Ok(c) if c >= 1 => c,
                _ => {
                    return Err(vec![ParseError::new(
                        count.span,
                        format!("`{}` is not a valid count", count.text),
                        "positive integer",
                    )]);
                }
            };
            if let Some(t) = iter.next() {
                return Err(vec![ParseError::new(
                    t.span,
                    format!("unexpected `{}`", t.text),
                    "end of header",
                )]);
            }
            let total = entries_per_item(side_v).checked_mul(count_v);
            if total.is_none_or(|t| t > MAX_LOWERED_DIM * MAX_LOWERED_DIM) {
                return Err(vec![ParseError::new(
                    count.span,
                    "file declares too many entries",
                    "a smaller matrix block",
                )]);
            }
            header = Some((side_v, count_v));
            continue;
        }
        for t in iter {
            match parse_complex(t.text) {
                Some(z) => values.push(z),
                None => errors.push(ParseError::new(
                    t.span,
                    format!("malformed complex literal `{}`", t.text),
                    "complex literal",
                )),
            }
        }
    }
    let Some((side, count)) = header else {
        return Err(vec![ParseError::new(
            end,
            "file is empty",
            format!("`{keyword} <dim> <count>` header"),
        )]);
    };
    let want = entries_per_item(side) * count;
    if errors.is_empty() && values.len() != want {
        errors.push(ParseError::new(
            end,
            format!(
                "file holds {} entries, header declares {want}",
                values.len()
            ),
            format!("{want} complex literals"),
        ));
    }
    if errors.is_empty() {
        Ok((side, count, values))
    } else {
        Err(errors)
    }
}

/// Parses a `matrix <side> <count>` file into its matrices.
pub fn parse_matrix_file(text: &str) -> std::result::Result<Vec<CMatrix>, Vec<ParseError>> {
    let (side, _, values) = parse_block_file(text, "matrix", |s| s * s)?;
    Ok(values
        .chunks(side * side)
        .map(|c| CMatrix::new(side, side, c.to_vec()).expect("chunk has side² entries"))
        .collect())
}

/// Parses a `states <dim> <count>` file into normalized states.
pub fn parse_state_file(text: &str) -> std::result::Result<Vec<PureState>, Vec<ParseError>> {
    let (dim, _, values) = parse_block_file(text, "states", |d| d)?;
    values
        .chunks(dim)
        .enumerate()
        .map(|(k, c)| {
            let norm = c.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > NORM_SLACK {
                return Err(vec![ParseError::new(
                    Span { line: 1, column: 1 },
                    format!("state {k} has norm {norm}"),
                    "unit-norm amplitudes",
                )]);
            }
            PureState::normalized(c.to_vec()).map_err(|e| {
                vec![ParseError::new(
                    Span { line: 1, column: 1 },
                    e.to_string(),
                    "",
                )]
            })
        })
        .collect()
}

pub fn serialize_matrices(matrices: &[CMatrix]) -> String {
    let side = matrices.first().map_or(0, |m| m.rows());
    let mut out = format!("matrix {side} {}\n", matrices.len());
    for m in matrices {
        for r in 0..m.rows() {
            let row: Vec<Complex64> = (0..m.cols()).map(|c| m[(r, c)]).collect();
            out.push_str(&join_complex(&row));
            out.push('\n');
        }
    }
    out
}

pub fn serialize_states(states: &[PureState]) -> String {
    let dim = states.first().map_or(0, |s| s.dim());
    let mut out = format!("states {dim} {}\n", states.len());
    for s in states {
        out.push_str(&join_complex(s.amplitudes()));
        out.push('\n');
    }
    out
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn load_matrix_file(path: &Path) -> Result<Vec<CMatrix>> {
    let text = read_file(path)?;
    parse_matrix_file(&text).map_err(|e| errors_to_error(&path.display().to_string(), &e))
}

pub fn load_state_file(path: &Path) -> Result<Vec<PureState>> {
    let text = read_file(path)?;
    parse_state_file(&text).map_err(|e| errors_to_error(&path.display().to_string(), &e))
}

// ---------------------------------------------------------------------------
// Lowering

#[derive(Debug, Clone)]
pub struct LoweredCircuit {
    pub problem: DeutschProblem,
    /// `permutation[i]` is the declaration index of layout register `i`.
    pub permutation: Vec<usize>,
}

fn load_unitaries(base_dir: &Path, file: &str) -> Result<Vec<Unitary>> {
    let tol = linalg::Tolerances {
        unitary: FILE_UNITARY_TOL,
        ..Default::default()
    };
    load_matrix_file(&base_dir.join(file))?
        .into_iter()
        .map(|m| Unitary::new_with(m, &tol))
        .collect()
}

fn lower_state(state: &StateLiteral, dims: Dims) -> Result<DensityMatrix> {
    match state {
        StateLiteral::Pure(amps) => {
            let psi = PureState::normalized(amps.clone())?;
            DensityMatrix::new(CMatrix::outer(psi.amplitudes()), dims)
        }
        StateLiteral::Mixed(rows) => DensityMatrix::new(CMatrix::from_rows(rows)?, dims),
    }
}

/// Builds the CTC problem; file references resolve against `base_dir`.
pub fn lower(spec: &CircuitSpec, base_dir: &Path) -> Result<LoweredCircuit> {
    let ctc_pos = spec
        .systems
        .iter()
        .position(|s| s.node.name == CTC)
        .ok_or_else(|| Error::Layout("circuit declares no CTC system".into()))?;
    let permutation: Vec<usize> = (0..spec.systems.len())
        .filter(|&i| i != ctc_pos)
        .chain(std::iter::once(ctc_pos))
        .collect();
    let registers: Vec<Register> = permutation
        .iter()
        .map(|&i| Register {
            name: spec.systems[i].node.name.clone(),
            dim: spec.systems[i].node.dim,
        })
        .collect();
    let total = registers.iter().try_fold(1usize, |acc, r| {
        acc.checked_mul(r.dim).filter(|&t| t <= MAX_LOWERED_DIM)
    });
    if total.is_none() {
        return Err(Error::InvalidArgument(format!(
            "circuit dimension exceeds {MAX_LOWERED_DIM}"
        )));
    }
    let n_regs = registers.len();
    let layout = Layout::new(registers, Some(n_regs - 1))?;

    let mut gates = Vec::with_capacity(spec.gates.len());
    for g in &spec.gates {
        let gate = match &g.node {
            GateDecl::Swap { a, b } => swap_gate(&layout, a.as_str(), b.as_str())?,
            GateDecl::Csum { ctrl, tgt } => csum_gate(&layout, ctrl.as_str(), tgt.as_str())?,
            GateDecl::Select {
                ctrl,
                tgt,
                file,
                adjoint,
            } => {
                let family = load_unitaries(base_dir, file)?;
                select_gate(&layout, ctrl.as_str(), tgt.as_str(), &family, *adjoint)?
            }
            GateDecl::Unitary { reg, file } => {
                let family = load_unitaries(base_dir, file)?;
                if family.len() != 1 {
                    return Err(Error::DimensionMismatch {
                        expected: 1,
                        got: family.len(),
                    });
                }
                embed_unitary(&layout, reg.as_str(), &family[0])?
            }
        };
        gates.push(gate);
    }
    let interaction = Unitary::sequence(&gates, layout.total_dim())?;

    // inputs as a tensor product in group order, then reordered to layout order
    let mut order: Vec<usize> = Vec::new();
    let mut joint: Option<DensityMatrix> = None;
    for inp in &spec.inputs {
        let idx = inp
            .node
            .registers
            .iter()
            .map(|r| layout.index_of(r))
            .collect::<Result<Vec<_>>>()?;
        let dims = Dims::new(idx.iter().map(|&i| layout.dim_of(i)).collect())?;
        let state = lower_state(&inp.node.state, dims)?;
        joint = Some(match joint {
            None => state,
            Some(j) => j.kron(&state),
        });
        order.extend(idx);
    }
    let cr_indices = layout.cr_indices();
    let joint = joint.ok_or_else(|| Error::Layout("circuit has no inputs".into()))?;
    let perm = cr_indices
        .iter()
        .map(|r| {
            order.iter().position(|o| o == r).ok_or_else(|| {
                Error::Layout(format!(
                    "register `{}` has no input",
                    layout.registers()[*r].name
                ))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if order.len() != cr_indices.len() {
        return Err(Error::Layout(
            "some register has more than one input".into(),
        ));
    }
    let cr_input = joint.permute(&perm)?;

    Ok(LoweredCircuit {
        problem: DeutschProblem::new(layout, interaction, cr_input)?,
        permutation,
    })
}

/// Parses and lowers a circuit file.
pub fn load_circuit(path: &Path) -> Result<LoweredCircuit> {
    let text = read_file(path)?;
    let spec = parse(&text).map_err(|e| errors_to_error(&path.display().to_string(), &e))?;
    lower(&spec, path.parent().unwrap_or(Path::new(".")))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALLEST: &str = "system A 2\nsystem CTC 2\ninput pure A : 1 0\ngate swap A CTC\n";

    #[test]
    fn complex_literals() {
        let c = |re, im| Some(Complex64::new(re, im));
        assert_eq!(parse_complex("0.5"), c(0.5, 0.0));
        assert_eq!(parse_complex("-1+2i"), c(-1.0, 2.0));
        assert_eq!(parse_complex("1e-3-0.5i"), c(1e-3, -0.5));
        assert_eq!(parse_complex("1.5e+2+2E-1i"), c(150.0, 0.2));
        for bad in [
            "", "i", "1i", "1+i", "1++2i", "1+-2i", "inf", "NaN", "1e999", "0x1", "1 ", "1+2",
            "+-1",
        ] {
            assert_eq!(parse_complex(bad), None, "{bad:?}");
        }
        for z in [
            Complex64::new(0.25, 0.0),
            Complex64::new(-0.0, -0.0),
            Complex64::new(1e-300, 3e20),
        ] {
            assert_eq!(parse_complex(&format_complex(z)), Some(z));
        }
    }

    #[test]
    fn smallest_circuit() {
        let spec = parse(SMALLEST).unwrap();
        assert_eq!(
            (spec.systems.len(), spec.inputs.len(), spec.gates.len()),
            (2, 1, 1)
        );
        assert_eq!(parse(&serialize(&spec)).unwrap(), spec);
        let lowered = lower(&spec, Path::new(".")).unwrap();
        let swap = swap_gate(lowered.problem.layout(), "A", "CTC").unwrap();
        assert_eq!(lowered.problem.interaction(), &swap);
    }

    #[test]
    fn joint_input_over_two_registers() {
        let text = "system A 2\nsystem R 2\nsystem CTC 2\ninput pure A R : 0 0.7071067812 0.7071067812 0\ngate swap A CTC\n";
        let spec = parse(text).unwrap();
        assert_eq!(spec.inputs[0].node.registers, vec!["A", "R"]);
        let lowered = lower(&spec, Path::new(".")).unwrap();
        let rho = lowered.problem.cr_input();
        assert!((rho.matrix()[(1, 2)].re - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ctc_input_rejected() {
        let text = "system A 2\nsystem CTC 2\ninput pure A : 1 0\ninput pure CTC : 1 0\n";
        let errs = parse(text).unwrap_err();
        let e = errs
            .iter()
            .find(|e| e.message.contains("CTC register takes no input"))
            .unwrap();
        assert_eq!(
            e.message,
            "CTC register takes no input; its state is solved"
        );
        assert_eq!((e.line, e.column), (4, 12));
    }

    #[test]
    fn mixed_rendering() {
        let text = "system A 2\nsystem CTC 2\ninput mixed A : 0.25 0 ; 0 0.75\n";
        let spec = parse(text).unwrap();
        assert!(serialize(&spec).contains("\ninput mixed A : 0.25 0 ; 0 0.75\n"));
    }

    #[test]
    fn errors_are_collected_with_positions() {
        let text =
            "system A 2\nsystem CTC 2\nbogus\ninput pure A : 1 0x\ngate swap A Q\nsystem A 3\n";
        let errs = parse(text).unwrap_err();
        assert!(errs.len() >= 4, "{errs:?}");
        let lit = errs
            .iter()
            .find(|e| e.message.contains("malformed"))
            .unwrap();
        assert_eq!((lit.line, lit.column), (4, 18));
        assert!(errs
            .iter()
            .any(|e| e.line == 3 && e.message.contains("unknown directive")));
        assert!(errs
            .iter()
            .any(|e| e.line == 5 && e.message.contains("unknown register `Q`")));
        assert!(errs
            .iter()
            .any(|e| e.line == 6 && e.message.contains("duplicate")));
    }

    #[test]
    fn broken_lines_do_not_cascade() {
        let errs = parse("system A 2\nsystem CTC 2\ninput pure A : 1 0x\n").unwrap_err();
        assert_eq!(errs.len(), 1, "{errs:?}");
        let errs =
            parse("system A two\nsystem CTC 2\ninput pure A : 1 0\ngate swap A CTC\n").unwrap_err();
        assert_eq!(errs.len(), 1, "{errs:?}");
    }

    #[test]
    fn normalization_policy() {
        let near = "system A 2\nsystem CTC 2\ninput pure A : 0.7071067812 0.7071067812\n";
        assert!(parse(near).is_ok());
        let far = "system A 2\nsystem CTC 2\ninput pure A : 0.7 0.7\n";
        assert!(parse(far).is_err());
    }

    #[test]
    fn ctc_first_matches_ctc_last() {
        let last = "system A 2\nsystem B 3\nsystem CTC 2\ninput pure A : 0 1\ninput pure B : 1 0 0\ngate swap A CTC\ngate csum A CTC\n";
        let first = "system CTC 2\nsystem A 2\nsystem B 3\ninput pure B : 1 0 0\ninput pure A : 0 1\ngate swap A CTC\ngate csum A CTC\n";
        let a = lower(&parse(last).unwrap(), Path::new(".")).unwrap();
        let b = lower(&parse(first).unwrap(), Path::new(".")).unwrap();
        assert_eq!(b.permutation, vec![1, 2, 0]);
        assert!(
            a.problem
                .interaction()
                .matrix()
                .max_abs_diff(b.problem.interaction().matrix())
                == 0.0
        );
        assert!(
            a.problem
                .cr_input()
                .matrix()
                .max_abs_diff(b.problem.cr_input().matrix())
                == 0.0
        );
    }

    #[test]
    fn matrix_files() {
        let text = "matrix 2 2\n0 1 ; 1 0\n# comment\n1 0\n0 -1\n";
        let ms = parse_matrix_file(text).unwrap();
        assert_eq!(ms.len(), 2);
        assert_eq!(ms[1][(1, 1)], Complex64::new(-1.0, 0.0));
        assert_eq!(parse_matrix_file(&serialize_matrices(&ms)).unwrap(), ms);
        assert!(parse_matrix_file("matrix 2 1\n1 0 0\n").is_err());
        assert!(parse_matrix_file("").is_err());
        assert!(parse_matrix_file("matrix 2 1\n1 0 0 1x\n").is_err());
        let states = parse_state_file("states 2 2\n1 0\n0.7071067812 0.7071067812\n").unwrap();
        assert_eq!(states.len(), 2);
    }

    #[test]
    fn invalid_utf8_is_an_error() {
        let errs = parse_bytes(b"system A 2\nsys\xfftem").unwrap_err();
        assert_eq!((errs[0].line, errs[0].column), (2, 4));
    }
}
