// SPDX-License-Identifier: Apache-2.0

//! Lexical helpers for Verilog text produced by a language model.
//!
//! Nothing in here elaborates Verilog. Everything works on a token stream with
//! comments and string literals blanked out, so slightly broken code still
//! yields useful structure.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Ident,
    Number,
    Punct,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub start: usize,
    pub end: usize,
}

impl Token {
    pub fn is(&self, text: &str) -> bool {
        self.text == text
    }
}

/// Replace comments and string literals with spaces. Byte offsets and line
/// breaks are preserved so token positions index the original text.
pub fn strip_comments_and_strings(src: &str) -> String {
    let bytes = src.as_bytes();
    let mut out = bytes.to_vec();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'/' if bytes.get(i + 1) == Some(&b'/') => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    out[i] = b' ';
                    i += 1;
                }
            }
            b'/' if bytes.get(i + 1) == Some(&b'*') => {
                let mut j = i;
                while j < bytes.len() {
                    if bytes[j] == b'*' && bytes.get(j + 1) == Some(&b'/') {
                        out[j] = b' ';
                        out[j + 1] = b' ';
                        j += 2;
                        break;
                    }
                    if bytes[j] != b'\n' {
                        out[j] = b' ';
                    }
                    j += 1;
                }
                i = j;
            }
            b'"' => {
                out[i] = b' ';
                i += 1;
                while i < bytes.len() && bytes[i] != b'"' && bytes[i] != b'\n' {
                    if bytes[i] == b'\\' && i + 1 < bytes.len() {
                        out[i] = b' ';
                        i += 1;
                    }
                    out[i] = b' ';
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'"' {
                    out[i] = b' ';
                    i += 1;
                }
            }
            _ => i += 1,
        }
    }
    // Only ASCII bytes were overwritten, and every overwritten multi-byte
    // sequence was overwritten completely, so this stays valid UTF-8.
    String::from_utf8(out).unwrap_or_else(|e| String::from_utf8_lossy(e.as_bytes()).into_owned())
}

const MULTI_PUNCT: &[&str] = &[
    "===", "!==", "<<<", ">>>", "<=", ">=", "==", "!=", "&&", "||", "<<", ">>", "~&", "~|", "~^",
    "^~", "**", "->", "+:", "-:",
];

/// Tokenize text that has already had comments and strings removed.
pub fn tokenize(src: &str) -> Vec<Token> {
    let bytes = src.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() || !c.is_ascii() {
            i += 1;
            continue;
        }
        let start = i;
        let kind = if c.is_ascii_alphabetic() || c == b'_' || c == b'$' || c == b'`' {
            i += 1;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'$') {
                i += 1;
            }
            TokenKind::Ident
        } else if c.is_ascii_digit() || (c == b'\'' && i + 1 < bytes.len() && bytes[i + 1].is_ascii_alphabetic()) {
            // 8'hFF, 4'b10x1, 12, 'b0
            i += 1;
            while i < bytes.len() {
                let d = bytes[i];
                if d.is_ascii_alphanumeric() || d == b'_' || d == b'?' {
                    i += 1;
                } else if d == b'\'' && i + 1 < bytes.len() && bytes[i + 1].is_ascii_alphabetic() {
                    i += 2;
                } else {
                    break;
                }
            }
            TokenKind::Number
        } else {
            let rest = &src[i..];
            let len = MULTI_PUNCT
                .iter()
                .find(|p| rest.starts_with(**p))
                .map(|p| p.len())
                .unwrap_or(1);
            i += len;
            TokenKind::Punct
        };
        tokens.push(Token {
            kind,
            text: src[start..i].to_string(),
            start,
            end: i,
        });
    }
    tokens
}

pub fn lex(src: &str) -> Vec<Token> {
    tokenize(&strip_comments_and_strings(src))
}

pub fn is_always_keyword(text: &str) -> bool {
    matches!(text, "always" | "always_ff" | "always_comb" | "always_latch")
}

const KEYWORDS: &[&str] = &[
    "always", "always_ff", "always_comb", "always_latch", "and", "assign", "automatic", "begin",
    "bit", "buf", "case", "casex", "casez", "default", "defparam", "disable", "else", "end",
    "endcase", "endfunction", "endgenerate", "endmodule", "endtask", "for", "forever", "function",
    "generate", "genvar", "if", "initial", "inout", "input", "integer", "localparam", "logic",
    "macromodule", "module", "nand", "negedge", "nor", "not", "or", "output", "parameter",
    "posedge", "real", "reg", "repeat", "signed", "task", "time", "unsigned", "while", "wire",
    "xnor", "xor", "fork", "join",
];

pub fn is_keyword(text: &str) -> bool {
    KEYWORDS.contains(&text)
}

fn is_identifier(tok: &Token) -> bool {
    tok.kind == TokenKind::Ident && !is_keyword(&tok.text) && !tok.text.starts_with('$') && !tok.text.starts_with('`')
}

/// Index of the token closing the bracket opened at `open`, or the last token.
fn matching_close(tokens: &[Token], open: usize) -> usize {
    let (o, c) = match tokens[open].text.as_str() {
        "(" => ("(", ")"),
        "[" => ("[", "]"),
        "{" => ("{", "}"),
        _ => return open,
    };
    let mut depth = 0i32;
    for (j, t) in tokens.iter().enumerate().skip(open) {
        if t.is(o) {
            depth += 1;
        } else if t.is(c) {
            depth -= 1;
            if depth == 0 {
                return j;
            }
        }
    }
    tokens.len() - 1
}

/// Index of the last token of the statement starting at `i`.
fn statement_end(tokens: &[Token], i: usize) -> usize {
    let last = tokens.len().saturating_sub(1);
    if i > last {
        return last;
    }
    let t = tokens[i].text.as_str();
    match t {
        "begin" | "fork" => {
            let close = if t == "begin" { "end" } else { "join" };
            let mut depth = 0;
            for (j, tok) in tokens.iter().enumerate().skip(i) {
                if tok.is(t) {
                    depth += 1;
                } else if tok.is(close) {
                    depth -= 1;
                    if depth == 0 {
                        return j;
                    }
                }
            }
            last
        }
        "case" | "casex" | "casez" => {
            let mut depth = 0;
            for (j, tok) in tokens.iter().enumerate().skip(i) {
                if matches!(tok.text.as_str(), "case" | "casex" | "casez") {
                    depth += 1;
                } else if tok.is("endcase") {
                    depth -= 1;
                    if depth == 0 {
                        return j;
                    }
                }
            }
            last
        }
        "if" => {
            let mut j = i + 1;
            if j <= last && tokens[j].is("(") {
                j = matching_close(tokens, j) + 1;
            }
            let mut end = statement_end(tokens, j);
            if end < last && tokens[end + 1].is("else") {
                end = statement_end(tokens, end + 2);
            }
            end
        }
        "for" | "while" | "repeat" => {
            let mut j = i + 1;
            if j <= last && tokens[j].is("(") {
                j = matching_close(tokens, j) + 1;
            }
            statement_end(tokens, j)
        }
        "forever" => statement_end(tokens, i + 1),
        "@" => statement_end(tokens, skip_event_control(tokens, i)),
        "#" => statement_end(tokens, (i + 2).min(last + 1)),
        _ => {
            let mut depth = 0i32;
            for (j, tok) in tokens.iter().enumerate().skip(i) {
                match tok.text.as_str() {
                    "(" | "[" | "{" => depth += 1,
                    ")" | "]" | "}" => depth -= 1,
                    ";" if depth <= 0 => return j,
                    _ => {}
                }
            }
            last
        }
    }
}

/// `i` points at `@`; returns the index just past the event control.
fn skip_event_control(tokens: &[Token], i: usize) -> usize {
    let j = i + 1;
    match tokens.get(j) {
        Some(t) if t.is("(") => matching_close(tokens, j) + 1,
        Some(_) => j + 1,
        None => j,
    }
}

/// Byte range of the always construct starting at token `i`.
fn always_extent(tokens: &[Token], i: usize) -> usize {
    let mut j = i + 1;
    if j < tokens.len() && tokens[j].is("@") {
        j = skip_event_control(tokens, j);
    }
    statement_end(tokens, j)
}

/// Contents of fenced code regions in order. Without fences, falls back to the
/// maximal `module ... endmodule` and `always ...` regions found in the text.
pub fn extract_code_blocks(text: &str) -> Vec<String> {
    let fenced = fenced_regions(text);
    if !fenced.is_empty() {
        return fenced;
    }
    bare_regions(text)
}

fn fenced_regions(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current: Option<Vec<&str>> = None;
    for line in text.lines() {
        let is_fence = line.trim_start().starts_with("```");
        match current.take() {
            None if is_fence => current = Some(Vec::new()),
            None => {}
            Some(lines) if is_fence => out.push(lines.join("\n")),
            Some(mut lines) => {
                lines.push(line);
                current = Some(lines);
            }
        }
    }
    if let Some(lines) = current {
        out.push(lines.join("\n"));
    }
    out
}

fn bare_regions(text: &str) -> Vec<String> {
    let stripped = strip_comments_and_strings(text);
    let tokens = tokenize(&stripped);
    let mut out = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let t = &tokens[i];
        if t.is("module") || t.is("macromodule") {
            let end = tokens[i..]
                .iter()
                .position(|x| x.is("endmodule"))
                .map(|p| i + p)
                .unwrap_or(tokens.len() - 1);
            out.push(text[t.start..tokens[end].end].to_string());
            i = end + 1;
        } else if is_always_keyword(&t.text) {
            let end = always_extent(&tokens, i);
            out.push(text[t.start..tokens[end].end].to_string());
            i = end + 1;
        } else {
            i += 1;
        }
    }
    out
}

/// Source text of each always construct, in order of appearance.
pub fn always_constructs(src: &str) -> Vec<String> {
    let stripped = strip_comments_and_strings(src);
    let tokens = tokenize(&stripped);
    let mut out = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        if is_always_keyword(&tokens[i].text) {
            let end = always_extent(&tokens, i);
            out.push(src[tokens[i].start..tokens[end].end].to_string());
            i = end + 1;
        } else {
            i += 1;
        }
    }
    out
}

pub fn count_always(src: &str) -> usize {
    lex(src).iter().filter(|t| is_always_keyword(&t.text)).count()
}

/// Whitespace-insensitive containment, used to check that a merged module
/// still carries every generated region.
pub fn contains_modulo_whitespace(haystack: &str, needle: &str) -> bool {
    let squash = |s: &str| s.chars().filter(|c| !c.is_whitespace()).collect::<String>();
    let needle = squash(needle);
    !needle.is_empty() && squash(haystack).contains(&needle)
}

/// A module with balanced `module`/`endmodule` keywords and at least one of each.
pub fn has_module_structure(src: &str) -> bool {
    let toks = lex(src);
    let opens = toks.iter().filter(|t| t.is("module") || t.is("macromodule")).count();
    let closes = toks.iter().filter(|t| t.is("endmodule")).count();
    opens >= 1 && opens == closes
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Input,
    Output,
    Inout,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Port {
    pub name: String,
    pub direction: Direction,
    /// `(msb, lsb)` when the range is a pair of integer literals.
    pub range: Option<(i64, i64)>,
    /// Range text as written when it is not a pair of literals.
    pub range_text: Option<String>,
    pub is_reg: bool,
    pub signed: bool,
}

impl Port {
    pub fn width(&self) -> Option<u32> {
        match (self.range, &self.range_text) {
            (Some((m, l)), _) => Some((m - l).unsigned_abs() as u32 + 1),
            (None, None) => Some(1),
            (None, Some(_)) => None,
        }
    }

    /// Per-bit names, MSB first: `a` for scalars, `a[3]`..`a[0]` for vectors.
    pub fn bit_names(&self) -> Vec<String> {
        match self.range {
            None => vec![self.name.clone()],
            Some((m, l)) => {
                let bits: Vec<i64> = if m >= l { (l..=m).rev().collect() } else { (m..=l).collect() };
                bits.into_iter().map(|b| format!("{}[{}]", self.name, b)).collect()
            }
        }
    }

    fn decl_text(&self) -> String {
        let mut s = String::from(match self.direction {
            Direction::Input => "input",
            Direction::Output => "output",
            Direction::Inout => "inout",
        });
        if self.is_reg {
            s.push_str(" reg");
        }
        if self.signed {
            s.push_str(" signed");
        }
        if let Some((m, l)) = self.range {
            let _ = write!(s, " [{m}:{l}]");
        } else if let Some(r) = &self.range_text {
            let _ = write!(s, " [{r}]");
        }
        let _ = write!(s, " {}", self.name);
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModuleHeader {
    pub name: String,
    pub ports: Vec<Port>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HeaderError {
    #[error("no module declaration found in header")]
    NoModule,
    #[error("malformed port list: {0}")]
    Malformed(String),
}

impl ModuleHeader {
    pub fn inputs(&self) -> impl Iterator<Item = &Port> {
        self.ports.iter().filter(|p| p.direction == Direction::Input)
    }

    pub fn outputs(&self) -> impl Iterator<Item = &Port> {
        self.ports.iter().filter(|p| p.direction == Direction::Output)
    }

    pub fn port(&self, name: &str) -> Option<&Port> {
        self.ports.iter().find(|p| p.name == name)
    }

    pub fn input_bits(&self) -> Vec<String> {
        self.inputs().flat_map(|p| p.bit_names()).collect()
    }

    pub fn output_bits(&self) -> Vec<String> {
        self.outputs().flat_map(|p| p.bit_names()).collect()
    }

    /// ANSI-style declaration ending in `);`.
    pub fn render(&self) -> String {
        let mut s = format!("module {} (\n", self.name);
        let decls: Vec<String> = self.ports.iter().map(|p| format!("\t{}", p.decl_text())).collect();
        s.push_str(&decls.join(",\n"));
        s.push_str("\n);");
        s
    }
}

fn literal_int(tok: &Token) -> Option<i64> {
    if tok.kind == TokenKind::Number && tok.text.chars().all(|c| c.is_ascii_digit() || c == '_') {
        tok.text.replace('_', "").parse().ok()
    } else {
        None
    }
}

/// Parse `[a:b]` starting at token `i` (which must be `[`).
fn parse_range(tokens: &[Token], i: usize, src: &str) -> (Option<(i64, i64)>, Option<String>, usize) {
    let close = matching_close(tokens, i);
    let inner = &tokens[i + 1..close];
    if inner.len() == 3 && inner[1].is(":") {
        if let (Some(m), Some(l)) = (literal_int(&inner[0]), literal_int(&inner[2])) {
            return (Some((m, l)), None, close + 1);
        }
    }
    let text = if close > i + 1 {
        src[tokens[i + 1].start..tokens[close - 1].end].to_string()
    } else {
        String::new()
    };
    (None, Some(text), close + 1)
}

/// Parse an ANSI (or simple non-ANSI) module header.
pub fn parse_header(text: &str) -> Result<ModuleHeader, HeaderError> {
    let stripped = strip_comments_and_strings(text);
    let tokens = tokenize(&stripped);
    let m = tokens
        .iter()
        .position(|t| t.is("module") || t.is("macromodule"))
        .ok_or(HeaderError::NoModule)?;
    let name = tokens
        .get(m + 1)
        .filter(|t| t.kind == TokenKind::Ident)
        .ok_or_else(|| HeaderError::Malformed("missing module name".into()))?
        .text
        .clone();
    let mut i = m + 2;
    if tokens.get(i).is_some_and(|t| t.is("#")) && tokens.get(i + 1).is_some_and(|t| t.is("(")) {
        i = matching_close(&tokens, i + 1) + 1;
    }
    let mut ports = Vec::new();
    let mut bare_names = Vec::new();
    if tokens.get(i).is_some_and(|t| t.is("(")) {
        let close = matching_close(&tokens, i);
        parse_port_list(&tokens[i + 1..close], &stripped, &mut ports, &mut bare_names)?;
        i = close + 1;
    }
    if !bare_names.is_empty() {
        // Non-ANSI: directions come from declarations after the port list.
        let mut decls = Vec::new();
        let mut j = i;
        while j < tokens.len() && !tokens[j].is("endmodule") {
            if matches!(tokens[j].text.as_str(), "input" | "output" | "inout") {
                let end = tokens[j..].iter().position(|t| t.is(";")).map(|p| j + p).unwrap_or(tokens.len());
                let mut scratch = Vec::new();
                parse_port_list(&tokens[j..end], &stripped, &mut decls, &mut scratch)?;
                j = end;
            }
            j += 1;
        }
        for n in bare_names {
            match decls.iter().find(|p| p.name == n) {
                Some(p) => ports.push(p.clone()),
                None => return Err(HeaderError::Malformed(format!("port {n} has no direction"))),
            }
        }
    }
    Ok(ModuleHeader { name, ports })
}

fn parse_port_list(
    tokens: &[Token],
    src: &str,
    ports: &mut Vec<Port>,
    bare: &mut Vec<String>,
) -> Result<(), HeaderError> {
    let mut direction: Option<Direction> = None;
    let mut is_reg = false;
    let mut signed = false;
    let mut range: Option<(i64, i64)> = None;
    let mut range_text: Option<String> = None;
    let mut i = 0;
    while i < tokens.len() {
        let t = &tokens[i];
        match t.text.as_str() {
            "input" | "output" | "inout" => {
                direction = Some(match t.text.as_str() {
                    "input" => Direction::Input,
                    "output" => Direction::Output,
                    _ => Direction::Inout,
                });
                is_reg = false;
                signed = false;
                range = None;
                range_text = None;
                i += 1;
            }
            "reg" | "logic" => {
                is_reg = true;
                i += 1;
            }
            "wire" | "tri" | "var" => i += 1,
            "signed" => {
                signed = true;
                i += 1;
            }
            "unsigned" => i += 1,
            "[" => {
                let (r, rt, next) = parse_range(tokens, i, src);
                range = r;
                range_text = rt;
                i = next;
            }
            "," | ";" => i += 1,
            _ if t.kind == TokenKind::Ident => {
                match direction {
                    Some(d) => ports.push(Port {
                        name: t.text.clone(),
                        direction: d,
                        range,
                        range_text: range_text.clone(),
                        is_reg,
                        signed,
                    }),
                    None => bare.push(t.text.clone()),
                }
                i += 1;
                // Skip an initializer or unpacked dimension up to the next comma.
                while i < tokens.len() && !tokens[i].is(",") {
                    if tokens[i].is("(") || tokens[i].is("[") || tokens[i].is("{") {
                        i = matching_close(tokens, i);
                    }
                    i += 1;
                }
            }
            other => return Err(HeaderError::Malformed(format!("unexpected token {other:?}"))),
        }
    }
    Ok(())
}

/// Normalize a header so it ends with `);` and carries no `endmodule`.
pub fn header_text(header: &str) -> String {
    let mut h = header.trim().to_string();
    if let Some(pos) = h.rfind("endmodule") {
        h.truncate(pos);
        h = h.trim_end().to_string();
    }
    if !h.ends_with(';') {
        h.push(';');
    }
    h
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum NetKind {
    Reg,
    Wire,
    Integer,
}

#[derive(Debug, Default)]
struct BodyFacts {
    declared: HashSet<String>,
    /// Assignment targets in first-seen order.
    targets: Vec<(String, NetKind)>,
    widths: HashMap<String, u32>,
    /// `lhs = rhs` pairs whose right side has a statically known width expression.
    equalities: Vec<(String, Vec<WidthTerm>)>,
}

#[derive(Debug, Clone)]
enum WidthTerm {
    Fixed(u32),
    Of(String),
}

fn scan_body(src: &str, facts: &mut BodyFacts) {
    let tokens = lex(src);
    let mut depth = 0i32;
    let mut i = 0;
    while i < tokens.len() {
        let t = &tokens[i];
        match t.text.as_str() {
            "(" | "[" | "{" => depth += 1,
            ")" | "]" | "}" => depth -= 1,
            "reg" | "wire" | "logic" | "integer" | "genvar" | "parameter" | "localparam" | "bit" => {
                let end = tokens[i..].iter().position(|x| x.is(";")).map(|p| i + p).unwrap_or(tokens.len());
                let mut j = i + 1;
                let mut range_w = None;
                while j < end {
                    if tokens[j].is("[") {
                        let close = matching_close(&tokens, j);
                        let inner = &tokens[j + 1..close];
                        if inner.len() == 3 && inner[1].is(":") {
                            if let (Some(m), Some(l)) = (literal_int(&inner[0]), literal_int(&inner[2])) {
                                range_w = Some((m - l).unsigned_abs() as u32 + 1);
                            }
                        }
                        j = close + 1;
                        continue;
                    }
                    if is_identifier(&tokens[j]) {
                        facts.declared.insert(tokens[j].text.clone());
                        if let Some(w) = range_w {
                            facts.widths.insert(tokens[j].text.clone(), w);
                        }
                        // skip initializer
                        while j < end && !tokens[j].is(",") {
                            if tokens[j].is("(") || tokens[j].is("{") || tokens[j].is("[") {
                                j = matching_close(&tokens, j);
                            }
                            j += 1;
                        }
                    }
                    j += 1;
                }
                i = end;
            }
            "for" if tokens.get(i + 1).is_some_and(|x| x.is("(")) => {
                if let (Some(v), Some(eq)) = (tokens.get(i + 2), tokens.get(i + 3)) {
                    if is_identifier(v) && eq.is("=") {
                        push_target(facts, &v.text, NetKind::Integer);
                    }
                }
            }
            "=" | "<=" if depth == 0 => {
                if let Some((name, lhs_start)) = assignment_target(&tokens, i) {
                    let continuous = lhs_start > 0 && tokens[lhs_start - 1].is("assign");
                    let kind = if continuous { NetKind::Wire } else { NetKind::Reg };
                    push_target(facts, &name, kind);
                    let stmt_end = tokens[i..].iter().position(|x| x.is(";")).map(|p| i + p).unwrap_or(tokens.len());
                    if let Some(terms) = width_terms(&tokens[i + 1..stmt_end]) {
                        facts.equalities.push((name, terms));
                    }
                }
            }
            _ => {}
        }
        if is_identifier(t) && tokens.get(i + 1).is_some_and(|x| x.is("[")) {
            let close = matching_close(&tokens, i + 1);
            let inner = &tokens[i + 2..close];
            let hi = match inner {
                [a] => literal_int(a),
                [a, c, b] if c.is(":") => literal_int(a).zip(literal_int(b)).map(|(a, b)| a.max(b)),
                _ => None,
            };
            if let Some(hi) = hi {
                let w = facts.widths.entry(t.text.clone()).or_insert(1);
                *w = (*w).max(hi as u32 + 1);
            }
        }
        i += 1;
    }
}

fn push_target(facts: &mut BodyFacts, name: &str, kind: NetKind) {
    if !facts.targets.iter().any(|(n, _)| n == name) {
        facts.targets.push((name.to_string(), kind));
    }
}

/// For an assignment operator at `op`, the assigned identifier and its token index.
fn assignment_target(tokens: &[Token], op: usize) -> Option<(String, usize)> {
    let mut j = op.checked_sub(1)?;
    if tokens[j].is("]") {
        let mut depth = 0;
        loop {
            if tokens[j].is("]") {
                depth += 1;
            } else if tokens[j].is("[") {
                depth -= 1;
                if depth == 0 {
                    break;
                }
            }
            j = j.checked_sub(1)?;
        }
        j = j.checked_sub(1)?;
    }
    let tok = &tokens[j];
    if !is_identifier(tok) {
        return None;
    }
    let boundary = j == 0
        || matches!(
            tokens[j - 1].text.as_str(),
            ";" | "begin" | "end" | ")" | "else" | ":" | "assign" | "endcase" | "*"
        )
        || is_always_keyword(&tokens[j - 1].text);
    boundary.then(|| (tok.text.clone(), j))
}

/// Width contributions of a right-hand side that is an identifier, a slice,
/// a sized literal or a concatenation of those.
fn width_terms(rhs: &[Token]) -> Option<Vec<WidthTerm>> {
    fn operand(toks: &[Token]) -> Option<WidthTerm> {
        match toks {
            [id] if is_identifier(id) => Some(WidthTerm::Of(id.text.clone())),
            [n] if n.kind == TokenKind::Number && n.text.contains('\'') => {
                n.text.split('\'').next()?.parse().ok().map(WidthTerm::Fixed)
            }
            [id, open, _, close] if is_identifier(id) && open.is("[") && close.is("]") => Some(WidthTerm::Fixed(1)),
            [id, open, a, colon, b, close] if is_identifier(id) && open.is("[") && colon.is(":") && close.is("]") => {
                let (a, b) = (literal_int(a)?, literal_int(b)?);
                Some(WidthTerm::Fixed((a - b).unsigned_abs() as u32 + 1))
            }
            _ => None,
        }
    }
    if rhs.first().is_some_and(|t| t.is("{")) && rhs.last().is_some_and(|t| t.is("}")) {
        let inner = &rhs[1..rhs.len() - 1];
        let mut parts = Vec::new();
        for piece in inner.split(|t| t.is(",")) {
            parts.push(operand(piece)?);
        }
        Some(parts)
    } else {
        operand(rhs).map(|t| vec![t])
    }
}

/// Declarations for nets assigned in `bodies` but declared neither in the
/// header nor in the bodies themselves. Widths come from constant bit-selects
/// and from simple assignments; unknown widths default to one bit.
pub fn infer_declarations(header: Option<&ModuleHeader>, bodies: &[&str]) -> Vec<String> {
    let mut facts = BodyFacts::default();
    if let Some(h) = header {
        for p in &h.ports {
            facts.declared.insert(p.name.clone());
        }
    }
    for body in bodies {
        scan_body(body, &mut facts);
    }
    let mut widths: BTreeMap<String, u32> = facts.widths.clone().into_iter().collect();
    if let Some(h) = header {
        for p in &h.ports {
            if let Some(w) = p.width() {
                widths.insert(p.name.clone(), w);
            }
        }
    }
    for _ in 0..8 {
        let mut changed = false;
        for (lhs, terms) in &facts.equalities {
            let rhs_w: Option<u32> = terms
                .iter()
                .map(|t| match t {
                    WidthTerm::Fixed(w) => Some(*w),
                    WidthTerm::Of(n) => widths.get(n).copied(),
                })
                .sum();
            if let Some(w) = rhs_w {
                let cur = widths.get(lhs).copied().unwrap_or(0);
                if w > cur {
                    widths.insert(lhs.clone(), w);
                    changed = true;
                }
            }
            if let [WidthTerm::Of(r)] = terms.as_slice() {
                if let Some(&w) = widths.get(lhs) {
                    let cur = widths.get(r).copied().unwrap_or(0);
                    if w > cur && !header.is_some_and(|h| h.port(r).is_some()) {
                        widths.insert(r.clone(), w);
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    facts
        .targets
        .iter()
        .filter(|(n, _)| !facts.declared.contains(n))
        .map(|(name, kind)| match kind {
            NetKind::Integer => format!("integer {name};"),
            _ => {
                let word = if *kind == NetKind::Wire { "wire" } else { "reg" };
                match widths.get(name).copied().unwrap_or(1) {
                    1 => format!("{word} {name};"),
                    w => format!("{word} [{}:0] {name};", w - 1),
                }
            }
        })
        .collect()
}

/// Outputs assigned procedurally somewhere in `bodies`.
fn procedural_outputs(header: &ModuleHeader, bodies: &[&str]) -> HashSet<String> {
    let mut facts = BodyFacts::default();
    for b in bodies {
        scan_body(b, &mut facts);
    }
    facts
        .targets
        .into_iter()
        .filter(|(n, k)| *k == NetKind::Reg && header.outputs().any(|p| &p.name == n))
        .map(|(n, _)| n)
        .collect()
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AssemblyError {
    #[error("module header is empty")]
    NoHeader,
    #[error("no code regions to assemble")]
    NoBodies,
}

/// Deterministic module assembly: header, inferred internal declarations,
/// the code regions in order (verbatim), `endmodule`.
pub fn assemble_module(header: &str, bodies: &[&str]) -> Result<String, AssemblyError> {
    if header.trim().is_empty() {
        return Err(AssemblyError::NoHeader);
    }
    let bodies: Vec<&str> = bodies.iter().copied().filter(|b| !b.trim().is_empty()).collect();
    if bodies.is_empty() {
        return Err(AssemblyError::NoBodies);
    }
    let parsed = parse_header(header).ok();
    let head = match &parsed {
        Some(h) => {
            let needs_reg = procedural_outputs(h, &bodies);
            if h.ports.iter().any(|p| needs_reg.contains(&p.name) && !p.is_reg) {
                let mut h = h.clone();
                for p in h.ports.iter_mut() {
                    if needs_reg.contains(&p.name) {
                        p.is_reg = true;
                    }
                }
                h.render()
            } else {
                header_text(header)
            }
        }
        None => header_text(header),
    };
    let mut out = head;
    out.push('\n');
    let decls = infer_declarations(parsed.as_ref(), &bodies);
    for d in &decls {
        let _ = writeln!(out, "\t{d}");
    }
    for body in &bodies {
        out.push('\n');
        out.push_str(body.trim_end());
        out.push('\n');
    }
    out.push_str("endmodule\n");
    Ok(out)
}
