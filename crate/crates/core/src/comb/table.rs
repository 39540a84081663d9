// SPDX-License-Identifier: Apache-2.0

//! JSON truth tables as produced by the model.
//!
//! Schema: `table` (rows of input cells followed by output cells), `inputs`,
//! `outputs`, and optional `header_inputs` / `header_outputs` display orders.
//! Output cells may be don't-cares (`"x"`, `"X"` or `null`).

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cell {
    Zero,
    One,
    DontCare,
}

impl Cell {
    pub fn as_bool(self) -> Option<bool> {
        match self {
            Cell::Zero => Some(false),
            Cell::One => Some(true),
            Cell::DontCare => None,
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Cell::Zero => "0",
            Cell::One => "1",
            Cell::DontCare => "x",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TableError {
    #[error("no JSON object found")]
    MissingJson,
    #[error("invalid JSON: {0}")]
    InvalidJson(String),
    #[error("missing key {0:?}")]
    MissingKey(&'static str),
    #[error("key {key:?}: {message}")]
    WrongType { key: &'static str, message: String },
    #[error("row {row}: expected {expected} cells, found {found}")]
    RowWidth { row: usize, expected: usize, found: usize },
    #[error("row {row}, column {column}: invalid cell {value}")]
    BadCell { row: usize, column: usize, value: String },
    #[error("row {row}, column {column}: don't-care in an input column")]
    DontCareInput { row: usize, column: usize },
    #[error("row {row}: input pattern repeats row {first}")]
    DuplicatePattern { row: usize, first: usize },
    #[error("duplicate signal name {0:?}")]
    DuplicateName(String),
    #[error("{0} is not a permutation of the corresponding column list")]
    HeaderMismatch(&'static str),
    #[error("table declares no inputs")]
    NoInputs,
    #[error("table has {0} inputs; at most 63 are supported")]
    TooManyInputs(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruthTable {
    inputs: Vec<String>,
    outputs: Vec<String>,
    rows: Vec<Vec<Cell>>,
    header_inputs: Vec<String>,
    header_outputs: Vec<String>,
}

/// Canonical signal name: whitespace removed, so `a [1]` and `a[1]` agree.
pub fn normalize_name(name: &str) -> String {
    name.chars().filter(|c| !c.is_whitespace()).collect()
}

impl TruthTable {
    pub fn new(inputs: Vec<String>, outputs: Vec<String>, rows: Vec<Vec<Cell>>) -> Result<Self, TableError> {
        let header_inputs = inputs.clone();
        let header_outputs = outputs.clone();
        Self::with_headers(inputs, outputs, rows, header_inputs, header_outputs)
    }

    pub fn with_headers(
        inputs: Vec<String>,
        outputs: Vec<String>,
        rows: Vec<Vec<Cell>>,
        header_inputs: Vec<String>,
        header_outputs: Vec<String>,
    ) -> Result<Self, TableError> {
        let norm = |v: Vec<String>| v.iter().map(|s| normalize_name(s)).collect::<Vec<_>>();
        let t = Self {
            inputs: norm(inputs),
            outputs: norm(outputs),
            rows,
            header_inputs: norm(header_inputs),
            header_outputs: norm(header_outputs),
        };
        t.validate()?;
        Ok(t)
    }

    fn validate(&self) -> Result<(), TableError> {
        if self.inputs.is_empty() {
            return Err(TableError::NoInputs);
        }
        if self.inputs.len() > 63 {
            return Err(TableError::TooManyInputs(self.inputs.len()));
        }
        let mut seen = HashSet::new();
        for name in self.inputs.iter().chain(&self.outputs) {
            if !seen.insert(name) {
                return Err(TableError::DuplicateName(name.clone()));
            }
        }
        let is_perm = |a: &[String], b: &[String]| {
            let mut a = a.to_vec();
            let mut b = b.to_vec();
            a.sort();
            b.sort();
            a == b
        };
        if !is_perm(&self.header_inputs, &self.inputs) {
            return Err(TableError::HeaderMismatch("header_inputs"));
        }
        if !is_perm(&self.header_outputs, &self.outputs) {
            return Err(TableError::HeaderMismatch("header_outputs"));
        }
        let width = self.width();
        let mut patterns: HashMap<u64, usize> = HashMap::new();
        for (r, row) in self.rows.iter().enumerate() {
            if row.len() != width {
                return Err(TableError::RowWidth {
                    row: r,
                    expected: width,
                    found: row.len(),
                });
            }
            if let Some(c) = row[..self.inputs.len()].iter().position(|c| *c == Cell::DontCare) {
                return Err(TableError::DontCareInput { row: r, column: c });
            }
            let p = self.pattern(r);
            if let Some(&first) = patterns.get(&p) {
                return Err(TableError::DuplicatePattern { row: r, first });
            }
            patterns.insert(p, r);
        }
        Ok(())
    }

    pub fn inputs(&self) -> &[String] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[String] {
        &self.outputs
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn header_inputs(&self) -> &[String] {
        &self.header_inputs
    }

    pub fn header_outputs(&self) -> &[String] {
        &self.header_outputs
    }

    pub fn width(&self) -> usize {
        self.inputs.len() + self.outputs.len()
    }

    /// Input cells of row `r` packed so that bit `i` holds input `i`.
    pub fn pattern(&self, r: usize) -> u64 {
        self.rows[r][..self.inputs.len()]
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, c)| if *c == Cell::One { acc | (1 << i) } else { acc })
    }

    pub fn output_index(&self, name: &str) -> Option<usize> {
        let name = normalize_name(name);
        self.outputs.iter().position(|o| *o == name)
    }

    /// Output cell for `output` at row `r`.
    pub fn output_cell(&self, r: usize, output: usize) -> Cell {
        self.rows[r][self.inputs.len() + output]
    }

    /// Value of `output` for an input pattern; `None` for don't-cares and missing rows.
    pub fn lookup(&self, pattern: u64, output: usize) -> Option<bool> {
        (0..self.rows.len())
            .find(|&r| self.pattern(r) == pattern)
            .and_then(|r| self.output_cell(r, output).as_bool())
    }

    pub fn to_json(&self) -> Value {
        let cell = |c: &Cell| match c {
            Cell::Zero => Value::from(0),
            Cell::One => Value::from(1),
            Cell::DontCare => Value::from("x"),
        };
        serde_json::json!({
            "table": self.rows.iter().map(|r| r.iter().map(cell).collect::<Vec<_>>()).collect::<Vec<_>>(),
            "inputs": self.inputs,
            "outputs": self.outputs,
            "header_inputs": self.header_inputs,
            "header_outputs": self.header_outputs,
        })
    }

    pub fn from_json_value(v: &Value) -> Result<Self, TableError> {
        let obj = v.as_object().ok_or(TableError::WrongType {
            key: "table",
            message: "top level is not an object".into(),
        })?;
        let names = |key: &'static str, required: bool| -> Result<Option<Vec<String>>, TableError> {
            match obj.get(key) {
                None | Some(Value::Null) if !required => Ok(None),
                None => Err(TableError::MissingKey(key)),
                Some(Value::Array(items)) => items
                    .iter()
                    .map(|i| match i {
                        Value::String(s) => Ok(s.clone()),
                        other => Err(TableError::WrongType {
                            key,
                            message: format!("expected a string, found {other}"),
                        }),
                    })
                    .collect::<Result<Vec<_>, _>>()
                    .map(Some),
                Some(other) => Err(TableError::WrongType {
                    key,
                    message: format!("expected an array, found {other}"),
                }),
            }
        };
        let inputs = names("inputs", true)?.unwrap_or_default();
        let outputs = names("outputs", true)?.unwrap_or_default();
        let header_inputs = names("header_inputs", false)?.unwrap_or_else(|| inputs.clone());
        let header_outputs = names("header_outputs", false)?.unwrap_or_else(|| outputs.clone());
        let raw_rows = match obj.get("table") {
            None => return Err(TableError::MissingKey("table")),
            Some(Value::Array(rows)) => rows,
            Some(other) => {
                return Err(TableError::WrongType {
                    key: "table",
                    message: format!("expected an array, found {other}"),
                })
            }
        };
        let mut rows = Vec::with_capacity(raw_rows.len());
        for (r, raw) in raw_rows.iter().enumerate() {
            let cells = raw.as_array().ok_or_else(|| TableError::WrongType {
                key: "table",
                message: format!("row {r} is not an array"),
            })?;
            let row = cells
                .iter()
                .enumerate()
                .map(|(c, v)| {
                    parse_cell(v).ok_or_else(|| TableError::BadCell {
                        row: r,
                        column: c,
                        value: v.to_string(),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(row);
        }
        Self::with_headers(inputs, outputs, rows, header_inputs, header_outputs)
    }
}

fn parse_cell(v: &Value) -> Option<Cell> {
    match v {
        Value::Null => Some(Cell::DontCare),
        Value::Bool(b) => Some(if *b { Cell::One } else { Cell::Zero }),
        Value::Number(n) => match n.as_f64() {
            Some(x) if x == 0.0 => Some(Cell::Zero),
            Some(x) if x == 1.0 => Some(Cell::One),
            _ => None,
        },
        Value::String(s) => match s.trim() {
            "0" => Some(Cell::Zero),
            "1" => Some(Cell::One),
            "x" | "X" | "-" => Some(Cell::DontCare),
            _ => None,
        },
        _ => None,
    }
}

/// Slice of the first balanced `{ ... }` object in `text`.
pub fn first_json_object(text: &str) -> Option<&str> {
    let start = text.find('{')?;
    let bytes = text.as_bytes();
    let mut depth = 0i32;
    let mut in_str = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate().skip(start) {
        if in_str {
            match b {
                _ if escaped => escaped = false,
                b'\\' => escaped = true,
                b'"' => in_str = false,
                _ => {}
            }
            continue;
        }
        match b {
            b'"' => in_str = true,
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(&text[start..=i]);
                }
            }
            _ => {}
        }
    }
    None
}

/// Repair common slips in model-written JSON: missing commas between
/// newline-separated members, trailing commas, and bare `x` don't-cares.
pub fn repair_json(src: &str) -> String {
    let chars: Vec<char> = src.chars().collect();
    let mut out = String::with_capacity(src.len() + 16);
    let mut in_str = false;
    let mut escaped = false;
    // last significant character emitted outside a string, and whether a
    // newline was seen since
    let mut prev: Option<char> = None;
    let mut newline = false;
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if in_str {
            out.push(c);
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_str = false;
                prev = Some('"');
                newline = false;
            }
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            newline |= c == '\n';
            out.push(c);
            i += 1;
            continue;
        }
        let value_start = c == '"' || c == '{' || c == '[' || c == '-' || c.is_ascii_alphanumeric();
        let value_end = matches!(prev, Some(p) if p == '"' || p == '}' || p == ']' || p.is_ascii_alphanumeric());
        if value_start && value_end && newline {
            // insert before the whitespace run that precedes this token
            let ws_len = out.chars().rev().take_while(|ch| ch.is_whitespace()).count();
            let split = out.len() - out.chars().rev().take(ws_len).map(char::len_utf8).sum::<usize>();
            out.insert(split, ',');
        }
        if (c == ']' || c == '}') && prev == Some(',') {
            let ws_len = out.chars().rev().take_while(|ch| ch.is_whitespace()).count();
            let split = out.len() - out.chars().rev().take(ws_len).map(char::len_utf8).sum::<usize>();
            out.remove(split - 1);
        }
        if c.is_ascii_alphanumeric() {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '.' || chars[i] == '_') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            if word == "x" || word == "X" {
                out.push_str("\"x\"");
            } else {
                out.push_str(&word);
            }
            prev = word.chars().last();
            newline = false;
            continue;
        }
        if c == '"' {
            in_str = true;
        }
        out.push(c);
        prev = Some(c);
        newline = false;
        i += 1;
    }
    out
}

/// Parse the first JSON object of a reply into a validated truth table.
pub fn parse_truth_table(text: &str) -> Result<TruthTable, TableError> {
    let obj = first_json_object(text).ok_or(TableError::MissingJson)?;
    let value: Value = match serde_json::from_str(obj) {
        Ok(v) => v,
        Err(first) => serde_json::from_str(&repair_json(obj)).map_err(|_| TableError::InvalidJson(first.to_string()))?,
    };
    TruthTable::from_json_value(&value)
}
