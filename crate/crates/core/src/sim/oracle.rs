// SPDX-License-Identifier: Apache-2.0

//! Simulator substitute for truth-table testbenches: evaluates the
//! candidate's continuous assignments directly on each check vector.
//!
//! Only testbenches written by [`crate::comb::exhaustive_testbench`] are
//! understood, and only candidates built from scalar or bit-selected nets,
//! `~ ! & && | || ^` and `1'b0`/`1'b1` constants. Anything else scores as a
//! compile error.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use regex::Regex;

use super::{InfrastructureError, SampleSlot, Simulator};
use crate::comb::emit::VECTOR_MARKER;
use crate::domain::{CodeSample, Task, TestOutcome};
use crate::verilog::{lex, Token, TokenKind};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckVector {
    pub inputs: Vec<bool>,
    pub expected: Vec<bool>,
    pub care: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VectorTestbench {
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub vectors: Vec<CheckVector>,
}

fn check_line() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"check\(\s*\d+'b([01]+)\s*,\s*\d+'b([01]+)\s*,\s*\d+'b([01]+)\s*\)").unwrap())
}

fn bits(s: &str) -> Vec<bool> {
    s.chars().map(|c| c == '1').collect()
}

/// Read back the column names and vectors of a generated testbench.
pub fn parse_vector_testbench(src: &str) -> Option<VectorTestbench> {
    let meta = src.lines().find_map(|l| l.trim().strip_prefix(VECTOR_MARKER))?;
    let mut inputs = Vec::new();
    let mut outputs = Vec::new();
    for field in meta.split_whitespace() {
        let split = |v: &str| v.split(',').filter(|s| !s.is_empty()).map(String::from).collect::<Vec<_>>();
        if let Some(v) = field.strip_prefix("inputs=") {
            inputs = split(v);
        } else if let Some(v) = field.strip_prefix("outputs=") {
            outputs = split(v);
        }
    }
    let m = outputs.len().max(1);
    let vectors = check_line()
        .captures_iter(src)
        .map(|c| CheckVector {
            inputs: bits(&c[1]),
            expected: bits(&c[2]),
            care: bits(&c[3]),
        })
        .filter(|v| v.inputs.len() == inputs.len() && v.expected.len() == m && v.care.len() == m)
        .collect();
    Some(VectorTestbench { inputs, outputs, vectors })
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Expr {
    Const(bool),
    Net(String),
    Not(Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Xor(Box<Expr>, Box<Expr>),
}

struct Parser<'a> {
    toks: &'a [Token],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&'a Token> {
        self.toks.get(self.pos)
    }

    fn eat(&mut self, text: &str) -> bool {
        if self.peek().is_some_and(|t| t.is(text)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn net(&mut self) -> Option<String> {
        let t = self.peek()?;
        if t.kind != TokenKind::Ident {
            return None;
        }
        self.pos += 1;
        let mut name = t.text.clone();
        if self.eat("[") {
            let idx = self.peek().filter(|t| t.kind == TokenKind::Number)?;
            self.pos += 1;
            if !self.eat("]") {
                return None;
            }
            name = format!("{name}[{}]", idx.text);
        }
        Some(name)
    }

    fn binary(&mut self, ops: &[&str], next: fn(&mut Self) -> Option<Expr>, build: fn(Expr, Expr) -> Expr) -> Option<Expr> {
        let mut lhs = next(self)?;
        while ops.iter().any(|op| self.eat(op)) {
            let rhs = next(self)?;
            lhs = build(lhs, rhs);
        }
        Some(lhs)
    }

    fn or(&mut self) -> Option<Expr> {
        self.binary(&["||", "|"], Self::xor, |a, b| Expr::Or(a.into(), b.into()))
    }

    fn xor(&mut self) -> Option<Expr> {
        self.binary(&["^"], Self::and, |a, b| Expr::Xor(a.into(), b.into()))
    }

    fn and(&mut self) -> Option<Expr> {
        self.binary(&["&&", "&"], Self::unary, |a, b| Expr::And(a.into(), b.into()))
    }

    fn unary(&mut self) -> Option<Expr> {
        if self.eat("~") || self.eat("!") {
            return Some(Expr::Not(self.unary()?.into()));
        }
        if self.eat("(") {
            let e = self.or()?;
            return self.eat(")").then_some(e);
        }
        let t = self.peek()?;
        if t.kind == TokenKind::Number {
            self.pos += 1;
            return match t.text.as_str() {
                "0" | "1'b0" | "'b0" => Some(Expr::Const(false)),
                "1" | "1'b1" | "'b1" => Some(Expr::Const(true)),
                _ => None,
            };
        }
        self.net().map(Expr::Net)
    }
}

/// Continuous assignments of a candidate, `(target, expression)` in order.
fn parse_assigns(src: &str) -> Option<Vec<(String, Expr)>> {
    let toks = lex(src);
    let mut out = Vec::new();
    let mut i = 0;
    while i < toks.len() {
        if !toks[i].is("assign") {
            i += 1;
            continue;
        }
        let end = toks[i..].iter().position(|t| t.is(";")).map(|p| i + p)?;
        let mut p = Parser {
            toks: &toks[i + 1..end],
            pos: 0,
        };
        let target = p.net()?;
        if !p.eat("=") {
            return None;
        }
        let e = p.or()?;
        if p.pos != p.toks.len() {
            return None;
        }
        out.push((target, e));
        i = end + 1;
    }
    Some(out)
}

fn eval(e: &Expr, env: &BTreeMap<String, bool>) -> Option<bool> {
    Some(match e {
        Expr::Const(b) => *b,
        Expr::Net(n) => *env.get(n)?,
        Expr::Not(a) => !eval(a, env)?,
        Expr::And(a, b) => eval(a, env)? & eval(b, env)?,
        Expr::Or(a, b) => eval(a, env)? | eval(b, env)?,
        Expr::Xor(a, b) => eval(a, env)? ^ eval(b, env)?,
    })
}

/// Output values of `assigns` for one input vector, or `None` when a net
/// is undriven or the assignments form a loop.
fn settle(assigns: &[(String, Expr)], inputs: &[String], values: &[bool], outputs: &[String]) -> Option<Vec<bool>> {
    let mut env: BTreeMap<String, bool> = inputs.iter().cloned().zip(values.iter().copied()).collect();
    let mut pending: Vec<&(String, Expr)> = assigns.iter().collect();
    while !pending.is_empty() {
        let before = pending.len();
        pending.retain(|(target, e)| match eval(e, &env) {
            Some(v) => {
                env.insert(target.clone(), v);
                false
            }
            None => true,
        });
        if pending.len() == before {
            return None;
        }
    }
    outputs.iter().map(|o| env.get(o).copied()).collect()
}

/// Score `candidate` against a parsed vector testbench.
pub fn evaluate_candidate(candidate: &str, tb: &VectorTestbench) -> TestOutcome {
    let Some(assigns) = parse_assigns(candidate) else {
        return TestOutcome::compile_error();
    };
    if tb.vectors.is_empty() {
        return TestOutcome::from_counts(1, 1).expect("valid");
    }
    let mut passed = 0u64;
    for v in &tb.vectors {
        let Some(got) = settle(&assigns, &tb.inputs, &v.inputs, &tb.outputs) else {
            return TestOutcome::compile_error();
        };
        let ok = got
            .iter()
            .zip(&v.expected)
            .zip(&v.care)
            .all(|((g, e), c)| !c || g == e);
        passed += u64::from(ok);
    }
    TestOutcome::from_counts(passed, tb.vectors.len() as u64).expect("passed <= total")
}

#[derive(Debug, Clone, Copy, Default)]
pub struct TableOracleSimulator;

impl Simulator for TableOracleSimulator {
    fn run_testbench(&self, code: &CodeSample, task: &Task, _slot: SampleSlot) -> Result<TestOutcome, InfrastructureError> {
        let tb = parse_vector_testbench(&task.testbench_src).ok_or_else(|| {
            InfrastructureError(format!("task {}: testbench was not generated from a truth table", task.id))
        })?;
        Ok(evaluate_candidate(&code.verilog_src, &tb))
    }
}
