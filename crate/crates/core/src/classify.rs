// SPDX-License-Identifier: Apache-2.0

//! Circuit-type classification from model-written probe code.
//!
//! The model is asked for a rough implementation first and the type is read
//! off that code: edge-triggered always blocks mean sequential logic, a body
//! made only of continuous assignments or level-sensitive always blocks means
//! combinational logic. A direct question is the fallback.

use std::collections::{BTreeMap, HashMap};
use std::sync::Mutex;

use thiserror::Error;

use crate::backend::{BackendError, Llm};
use crate::domain::{CircuitType, Task};
use crate::verilog::{self, Token};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Deduction {
    Combinational,
    Sequential,
    Indeterminate,
}

impl Deduction {
    pub fn circuit_type(self) -> Option<CircuitType> {
        match self {
            Deduction::Combinational => Some(CircuitType::Combinational),
            Deduction::Sequential => Some(CircuitType::Sequential),
            Deduction::Indeterminate => None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ClassifyError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("task {0}: neither the probe code nor the direct answer determined the circuit type")]
    Undetermined(String),
    #[error("task {0}: specification is empty")]
    EmptySpec(String),
}

fn sensitivity_is_edge(tokens: &[Token], always_at: usize) -> bool {
    if tokens[always_at].is("always_ff") {
        return true;
    }
    let Some(at) = tokens.get(always_at + 1) else { return false };
    if !at.is("@") {
        return false;
    }
    match tokens.get(always_at + 2) {
        Some(t) if t.is("(") => {
            let mut depth = 0;
            for t in &tokens[always_at + 2..] {
                if t.is("(") {
                    depth += 1;
                } else if t.is(")") {
                    depth -= 1;
                    if depth == 0 {
                        break;
                    }
                } else if t.is("posedge") || t.is("negedge") {
                    return true;
                }
            }
            false
        }
        _ => false,
    }
}

/// Infer the circuit type from Verilog text. Total and pure.
pub fn deduce_type_from_code(verilog_src: &str) -> Deduction {
    let tokens = verilog::lex(verilog_src);
    let mut combinational_evidence = false;
    for (i, t) in tokens.iter().enumerate() {
        if verilog::is_always_keyword(&t.text) {
            if sensitivity_is_edge(&tokens, i) {
                return Deduction::Sequential;
            }
            combinational_evidence = true;
        } else if t.is("assign") {
            combinational_evidence = true;
        }
    }
    if combinational_evidence {
        Deduction::Combinational
    } else {
        Deduction::Indeterminate
    }
}

/// Read "combinational" / "sequential" out of a free-text answer; the first
/// keyword mentioned wins.
pub fn parse_direct_answer(answer: &str) -> Option<CircuitType> {
    let lower = answer.to_ascii_lowercase();
    let comb = lower.find("combinational");
    let seq = lower.find("sequential");
    match (comb, seq) {
        (Some(c), Some(s)) => Some(if c < s { CircuitType::Combinational } else { CircuitType::Sequential }),
        (Some(_), None) => Some(CircuitType::Combinational),
        (None, Some(_)) => Some(CircuitType::Sequential),
        (None, None) => None,
    }
}

/// Classifies each task once and remembers the answer.
#[derive(Debug, Default)]
pub struct Classifier {
    cache: Mutex<HashMap<String, CircuitType>>,
}

impl Classifier {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn cached(&self, task_id: &str) -> Option<CircuitType> {
        self.cache.lock().unwrap_or_else(|e| e.into_inner()).get(task_id).copied()
    }

    pub fn classify_task(&self, task: &Task, llm: &Llm<'_>) -> Result<CircuitType, ClassifyError> {
        if let Some(t) = self.cached(&task.id) {
            return Ok(t);
        }
        let t = classify_uncached(task, llm)?;
        self.cache.lock().unwrap_or_else(|e| e.into_inner()).insert(task.id.clone(), t);
        Ok(t)
    }
}

fn classify_uncached(task: &Task, llm: &Llm<'_>) -> Result<CircuitType, ClassifyError> {
    if task.spec_text.trim().is_empty() {
        return Err(ClassifyError::EmptySpec(task.id.clone()));
    }
    let bindings = BTreeMap::from([("spec", task.spec_text.clone()), ("header", task.module_header.clone())]);
    let probe = llm.ask("probe_code", &bindings)?;
    let blocks = verilog::extract_code_blocks(&probe);
    let code = if blocks.is_empty() { probe } else { blocks.join("\n") };
    if let Some(t) = deduce_type_from_code(&code).circuit_type() {
        log::debug!("{}: probe code says {t}", task.id);
        return Ok(t);
    }
    let answer = llm.ask("classify_direct", &bindings)?;
    parse_direct_answer(&answer).ok_or_else(|| ClassifyError::Undetermined(task.id.clone()))
}
