// SPDX-License-Identifier: Apache-2.0

//! Sequential procedure: state-transition table, then the three always
//! blocks one at a time (description before code), then a merged module.

pub mod stt;

use std::collections::BTreeMap;
use std::fmt;

pub use stt::{parse_stt, Column, ColumnRole, StateTransitionTable, SttCell, SttError};

use crate::backend::Llm;
use crate::domain::{InformationList, Task};
use crate::extraction::{FormatError, StepError};
pub use crate::verilog::extract_code_blocks;
use crate::verilog::{self, assemble_module, contains_modulo_whitespace, has_module_structure, parse_header};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BlockRole {
    StateRegister,
    NextStateLogic,
    OutputLogic,
}

impl BlockRole {
    pub const ORDER: [BlockRole; 3] = [BlockRole::StateRegister, BlockRole::NextStateLogic, BlockRole::OutputLogic];

    pub fn position(self) -> usize {
        self as usize
    }
}

impl fmt::Display for BlockRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BlockRole::StateRegister => "State Register",
            BlockRole::NextStateLogic => "Next State Logic",
            BlockRole::OutputLogic => "Output Logic",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlwaysBlockPlan {
    pub role: BlockRole,
    pub description: String,
    pub code: String,
}

/// A finished module and whether local assembly replaced the model's merge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Merged {
    pub verilog: String,
    pub fallback: bool,
}

pub fn request_stt(task: &Task, list: &InformationList, llm: &Llm<'_>) -> Result<StateTransitionTable, StepError> {
    let bindings = BTreeMap::from([("info_list", list.render()), ("header", task.module_header.clone())]);
    let reply = llm.ask("state_table", &bindings)?;
    let header = parse_header(&task.module_header).ok();
    parse_stt(&reply, header.as_ref()).map_err(|e| FormatError::new("state transition table", e.to_string()).into())
}

fn render_blocks(plans: &[AlwaysBlockPlan]) -> String {
    if plans.is_empty() {
        return "(none)".into();
    }
    plans
        .iter()
        .enumerate()
        .map(|(i, p)| format!("{}. {}:\n{}", i + 1, p.role, p.code.trim_end()))
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// The single always construct in a code reply. A snippet that is only the
/// block (plus comments or declarations) is kept whole; one wrapped in a
/// module is cut down to the construct.
pub fn single_always_block(reply: &str) -> Result<String, FormatError> {
    let snippets = extract_code_blocks(reply);
    let with_always: Vec<&String> = snippets.iter().filter(|s| verilog::count_always(s) > 0).collect();
    let total: usize = with_always.iter().map(|s| verilog::count_always(s)).sum();
    if total != 1 {
        return Err(FormatError::new("always block", format!("expected one always construct, found {total}")));
    }
    let snippet = with_always[0];
    if has_module_structure(snippet) || snippet.contains("endmodule") {
        Ok(verilog::always_constructs(snippet).remove(0))
    } else {
        Ok(snippet.trim().to_string())
    }
}

/// Describe and then write the always block for `role`.
pub fn generate_block(
    role: BlockRole,
    task: &Task,
    stt: &StateTransitionTable,
    list: &InformationList,
    prior: &[AlwaysBlockPlan],
    llm: &Llm<'_>,
) -> Result<AlwaysBlockPlan, StepError> {
    let expected = &BlockRole::ORDER[..role.position()];
    if prior.len() != expected.len() || prior.iter().zip(expected).any(|(p, r)| p.role != *r) {
        return Err(StepError::Precondition(format!("{role} needs the blocks before it, in order")));
    }
    let mut bindings = BTreeMap::from([
        ("header", task.module_header.clone()),
        ("info_list", list.render()),
        ("stt", stt.to_markdown()),
        ("prior_blocks", render_blocks(prior)),
        ("role", role.to_string()),
    ]);
    let description = llm.ask("block_description", &bindings)?.trim().to_string();
    bindings.insert("description", description.clone());
    let reply = llm.ask("block_code", &bindings)?;
    let code = single_always_block(&reply)?;
    Ok(AlwaysBlockPlan { role, description, code })
}

/// Take the model's module when it keeps every region, otherwise assemble
/// one locally from the header and the regions.
pub fn accept_or_assemble(reply: &str, header: &str, regions: &[&str]) -> Result<Merged, FormatError> {
    let candidate = extract_code_blocks(reply).into_iter().find(|b| has_module_structure(b));
    if let Some(code) = candidate {
        if regions.iter().all(|r| contains_modulo_whitespace(&code, r)) {
            let mut verilog = code.trim().to_string();
            verilog.push('\n');
            return Ok(Merged { verilog, fallback: false });
        }
    }
    assemble_module(header, regions)
        .map(|verilog| Merged { verilog, fallback: true })
        .map_err(|e| FormatError::new("assembly", e.to_string()))
}

pub fn merge_blocks(plans: &[AlwaysBlockPlan], header: &str, llm: &Llm<'_>) -> Result<Merged, StepError> {
    let mut ordered: Vec<&AlwaysBlockPlan> = plans.iter().collect();
    ordered.sort_by_key(|p| p.role);
    let roles: Vec<BlockRole> = ordered.iter().map(|p| p.role).collect();
    if roles != BlockRole::ORDER {
        return Err(StepError::Precondition("merging needs exactly one block of each role".into()));
    }
    let owned: Vec<AlwaysBlockPlan> = ordered.into_iter().cloned().collect();
    let bindings = BTreeMap::from([("header", header.to_string()), ("blocks", render_blocks(&owned))]);
    let reply = llm.ask("merge_blocks", &bindings)?;
    let regions: Vec<&str> = owned.iter().map(|p| p.code.as_str()).collect();
    Ok(accept_or_assemble(&reply, header, &regions)?)
}

/// Verilog for `task` from `list`.
pub fn run_sequ(task: &Task, list: &InformationList, llm: &Llm<'_>) -> Result<Merged, StepError> {
    let table = request_stt(task, list, llm)?;
    let mut plans: Vec<AlwaysBlockPlan> = Vec::with_capacity(3);
    for role in BlockRole::ORDER {
        let plan = generate_block(role, task, &table, list, &plans, llm)?;
        plans.push(plan);
    }
    merge_blocks(&plans, &task.module_header, llm)
}
