// SPDX-License-Identifier: Apache-2.0

#![allow(dead_code)]

use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Mutex;

use hdlflow::backend::{BackendError, GenerationRequest};
use hdlflow::domain::{DatasetSplit, Task};

pub const XOR_HEADER: &str = "module top_module(input a, input b, output y);";

pub const XOR_TABLE: &str = r#"{"table": [[0,0,0],[0,1,1],[1,0,1],[1,1,0]], "inputs": ["a","b"], "outputs": ["y"]}"#;

pub fn xor_task(id: &str) -> Task {
    Task {
        id: id.into(),
        spec_text: "Output y is the exclusive or of a and b.".into(),
        testbench_src: "module tb; endmodule".into(),
        module_header: XOR_HEADER.into(),
        dataset_split: DatasetSplit::Human,
    }
}

/// Which prompt template produced `prompt`.
pub fn prompt_kind(prompt: &str) -> &'static str {
    const KINDS: &[(&str, &str)] = &[
        ("Generate the Verilog code for the circuit described", "probe_code"),
        ("combinational logic or sequential logic", "classify_direct"),
        ("List the relationship between the inputs and outputs", "info_list"),
        ("Give the truth table", "truth_table"),
        ("Give the state transition table", "state_table"),
        ("Describe the", "block_description"),
        ("Write the Verilog code of the", "block_code"),
        ("Merge the generated always blocks", "merge_blocks"),
        ("Divide the task into several components", "component_plan"),
        ("Write the Verilog code for component", "component_code"),
        ("Integrate these components", "integrate"),
        ("Write the complete Verilog module", "baseline"),
    ];
    KINDS
        .iter()
        .find(|(needle, _)| prompt.contains(needle))
        .map(|(_, k)| *k)
        .unwrap_or("unknown")
}

/// A well-behaved model for the xor task. Every information list it
/// extracts is distinct, and the first `bad_tables` truth tables (and, when
/// `behav_broken`, every component plan) come back malformed.
#[derive(Default)]
pub struct XorWorld {
    lists: AtomicU32,
    bad_tables: AtomicU32,
    behav_broken: bool,
    calls: Mutex<Vec<&'static str>>,
}

impl XorWorld {
    pub fn new(bad_tables: u32, behav_broken: bool) -> Self {
        Self {
            bad_tables: AtomicU32::new(bad_tables),
            behav_broken,
            ..Self::default()
        }
    }

    pub fn calls(&self) -> Vec<&'static str> {
        self.calls.lock().unwrap().clone()
    }

    pub fn reply(&self, request: &GenerationRequest) -> Result<String, BackendError> {
        let kind = prompt_kind(&request.user_text());
        self.calls.lock().unwrap().push(kind);
        Ok(match kind {
            "probe_code" => "```verilog\nassign y = a ^ b;\n```".into(),
            "info_list" => {
                let k = self.lists.fetch_add(1, Ordering::SeqCst);
                format!("1. y is a xor b (extraction {k})\n2. no clock")
            }
            "truth_table" => {
                let bad = self
                    .bad_tables
                    .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1))
                    .is_ok();
                if bad {
                    "I cannot produce a table.".into()
                } else {
                    XOR_TABLE.into()
                }
            }
            "component_plan" if self.behav_broken => "Sorry.".into(),
            "component_plan" => "1. core: the xor of a and b".into(),
            "component_code" => "```verilog\nassign y = a ^ b;\n```".into(),
            "integrate" | "baseline" => format!("```verilog\n{XOR_HEADER}\n\tassign y = a ^ b;\nendmodule\n```"),
            other => return Err(BackendError::InvalidRequest(format!("unexpected prompt {other}"))),
        })
    }
}
