// SPDX-License-Identifier: Apache-2.0

//! Combinational procedure: information list to truth table, minimized
//! natively and emitted as continuous assignments.

pub mod emit;
pub mod minimize;
pub mod table;

use std::collections::BTreeMap;

pub use emit::{emit_verilog, exhaustive_testbench, header_for_table, EmitError};
pub use minimize::{evaluate_sop, minimize, minimize_all, Literal, MinimizeError, SopExpression};
pub use table::{parse_truth_table, Cell, TableError, TruthTable};

use crate::backend::Llm;
use crate::domain::{InformationList, Task};
use crate::extraction::{FormatError, StepError};

/// Ask the model for the truth table of an information list.
pub fn request_truth_table(task: &Task, list: &InformationList, llm: &Llm<'_>) -> Result<TruthTable, StepError> {
    let bindings = BTreeMap::from([("info_list", list.render()), ("header", task.module_header.clone())]);
    let reply = llm.ask("truth_table", &bindings)?;
    parse_truth_table(&reply).map_err(|e| FormatError::new("truth table", e.to_string()).into())
}

/// Verilog for `task` from `list`, or the step that failed.
pub fn run_comb(task: &Task, list: &InformationList, llm: &Llm<'_>) -> Result<String, StepError> {
    let table = request_truth_table(task, list, llm)?;
    let exprs = minimize_all(&table).map_err(|e| FormatError::new("minimization", e.to_string()))?;
    emit_verilog(&task.module_header, &exprs).map_err(|e| FormatError::new("emission", e.to_string()).into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{GenerationParams, PromptSet, ScriptedBackend};
    use crate::domain::DatasetSplit;

    fn task() -> Task {
        Task {
            id: "mux".into(),
            spec_text: "y is a when s is 0, else b".into(),
            testbench_src: String::new(),
            module_header: "module top_module(input a, input b, input s, output y);".into(),
            dataset_split: DatasetSplit::Machine,
        }
    }

    #[test]
    fn mux_from_table() {
        let reply = "```json\n{\"table\": [[0,0,0,0],[0,0,1,0],[0,1,0,0],[0,1,1,1],[1,0,0,1],[1,0,1,0],[1,1,0,1],[1,1,1,1]],\n\"inputs\": [\"a\",\"b\",\"s\"], \"outputs\": [\"y\"]}\n```";
        let backend = ScriptedBackend::new([reply]);
        let prompts = PromptSet::defaults();
        let llm = Llm::new(&backend, &prompts, GenerationParams::default());
        let list = InformationList::new(vec!["y = s ? b : a".into()], 1);
        let v = run_comb(&task(), &list, &llm).unwrap();
        assert!(v.contains("assign y = (a & ~s) | (b & s);"));
    }

    #[test]
    fn malformed_table_is_format_error() {
        let backend = ScriptedBackend::new(["no table today"]);
        let prompts = PromptSet::defaults();
        let llm = Llm::new(&backend, &prompts, GenerationParams::default());
        let list = InformationList::new(vec!["x".into()], 1);
        assert!(matches!(run_comb(&task(), &list, &llm), Err(StepError::Format(_))));
    }

    #[test]
    fn table_with_foreign_signal_is_format_error() {
        let backend = ScriptedBackend::new([r#"{"table": [[0,0],[1,1]], "inputs": ["q"], "outputs": ["y"]}"#]);
        let prompts = PromptSet::defaults();
        let llm = Llm::new(&backend, &prompts, GenerationParams::default());
        let list = InformationList::new(vec!["x".into()], 1);
        let err = run_comb(&task(), &list, &llm).unwrap_err();
        assert!(matches!(err, StepError::Format(f) if f.stage == "emission"));
    }
}
