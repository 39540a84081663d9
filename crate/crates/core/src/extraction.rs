// SPDX-License-Identifier: Apache-2.0

//! Information-list extraction: turn a specification into numbered
//! input/output relationship statements.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use regex::Regex;
use thiserror::Error;

use crate::backend::{BackendError, Llm};
use crate::domain::{CircuitType, InformationList, Task};

/// A model reply the next pipeline step could not capture.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{stage}: {message}")]
pub struct FormatError {
    pub stage: &'static str,
    pub message: String,
}

impl FormatError {
    pub fn new(stage: &'static str, message: impl Into<String>) -> Self {
        Self {
            stage,
            message: message.into(),
        }
    }
}

/// Failure of one procedure step: either recoverable (format) or not (backend).
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StepError {
    #[error("format error in {0}")]
    Format(#[from] FormatError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("precondition violated: {0}")]
    Precondition(String),
}

fn item_marker() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*(?:\*\*)?(\d{1,3})[.)](?:\*\*)?(?:\s+|$)(.*)$").unwrap())
}

/// Split a reply into its numbered items.
///
/// Lines following an item attach to it. After the final item only indented
/// or bulleted lines attach; the first flush-left line ends the list.
pub fn parse_numbered_list(text: &str) -> Vec<String> {
    let mut items: Vec<Vec<String>> = Vec::new();
    let mut closed = false;
    let lines: Vec<&str> = text.lines().collect();
    let last_marker = lines.iter().rposition(|l| item_marker().is_match(l));
    for (idx, line) in lines.iter().enumerate() {
        if let Some(caps) = item_marker().captures(line) {
            items.push(vec![caps[2].trim().to_string()]);
            closed = false;
            continue;
        }
        let Some(current) = items.last_mut() else { continue };
        if closed {
            continue;
        }
        if line.trim().is_empty() {
            if Some(idx) > last_marker {
                closed = true;
            }
            continue;
        }
        let after_last = last_marker.is_some_and(|m| idx > m);
        let indented = line.starts_with(char::is_whitespace);
        let bullet = line.trim_start().starts_with(['-', '*', '+']);
        if after_last && !indented && !bullet {
            closed = true;
            continue;
        }
        current.push(line.trim().to_string());
    }
    items
        .into_iter()
        .map(|lines| lines.join("\n").trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

pub fn info_list_template(circuit_type: CircuitType) -> Option<&'static str> {
    match circuit_type {
        CircuitType::Combinational => Some("info_list_comb"),
        CircuitType::Sequential => Some("info_list_sequ"),
        CircuitType::General => None,
    }
}

/// Ask the model for an information list and parse it.
pub fn extract_info_list(
    task: &Task,
    circuit_type: CircuitType,
    iteration: u32,
    llm: &Llm<'_>,
) -> Result<InformationList, StepError> {
    let template = info_list_template(circuit_type)
        .ok_or_else(|| StepError::Precondition("information lists are extracted for combinational or sequential tasks".into()))?;
    let bindings = BTreeMap::from([("spec", task.spec_text.clone()), ("header", task.module_header.clone())]);
    let reply = llm.ask(template, &bindings)?;
    let items = parse_numbered_list(&reply);
    if items.is_empty() {
        return Err(FormatError::new("information list", "no numbered items in reply").into());
    }
    Ok(InformationList::new(items, iteration))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{GenerationParams, PromptSet, ScriptedBackend};
    use crate::domain::DatasetSplit;

    fn task() -> Task {
        Task {
            id: "kmap".into(),
            spec_text: "Implement the circuit described by the Karnaugh map below.".into(),
            testbench_src: "tb".into(),
            module_header: "module top_module(input a, input b, input c, input d, output out);".into(),
            dataset_split: DatasetSplit::Human,
        }
    }

    #[test]
    fn preamble_and_postamble_dropped() {
        assert_eq!(parse_numbered_list("intro\n1. a\n2. b\nend"), vec!["a", "b"]);
    }

    #[test]
    fn continuation_attaches_to_previous_item() {
        assert_eq!(parse_numbered_list("1. multi\nline item\n2. next"), vec!["multi\nline item", "next"]);
    }

    #[test]
    fn empty_text_gives_no_items() {
        assert!(parse_numbered_list("").is_empty());
        assert!(parse_numbered_list("no numbering here at all").is_empty());
    }

    #[test]
    fn sub_bullets_fold_into_parent() {
        let t = "1. clk: the clock\n   - rising edge\n2. q: output\n   - 4 bits";
        assert_eq!(parse_numbered_list(t), vec!["clk: the clock\n- rising edge", "q: output\n- 4 bits"]);
    }

    #[test]
    fn parenthesis_markers() {
        assert_eq!(parse_numbered_list("1) x\n2) y"), vec!["x", "y"]);
    }

    #[test]
    fn karnaugh_reply_gives_sixteen_items() {
        let mut reply = String::from("Sure, here are the relationships between the inputs and output according to the Karnaugh map:\n");
        let kmap = [[1, 1, 0, 1], [1, 0, 1, 1], [0, 0, 1, 0], [1, 1, 1, 0]];
        let ab = [(0, 0), (0, 1), (1, 1), (1, 0)];
        let cd = [(0, 0), (0, 1), (1, 1), (1, 0)];
        let mut n = 1;
        for (r, &(c, d)) in cd.iter().enumerate() {
            for (col, &(a, b)) in ab.iter().enumerate() {
                reply.push_str(&format!(
                    "{n}. When a = {a}, b = {b}, c = {c} and d = {d}, out = {}\n",
                    kmap[r][col]
                ));
                n += 1;
            }
        }
        reply.push_str("These are the complete relationships between the inputs and output as per the Karnaugh map, without any simplification.");
        let backend = ScriptedBackend::new([reply.as_str()]);
        let prompts = PromptSet::defaults();
        let llm = Llm::new(&backend, &prompts, GenerationParams::default());
        let list = extract_info_list(&task(), CircuitType::Combinational, 1, &llm).unwrap();
        assert_eq!(list.items.len(), 16);
        assert_eq!(list.items[0], "When a = 0, b = 0, c = 0 and d = 0, out = 1");
        assert!(list.history().is_empty());
    }

    #[test]
    fn decade_counter_items() {
        let reply = "1. clk: This is the clock input to the module. The decade counter will increment based on this clock signal.\n2. reset: active high synchronous reset.\n3. slowena: enables counting.\n4. q: This is the output of the module. It is a 4-bit signal that represents the current count of the decade counter.";
        let backend = ScriptedBackend::new([reply]);
        let prompts = PromptSet::defaults();
        let llm = Llm::new(&backend, &prompts, GenerationParams::default());
        let list = extract_info_list(&task(), CircuitType::Sequential, 1, &llm).unwrap();
        assert!(list.items.iter().any(|i| i.starts_with("clk:")));
        assert!(list.items.iter().any(|i| i.starts_with("q:")));
    }

    #[test]
    fn unnumbered_reply_is_format_error() {
        let backend = ScriptedBackend::new(["The output is high when a is high."]);
        let prompts = PromptSet::defaults();
        let llm = Llm::new(&backend, &prompts, GenerationParams::default());
        assert!(matches!(
            extract_info_list(&task(), CircuitType::Combinational, 1, &llm),
            Err(StepError::Format(_))
        ));
    }

    #[test]
    fn general_type_rejected() {
        let backend = ScriptedBackend::new(["1. x"]);
        let prompts = PromptSet::defaults();
        let llm = Llm::new(&backend, &prompts, GenerationParams::default());
        assert!(matches!(
            extract_info_list(&task(), CircuitType::General, 1, &llm),
            Err(StepError::Precondition(_))
        ));
    }

    proptest::proptest! {
        #[test]
        fn numbered_round_trip_keeps_count(items in proptest::collection::vec("[a-z][a-z ]{0,20}[a-z]", 1..10)) {
            let text = items.iter().enumerate().map(|(i, s)| format!("{}. {}", i + 1, s)).collect::<Vec<_>>().join("\n");
            let parsed = parse_numbered_list(&text);
            proptest::prop_assert_eq!(parsed.len(), items.len());
            let again = parsed.iter().enumerate().map(|(i, s)| format!("{}. {}", i + 1, s)).collect::<Vec<_>>().join("\n");
            proptest::prop_assert_eq!(parse_numbered_list(&again), parsed);
        }
    }
}
