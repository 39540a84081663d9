// SPDX-License-Identifier: Apache-2.0

//! General procedure: split the task into components, write each one in
//! turn, then integrate them into one module.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use regex::Regex;

use crate::backend::Llm;
use crate::domain::{InformationList, Task};
use crate::extraction::{parse_numbered_list, FormatError, StepError};
use crate::sequ::{accept_or_assemble, Merged};
use crate::verilog::extract_code_blocks;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    pub name: String,
    pub description: String,
    pub code: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentPlan {
    pub components: Vec<Component>,
}

fn inline_marker() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?:^|\s)(\d{1,2})[.)]\s+").unwrap())
}

/// Items of a one-line list such as `1. a: x 2. b: y`.
fn split_inline(text: &str) -> Vec<String> {
    let marks: Vec<(usize, usize)> = inline_marker()
        .captures_iter(text)
        .map(|c| {
            let m = c.get(0).unwrap();
            (m.start(), m.end())
        })
        .collect();
    let mut out = Vec::new();
    for (k, &(_, body_start)) in marks.iter().enumerate() {
        let end = marks.get(k + 1).map_or(text.len(), |m| m.0);
        out.push(text[body_start..end].trim().to_string());
    }
    out
}

fn split_item(item: &str) -> (String, String) {
    let first_line = item.lines().next().unwrap_or("");
    let cleaned = |s: &str| s.trim().trim_matches('*').trim().to_string();
    match first_line.find(':') {
        Some(colon) => {
            let name = cleaned(&first_line[..colon]);
            let rest = format!("{}{}", &first_line[colon + 1..], &item[first_line.len()..]);
            (name, rest.trim().to_string())
        }
        None => (cleaned(first_line), item[first_line.len()..].trim().to_string()),
    }
}

/// Parse a numbered component list. Names are made unique by suffixing.
pub fn parse_component_plan(reply: &str) -> Vec<Component> {
    let mut items = parse_numbered_list(reply);
    if items.len() == 1 && inline_marker().find_iter(&items[0]).count() > 0 {
        let whole = format!("1. {}", items[0]);
        let split = split_inline(&whole);
        if split.len() > 1 {
            items = split;
        }
    }
    let mut seen: BTreeSet<String> = BTreeSet::new();
    let mut out = Vec::new();
    for (i, item) in items.iter().enumerate() {
        let (mut name, description) = split_item(item);
        if name.is_empty() {
            name = format!("component{}", i + 1);
        }
        let base = name.clone();
        let mut k = 2;
        while !seen.insert(name.clone()) {
            name = format!("{base} ({k})");
            k += 1;
        }
        out.push(Component {
            name,
            description,
            code: String::new(),
        });
    }
    out
}

impl ComponentPlan {
    pub fn is_complete(&self) -> bool {
        self.components.iter().all(|c| !c.code.trim().is_empty())
    }

    fn render_list(&self) -> String {
        self.components
            .iter()
            .enumerate()
            .map(|(i, c)| format!("{}. {}: {}", i + 1, c.name, c.description))
            .collect::<Vec<_>>()
            .join("\n")
    }

    fn render_code(&self, upto: usize) -> String {
        let coded: Vec<String> = self.components[..upto]
            .iter()
            .enumerate()
            .map(|(i, c)| format!("// {}. {}\n{}", i + 1, c.name, c.code.trim_end()))
            .collect();
        if coded.is_empty() {
            "(none)".into()
        } else {
            coded.join("\n\n")
        }
    }
}

pub fn plan_components(task: &Task, list: &InformationList, llm: &Llm<'_>) -> Result<ComponentPlan, StepError> {
    let bindings = BTreeMap::from([
        ("spec", task.spec_text.clone()),
        ("header", task.module_header.clone()),
        ("info_list", list.render()),
    ]);
    let reply = llm.ask("component_plan", &bindings)?;
    let components = parse_component_plan(&reply);
    if components.is_empty() {
        return Err(FormatError::new("component plan", "no numbered components in reply").into());
    }
    Ok(ComponentPlan { components })
}

/// Fill in the code of component `index`.
pub fn generate_component(
    mut plan: ComponentPlan,
    index: usize,
    task: &Task,
    list: &InformationList,
    llm: &Llm<'_>,
) -> Result<ComponentPlan, StepError> {
    if index >= plan.components.len() {
        return Err(StepError::Precondition(format!("no component {index}")));
    }
    if plan.components[..index].iter().any(|c| c.code.trim().is_empty()) {
        return Err(StepError::Precondition(format!(
            "component {index} requested before the ones ahead of it were written"
        )));
    }
    let c = &plan.components[index];
    let bindings = BTreeMap::from([
        ("header", task.module_header.clone()),
        ("info_list", list.render()),
        ("components", plan.render_list()),
        ("prior_code", plan.render_code(index)),
        ("index", (index + 1).to_string()),
        ("name", c.name.clone()),
        ("description", c.description.clone()),
    ]);
    let reply = llm.ask("component_code", &bindings)?;
    let code = extract_code_blocks(&reply)
        .into_iter()
        .find(|b| !b.trim().is_empty())
        .ok_or_else(|| FormatError::new("component code", "no code in reply"))?;
    plan.components[index].code = code;
    Ok(plan)
}

pub fn integrate(plan: &ComponentPlan, header: &str, llm: &Llm<'_>) -> Result<Merged, StepError> {
    if plan.components.is_empty() || !plan.is_complete() {
        return Err(StepError::Precondition("every component needs code before integration".into()));
    }
    let bindings = BTreeMap::from([
        ("header", header.to_string()),
        ("components_code", plan.render_code(plan.components.len())),
    ]);
    let reply = llm.ask("integrate", &bindings)?;
    let regions: Vec<&str> = plan.components.iter().map(|c| c.code.as_str()).collect();
    Ok(accept_or_assemble(&reply, header, &regions)?)
}

/// Verilog for `task` from `list`.
pub fn run_behav(task: &Task, list: &InformationList, llm: &Llm<'_>) -> Result<Merged, StepError> {
    let mut plan = plan_components(task, list, llm)?;
    for i in 0..plan.components.len() {
        plan = generate_component(plan, i, task, list, llm)?;
    }
    integrate(&plan, &task.module_header, llm)
}
