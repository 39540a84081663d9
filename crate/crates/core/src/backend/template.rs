// SPDX-License-Identifier: Apache-2.0

//! Prompt templates with `{{name}}` placeholders.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TemplateError {
    #[error("template {template}: placeholder {key:?} is not bound")]
    MissingPlaceholder { template: String, key: String },
    #[error("template {template}: unknown placeholder {key:?}")]
    UnknownPlaceholder { template: String, key: String },
    #[error("unknown template {0:?}")]
    UnknownTemplate(String),
    #[error("reading template {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub name: String,
    pub body: String,
    pub required_placeholders: BTreeSet<String>,
}

fn placeholder_spans(body: &str) -> Vec<(usize, usize, &str)> {
    let mut spans = Vec::new();
    let mut i = 0;
    while let Some(off) = body[i..].find("{{") {
        let open = i + off;
        let Some(close_off) = body[open + 2..].find("}}") else { break };
        let close = open + 2 + close_off;
        let key = &body[open + 2..close];
        if !key.is_empty() && key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            spans.push((open, close + 2, key));
            i = close + 2;
        } else {
            i = open + 1;
        }
    }
    spans
}

impl PromptTemplate {
    pub fn new(name: impl Into<String>, body: impl Into<String>) -> Self {
        let body = body.into();
        let required_placeholders = placeholder_spans(&body).into_iter().map(|(_, _, k)| k.to_string()).collect();
        Self {
            name: name.into(),
            body,
            required_placeholders,
        }
    }

    pub fn render(&self, bindings: &BTreeMap<&str, String>) -> Result<String, TemplateError> {
        if let Some(key) = self.required_placeholders.iter().find(|k| !bindings.contains_key(k.as_str())) {
            return Err(TemplateError::MissingPlaceholder {
                template: self.name.clone(),
                key: key.clone(),
            });
        }
        let mut out = String::with_capacity(self.body.len());
        let mut last = 0;
        for (start, end, key) in placeholder_spans(&self.body) {
            out.push_str(&self.body[last..start]);
            out.push_str(&bindings[key]);
            last = end;
        }
        out.push_str(&self.body[last..]);
        Ok(out)
    }
}

/// Template names and the placeholders the pipeline binds for each.
const CATALOG: &[(&str, &str, &[&str])] = &[
    ("probe_code", include_str!("../../templates/probe_code.txt"), &["spec", "header"]),
    ("classify_direct", include_str!("../../templates/classify_direct.txt"), &["spec", "header"]),
    ("info_list_comb", include_str!("../../templates/info_list_comb.txt"), &["spec", "header"]),
    ("info_list_sequ", include_str!("../../templates/info_list_sequ.txt"), &["spec", "header"]),
    ("truth_table", include_str!("../../templates/truth_table.txt"), &["info_list", "header"]),
    ("state_table", include_str!("../../templates/state_table.txt"), &["info_list", "header"]),
    (
        "block_description",
        include_str!("../../templates/block_description.txt"),
        &["header", "info_list", "stt", "prior_blocks", "role"],
    ),
    (
        "block_code",
        include_str!("../../templates/block_code.txt"),
        &["header", "info_list", "stt", "prior_blocks", "role", "description"],
    ),
    ("merge_blocks", include_str!("../../templates/merge_blocks.txt"), &["header", "blocks"]),
    (
        "component_plan",
        include_str!("../../templates/component_plan.txt"),
        &["spec", "header", "info_list"],
    ),
    (
        "component_code",
        include_str!("../../templates/component_code.txt"),
        &["header", "info_list", "components", "prior_code", "index", "name", "description"],
    ),
    ("integrate", include_str!("../../templates/integrate.txt"), &["header", "components_code"]),
    ("baseline", include_str!("../../templates/baseline.txt"), &["spec", "header"]),
];

/// Every prompt the pipeline sends, keyed by template name.
#[derive(Debug, Clone)]
pub struct PromptSet {
    templates: BTreeMap<String, PromptTemplate>,
}

impl Default for PromptSet {
    fn default() -> Self {
        Self::defaults()
    }
}

impl PromptSet {
    pub fn defaults() -> Self {
        let templates = CATALOG
            .iter()
            .map(|(name, body, _)| (name.to_string(), PromptTemplate::new(*name, body.trim_end())))
            .collect();
        Self { templates }
    }

    pub fn names() -> impl Iterator<Item = &'static str> {
        CATALOG.iter().map(|(n, _, _)| *n)
    }

    /// Replace defaults with `<name>.txt` files found in `dir`.
    pub fn with_overrides(dir: &Path) -> Result<Self, TemplateError> {
        let mut set = Self::defaults();
        for (name, _, allowed) in CATALOG {
            let path = dir.join(format!("{name}.txt"));
            if !path.exists() {
                continue;
            }
            let body = std::fs::read_to_string(&path).map_err(|e| TemplateError::Io {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            set.insert(PromptTemplate::new(*name, body.trim_end()), allowed)?;
        }
        Ok(set)
    }

    fn insert(&mut self, template: PromptTemplate, allowed: &[&str]) -> Result<(), TemplateError> {
        if let Some(key) = template.required_placeholders.iter().find(|k| !allowed.contains(&k.as_str())) {
            return Err(TemplateError::UnknownPlaceholder {
                template: template.name.clone(),
                key: key.clone(),
            });
        }
        self.templates.insert(template.name.clone(), template);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&PromptTemplate, TemplateError> {
        self.templates.get(name).ok_or_else(|| TemplateError::UnknownTemplate(name.to_string()))
    }

    pub fn render(&self, name: &str, bindings: &BTreeMap<&str, String>) -> Result<String, TemplateError> {
        self.get(name)?.render(bindings)
    }
}
