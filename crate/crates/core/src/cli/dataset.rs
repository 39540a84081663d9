// SPDX-License-Identifier: Apache-2.0

//! Task ingestion: a directory with one subdirectory per task, or a
//! line-delimited JSON file.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context};
use serde::Deserialize;

use crate::domain::{DatasetSplit, Task};

#[derive(Debug, Deserialize)]
struct Record {
    task_id: String,
    #[serde(alias = "spec", alias = "detail_description", alias = "description")]
    prompt: String,
    #[serde(alias = "test")]
    testbench: String,
    #[serde(alias = "header")]
    module_header: String,
    #[serde(default)]
    split: Option<DatasetSplit>,
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn parse_split(text: &str, origin: &Path) -> anyhow::Result<DatasetSplit> {
    match text.trim().to_ascii_lowercase().as_str() {
        "human" => Ok(DatasetSplit::Human),
        "machine" => Ok(DatasetSplit::Machine),
        other => bail!("{}: unknown split {other:?}", origin.display()),
    }
}

fn load_task_dir(dir: &Path) -> anyhow::Result<Task> {
    let id = dir
        .file_name()
        .and_then(|n| n.to_str())
        .with_context(|| format!("{}: task directory name is not UTF-8", dir.display()))?
        .to_string();
    let split_path = dir.join("split.txt");
    let dataset_split = if split_path.is_file() {
        parse_split(&read(&split_path)?, &split_path)?
    } else {
        DatasetSplit::default()
    };
    let task = Task {
        id,
        spec_text: read(&dir.join("spec.txt"))?,
        testbench_src: read(&dir.join("testbench.v"))?,
        module_header: read(&dir.join("header.v"))?.trim().to_string(),
        dataset_split,
    };
    task.validate()?;
    Ok(task)
}

/// Tasks in a JSONL file. Blank lines are skipped.
pub fn parse_jsonl(text: &str, origin: &Path) -> anyhow::Result<Vec<Task>> {
    let mut tasks = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let r: Record = serde_json::from_str(line).with_context(|| format!("{} line {}", origin.display(), i + 1))?;
        let task = Task {
            id: r.task_id,
            spec_text: r.prompt,
            testbench_src: r.testbench,
            module_header: r.module_header.trim().to_string(),
            dataset_split: r.split.unwrap_or_default(),
        };
        task.validate().with_context(|| format!("{} line {}", origin.display(), i + 1))?;
        tasks.push(task);
    }
    Ok(tasks)
}

/// Load every task under `path`, sorted by id. Duplicate ids are an error.
pub fn load_dataset(path: &Path) -> anyhow::Result<Vec<Task>> {
    let mut tasks = if path.is_dir() {
        let mut tasks = Vec::new();
        for entry in fs::read_dir(path).with_context(|| format!("listing {}", path.display()))? {
            let p = entry?.path();
            if p.is_dir() {
                tasks.push(load_task_dir(&p)?);
            }
        }
        tasks
    } else {
        parse_jsonl(&read(path)?, path)?
    };
    if tasks.is_empty() {
        bail!("{}: no tasks found", path.display());
    }
    tasks.sort_by(|a, b| a.id.cmp(&b.id));
    if let Some(w) = tasks.windows(2).find(|w| w[0].id == w[1].id) {
        bail!("{}: duplicate task id {}", path.display(), w[0].id);
    }
    Ok(tasks)
}
