// SPDX-License-Identifier: Apache-2.0

//! Run report schema. Everything here is deterministic for a given run;
//! wall-clock timings and code live in the separate [`SampleLog`] stream.

use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};

use super::{aggregate_pass_at_k, error_rate_histogram, EvalError};
use crate::domain::{
    BudgetConfig, CircuitType, DatasetSplit, Procedure, SearchMode, SearchState, Task, TestStatus,
};

/// Bumped whenever a field changes meaning or disappears.
pub const SCHEMA_VERSION: u32 = 1;

/// Pass@k values reported when every task has enough executions.
pub const DEFAULT_KS: [u64; 3] = [1, 5, 10];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub index: u32,
    pub iteration: u32,
    pub procedure: Procedure,
    pub info_list_id: Option<String>,
    pub mode: SearchMode,
    pub status: TestStatus,
    pub m: u64,
    pub n: u64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ListRecord {
    pub id: String,
    pub origin_iteration: u32,
    pub items: usize,
    /// Pass rates as `m/n`, in execution order.
    pub history: Vec<String>,
    /// Mean of the history as an exact fraction.
    pub score: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub task_id: String,
    pub split: DatasetSplit,
    pub classified_type: Option<CircuitType>,
    pub final_type: Option<CircuitType>,
    /// Executed testbench runs.
    pub n: u64,
    /// Runs that passed every testbench sample.
    pub c: u64,
    pub budget: u32,
    /// `n` fell short of the budget (early stop or abandonment).
    pub reduced_n: bool,
    pub solved: bool,
    pub abandoned: bool,
    pub format_errors: u32,
    pub final_mode: SearchMode,
    /// `1 - max p` over executed samples, as an exact fraction.
    pub best_error_rate: String,
    pub lists: Vec<ListRecord>,
    pub samples: Vec<SampleRecord>,
}

impl TaskRecord {
    pub fn from_state(task: &Task, state: &SearchState, budget: u32) -> Self {
        let samples = state
            .executed_samples
            .iter()
            .enumerate()
            .map(|(i, s)| SampleRecord {
                index: i as u32,
                iteration: s.sample.iteration,
                procedure: s.sample.producing_procedure,
                info_list_id: s.sample.info_list_id.clone(),
                mode: s.mode,
                status: s.outcome.status,
                m: s.outcome.passed_samples,
                n: s.outcome.total_samples,
                p: s.outcome.pass_rate().as_f64(),
            })
            .collect();
        let lists = state
            .cluster
            .iter()
            .map(|l| ListRecord {
                id: l.id.clone(),
                origin_iteration: l.origin_iteration,
                items: l.items.len(),
                history: l.history().iter().map(|p| format!("{}/{}", p.passed(), p.total())).collect(),
                score: l.score().to_string(),
            })
            .collect();
        let best = state.best_pass_rate().map(|p| p.ratio()).unwrap_or_default();
        let n = state.executed_samples.len() as u64;
        Self {
            task_id: task.id.clone(),
            split: task.dataset_split,
            classified_type: state.classified_type,
            final_type: state.circuit_type,
            n,
            c: state.passed_count() as u64,
            budget,
            reduced_n: n < u64::from(budget),
            solved: state.solved,
            abandoned: state.abandoned,
            format_errors: state.format_errors,
            final_mode: state.mode,
            best_error_rate: (BigRational::one() - best).to_string(),
            lists,
            samples,
        }
    }

    pub fn error_rate(&self) -> Result<BigRational, EvalError> {
        parse_fraction(&self.best_error_rate).ok_or_else(|| EvalError::RateOutOfRange(self.best_error_rate.clone()))
    }
}

/// Parse `a/b` or an integer as written by `BigRational`'s `Display`.
pub fn parse_fraction(s: &str) -> Option<BigRational> {
    s.trim().parse().ok()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassAtK {
    pub k: u64,
    pub value: f64,
    pub exact: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub tasks: usize,
    pub pass_at_k: Vec<PassAtK>,
    /// Requested k values skipped because some task has fewer executions.
    pub omitted_k: Vec<u64>,
    /// Tasks per best-sample error-rate interval of width 0.2.
    pub histogram: [u64; 5],
    pub reduced_n_tasks: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub samples_per_iteration: Vec<u32>,
    pub top_candidates: Vec<u32>,
    pub shortcut_threshold: String,
    pub max_format_errors: u32,
    pub stop_on_pass: bool,
}

impl From<&BudgetConfig> for ConfigEcho {
    fn from(c: &BudgetConfig) -> Self {
        Self {
            samples_per_iteration: c.samples_per_iteration.clone(),
            top_candidates: c.top_candidates.clone(),
            shortcut_threshold: c.shortcut_threshold.to_string(),
            max_format_errors: c.max_format_errors,
            stop_on_pass: c.stop_on_pass,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub method: String,
    pub config: ConfigEcho,
    pub tasks: Vec<TaskRecord>,
    /// Tasks left out of `tasks` and the aggregate.
    #[serde(default)]
    pub failures: Vec<TaskFailure>,
    pub aggregate: Aggregate,
}

/// Pass@k for each requested k, plus the ks no task set could support.
pub fn pass_at_ks(tasks: &[TaskRecord], ks: &[u64]) -> Result<(Vec<PassAtK>, Vec<u64>), EvalError> {
    let pairs: Vec<(u64, u64)> = tasks.iter().map(|t| (t.n, t.c)).collect();
    let mut values = Vec::new();
    let mut omitted = Vec::new();
    for &k in ks {
        if pairs.is_empty() || pairs.iter().any(|&(n, _)| n < k) {
            omitted.push(k);
            continue;
        }
        let exact = aggregate_pass_at_k(&pairs, k)?;
        values.push(PassAtK {
            k,
            value: exact.to_f64().unwrap_or(f64::NAN),
            exact: exact.to_string(),
        });
    }
    Ok((values, omitted))
}

impl RunReport {
    pub fn build(method: &str, config: &BudgetConfig, mut tasks: Vec<TaskRecord>, ks: &[u64]) -> Result<Self, EvalError> {
        tasks.sort_by(|a, b| a.task_id.cmp(&b.task_id));
        let rates = tasks.iter().map(TaskRecord::error_rate).collect::<Result<Vec<_>, _>>()?;
        let histogram = error_rate_histogram(&rates)?;
        let (pass_at_k, omitted_k) = pass_at_ks(&tasks, ks)?;
        let reduced_n_tasks = tasks.iter().filter(|t| t.reduced_n).map(|t| t.task_id.clone()).collect();
        Ok(Self {
            schema_version: SCHEMA_VERSION,
            method: method.to_string(),
            config: config.into(),
            aggregate: Aggregate {
                tasks: tasks.len(),
                pass_at_k,
                omitted_k,
                histogram,
                reduced_n_tasks,
            },
            tasks,
            failures: Vec::new(),
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// One line of `samples.jsonl`: the report's sample record plus its code
/// and wall time, which would make the report itself irreproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleLog {
    pub task_id: String,
    #[serde(flatten)]
    pub record: SampleRecord,
    pub wall_time_ms: u64,
    pub verilog: String,
}

impl SampleLog {
    pub fn from_state(state: &SearchState, record: &TaskRecord) -> Vec<Self> {
        state
            .executed_samples
            .iter()
            .zip(&record.samples)
            .map(|(s, r)| SampleLog {
                task_id: record.task_id.clone(),
                record: r.clone(),
                wall_time_ms: s.wall_time_ms,
                verilog: s.sample.verilog_src.clone(),
            })
            .collect()
    }
}

/// A task whose search stopped on an error other than a simulator failure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskFailure {
    pub task_id: String,
    pub error: String,
}
