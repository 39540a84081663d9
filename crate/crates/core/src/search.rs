// SPDX-License-Identifier: Apache-2.0

//! Test-budget search over information lists.
//!
//! Iteration 1 spends each slot on a fresh list run through the procedure
//! for the classified circuit type. Later iterations rank the cluster by
//! mean pass rate, keep the top `C_s` lists and run the general procedure
//! on them round-robin. A sample scoring above `W` pins the remaining
//! budget to its procedure and list (Short-cut); more than `E_f` format
//! errors hand every remaining slot to the general procedure with a list
//! extracted just for it (Fail-safe).

use std::cmp::Ordering;
use std::time::Instant;

use num_rational::BigRational;
use thiserror::Error;

use crate::backend::{BackendError, Llm};
use crate::behav::run_behav;
use crate::classify::{ClassifyError, Classifier};
use crate::comb::run_comb;
use crate::domain::{
    BudgetConfig, CircuitType, CodeSample, DomainError, ExecutedSample, InformationList, Procedure, SearchMode,
    SearchState, Task,
};
use crate::extraction::{extract_info_list, StepError};
use crate::sequ::run_sequ;
use crate::sim::{InfrastructureError, SampleSlot, Simulator};
use crate::verilog::{extract_code_blocks, has_module_structure};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error(transparent)]
    Config(#[from] DomainError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error("task {task}: {source}")]
    Backend { task: String, source: BackendError },
    #[error(transparent)]
    Infrastructure(#[from] InfrastructureError),
    #[error("task {task}: {message}")]
    Internal { task: String, message: String },
}

/// The `c` best lists: highest score first, then earlier origin, then id.
pub fn select_top(cluster: &[InformationList], c: usize) -> Vec<&InformationList> {
    let mut ranked: Vec<&InformationList> = cluster.iter().collect();
    ranked.sort_by(|a, b| {
        b.score()
            .cmp(a.score())
            .then(a.origin_iteration.cmp(&b.origin_iteration))
            .then_with(|| a.id.cmp(&b.id))
    });
    ranked.truncate(c);
    ranked
}

/// Mode after a simulation (`latest_p` set) or a format error (`None`).
pub fn decide_mode(state: &SearchState, latest_p: Option<&BigRational>, config: &BudgetConfig) -> SearchMode {
    match state.mode {
        SearchMode::Done => SearchMode::Done,
        _ if state.format_errors > config.max_format_errors => SearchMode::FailSafe,
        SearchMode::FailSafe => SearchMode::FailSafe,
        mode => match latest_p {
            Some(p) if p.cmp(&config.shortcut_threshold) == Ordering::Greater => SearchMode::ShortCut,
            _ => mode,
        },
    }
}

/// Format errors tolerated under Fail-safe before a task is abandoned.
pub fn abandon_limit(config: &BudgetConfig) -> u32 {
    2 * (config.max_format_errors + 1)
}

/// Where the next execution's code comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
enum Plan {
    /// Extract a new list, then run `procedure` on it.
    Fresh(Procedure),
    /// Run `procedure` on a list already in the cluster.
    Reuse(Procedure, String),
}

fn procedure_for(t: CircuitType) -> Procedure {
    match t {
        CircuitType::Combinational => Procedure::Comb,
        CircuitType::Sequential => Procedure::Sequ,
        CircuitType::General => Procedure::Behav,
    }
}

/// Run one procedure on a list.
pub fn generate(procedure: Procedure, task: &Task, list: &InformationList, llm: &Llm<'_>) -> Result<String, StepError> {
    match procedure {
        Procedure::Comb => run_comb(task, list, llm),
        Procedure::Sequ => run_sequ(task, list, llm).map(|m| m.verilog),
        Procedure::Behav => run_behav(task, list, llm).map(|m| m.verilog),
        Procedure::Baseline => Err(StepError::Precondition("the baseline does not use information lists".into())),
    }
}

struct Search<'a, 'b> {
    task: &'a Task,
    config: &'a BudgetConfig,
    llm: &'a Llm<'b>,
    simulator: &'a dyn Simulator,
    state: SearchState,
    list_type: CircuitType,
    pinned: Option<(Procedure, String)>,
    selected: Vec<String>,
}

impl Search<'_, '_> {
    fn plan(&self, iteration: u32, index: u32) -> Plan {
        match self.state.mode {
            SearchMode::FailSafe => Plan::Fresh(Procedure::Behav),
            SearchMode::ShortCut => {
                let (p, id) = self.pinned.clone().expect("Short-cut pins a list");
                Plan::Reuse(p, id)
            }
            _ if iteration == 1 || self.selected.is_empty() => Plan::Fresh(procedure_for(self.list_type)),
            _ => {
                let id = self.selected[index as usize % self.selected.len()].clone();
                Plan::Reuse(Procedure::Behav, id)
            }
        }
    }

    fn backend_error(&self, source: BackendError) -> SearchError {
        SearchError::Backend {
            task: self.task.id.clone(),
            source,
        }
    }

    /// Code for the next slot, retrying after format errors. `None` when the
    /// task was abandoned.
    fn produce(&mut self, iteration: u32, index: u32) -> Result<Option<(Procedure, InformationList, String)>, SearchError> {
        loop {
            let plan = self.plan(iteration, index);
            let (procedure, list) = match plan {
                Plan::Fresh(p) => match extract_info_list(self.task, self.list_type, iteration, self.llm) {
                    Ok(list) => (p, list),
                    Err(e) => {
                        if self.on_step_error(e)? {
                            return Ok(None);
                        }
                        continue;
                    }
                },
                Plan::Reuse(p, id) => {
                    let list = self.state.list(&id).cloned().ok_or_else(|| SearchError::Internal {
                        task: self.task.id.clone(),
                        message: format!("list {id} vanished from the cluster"),
                    })?;
                    (p, list)
                }
            };
            match generate(procedure, self.task, &list, self.llm) {
                Ok(code) => return Ok(Some((procedure, list, code))),
                Err(e) => {
                    if self.on_step_error(e)? {
                        return Ok(None);
                    }
                }
            }
        }
    }

    /// Record a failed step. Returns true when the task must be abandoned.
    fn on_step_error(&mut self, e: StepError) -> Result<bool, SearchError> {
        match e {
            StepError::Format(f) => {
                self.state.format_errors += 1;
                log::debug!("{}: format error #{} ({f})", self.task.id, self.state.format_errors);
                self.state.mode = decide_mode(&self.state, None, self.config);
                if self.state.mode == SearchMode::FailSafe {
                    self.state.circuit_type = Some(CircuitType::General);
                    self.pinned = None;
                    if self.state.format_errors >= abandon_limit(self.config) {
                        log::warn!(
                            "{}: abandoned after {} format errors, {} runs unspent",
                            self.task.id,
                            self.state.format_errors,
                            self.state.remaining_budget
                        );
                        self.state.abandoned = true;
                        return Ok(true);
                    }
                }
                Ok(false)
            }
            StepError::Backend(b) => Err(self.backend_error(b)),
            StepError::Precondition(message) => Err(SearchError::Internal {
                task: self.task.id.clone(),
                message,
            }),
        }
    }

    fn run(mut self) -> Result<SearchState, SearchError> {
        let mut slot = 0u32;
        let mut current_iteration = 0u32;
        while self.state.remaining_budget > 0 {
            let iteration = self.config.iteration_of_slot(slot);
            let index = self.config.index_in_iteration(slot);
            if iteration != current_iteration {
                current_iteration = iteration;
                self.state.iteration = iteration;
                if iteration >= 2 {
                    let c = self.config.top_c(iteration) as usize;
                    self.selected = select_top(&self.state.cluster, c).into_iter().map(|l| l.id.clone()).collect();
                    if self.state.mode == SearchMode::Normal {
                        self.state.circuit_type = Some(CircuitType::General);
                    }
                }
            }
            let started = Instant::now();
            let Some((procedure, list, code)) = self.produce(iteration, index)? else {
                break;
            };
            // `produce` may have switched to Fail-safe; the sample belongs to that mode
            let mode = self.state.mode;
            let list_id = self.state.insert_list(list);
            let sample = CodeSample {
                verilog_src: code,
                producing_procedure: procedure,
                info_list_id: Some(list_id.clone()),
                iteration,
            };
            let outcome = self.simulator.run_testbench(&sample, self.task, SampleSlot { index: slot })?;
            let rate = outcome.pass_rate();
            if let Some(l) = self.state.list_mut(&list_id) {
                l.update_score(rate);
            }
            log::info!(
                "{} slot {slot} iter {iteration} {procedure} list {list_id}: {}/{}",
                self.task.id,
                rate.passed(),
                rate.total()
            );
            self.state.executed_samples.push(ExecutedSample {
                sample,
                outcome,
                mode,
                wall_time_ms: started.elapsed().as_millis() as u64,
            });
            self.state.remaining_budget -= 1;
            slot += 1;
            if outcome.passed() {
                self.state.solved = true;
            }
            let next = decide_mode(&self.state, Some(&rate.ratio()), self.config);
            if next == SearchMode::ShortCut && self.state.mode != SearchMode::ShortCut {
                log::info!("{}: Short-cut on {procedure} with list {list_id}", self.task.id);
                self.pinned = Some((procedure, list_id));
            }
            self.state.mode = next;
            if self.config.stop_on_pass && self.state.solved {
                break;
            }
        }
        self.state.mode = SearchMode::Done;
        Ok(self.state)
    }
}

/// Run the classification-driven search for one task.
pub fn run_task(
    task: &Task,
    config: &BudgetConfig,
    llm: &Llm<'_>,
    classifier: &Classifier,
    simulator: &dyn Simulator,
) -> Result<SearchState, SearchError> {
    config.validate()?;
    task.validate()?;
    let t = classifier.classify_task(task, llm)?;
    let mut state = SearchState::new(&task.id, config.total());
    state.classified_type = Some(t);
    state.circuit_type = Some(t);
    Search {
        task,
        config,
        llm,
        simulator,
        state,
        list_type: t,
        pinned: None,
        selected: Vec::new(),
    }
    .run()
}

/// Module text in a direct-generation reply, if any.
pub fn baseline_code(reply: &str) -> Option<String> {
    let blocks = extract_code_blocks(reply);
    blocks
        .iter()
        .find(|b| has_module_structure(b))
        .or_else(|| blocks.iter().find(|b| !b.trim().is_empty()))
        .cloned()
}

/// Direct generation from the specification, `runs` times.
///
/// A reply without code is a format error and is retried; once more than
/// `max_format_errors` have occurred the raw reply is simulated as is.
pub fn run_baseline(
    task: &Task,
    runs: u32,
    max_format_errors: u32,
    llm: &Llm<'_>,
    simulator: &dyn Simulator,
) -> Result<SearchState, SearchError> {
    task.validate()?;
    let mut state = SearchState::new(&task.id, runs);
    let bindings = std::collections::BTreeMap::from([
        ("spec", task.spec_text.clone()),
        ("header", task.module_header.clone()),
    ]);
    for slot in 0..runs {
        let started = Instant::now();
        let code = loop {
            let reply = llm.ask("baseline", &bindings).map_err(|source| SearchError::Backend {
                task: task.id.clone(),
                source,
            })?;
            match baseline_code(&reply) {
                Some(code) => break code,
                None if state.format_errors >= max_format_errors => {
                    state.format_errors += 1;
                    break reply;
                }
                None => state.format_errors += 1,
            }
        };
        let sample = CodeSample {
            verilog_src: code,
            producing_procedure: Procedure::Baseline,
            info_list_id: None,
            iteration: 1,
        };
        let outcome = simulator.run_testbench(&sample, task, SampleSlot { index: slot })?;
        state.executed_samples.push(ExecutedSample {
            sample,
            outcome,
            mode: SearchMode::Normal,
            wall_time_ms: started.elapsed().as_millis() as u64,
        });
        state.remaining_budget -= 1;
        state.solved |= outcome.passed();
    }
    state.mode = SearchMode::Done;
    Ok(state)
}
