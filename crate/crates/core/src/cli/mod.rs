// SPDX-License-Identifier: Apache-2.0

//! Subcommands behind the `hdlflow` binary.

pub mod config;
pub mod dataset;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{anyhow, Context};

use crate::backend::{Backend, Llm, PromptSet, RemoteBackend, ScriptFile, ScriptedBackend};
use crate::classify::Classifier;
use crate::comb::{emit_verilog, exhaustive_testbench, header_for_table, minimize_all, parse_truth_table};
use crate::domain::{SearchState, Task};
use crate::eval::report::{pass_at_ks, SampleLog, TaskFailure};
use crate::eval::{RunReport, TaskRecord};
use crate::search::{run_baseline, run_task, SearchError};
use crate::sim::mock::MockSimulator;
use crate::sim::oracle::{evaluate_candidate, parse_vector_testbench};
use crate::sim::{IcarusSimulator, Simulator, TableOracleSimulator};
use config::{BackendKind, Config, Method, SimKind};

/// Baseline executions a task needs before it can be called hard.
pub const HARD_MIN_RUNS: u64 = 10;

#[derive(Debug)]
pub enum CliError {
    /// Bad input or configuration; exit code 2.
    Input(anyhow::Error),
    /// Failure while running; exit code 1.
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(e) | CliError::Runtime(e) => write!(f, "{e:#}"),
        }
    }
}

impl std::error::Error for CliError {}

fn input<E: Into<anyhow::Error>>(e: E) -> CliError {
    CliError::Input(e.into())
}

fn runtime<E: Into<anyhow::Error>>(e: E) -> CliError {
    CliError::Runtime(e.into())
}

#[derive(Debug, Clone)]
pub struct RunArgs {
    pub dataset: PathBuf,
    pub config: PathBuf,
    pub out: PathBuf,
    /// File of task ids, one per line, restricting the run.
    pub tasks: Option<PathBuf>,
}

#[derive(Debug)]
pub struct RunSummary {
    pub report: RunReport,
    pub report_path: PathBuf,
    pub samples_path: PathBuf,
}

enum Backends {
    One(Box<dyn Backend>),
    PerTask(BTreeMap<String, ScriptedBackend>),
}

impl Backends {
    fn for_task(&self, id: &str) -> &dyn Backend {
        match self {
            Backends::One(b) => b.as_ref(),
            Backends::PerTask(m) => &m[id],
        }
    }
}

fn build_backends(config: &Config, tasks: &[Task]) -> Result<(Backends, bool), CliError> {
    match config.backend.kind {
        BackendKind::Remote => {
            let remote = config.remote();
            if remote.api_key.is_none() {
                log::warn!("{} is not set; requests go out without an API key", config.backend.api_key_env);
            }
            Ok((Backends::One(Box::new(RemoteBackend::new(remote))), false))
        }
        BackendKind::Scripted => {
            let path = config
                .backend
                .script
                .as_ref()
                .ok_or_else(|| input(anyhow!("backend.script is required for the scripted backend")))?;
            match ScriptFile::load(path).map_err(input)? {
                ScriptFile::Shared(entries) => Ok((Backends::One(Box::new(ScriptedBackend::from_entries(entries))), true)),
                ScriptFile::PerTask(mut map) => {
                    let mut out = BTreeMap::new();
                    for t in tasks {
                        let entries = map
                            .remove(&t.id)
                            .ok_or_else(|| input(anyhow!("{}: no script for task {}", path.display(), t.id)))?;
                        out.insert(t.id.clone(), ScriptedBackend::from_entries(entries));
                    }
                    Ok((Backends::PerTask(out), false))
                }
            }
        }
    }
}

fn build_simulator(config: &Config, out: &Path) -> Result<Box<dyn Simulator>, CliError> {
    Ok(match config.sim.kind {
        SimKind::Icarus => {
            let c = config.icarus(&out.join("scratch")).map_err(input)?;
            Box::new(IcarusSimulator::new(c).map_err(runtime)?)
        }
        SimKind::Mock => Box::new(MockSimulator::new(config.sim.rules.clone()).map_err(input)?),
        SimKind::Oracle => Box::new(TableOracleSimulator),
    })
}

fn select_tasks(tasks: Vec<Task>, filter: Option<&Path>) -> Result<Vec<Task>, CliError> {
    let Some(path) = filter else {
        return Ok(tasks);
    };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).map_err(input)?;
    let wanted: BTreeSet<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).collect();
    let known: BTreeSet<&str> = tasks.iter().map(|t| t.id.as_str()).collect();
    if let Some(missing) = wanted.iter().find(|id| !known.contains(*id)) {
        return Err(input(anyhow!("{}: task {missing} is not in the dataset", path.display())));
    }
    Ok(tasks.into_iter().filter(|t| wanted.contains(t.id.as_str())).collect())
}

/// Run every task, `workers` at a time. Stops early on a simulator failure.
fn run_pool<F>(tasks: &[Task], workers: usize, run_one: F) -> Vec<Option<Result<SearchState, SearchError>>>
where
    F: Fn(&Task) -> Result<SearchState, SearchError> + Sync,
{
    let next = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let results: Mutex<Vec<Option<Result<SearchState, SearchError>>>> = Mutex::new((0..tasks.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers.min(tasks.len()).max(1) {
            scope.spawn(|| loop {
                if abort.load(Ordering::SeqCst) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(task) = tasks.get(i) else { break };
                let r = run_one(task);
                if matches!(r, Err(SearchError::Infrastructure(_))) {
                    abort.store(true, Ordering::SeqCst);
                }
                results.lock().unwrap_or_else(|e| e.into_inner())[i] = Some(r);
            });
        }
    });
    results.into_inner().unwrap_or_else(|e| e.into_inner())
}

/// Run the configured method over a dataset and write `report.json` and
/// `samples.jsonl` into `out`.
pub fn cmd_run(args: &RunArgs) -> Result<RunSummary, CliError> {
    let config = Config::load(&args.config).map_err(input)?;
    let budget = config.budget().map_err(input)?;
    let tasks = dataset::load_dataset(&args.dataset).map_err(input)?;
    let tasks = select_tasks(tasks, args.tasks.as_deref())?;
    let prompts = match &config.prompts_dir {
        Some(dir) => PromptSet::with_overrides(dir).map_err(input)?,
        None => PromptSet::defaults(),
    };
    let (backends, shared_script) = build_backends(&config, &tasks)?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display())).map_err(runtime)?;
    let simulator = build_simulator(&config, &args.out)?;
    let mut workers = config.run.workers;
    if shared_script && workers > 1 {
        log::warn!("a shared reply script is consumed in order; running with one worker");
        workers = 1;
    }
    let method = config.run.method;
    let classifier = Classifier::new();
    let params = config.generation_params();
    log::info!("{} tasks, method {}, {workers} worker(s)", tasks.len(), method.name());

    let results = run_pool(&tasks, workers, |task| {
        let llm = Llm::new(backends.for_task(&task.id), &prompts, params);
        match method {
            Method::Pipeline => run_task(task, &budget, &llm, &classifier, simulator.as_ref()),
            Method::Baseline => {
                run_baseline(task, config.run.baseline_runs, budget.max_format_errors, &llm, simulator.as_ref())
            }
        }
    });

    let task_budget = match method {
        Method::Pipeline => budget.total(),
        Method::Baseline => config.run.baseline_runs,
    };
    let mut records = Vec::new();
    let mut logs = Vec::new();
    let mut failures = Vec::new();
    for (task, result) in tasks.iter().zip(results) {
        match result {
            Some(Ok(state)) => {
                let record = TaskRecord::from_state(task, &state, task_budget);
                logs.extend(SampleLog::from_state(&state, &record));
                records.push(record);
            }
            Some(Err(SearchError::Infrastructure(e))) => {
                return Err(runtime(anyhow!("task {}: {e}", task.id)));
            }
            Some(Err(e)) => {
                log::error!("{}: {e}", task.id);
                failures.push(TaskFailure {
                    task_id: task.id.clone(),
                    error: e.to_string(),
                });
            }
            None => return Err(runtime(anyhow!("task {} was not run", task.id))),
        }
    }
    if records.is_empty() {
        return Err(runtime(anyhow!("every task failed; first error: {}", failures[0].error)));
    }
    let mut report = RunReport::build(method.name(), &budget, records, &config.run.ks).map_err(runtime)?;
    report.failures = failures;

    let report_path = args.out.join("report.json");
    let samples_path = args.out.join("samples.jsonl");
    fs::write(&report_path, report.to_json()).with_context(|| format!("writing {}", report_path.display())).map_err(runtime)?;
    let mut jsonl = String::new();
    for l in &logs {
        jsonl.push_str(&serde_json::to_string(l).expect("sample log serializes"));
        jsonl.push('\n');
    }
    fs::write(&samples_path, jsonl).with_context(|| format!("writing {}", samples_path.display())).map_err(runtime)?;
    if !report.failures.is_empty() {
        return Err(runtime(anyhow!(
            "{} task(s) failed, see the failures in {}",
            report.failures.len(),
            report_path.display()
        )));
    }
    Ok(RunSummary {
        report,
        report_path,
        samples_path,
    })
}

pub fn load_report(path: &Path) -> Result<RunReport, CliError> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).map_err(input)?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display())).map_err(input)
}

/// Tasks with no passing sample across at least [`HARD_MIN_RUNS`] baseline runs.
pub fn hard_tasks(report: &RunReport) -> Vec<String> {
    let mut hard = Vec::new();
    for t in &report.tasks {
        if t.n < HARD_MIN_RUNS {
            log::warn!("{}: only {} run(s) in the report, not classified", t.task_id, t.n);
        } else if t.c == 0 {
            hard.push(t.task_id.clone());
        }
    }
    hard
}

pub fn cmd_filter_hard(report: &Path, dataset_path: Option<&Path>) -> Result<Vec<String>, CliError> {
    let report = load_report(report)?;
    if let Some(d) = dataset_path {
        let tasks = dataset::load_dataset(d).map_err(input)?;
        let reported: BTreeSet<&str> = report.tasks.iter().map(|t| t.task_id.as_str()).collect();
        for t in tasks.iter().filter(|t| !reported.contains(t.id.as_str())) {
            log::warn!("{}: in the dataset but not in the report", t.id);
        }
    }
    Ok(hard_tasks(&report))
}

/// Minimize a truth-table file and return the SOP lines and the module.
pub fn cmd_minimize(table_file: &Path, header: Option<&str>) -> Result<String, CliError> {
    let text = fs::read_to_string(table_file).with_context(|| format!("reading {}", table_file.display())).map_err(input)?;
    let table = parse_truth_table(&text).with_context(|| format!("{}", table_file.display())).map_err(input)?;
    let header = header.map_or_else(|| header_for_table(&table), str::to_string);
    let exprs = minimize_all(&table).map_err(runtime)?;
    let verilog = emit_verilog(&header, &exprs).map_err(input)?;
    // check the result against the table before printing it
    let tb = exhaustive_testbench(&header, &table).map_err(input)?;
    let vectors = parse_vector_testbench(&tb).expect("generated testbench carries vectors");
    let outcome = evaluate_candidate(&verilog, &vectors);
    if !outcome.passed() {
        return Err(runtime(anyhow!(
            "emitted module fails its own table: {}/{} rows",
            outcome.passed_samples,
            outcome.total_samples
        )));
    }
    let mut out = String::new();
    for e in &exprs {
        let _ = writeln!(out, "{e}");
    }
    out.push('\n');
    out.push_str(&verilog);
    Ok(out)
}

/// Pass@k for each `k` and the error-rate histogram of a report.
pub fn cmd_passk(report_file: &Path, ks: &[u64]) -> Result<String, CliError> {
    let report = load_report(report_file)?;
    if report.tasks.is_empty() {
        return Err(input(anyhow!("{}: report has no tasks", report_file.display())));
    }
    for &k in ks {
        if k == 0 {
            return Err(input(anyhow!("k must be positive")));
        }
        if let Some(t) = report.tasks.iter().find(|t| t.n < k) {
            return Err(input(anyhow!("pass@{k} needs n >= {k}, but task {} has n = {}", t.task_id, t.n)));
        }
    }
    let (values, _) = pass_at_ks(&report.tasks, ks).map_err(input)?;
    let rates = report.tasks.iter().map(TaskRecord::error_rate).collect::<Result<Vec<_>, _>>().map_err(input)?;
    let histogram = crate::eval::error_rate_histogram(&rates).map_err(input)?;
    let mut out = String::new();
    let _ = writeln!(out, "tasks: {}", report.tasks.len());
    for v in &values {
        let _ = writeln!(out, "pass@{}: {:.4} ({})", v.k, v.value, v.exact);
    }
    let _ = writeln!(out, "best-sample error rate:");
    const BUCKETS: [&str; 5] = ["[0.0, 0.2)", "[0.2, 0.4)", "[0.4, 0.6)", "[0.6, 0.8)", "[0.8, 1.0]"];
    for (label, count) in BUCKETS.iter().zip(histogram) {
        let _ = writeln!(out, "  {label}: {count}");
    }
    Ok(out)
}
