// SPDX-License-Identifier: Apache-2.0

//! Domain types shared by every stage of the pipeline.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DomainError {
    #[error("pass rate {passed}/{total} is out of range")]
    PassRateOutOfRange { passed: u64, total: u64 },
    #[error("task id must be nonempty")]
    EmptyTaskId,
    #[error("task {0}: testbench source is empty")]
    EmptyTestbench(String),
    #[error("invalid budget configuration: {0}")]
    InvalidBudget(String),
    #[error("invalid decimal {0:?}")]
    InvalidDecimal(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DatasetSplit {
    #[default]
    Human,
    Machine,
}

/// One benchmark problem.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Task {
    pub id: String,
    pub spec_text: String,
    pub testbench_src: String,
    pub module_header: String,
    pub dataset_split: DatasetSplit,
}

impl Task {
    pub fn validate(&self) -> Result<(), DomainError> {
        if self.id.trim().is_empty() {
            return Err(DomainError::EmptyTaskId);
        }
        if self.testbench_src.trim().is_empty() {
            return Err(DomainError::EmptyTestbench(self.id.clone()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CircuitType {
    Combinational,
    Sequential,
    /// Only assigned by the orchestrator when it escalates to the general procedure.
    General,
}

impl fmt::Display for CircuitType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CircuitType::Combinational => "combinational",
            CircuitType::Sequential => "sequential",
            CircuitType::General => "general",
        })
    }
}

/// Testbench pass rate `m / n`, kept as the exact pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PassRate {
    passed: u64,
    total: u64,
}

impl PassRate {
    pub fn new(passed: u64, total: u64) -> Result<Self, DomainError> {
        if total == 0 || passed > total {
            return Err(DomainError::PassRateOutOfRange { passed, total });
        }
        Ok(Self { passed, total })
    }

    pub fn zero() -> Self {
        Self { passed: 0, total: 1 }
    }

    pub fn passed(&self) -> u64 {
        self.passed
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn is_full(&self) -> bool {
        self.passed == self.total
    }

    pub fn ratio(&self) -> BigRational {
        BigRational::new(BigInt::from(self.passed), BigInt::from(self.total))
    }

    pub fn as_f64(&self) -> f64 {
        self.passed as f64 / self.total as f64
    }
}

impl fmt::Display for PassRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.passed, self.total)
    }
}

/// Parse a plain decimal literal such as `0.95` into an exact rational.
pub fn decimal_to_rational(text: &str) -> Result<BigRational, DomainError> {
    let bad = || DomainError::InvalidDecimal(text.to_string());
    let t = text.trim();
    let (neg, t) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t),
    };
    let (int_part, frac_part) = match t.split_once('.') {
        Some((i, f)) => (i, f),
        None => (t, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits = format!("{int_part}{frac_part}");
    let numer: BigInt = if digits.is_empty() {
        BigInt::zero()
    } else {
        digits.parse().map_err(|_| bad())?
    };
    let denom = num_traits::pow(BigInt::from(10u32), frac_part.len());
    let r = BigRational::new(numer, denom);
    Ok(if neg { -r } else { r })
}

/// Convert an f64 through its shortest decimal form, so `0.95` becomes exactly 19/20.
pub fn f64_to_rational(value: f64) -> Result<BigRational, DomainError> {
    if !value.is_finite() {
        return Err(DomainError::InvalidDecimal(value.to_string()));
    }
    let text = format!("{value}");
    if text.contains('e') || text.contains('E') {
        return BigRational::from_float(value).ok_or(DomainError::InvalidDecimal(text));
    }
    decimal_to_rational(&text)
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Extracted input/output relationship statements plus their testbench score history.
#[derive(Debug, Clone, PartialEq)]
pub struct InformationList {
    pub id: String,
    pub items: Vec<String>,
    pub origin_iteration: u32,
    pass_rate_history: Vec<PassRate>,
    score: BigRational,
}

impl InformationList {
    pub fn new(items: Vec<String>, origin_iteration: u32) -> Self {
        Self {
            id: content_id(&items),
            items,
            origin_iteration: origin_iteration.max(1),
            pass_rate_history: Vec::new(),
            score: BigRational::zero(),
        }
    }

    pub fn history(&self) -> &[PassRate] {
        &self.pass_rate_history
    }

    pub fn score(&self) -> &BigRational {
        &self.score
    }

    pub fn score_f64(&self) -> f64 {
        rational_to_f64(&self.score)
    }

    /// Append `p` and recompute the score as the mean of the whole history.
    pub fn update_score(&mut self, p: PassRate) {
        self.pass_rate_history.push(p);
        let sum = self
            .pass_rate_history
            .iter()
            .fold(BigRational::zero(), |acc, p| acc + p.ratio());
        self.score = sum / BigRational::from_integer(BigInt::from(self.pass_rate_history.len()));
    }

    /// The items as a numbered list, the form they are fed back to the model in.
    pub fn render(&self) -> String {
        self.items
            .iter()
            .enumerate()
            .map(|(i, item)| format!("{}. {}", i + 1, item))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

fn content_id(items: &[String]) -> String {
    let mut hasher = Sha256::new();
    for item in items {
        hasher.update(item.as_bytes());
        hasher.update([0u8]);
    }
    let digest = hasher.finalize();
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Procedure {
    Comb,
    Sequ,
    Behav,
    Baseline,
}

impl fmt::Display for Procedure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Procedure::Comb => "COMB",
            Procedure::Sequ => "SEQU",
            Procedure::Behav => "BEHAV",
            Procedure::Baseline => "BASELINE",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeSample {
    pub verilog_src: String,
    pub producing_procedure: Procedure,
    pub info_list_id: Option<String>,
    pub iteration: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestStatus {
    Pass,
    PartialFail,
    CompileError,
    SimTimeout,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub status: TestStatus,
    pub passed_samples: u64,
    pub total_samples: u64,
}

impl TestOutcome {
    pub fn from_counts(passed: u64, total: u64) -> Result<Self, DomainError> {
        let rate = PassRate::new(passed, total)?;
        let status = if rate.is_full() {
            TestStatus::Pass
        } else {
            TestStatus::PartialFail
        };
        Ok(Self {
            status,
            passed_samples: passed,
            total_samples: total,
        })
    }

    pub fn compile_error() -> Self {
        Self {
            status: TestStatus::CompileError,
            passed_samples: 0,
            total_samples: 1,
        }
    }

    pub fn timeout() -> Self {
        Self {
            status: TestStatus::SimTimeout,
            passed_samples: 0,
            total_samples: 1,
        }
    }

    pub fn pass_rate(&self) -> PassRate {
        PassRate {
            passed: self.passed_samples,
            total: self.total_samples,
        }
    }

    pub fn passed(&self) -> bool {
        self.status == TestStatus::Pass
    }
}

/// Test budget `(N_1..N_Smax)`, top-C selection sizes, Short-cut threshold and
/// format-error allowance.
#[derive(Debug, Clone, PartialEq)]
pub struct BudgetConfig {
    pub samples_per_iteration: Vec<u32>,
    /// Entry 0 is ignored: iteration 1 always draws fresh lists.
    pub top_candidates: Vec<u32>,
    pub shortcut_threshold: BigRational,
    pub max_format_errors: u32,
    pub stop_on_pass: bool,
}

impl Default for BudgetConfig {
    fn default() -> Self {
        Self {
            samples_per_iteration: vec![7, 2, 1],
            top_candidates: vec![1, 2, 1],
            shortcut_threshold: BigRational::new(19.into(), 20.into()),
            max_format_errors: 10,
            stop_on_pass: false,
        }
    }
}

impl BudgetConfig {
    /// `(N_1, N_2, N_3)` with `C_2 = N_2`, `C_3 = 1`.
    pub fn three_iterations(n1: u32, n2: u32, n3: u32) -> Self {
        Self {
            samples_per_iteration: vec![n1, n2, n3],
            top_candidates: vec![1, n2.max(1), 1],
            ..Self::default()
        }
    }

    pub fn max_iterations(&self) -> usize {
        self.samples_per_iteration.len()
    }

    pub fn total(&self) -> u32 {
        self.samples_per_iteration.iter().sum()
    }

    /// 1-based iteration that owns the `slot`-th (0-based) testbench execution.
    pub fn iteration_of_slot(&self, slot: u32) -> u32 {
        let mut acc = 0;
        for (i, n) in self.samples_per_iteration.iter().enumerate() {
            acc += n;
            if slot < acc {
                return i as u32 + 1;
            }
        }
        self.samples_per_iteration.len() as u32
    }

    /// Index of `slot` within its own iteration.
    pub fn index_in_iteration(&self, slot: u32) -> u32 {
        let iteration = self.iteration_of_slot(slot) as usize;
        let before: u32 = self.samples_per_iteration[..iteration - 1].iter().sum();
        slot - before
    }

    pub fn top_c(&self, iteration: u32) -> u32 {
        self.top_candidates
            .get(iteration as usize - 1)
            .copied()
            .unwrap_or(1)
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        let bad = |m: &str| Err(DomainError::InvalidBudget(m.to_string()));
        if self.samples_per_iteration.is_empty() {
            return bad("at least one iteration is required");
        }
        if self.samples_per_iteration.iter().any(|&n| n == 0) {
            return bad("every N_s must be positive");
        }
        if self.top_candidates.len() != self.samples_per_iteration.len() {
            return bad("C_s must have one entry per iteration");
        }
        if self.top_candidates.iter().skip(1).any(|&c| c == 0) {
            return bad("every C_s must be positive");
        }
        if self.shortcut_threshold <= BigRational::zero() || self.shortcut_threshold > BigRational::one()
        {
            return bad("W must lie in (0, 1]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    Normal,
    ShortCut,
    FailSafe,
    Done,
}

/// One executed testbench run together with the mode it was produced under.
#[derive(Debug, Clone, PartialEq)]
pub struct ExecutedSample {
    pub sample: CodeSample,
    pub outcome: TestOutcome,
    pub mode: SearchMode,
    pub wall_time_ms: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchState {
    pub task_id: String,
    pub iteration: u32,
    pub mode: SearchMode,
    pub format_errors: u32,
    pub remaining_budget: u32,
    pub cluster: Vec<InformationList>,
    pub solved: bool,
    pub executed_samples: Vec<ExecutedSample>,
    /// Type chosen by the classifier; `None` for baseline runs.
    pub classified_type: Option<CircuitType>,
    /// Becomes `General` once the general procedure takes over.
    pub circuit_type: Option<CircuitType>,
    /// Set when repeated format errors under Fail-safe forced the task to stop early.
    pub abandoned: bool,
}

impl SearchState {
    pub fn new(task_id: &str, budget: u32) -> Self {
        Self {
            task_id: task_id.to_string(),
            iteration: 1,
            mode: SearchMode::Normal,
            format_errors: 0,
            remaining_budget: budget,
            cluster: Vec::new(),
            solved: false,
            executed_samples: Vec::new(),
            classified_type: None,
            circuit_type: None,
            abandoned: false,
        }
    }

    pub fn list(&self, id: &str) -> Option<&InformationList> {
        self.cluster.iter().find(|l| l.id == id)
    }

    pub fn list_mut(&mut self, id: &str) -> Option<&mut InformationList> {
        self.cluster.iter_mut().find(|l| l.id == id)
    }

    /// Insert `list` unless an identical extraction is already present; returns its id.
    pub fn insert_list(&mut self, list: InformationList) -> String {
        let id = list.id.clone();
        if self.list(&id).is_none() {
            self.cluster.push(list);
        }
        id
    }

    pub fn passed_count(&self) -> usize {
        self.executed_samples
            .iter()
            .filter(|s| s.outcome.passed())
            .count()
    }

    pub fn best_pass_rate(&self) -> Option<PassRate> {
        self.executed_samples
            .iter()
            .map(|s| s.outcome.pass_rate())
            .max_by(|a, b| a.ratio().cmp(&b.ratio()))
    }
}
