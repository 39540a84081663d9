// SPDX-License-Identifier: Apache-2.0

//! Running candidates against testbenches.

pub mod icarus;
pub mod mock;
pub mod oracle;

use regex::Regex;
use thiserror::Error;

use crate::domain::{CodeSample, Task, TestOutcome};

pub use icarus::{IcarusConfig, IcarusSimulator};
pub use mock::MockSimulator;
pub use oracle::TableOracleSimulator;

/// The harness itself failed; the candidate was not judged.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("simulator infrastructure: {0}")]
pub struct InfrastructureError(pub String);

/// Identifies one execution for scratch-directory naming.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleSlot {
    pub index: u32,
}

pub trait Simulator: Send + Sync {
    fn run_testbench(&self, code: &CodeSample, task: &Task, slot: SampleSlot) -> Result<TestOutcome, InfrastructureError>;
}

impl<S: Simulator + ?Sized> Simulator for Box<S> {
    fn run_testbench(&self, code: &CodeSample, task: &Task, slot: SampleSlot) -> Result<TestOutcome, InfrastructureError> {
        (**self).run_testbench(code, task, slot)
    }
}

impl<S: Simulator + ?Sized> Simulator for std::sync::Arc<S> {
    fn run_testbench(&self, code: &CodeSample, task: &Task, slot: SampleSlot) -> Result<TestOutcome, InfrastructureError> {
        (**self).run_testbench(code, task, slot)
    }
}

/// Simulator backed by a closure, for scoring rules that need no HDL tools.
pub struct FnSimulator<F>(pub F);

impl<F> Simulator for FnSimulator<F>
where
    F: Fn(&CodeSample, &Task, SampleSlot) -> Result<TestOutcome, InfrastructureError> + Send + Sync,
{
    fn run_testbench(&self, code: &CodeSample, task: &Task, slot: SampleSlot) -> Result<TestOutcome, InfrastructureError> {
        (self.0)(code, task, slot)
    }
}

pub const DEFAULT_PATTERNS: &[&str] = &[
    r"Hint: Total mismatched samples is (?P<mismatches>\d+) out of (?P<total>\d+) samples",
    r"Mismatches: (?P<mismatches>\d+) in (?P<total>\d+) samples",
];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("pattern {pattern:?}: {message}")]
    BadPattern { pattern: String, message: String },
    #[error("pattern {0:?} needs a `total` group and a `mismatches` or `passed` group")]
    MissingGroups(String),
}

/// Regexes that read pass counts out of simulator output. Each pattern has
/// a `total` group and either a `mismatches` or a `passed` group.
#[derive(Debug, Clone)]
pub struct PassCountProtocol {
    patterns: Vec<Regex>,
}

impl Default for PassCountProtocol {
    fn default() -> Self {
        Self::new(DEFAULT_PATTERNS.iter().copied()).expect("default patterns are valid")
    }
}

impl PassCountProtocol {
    pub fn new<'a>(patterns: impl IntoIterator<Item = &'a str>) -> Result<Self, ProtocolError> {
        let patterns = patterns
            .into_iter()
            .map(|p| {
                let re = Regex::new(p).map_err(|e| ProtocolError::BadPattern {
                    pattern: p.to_string(),
                    message: e.to_string(),
                })?;
                let names: Vec<&str> = re.capture_names().flatten().collect();
                if !names.contains(&"total") || !(names.contains(&"mismatches") || names.contains(&"passed")) {
                    return Err(ProtocolError::MissingGroups(p.to_string()));
                }
                Ok(re)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { patterns })
    }

    /// `(passed, total)` from the last line any pattern recognizes.
    pub fn parse(&self, output: &str) -> Option<(u64, u64)> {
        let mut found = None;
        for line in output.lines() {
            for re in &self.patterns {
                let Some(c) = re.captures(line) else { continue };
                let total: u64 = match c.name("total").and_then(|m| m.as_str().parse().ok()) {
                    Some(t) if t > 0 => t,
                    _ => continue,
                };
                let passed = if let Some(m) = c.name("mismatches") {
                    total.saturating_sub(m.as_str().parse().unwrap_or(total))
                } else {
                    c.name("passed").and_then(|m| m.as_str().parse().ok()).unwrap_or(0).min(total)
                };
                found = Some((passed, total));
                break;
            }
        }
        found
    }

    /// Outcome of a run that compiled: recognized counts, else the exit status.
    pub fn outcome(&self, output: &str, exited_cleanly: bool) -> TestOutcome {
        match self.parse(output) {
            Some((m, n)) => TestOutcome::from_counts(m, n).expect("m <= n by construction"),
            None if exited_cleanly => TestOutcome::from_counts(1, 1).expect("valid"),
            None => TestOutcome::from_counts(0, 1).expect("valid"),
        }
    }
}
