// SPDX-License-Identifier: Apache-2.0

//! Simulator stand-in that scores code by substring keys.

use serde::Deserialize;

use super::{InfrastructureError, SampleSlot, Simulator};
use crate::domain::{CodeSample, Task, TestOutcome};

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct MockRule {
    pub key: String,
    pub passed: u64,
    pub total: u64,
}

/// The first rule whose key occurs in the candidate decides the outcome;
/// code matching no rule counts as a compile error.
#[derive(Debug, Clone, Default)]
pub struct MockSimulator {
    rules: Vec<MockRule>,
}

impl MockSimulator {
    pub fn new(rules: Vec<MockRule>) -> Result<Self, InfrastructureError> {
        if let Some(r) = rules.iter().find(|r| r.total == 0 || r.passed > r.total || r.key.is_empty()) {
            return Err(InfrastructureError(format!(
                "mock rule {:?}: needs a key and 0 <= passed <= total, total >= 1",
                r.key
            )));
        }
        Ok(Self { rules })
    }

    pub fn mock_simulate(&self, code: &str) -> TestOutcome {
        self.rules
            .iter()
            .find(|r| code.contains(&r.key))
            .map(|r| TestOutcome::from_counts(r.passed, r.total).expect("validated in new"))
            .unwrap_or_else(TestOutcome::compile_error)
    }
}

impl Simulator for MockSimulator {
    fn run_testbench(&self, code: &CodeSample, _task: &Task, _slot: SampleSlot) -> Result<TestOutcome, InfrastructureError> {
        Ok(self.mock_simulate(&code.verilog_src))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{f64_to_rational, TestStatus};

    fn rule(key: &str, passed: u64, total: u64) -> MockRule {
        MockRule {
            key: key.into(),
            passed,
            total,
        }
    }

    #[test]
    fn scripted_outcomes() {
        let m = MockSimulator::new(vec![rule("PASS_ALL", 10, 10), rule("NINE", 9, 10)]).unwrap();
        assert!(m.mock_simulate("// PASS_ALL").passed());
        assert_eq!(m.mock_simulate("NINE").pass_rate().ratio(), f64_to_rational(0.9).unwrap());
        assert_eq!(m.mock_simulate("nothing").status, TestStatus::CompileError);
    }

    #[test]
    fn first_match_wins() {
        let m = MockSimulator::new(vec![rule("A", 1, 2), rule("AB", 2, 2)]).unwrap();
        assert_eq!(m.mock_simulate("AB").passed_samples, 1);
    }

    #[test]
    fn invalid_rules_rejected() {
        assert!(MockSimulator::new(vec![rule("A", 3, 2)]).is_err());
        assert!(MockSimulator::new(vec![rule("A", 0, 0)]).is_err());
    }
}
