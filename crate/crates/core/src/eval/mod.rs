// SPDX-License-Identifier: Apache-2.0

//! Pass@k estimation, error-rate histograms and run reports.

pub mod report;

use num_bigint::BigInt;
use num_integer::binomial;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

pub use report::{Aggregate, RunReport, SampleLog, SampleRecord, TaskFailure, TaskRecord, SCHEMA_VERSION};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("pass@k needs 0 <= c <= n and 1 <= k <= n, got n={n}, c={c}, k={k}")]
    OutOfRange { n: u64, c: u64, k: u64 },
    #[error("no tasks to aggregate")]
    Empty,
    #[error("error rate {0} is outside [0, 1]")]
    RateOutOfRange(String),
}

fn check(n: u64, c: u64, k: u64) -> Result<(), EvalError> {
    if c > n || k == 0 || k > n {
        return Err(EvalError::OutOfRange { n, c, k });
    }
    Ok(())
}

/// Unbiased pass@k estimate `1 - C(n-c, k) / C(n, k)` in floating point,
/// using the product form that avoids large binomials.
pub fn pass_at_k(n: u64, c: u64, k: u64) -> Result<f64, EvalError> {
    check(n, c, k)?;
    if n - c < k {
        return Ok(1.0);
    }
    let prod: f64 = (n - c + 1..=n).map(|i| 1.0 - k as f64 / i as f64).product();
    Ok(1.0 - prod)
}

/// The same estimate as an exact rational.
pub fn pass_at_k_exact(n: u64, c: u64, k: u64) -> Result<BigRational, EvalError> {
    check(n, c, k)?;
    if n - c < k {
        return Ok(BigRational::one());
    }
    let fail = BigRational::new(binomial(BigInt::from(n - c), BigInt::from(k)), binomial(BigInt::from(n), BigInt::from(k)));
    Ok(BigRational::one() - fail)
}

/// Mean pass@k over tasks given as `(n, c)` pairs.
pub fn aggregate_pass_at_k(outcomes: &[(u64, u64)], k: u64) -> Result<BigRational, EvalError> {
    if outcomes.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut sum = BigRational::zero();
    for &(n, c) in outcomes {
        sum += pass_at_k_exact(n, c, k)?;
    }
    Ok(sum / BigRational::from_integer(BigInt::from(outcomes.len())))
}

/// Counts per error-rate interval `[0,.2) [.2,.4) [.4,.6) [.6,.8) [.8,1]`.
pub fn error_rate_histogram(rates: &[BigRational]) -> Result<[u64; 5], EvalError> {
    let five = BigRational::from_integer(5.into());
    let mut counts = [0u64; 5];
    for r in rates {
        if r < &BigRational::zero() || r > &BigRational::one() {
            return Err(EvalError::RateOutOfRange(r.to_string()));
        }
        let bucket = (r * &five).floor().to_integer().to_usize().unwrap_or(4).min(4);
        counts[bucket] += 1;
    }
    Ok(counts)
}
