// SPDX-License-Identifier: MIT OR Apache-2.0

//! One-sample, one-tailed t-tests over per-naming accuracy deltas.

mod special;
mod table;

pub use special::{ln_gamma, regularized_incomplete_beta, t_cdf};
pub use table::{read_accuracy_csv, steering_table, write_table_csv, AccuracyTable, TableRow};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("need at least 2 observations, got {0}")]
    TooFewSamples(usize),
    #[error("all observations are identical, the standard error is zero")]
    ZeroVariance,
    #[error("non-finite observation {0}")]
    NonFinite(f64),
    #[error("naming keys differ between conditions: {0}")]
    KeyMismatch(String),
    #[error("unknown condition {0:?}")]
    UnknownCondition(String),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Per-naming accuracy improvements, as fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaSample {
    values: Vec<f64>,
}

impl DeltaSample {
    pub fn new(values: Vec<f64>) -> Result<Self, StatsError> {
        if values.len() < 2 {
            return Err(StatsError::TooFewSamples(values.len()));
        }
        if let Some(&v) = values.iter().find(|v| !v.is_finite()) {
            return Err(StatsError::NonFinite(v));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub mean: f64,
    pub se: f64,
    pub t: f64,
    /// One-tailed, `P(T >= t)` under the null of zero mean.
    pub p: f64,
    pub df: u32,
}

impl TestResult {
    /// The test from an already summarized sample of size `n`.
    pub fn from_summary(mean: f64, se: f64, n: usize) -> Result<Self, StatsError> {
        if n < 2 {
            return Err(StatsError::TooFewSamples(n));
        }
        if se <= 0.0 {
            return Err(StatsError::ZeroVariance);
        }
        let df = (n - 1) as u32;
        let t = mean / se;
        Ok(Self {
            mean,
            se,
            t,
            p: (1.0 - t_cdf(df, t)).clamp(0.0, 1.0),
            df,
        })
    }

    pub fn stars(&self) -> &'static str {
        significance(self.p)
    }
}

/// `***` below 0.001, `**` below 0.01, `*` below 0.05, otherwise `ns`.
pub fn significance(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        "ns"
    }
}

pub fn one_sample_t(sample: &DeltaSample) -> Result<TestResult, StatsError> {
    let v = sample.values();
    let n = v.len();
    if n < 2 {
        return Err(StatsError::TooFewSamples(n));
    }
    let mean = v.iter().sum::<f64>() / n as f64;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    if var == 0.0 || v.iter().all(|&x| x == v[0]) {
        return Err(StatsError::ZeroVariance);
    }
    TestResult::from_summary(mean, (var / n as f64).sqrt(), n)
}

/// `steered - baseline` per naming, in key order.
pub fn summarize(baseline: &BTreeMap<u32, f64>, steered: &BTreeMap<u32, f64>) -> Result<DeltaSample, StatsError> {
    if !baseline.keys().eq(steered.keys()) {
        let show = |m: &BTreeMap<u32, f64>| m.keys().map(u32::to_string).collect::<Vec<_>>().join(",");
        return Err(StatsError::KeyMismatch(format!(
            "baseline [{}] vs steered [{}]",
            show(baseline),
            show(steered)
        )));
    }
    DeltaSample::new(steered.iter().map(|(k, s)| s - baseline[k]).collect())
}
