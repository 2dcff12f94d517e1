//! pass@k, dependency invocation rate and aggregate reporting.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::GenerationRecord;
use crate::python::{collect_identifiers, detect_empty_body};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("pass@k needs 0 <= c <= n and 1 <= k <= n, got n={n} c={c} k={k}")]
    PassAtK { n: usize, c: usize, k: usize },
    #[error("sample `{sample_id}` has {got} candidates, expected {expected}")]
    HeterogeneousN {
        sample_id: String,
        got: usize,
        expected: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PassAtKInput {
    pub n: usize,
    pub c: usize,
    pub k: usize,
}

impl PassAtKInput {
    pub fn new(n: usize, c: usize, k: usize) -> Result<Self, MetricsError> {
        if c > n || k == 0 || k > n {
            return Err(MetricsError::PassAtK { n, c, k });
        }
        Ok(Self { n, c, k })
    }
}

/// Unbiased pass@k estimate from `n` samples with `c` correct.
pub fn pass_at_k(input: PassAtKInput) -> Result<f64, MetricsError> {
    let PassAtKInput { n, c, k } = PassAtKInput::new(input.n, input.c, input.k)?;
    if n - c < k {
        return Ok(1.0);
    }
    let miss: f64 = (n - c + 1..=n).map(|i| 1.0 - k as f64 / i as f64).product();
    Ok(1.0 - miss)
}

/// |D_g ∩ D_s| / |D_s|, absent when D_s is empty.
pub fn dir(generated: &BTreeSet<String>, dependency_names: &BTreeSet<String>) -> Option<f64> {
    if dependency_names.is_empty() {
        return None;
    }
    let hit = dependency_names.intersection(generated).count();
    Some(hit as f64 / dependency_names.len() as f64)
}

/// DIR of a candidate's text.
pub fn dir_of_text(candidate: &str, dependency_names: &BTreeSet<String>) -> Option<f64> {
    dir(&collect_identifiers(candidate), dependency_names)
}

pub fn empty_rate(records: &[GenerationRecord]) -> f64 {
    if records.is_empty() {
        return 0.0;
    }
    let empty = records
        .iter()
        .filter(|r| detect_empty_body(&r.generated_text))
        .count();
    empty as f64 / records.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateSummary {
    /// Keyed by k.
    pub pass_at_k: BTreeMap<usize, f64>,
    /// Mean over samples whose DIR is defined.
    pub mean_dir: Option<f64>,
    pub empty_rate: f64,
    pub samples: usize,
    pub samples_with_dir: usize,
    pub candidates_per_sample: usize,
}

/// Mean DIR of one sample's candidates, absent when its D_s is empty.
fn sample_dir(records: &[GenerationRecord]) -> Option<f64> {
    let values: Vec<f64> = records.iter().filter_map(|r| r.dir_value).collect();
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Averages per-sample pass@k and DIR. Values of k larger than the number
/// of candidates are left out of the summary.
pub fn aggregate(
    by_sample: &BTreeMap<String, Vec<GenerationRecord>>,
    ks: &[usize],
) -> Result<AggregateSummary, MetricsError> {
    let n = by_sample.values().next().map_or(0, Vec::len);
    for (sample_id, records) in by_sample {
        if records.len() != n {
            return Err(MetricsError::HeterogeneousN {
                sample_id: sample_id.clone(),
                got: records.len(),
                expected: n,
            });
        }
    }
    let samples = by_sample.len();
    let mut pass = BTreeMap::new();
    for &k in ks {
        if k == 0 || k > n {
            continue;
        }
        let mut total = 0.0;
        for records in by_sample.values() {
            let c = records.iter().filter(|r| r.passed_all).count();
            total += pass_at_k(PassAtKInput { n, c, k })?;
        }
        pass.insert(k, total / samples as f64);
    }
    let dirs: Vec<f64> = by_sample.values().filter_map(|r| sample_dir(r)).collect();
    let mean_dir = (!dirs.is_empty()).then(|| dirs.iter().sum::<f64>() / dirs.len() as f64);
    let all: Vec<GenerationRecord> = by_sample.values().flatten().cloned().collect();
    Ok(AggregateSummary {
        pass_at_k: pass,
        mean_dir,
        empty_rate: empty_rate(&all),
        samples,
        samples_with_dir: dirs.len(),
        candidates_per_sample: n,
    })
}

/// Plain-text table with one row per labelled run.
pub fn render_table(rows: &[(String, AggregateSummary)]) -> String {
    let pct = |v: Option<f64>| v.map_or_else(|| "-".to_owned(), |v| format!("{:.2}", v * 100.0));
    let width = rows
        .iter()
        .map(|(l, _)| l.len())
        .max()
        .unwrap_or(0)
        .max("run".len());
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<width$}  {:>7}  {:>7}  {:>7}  {:>7}",
        "run", "pass@1", "pass@5", "DIR", "samples"
    );
    for (label, s) in rows {
        let _ = writeln!(
            out,
            "{:<width$}  {:>7}  {:>7}  {:>7}  {:>7}",
            label,
            pct(s.pass_at_k.get(&1).copied()),
            pct(s.pass_at_k.get(&5).copied()),
            pct(s.mean_dir),
            s.samples
        );
    }
    out
}
