use std::fmt;

use serde::{Deserialize, Serialize};

use super::errors::{estimation_errors, Approach};
use super::measures::{average_power, energies, per_unit_energy, Source};
use super::AnalysisError;
use crate::model::RunRecord;

/// Mean and sample standard deviation (n − 1 denominator).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub sample_std: f64,
    pub n: usize,
}

impl Aggregate {
    /// Deviations are taken from the first value, so `n` identical values
    /// give that value back exactly with zero spread.
    pub fn of(values: &[f64]) -> Option<Self> {
        let (&first, _) = values.split_first()?;
        let n = values.len();
        let shift = values.iter().map(|v| v - first).sum::<f64>() / n as f64;
        let mean = first + shift;
        let sample_std = if n < 2 {
            0.0
        } else {
            let ss: f64 = values.iter().map(|v| (v - first - shift).powi(2)).sum();
            (ss / (n - 1) as f64).sqrt()
        };
        Some(Self { mean, sample_std, n })
    }
}

/// A per-run quantity to aggregate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    Energy(Source),
    AveragePower(Source),
    /// Energy per `work_unit_scale` work units.
    PerUnit(Source),
    AbsoluteError(Approach),
    RelativeError(Approach),
    ErrorMagnitude(Approach),
    Duration,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Energy(s) => write!(f, "{s}_ws"),
            Metric::AveragePower(s) => write!(f, "{s}_w"),
            Metric::PerUnit(s) => write!(f, "{s}_per_unit_ws"),
            Metric::AbsoluteError(a) => write!(f, "{a}_abs_err_ws"),
            Metric::RelativeError(a) => write!(f, "{a}_rel_err"),
            Metric::ErrorMagnitude(a) => write!(f, "{a}_err_magnitude_ws"),
            Metric::Duration => f.write_str("duration_s"),
        }
    }
}

impl Metric {
    /// Value of this metric for `record`, absent when its inputs are.
    pub fn value(&self, record: &RunRecord) -> Option<f64> {
        match *self {
            Metric::Energy(s) => energies(record).get(s),
            Metric::AveragePower(s) => average_power(record).ok()?.get(s),
            Metric::PerUnit(s) => per_unit_energy(record, record.config.work_unit_scale).ok()?.get(s),
            Metric::AbsoluteError(a) => Some(estimation_errors(&record.energies).ok()?.get(a)?.absolute_ws),
            Metric::RelativeError(a) => Some(estimation_errors(&record.energies).ok()?.get(a)?.relative),
            Metric::ErrorMagnitude(a) => Some(estimation_errors(&record.energies).ok()?.get(a)?.magnitude_ws),
            Metric::Duration => Some(record.duration_s),
        }
    }
}

/// Aggregates `metric` over runs of one configuration. Runs where the
/// metric is absent are left out of `n`.
pub fn aggregate_series(records: &[RunRecord], metric: Metric) -> Result<Aggregate, AnalysisError> {
    let (first, rest) = records.split_first().ok_or(AnalysisError::Empty)?;
    if let Some(other) = rest.iter().find(|r| r.config != first.config) {
        return Err(AnalysisError::MixedConfigs {
            first: first.run_id.clone(),
            other: other.run_id.clone(),
        });
    }
    let values: Vec<f64> = records.iter().filter_map(|r| metric.value(r)).collect();
    Aggregate::of(&values).ok_or(AnalysisError::MetricAbsent(metric.to_string()))
}

/// Five-number summary with nearest-rank quantiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Nearest-rank quantile of sorted `values`: the smallest value with at
/// least a `p` share of values at or below it.
pub fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty set");
    let rank = (p * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

impl BoxStats {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Some(Self {
            n: v.len(),
            min: v[0],
            q1: nearest_rank(&v, 0.25),
            median: nearest_rank(&v, 0.5),
            q3: nearest_rank(&v, 0.75),
            max: v[v.len() - 1],
        })
    }
}
