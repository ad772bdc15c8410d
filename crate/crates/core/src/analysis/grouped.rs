use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::aggregate::{Aggregate, Metric};
use super::errors::Approach;
use super::measures::Source;
use crate::model::RunRecord;

/// How records are partitioned.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum GroupDimension {
    Hyperparameter(String),
    /// Kinds of the active processors, e.g. `cpu` or `cpu+gpu`.
    ProcessorKind,
}

impl FromStr for GroupDimension {
    type Err = String;

    /// `processor` selects processor kind; `hp:<key>` or a bare key selects
    /// a hyperparameter.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        match s {
            "" => Err("empty group dimension".into()),
            "processor" | "processor-kind" | "processor_kind" => Ok(GroupDimension::ProcessorKind),
            _ => {
                let key = s.strip_prefix("hp:").unwrap_or(s);
                if key.is_empty() {
                    Err("empty hyperparameter key".into())
                } else {
                    Ok(GroupDimension::Hyperparameter(key.to_string()))
                }
            }
        }
    }
}

impl fmt::Display for GroupDimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupDimension::Hyperparameter(k) => write!(f, "hp:{k}"),
            GroupDimension::ProcessorKind => f.write_str("processor"),
        }
    }
}

impl GroupDimension {
    /// Group key of `record`, absent when the record lacks the dimension.
    pub fn key_of(&self, record: &RunRecord) -> Option<String> {
        match self {
            GroupDimension::Hyperparameter(k) => record.config.hyperparameters.get(k).cloned(),
            GroupDimension::ProcessorKind => {
                let kinds: Option<BTreeSet<String>> = record
                    .config
                    .active_processors
                    .iter()
                    .map(|n| record.environment.processor(n).map(|p| p.kind.to_string()))
                    .collect();
                let kinds = kinds?;
                (!kinds.is_empty()).then(|| kinds.into_iter().collect::<Vec<_>>().join("+"))
            }
        }
    }
}

/// Metrics aggregated for every group.
pub const GROUP_METRICS: [Metric; 9] = [
    Metric::Energy(Source::Static),
    Metric::Energy(Source::Dynamic),
    Metric::Energy(Source::GroundTruth),
    Metric::AveragePower(Source::GroundTruth),
    Metric::PerUnit(Source::GroundTruth),
    Metric::RelativeError(Approach::Static),
    Metric::RelativeError(Approach::Dynamic),
    Metric::ErrorMagnitude(Approach::Static),
    Metric::ErrorMagnitude(Approach::Dynamic),
];

/// Metrics compared pairwise between groups.
pub const RATIO_METRICS: [Metric; 3] = [
    Metric::ErrorMagnitude(Approach::Dynamic),
    Metric::ErrorMagnitude(Approach::Static),
    Metric::Energy(Source::GroundTruth),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub key: String,
    pub run_ids: Vec<String>,
    /// Keyed by metric name; a metric absent from every run is omitted.
    pub metrics: BTreeMap<String, Aggregate>,
}

impl GroupStats {
    pub fn get(&self, metric: Metric) -> Option<&Aggregate> {
        self.metrics.get(&metric.to_string())
    }
}

/// `numerator` mean divided by `denominator` mean for one metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRatio {
    pub metric: String,
    pub numerator: String,
    pub denominator: String,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupedComparison {
    pub dimension: String,
    pub groups: Vec<GroupStats>,
    pub ratios: Vec<GroupRatio>,
    /// Runs lacking the dimension, left out of every group.
    pub excluded: Vec<String>,
}

impl GroupedComparison {
    pub fn group(&self, key: &str) -> Option<&GroupStats> {
        self.groups.iter().find(|g| g.key == key)
    }

    pub fn ratio(&self, numerator: &str, denominator: &str, metric: Metric) -> Option<f64> {
        let m = metric.to_string();
        self.ratios
            .iter()
            .find(|r| r.numerator == numerator && r.denominator == denominator && r.metric == m)
            .map(|r| r.ratio)
    }
}

pub fn grouped_comparison(records: &[RunRecord], dimension: &GroupDimension) -> GroupedComparison {
    let mut partition: BTreeMap<String, Vec<&RunRecord>> = BTreeMap::new();
    let mut excluded = Vec::new();
    for r in records {
        match dimension.key_of(r) {
            Some(k) => partition.entry(k).or_default().push(r),
            None => excluded.push(r.run_id.clone()),
        }
    }
    if !excluded.is_empty() {
        log::warn!("{} run(s) lack dimension {dimension} and were excluded", excluded.len());
    }
    let groups: Vec<GroupStats> = partition
        .into_iter()
        .map(|(key, runs)| {
            let metrics = GROUP_METRICS
                .iter()
                .filter_map(|m| {
                    let values: Vec<f64> = runs.iter().filter_map(|r| m.value(r)).collect();
                    Aggregate::of(&values).map(|a| (m.to_string(), a))
                })
                .collect();
            GroupStats {
                key,
                run_ids: runs.iter().map(|r| r.run_id.clone()).collect(),
                metrics,
            }
        })
        .collect();
    let mut ratios = Vec::new();
    for a in &groups {
        for b in &groups {
            if a.key == b.key {
                continue;
            }
            for m in RATIO_METRICS {
                if let (Some(x), Some(y)) = (a.get(m), b.get(m)) {
                    if y.mean != 0.0 {
                        ratios.push(GroupRatio {
                            metric: m.to_string(),
                            numerator: a.key.clone(),
                            denominator: b.key.clone(),
                            ratio: x.mean / y.mean,
                        });
                    }
                }
            }
        }
    }
    GroupedComparison {
        dimension: dimension.to_string(),
        groups,
        ratios,
        excluded,
    }
}
