use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::{DateTime, SecondsFormat, TimeZone, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::meter::MeterTimeline;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProcessorKind {
    Cpu,
    Gpu,
    Other,
}

impl fmt::Display for ProcessorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProcessorKind::Cpu => "cpu",
            ProcessorKind::Gpu => "gpu",
            ProcessorKind::Other => "other",
        })
    }
}

/// A processor in the execution environment together with the constant
/// power rating used for static estimation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessorRef {
    pub kind: ProcessorKind,
    pub name: String,
    pub tdp_watts: f64,
}

impl ProcessorRef {
    pub fn new(kind: ProcessorKind, name: impl Into<String>, tdp_watts: f64) -> Self {
        Self {
            kind,
            name: name.into(),
            tdp_watts,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WorkUnit {
    Inference,
    Query,
}

impl fmt::Display for WorkUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WorkUnit::Inference => "inference",
            WorkUnit::Query => "query",
        })
    }
}

fn default_repetitions() -> u32 {
    3
}

fn default_scale() -> u64 {
    1
}

/// Declarative description of one workload and how its work is counted.
///
/// Active processors are referenced by name and resolved against the
/// [`Environment`] the run executes in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub workload_command: Vec<String>,
    #[serde(default)]
    pub domain_tag: String,
    pub work_unit: WorkUnit,
    #[serde(default = "default_scale")]
    pub work_unit_scale: u64,
    #[serde(default)]
    pub hyperparameters: BTreeMap<String, String>,
    pub active_processors: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planned_duration_s: Option<f64>,
    #[serde(default = "default_repetitions")]
    pub repetitions: u32,
}

impl ExperimentConfig {
    /// Human-facing label: the `model` hyperparameter when present, else the
    /// joined workload command.
    pub fn label(&self) -> String {
        match self.hyperparameters.get("model") {
            Some(m) => m.clone(),
            None => self.workload_command.join(" "),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub processors: Vec<ProcessorRef>,
    #[serde(default)]
    pub host_label: String,
    pub co2_efficiency_kg_per_kwh: f64,
}

impl Environment {
    pub fn processor(&self, name: &str) -> Option<&ProcessorRef> {
        self.processors.iter().find(|p| p.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSample {
    pub timestamp_s: f64,
    pub watts: f64,
    pub source: String,
}

impl PowerSample {
    pub fn new(timestamp_s: f64, watts: f64, source: impl Into<String>) -> Self {
        Self {
            timestamp_s,
            watts,
            source: source.into(),
        }
    }
}

/// Time-ordered power samples taken at a nominal interval. A trace may hold
/// several sources; timestamps only need to increase within one source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerTrace {
    pub samples: Vec<PowerSample>,
    pub nominal_interval_s: f64,
}

impl PowerTrace {
    pub fn new(nominal_interval_s: f64) -> Self {
        Self {
            samples: Vec::new(),
            nominal_interval_s,
        }
    }

    /// Builds a single-source trace from `(timestamp_s, watts)` pairs.
    pub fn from_points(source: &str, nominal_interval_s: f64, points: &[(f64, f64)]) -> Self {
        Self {
            samples: points
                .iter()
                .map(|&(t, w)| PowerSample::new(t, w, source))
                .collect(),
            nominal_interval_s,
        }
    }

    pub fn sources(&self) -> BTreeSet<&str> {
        self.samples.iter().map(|s| s.source.as_str()).collect()
    }

    /// Samples of one source, in stored order.
    pub fn source_samples<'a>(&'a self, source: &'a str) -> impl Iterator<Item = &'a PowerSample> + 'a {
        self.samples.iter().filter(move |s| s.source == source)
    }
}

/// The three energy figures of one run, in watt-seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyTriple {
    pub static_ws: f64,
    pub dynamic_ws: Option<f64>,
    pub ground_truth_ws: Option<f64>,
    pub truth_uncertainty_ws: Option<f64>,
}

impl EnergyTriple {
    pub fn new(static_ws: f64, dynamic_ws: Option<f64>) -> Self {
        Self {
            static_ws,
            dynamic_ws,
            ground_truth_ws: None,
            truth_uncertainty_ws: None,
        }
    }

    pub fn with_truth(mut self, truth_ws: f64, uncertainty_ws: f64) -> Self {
        self.ground_truth_ws = Some(truth_ws);
        self.truth_uncertainty_ws = Some(uncertainty_ws);
        self
    }

    /// Multiplies every present energy by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            static_ws: self.static_ws * factor,
            dynamic_ws: self.dynamic_ws.map(|v| v * factor),
            ground_truth_ws: self.ground_truth_ws.map(|v| v * factor),
            truth_uncertainty_ws: self.truth_uncertainty_ws.map(|v| v * factor),
        }
    }
}

/// UTC wall-clock instant truncated to whole milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WallTime(DateTime<Utc>);

impl WallTime {
    pub fn now() -> Self {
        Self::from_datetime(Utc::now())
    }

    pub fn from_datetime(dt: DateTime<Utc>) -> Self {
        Self::from_epoch_millis(dt.timestamp_millis())
    }

    pub fn from_epoch_millis(ms: i64) -> Self {
        WallTime(
            Utc.timestamp_millis_opt(ms)
                .single()
                .expect("epoch milliseconds within chrono range"),
        )
    }

    /// Rounds fractional epoch seconds to the nearest millisecond.
    pub fn from_epoch_secs(secs: f64) -> Self {
        Self::from_epoch_millis((secs * 1000.0).round() as i64)
    }

    pub fn epoch_millis(&self) -> i64 {
        self.0.timestamp_millis()
    }

    pub fn epoch_secs(&self) -> f64 {
        self.epoch_millis() as f64 / 1000.0
    }

    pub fn datetime(&self) -> DateTime<Utc> {
        self.0
    }

    /// Shifts by a (possibly negative) number of seconds, rounded to ms.
    pub fn offset_secs(&self, secs: f64) -> Self {
        Self::from_epoch_millis(self.epoch_millis() + (secs * 1000.0).round() as i64)
    }

    /// Signed seconds from `earlier` to `self`.
    pub fn secs_since(&self, earlier: WallTime) -> f64 {
        (self.epoch_millis() - earlier.epoch_millis()) as f64 / 1000.0
    }
}

impl fmt::Display for WallTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.to_rfc3339_opts(SecondsFormat::Millis, true))
    }
}

impl Serialize for WallTime {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for WallTime {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        let dt = DateTime::parse_from_rfc3339(&raw).map_err(serde::de::Error::custom)?;
        Ok(WallTime::from_datetime(dt.with_timezone(&Utc)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Failed { exit_code: Option<i32>, reason: String },
}

impl RunStatus {
    pub fn is_completed(&self) -> bool {
        matches!(self, RunStatus::Completed)
    }
}

/// One persisted execution: inputs, timing, raw evidence and derived energies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series_id: Option<String>,
    #[serde(default)]
    pub run_index: u32,
    pub config: ExperimentConfig,
    pub environment: Environment,
    pub started_at: WallTime,
    pub ended_at: WallTime,
    pub duration_s: f64,
    pub work_units_completed: u64,
    pub traces: Vec<PowerTrace>,
    pub meter_timeline: Option<MeterTimeline>,
    pub energies: EnergyTriple,
    #[serde(default)]
    pub dynamic_coverage: Option<f64>,
    #[serde(default)]
    pub sampling_degraded: bool,
    pub status: RunStatus,
    #[serde(default)]
    pub notes: String,
}
