use std::collections::{BTreeMap, HashSet};

use thiserror::Error;

use super::types::{Environment, ExperimentConfig, RunRecord};

/// A single violated constraint on a configuration, environment or record.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Violation {
    #[error("unknown processor `{0}`")]
    UnknownProcessor(String),
    #[error("active_processors must not be empty")]
    NoActiveProcessor,
    #[error("work_unit_scale must be ≥ 1")]
    NonPositiveScale,
    #[error("repetitions must be ≥ 1")]
    NonPositiveRepetitions,
    #[error("planned_duration_s must be positive, got {0}")]
    NonPositivePlannedDuration(f64),
    #[error("workload_command must not be empty")]
    EmptyCommand,
    #[error("duplicate processor name `{0}`")]
    DuplicateProcessor(String),
    #[error("processor `{name}` has non-positive TDP {tdp}")]
    NonPositiveTdp { name: String, tdp: f64 },
    #[error("co2 efficiency must be ≥ 0, got {0}")]
    NegativeCo2Efficiency(f64),
    #[error("run duration must be positive, got {0}")]
    NonPositiveDuration(f64),
    #[error("ended_at must be after started_at")]
    EndBeforeStart,
    #[error("duration_s {duration} disagrees with wall-clock span {span} by more than 1 s")]
    DurationMismatch { duration: f64, span: f64 },
    #[error("trace source `{source_name}` has non-increasing timestamp at {timestamp}")]
    NonIncreasingTimestamp { source_name: String, timestamp: f64 },
    #[error("invalid power sample ({timestamp} s, {watts} W)")]
    InvalidSample { timestamp: f64, watts: f64 },
    #[error("energy `{0}` must be finite and ≥ 0")]
    InvalidEnergy(&'static str),
    #[error("truth uncertainty must be present iff ground truth is present")]
    UncertaintyMismatch,
}

/// Checks `config` against its own invariants and the processors of `env`.
/// Returns the config unchanged, or every violated constraint.
pub fn validate_config<'a>(
    config: &'a ExperimentConfig,
    env: &Environment,
) -> Result<&'a ExperimentConfig, Vec<Violation>> {
    let mut errors = validate_environment(env).err().unwrap_or_default();
    if config.workload_command.is_empty() {
        errors.push(Violation::EmptyCommand);
    }
    if config.work_unit_scale < 1 {
        errors.push(Violation::NonPositiveScale);
    }
    if config.repetitions < 1 {
        errors.push(Violation::NonPositiveRepetitions);
    }
    if let Some(d) = config.planned_duration_s {
        if !(d > 0.0) {
            errors.push(Violation::NonPositivePlannedDuration(d));
        }
    }
    if config.active_processors.is_empty() {
        errors.push(Violation::NoActiveProcessor);
    }
    for name in &config.active_processors {
        if env.processor(name).is_none() {
            errors.push(Violation::UnknownProcessor(name.clone()));
        }
    }
    if errors.is_empty() {
        Ok(config)
    } else {
        Err(errors)
    }
}

pub fn validate_environment(env: &Environment) -> Result<(), Vec<Violation>> {
    let mut errors = Vec::new();
    let mut seen = HashSet::new();
    for p in &env.processors {
        if !seen.insert(p.name.as_str()) {
            errors.push(Violation::DuplicateProcessor(p.name.clone()));
        }
        if !(p.tdp_watts > 0.0) || !p.tdp_watts.is_finite() {
            errors.push(Violation::NonPositiveTdp {
                name: p.name.clone(),
                tdp: p.tdp_watts,
            });
        }
    }
    let co2 = env.co2_efficiency_kg_per_kwh;
    if !(co2 >= 0.0) || !co2.is_finite() {
        errors.push(Violation::NegativeCo2Efficiency(co2));
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors)
    }
}

/// Full invariant check for a persisted record, including its config.
pub fn validate_record(record: &RunRecord) -> Result<(), Vec<Violation>> {
    let mut errors = validate_config(&record.config, &record.environment)
        .err()
        .unwrap_or_default();
    if !(record.duration_s > 0.0) || !record.duration_s.is_finite() {
        errors.push(Violation::NonPositiveDuration(record.duration_s));
    }
    if record.ended_at <= record.started_at {
        errors.push(Violation::EndBeforeStart);
    }
    let span = record.ended_at.secs_since(record.started_at);
    if (span - record.duration_s).abs() > 1.0 {
        errors.push(Violation::DurationMismatch {
            duration: record.duration_s,
            span,
        });
    }
    for trace in &record.traces {
        let mut last: BTreeMap<&str, f64> = BTreeMap::new();
        for s in &trace.samples {
            if !(s.watts >= 0.0) || !(s.timestamp_s >= 0.0) || !s.watts.is_finite() {
                errors.push(Violation::InvalidSample {
                    timestamp: s.timestamp_s,
                    watts: s.watts,
                });
            }
            if let Some(prev) = last.insert(s.source.as_str(), s.timestamp_s) {
                if s.timestamp_s <= prev {
                    errors.push(Violation::NonIncreasingTimestamp {
                        source_name: s.source.clone(),
                        timestamp: s.timestamp_s,
                    });
                }
            }
        }
    }
    let e = &record.energies;
    let check = |v: f64| v.is_finite() && v >= 0.0;
    if !check(e.static_ws) {
        errors.push(Violation::InvalidEnergy("static_ws"));
    }
    if e.dynamic_ws.is_some_and(|v| !check(v)) {
        errors.push(Violation::InvalidEnergy("dynamic_ws"));
    }
    if e.ground_truth_ws.is_some_and(|v| !check(v)) {
        errors.push(Violation::InvalidEnergy("ground_truth_ws"));
    }
    if e.truth_uncertainty_ws.is_some_and(|v| !check(v)) {
        errors.push(Violation::InvalidEnergy("truth_uncertainty_ws"));
    }
    if e.ground_truth_ws.is_some() != e.truth_uncertainty_ws.is_some() {
        errors.push(Violation::UncertaintyMismatch);
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors)
    }
}
