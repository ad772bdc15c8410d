use std::fmt;

use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::model::RunRecord;

/// One of the three energy figures of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Static,
    Dynamic,
    GroundTruth,
}

impl Source {
    pub const ALL: [Source; 3] = [Source::Static, Source::Dynamic, Source::GroundTruth];
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Static => "static",
            Source::Dynamic => "dynamic",
            Source::GroundTruth => "ground_truth",
        })
    }
}

/// A value per quantification approach; dynamic and ground truth may be
/// absent for a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerApproach<T> {
    #[serde(rename = "static")]
    pub static_: T,
    pub dynamic: Option<T>,
    pub ground_truth: Option<T>,
}

impl<T: Copy> PerApproach<T> {
    pub fn get(&self, source: Source) -> Option<T> {
        match source {
            Source::Static => Some(self.static_),
            Source::Dynamic => self.dynamic,
            Source::GroundTruth => self.ground_truth,
        }
    }

    pub fn map<U>(self, f: impl Fn(T) -> U) -> PerApproach<U> {
        PerApproach {
            static_: f(self.static_),
            dynamic: self.dynamic.map(&f),
            ground_truth: self.ground_truth.map(&f),
        }
    }
}

pub fn energies(record: &RunRecord) -> PerApproach<f64> {
    let e = &record.energies;
    PerApproach {
        static_: e.static_ws,
        dynamic: e.dynamic_ws,
        ground_truth: e.ground_truth_ws,
    }
}

/// Energy per `basis` work units, Ws.
pub fn per_unit_energy(record: &RunRecord, basis: u64) -> Result<PerApproach<f64>, AnalysisError> {
    if basis == 0 {
        return Err(AnalysisError::ZeroBasis);
    }
    if record.work_units_completed == 0 {
        return Err(AnalysisError::NoWorkUnits(record.run_id.clone()));
    }
    let units = record.work_units_completed as f64;
    let basis = basis as f64;
    Ok(energies(record).map(|ws| ws * basis / units))
}

/// Mean draw over the run, W. The static figure is the assumed constant
/// itself, not a quotient, so it is exact.
pub fn average_power(record: &RunRecord) -> Result<PerApproach<f64>, AnalysisError> {
    if !(record.duration_s > 0.0) {
        return Err(AnalysisError::NonPositiveDuration(record.run_id.clone()));
    }
    let assumed: Option<f64> = record
        .config
        .active_processors
        .iter()
        .map(|n| record.environment.processor(n).map(|p| p.tdp_watts))
        .sum();
    let d = record.duration_s;
    let mut out = energies(record).map(|ws| ws / d);
    if let Some(p) = assumed {
        out.static_ = p;
    }
    Ok(out)
}
