use std::fmt;

use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::model::EnergyTriple;

/// An estimation approach judged against ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Approach {
    Static,
    Dynamic,
}

impl fmt::Display for Approach {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Approach::Static => "static",
            Approach::Dynamic => "dynamic",
        })
    }
}

/// Signed deviation of an estimate from ground truth. Positive means the
/// estimate is too high.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorFigure {
    pub approach: Approach,
    pub absolute_ws: f64,
    /// `absolute_ws / ground_truth_ws`.
    pub relative: f64,
    pub magnitude_ws: f64,
}

impl ErrorFigure {
    pub fn new(approach: Approach, estimate_ws: f64, truth_ws: f64) -> Self {
        let absolute_ws = estimate_ws - truth_ws;
        Self {
            approach,
            absolute_ws,
            relative: absolute_ws / truth_ws,
            magnitude_ws: absolute_ws.abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimationErrors {
    #[serde(rename = "static")]
    pub static_: ErrorFigure,
    /// Absent when the run has no dynamic estimate.
    pub dynamic: Option<ErrorFigure>,
}

impl EstimationErrors {
    pub fn get(&self, approach: Approach) -> Option<&ErrorFigure> {
        match approach {
            Approach::Static => Some(&self.static_),
            Approach::Dynamic => self.dynamic.as_ref(),
        }
    }
}

pub fn estimation_errors(triple: &EnergyTriple) -> Result<EstimationErrors, AnalysisError> {
    let truth = match triple.ground_truth_ws {
        Some(t) if t > 0.0 => t,
        _ => return Err(AnalysisError::NoGroundTruth),
    };
    Ok(EstimationErrors {
        static_: ErrorFigure::new(Approach::Static, triple.static_ws, truth),
        dynamic: triple.dynamic_ws.map(|d| ErrorFigure::new(Approach::Dynamic, d, truth)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triple(s: f64, d: f64, t: f64) -> EnergyTriple {
        EnergyTriple::new(s, Some(d)).with_truth(t, 1.0)
    }

    #[test]
    fn overestimate_is_positive() {
        let e = estimation_errors(&triple(36_000.0, 30_000.0, 30_000.0)).unwrap();
        assert_eq!(e.static_.absolute_ws, 6_000.0);
        assert!((e.static_.relative - 0.2).abs() < 1e-12);
        assert_eq!(e.dynamic.unwrap().absolute_ws, 0.0);
    }

    #[test]
    fn underestimate_is_negative() {
        let e = estimation_errors(&triple(100.0, 75.0, 100.0)).unwrap();
        let d = e.dynamic.unwrap();
        assert_eq!(d.relative, -0.25);
        assert_eq!(d.magnitude_ws, 25.0);
    }

    #[test]
    fn requires_positive_truth() {
        assert!(matches!(
            estimation_errors(&EnergyTriple::new(1.0, Some(1.0))),
            Err(AnalysisError::NoGroundTruth)
        ));
        assert!(estimation_errors(&triple(1.0, 1.0, 0.0)).is_err());
    }

    #[test]
    fn static_only_run() {
        let e = estimation_errors(&EnergyTriple::new(10.0, None).with_truth(5.0, 1.0)).unwrap();
        assert!(e.dynamic.is_none());
        assert_eq!(e.static_.relative, 1.0);
    }
}
