//! Synthetic environments with analytic power behavior, used as oracles for
//! every stage of the pipeline.

mod backend;
mod meter;
mod model;

use std::sync::Arc;

use thiserror::Error;

pub use backend::SimulatedBackend;
pub use meter::{MeterEvidence, SimulatedMeter};
pub use model::{PowerModel, Profile};

use crate::meter::{DisplayLayout, MeterError, RenderStyle};
use crate::model::{ProcessorKind, ProcessorRef, WallTime};
use crate::sampling::{sample_loop, Clock, SamplerError, SamplingOutcome, StopSignal, VirtualClock};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("power model: {0}")]
    Model(String),
    #[error("simulated meter: {0}")]
    Meter(String),
    #[error("duration must be positive, got {0} s")]
    BadDuration(f64),
    #[error(transparent)]
    Render(#[from] MeterError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error("io: {0}")]
    Io(String),
}

/// Which form of meter evidence to produce.
#[derive(Debug, Clone, Default)]
pub enum EvidenceKind {
    #[default]
    Readings,
    Frames { layout: DisplayLayout, style: RenderStyle },
}

#[derive(Debug, Clone)]
pub struct SimOptions {
    /// Processors the backend exposes; visible power is split by TDP.
    pub processors: Vec<ProcessorRef>,
    /// Wall-clock instant of model time zero.
    pub start: WallTime,
    pub meter: SimulatedMeter,
    pub evidence: EvidenceKind,
}

/// Default wall-clock anchor for simulated runs (2023-11-14T22:13:20Z).
pub const SIM_EPOCH_MILLIS: i64 = 1_700_000_000_000;

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            processors: vec![ProcessorRef::new(ProcessorKind::Other, "sim0", 0.0)],
            start: WallTime::from_epoch_millis(SIM_EPOCH_MILLIS),
            meter: SimulatedMeter::default(),
            evidence: EvidenceKind::Readings,
        }
    }
}

pub struct SimulatedRun {
    /// Closed-form true energy over the run, Ws.
    pub truth_ws: f64,
    /// Closed-form noise-free sampler-visible energy, Ws.
    pub visible_ws: f64,
    pub duration_s: f64,
    pub start: WallTime,
    pub clock: Arc<VirtualClock>,
    pub backend: SimulatedBackend,
    pub evidence: MeterEvidence,
}

impl SimulatedRun {
    pub fn end(&self) -> WallTime {
        self.start.offset_secs(self.duration_s)
    }

    /// Runs the sampling loop over the whole run in virtual time.
    pub fn sample(&self, interval_s: f64) -> Result<SamplingOutcome, SamplerError> {
        self.clock.set(0.0);
        self.backend.restart_at(0.0);
        self.clock.stop_at(Some(self.duration_s));
        let out = sample_loop(&self.backend, interval_s, &StopSignal::new(), &*self.clock);
        self.clock.stop_at(None);
        out
    }
}

/// Builds the analytic truth, a sampler backend on a virtual clock starting
/// at 0, and meter evidence for a run of `duration_s`.
pub fn simulate_run(model: &PowerModel, duration_s: f64, opts: &SimOptions) -> Result<SimulatedRun, SimError> {
    model.check()?;
    if !(duration_s > 0.0) || !duration_s.is_finite() {
        return Err(SimError::BadDuration(duration_s));
    }
    if opts.processors.is_empty() {
        return Err(SimError::Model("no processors to simulate".into()));
    }
    let clock = Arc::new(VirtualClock::new(0.0));
    let shared: Arc<dyn Clock> = clock.clone();
    let backend = SimulatedBackend::new(model.clone(), opts.processors.clone(), shared, 0.0);
    let evidence = match &opts.evidence {
        EvidenceKind::Readings => MeterEvidence::Readings(opts.meter.readings(model, opts.start, duration_s)?),
        EvidenceKind::Frames { layout, style } => {
            MeterEvidence::Frames(opts.meter.frames(model, layout, style, opts.start, duration_s)?)
        }
    };
    Ok(SimulatedRun {
        truth_ws: model.true_energy(duration_s),
        visible_ws: model.visible_energy(duration_s),
        duration_s,
        start: opts.start,
        clock,
        backend,
        evidence,
    })
}

/// Relative error an ideal dynamic estimator commits under `model`:
/// `sampled_fraction − 1`. Exact when `overhead_w = 0` and jitter is zero.
pub fn expected_dynamic_error(model: &PowerModel) -> f64 {
    model.sampled_fraction - 1.0
}

/// Like [`expected_dynamic_error`] but accounts for `overhead_w` over a run
/// of `duration_s`.
pub fn expected_dynamic_error_over(model: &PowerModel, duration_s: f64) -> f64 {
    model.visible_energy(duration_s) / model.true_energy(duration_s) - 1.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meter::{build_timeline, ground_truth_energy, TimelineOptions};
    use crate::sampling::{dynamic_estimate, IntegrationOptions};

    #[test]
    fn expected_error_values() {
        let m = PowerModel::constant(50.0, 450.0, 1.0);
        assert_eq!(expected_dynamic_error(&m.clone().with_sampled_fraction(0.75)), -0.25);
        assert_eq!(expected_dynamic_error(&m), 0.0);
        let mut with_overhead = m.with_sampled_fraction(0.8);
        with_overhead.overhead_w = 50.0;
        // visible 0.8 × 450 = 360 W against 500 W true
        assert!((expected_dynamic_error_over(&with_overhead, 10.0) + 0.28).abs() < 1e-12);
    }

    #[test]
    fn sampled_pipeline_matches_expected_error() {
        let m = PowerModel::constant(100.0, 400.0, 0.5).with_sampled_fraction(0.75);
        let run = simulate_run(&m, 60.0, &SimOptions::default()).unwrap();
        let out = run.sample(1.0).unwrap();
        let est = dynamic_estimate(&out.traces, 60.0, &IntegrationOptions::default()).unwrap();
        let rel = est.energy_ws / run.truth_ws - 1.0;
        assert!((rel - expected_dynamic_error(&m)).abs() < 1e-9, "{rel}");
        assert_eq!(est.coverage_fraction, 1.0);
    }

    #[test]
    fn meter_evidence_matches_truth() {
        let m = PowerModel::constant(0.0, 300.0, 1.0);
        let run = simulate_run(&m, 600.0, &SimOptions::default()).unwrap();
        let MeterEvidence::Readings(r) = &run.evidence else { panic!() };
        let t = build_timeline(r, &TimelineOptions::default()).unwrap();
        let g = ground_truth_energy(&t, run.start, run.end()).unwrap();
        assert!((g.energy_ws - run.truth_ws).abs() <= g.uncertainty_ws);
    }

    #[test]
    fn bad_inputs() {
        let m = PowerModel::constant(0.0, 300.0, 1.0);
        assert!(matches!(simulate_run(&m, 0.0, &SimOptions::default()), Err(SimError::BadDuration(_))));
        assert!(simulate_run(&PowerModel::constant(10.0, 5.0, 1.0), 1.0, &SimOptions::default()).is_err());
    }
}
