//! Turns power traces into energy.
//!
//! Each source is integrated over `[0, duration]`: consecutive samples form
//! segments, the first and last sample values are held out to the run edges,
//! and samples outside the window are clipped. A segment longer than
//! [`MAX_GAP_FACTOR`] × nominal interval contributes nothing. Segments longer
//! than [`BRIDGE_FACTOR`] × nominal (a missed read) still contribute energy but
//! do not count toward coverage.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::PowerTrace;

pub const MAX_GAP_FACTOR: f64 = 5.0;
pub const BRIDGE_FACTOR: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    #[default]
    Trapezoid,
    /// Left-rectangle sum: each sample's power is held until the next one.
    Rectangle,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationOptions {
    pub estimator: Estimator,
    pub max_gap_factor: f64,
    pub bridge_factor: f64,
}

impl Default for IntegrationOptions {
    fn default() -> Self {
        Self {
            estimator: Estimator::Trapezoid,
            max_gap_factor: MAX_GAP_FACTOR,
            bridge_factor: BRIDGE_FACTOR,
        }
    }
}

impl IntegrationOptions {
    pub fn with_estimator(estimator: Estimator) -> Self {
        Self {
            estimator,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrateError {
    #[error("insufficient trace: no source has at least 2 samples")]
    InsufficientTrace,
    #[error("duration must be positive, got {0} s")]
    NonPositiveDuration(f64),
    #[error("nominal interval must be positive, got {0} s")]
    BadInterval(f64),
    #[error("source `{source_name}`: timestamps not strictly increasing at {timestamp} s")]
    Unordered { source_name: String, timestamp: f64 },
    #[error("source `{source_name}`: invalid sample ({timestamp} s, {watts} W)")]
    InvalidSample {
        source_name: String,
        timestamp: f64,
        watts: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicEstimate {
    pub energy_ws: f64,
    pub per_source_ws: BTreeMap<String, f64>,
    pub sample_count: usize,
    /// Mean over all seen sources of the covered share of the run.
    pub coverage_fraction: f64,
    /// Some source could not be integrated.
    pub degraded: bool,
    pub failed_sources: Vec<String>,
}

type SourcePoints = (Vec<(f64, f64)>, f64);

struct SourceIntegral {
    energy_ws: f64,
    covered_s: f64,
    samples: usize,
}

fn integrate_source(points: &[(f64, f64)], duration: f64, interval: f64, opts: &IntegrationOptions) -> SourceIntegral {
    let max_gap = opts.max_gap_factor * interval;
    let bridge = opts.bridge_factor * interval;
    let mut energy = 0.0;
    let mut covered = 0.0;

    // segment [t0, t1] with endpoint powers p0, p1, clipped to [0, duration]
    let mut segment = |t0: f64, p0: f64, t1: f64, p1: f64| {
        let gap = t1 - t0;
        if gap <= 0.0 || gap > max_gap {
            return;
        }
        let a = t0.max(0.0);
        let b = t1.min(duration);
        if b <= a {
            return;
        }
        let e = match opts.estimator {
            Estimator::Trapezoid => {
                let at = |t: f64| p0 + (p1 - p0) * (t - t0) / gap;
                0.5 * (at(a) + at(b)) * (b - a)
            }
            Estimator::Rectangle => p0 * (b - a),
        };
        energy += e;
        if gap <= bridge {
            covered += b - a;
        }
    };

    let (first_t, first_p) = points[0];
    let (last_t, last_p) = points[points.len() - 1];
    if first_t > 0.0 {
        segment(0.0, first_p, first_t, first_p);
    }
    for w in points.windows(2) {
        segment(w[0].0, w[0].1, w[1].0, w[1].1);
    }
    if last_t < duration {
        segment(last_t, last_p, duration, last_p);
    }
    SourceIntegral {
        energy_ws: energy,
        covered_s: covered,
        samples: points.len(),
    }
}

/// Integrates every source in `trace` over `[0, duration_s]`.
pub fn integrate_trace(
    trace: &PowerTrace,
    duration_s: f64,
    opts: &IntegrationOptions,
) -> Result<DynamicEstimate, IntegrateError> {
    dynamic_estimate(std::slice::from_ref(trace), duration_s, opts)
}

/// Sums per-source integrals over several traces. Succeeds when at least one
/// source integrates; sources with fewer than two samples are reported in
/// `failed_sources` and mark the estimate degraded.
pub fn dynamic_estimate(
    traces: &[PowerTrace],
    duration_s: f64,
    opts: &IntegrationOptions,
) -> Result<DynamicEstimate, IntegrateError> {
    if !(duration_s > 0.0) || !duration_s.is_finite() {
        return Err(IntegrateError::NonPositiveDuration(duration_s));
    }
    // source -> (points, nominal interval)
    let mut grouped: BTreeMap<&str, SourcePoints> = BTreeMap::new();
    for trace in traces {
        if !(trace.nominal_interval_s > 0.0) {
            return Err(IntegrateError::BadInterval(trace.nominal_interval_s));
        }
        for s in &trace.samples {
            if !s.watts.is_finite() || s.watts < 0.0 || !s.timestamp_s.is_finite() {
                return Err(IntegrateError::InvalidSample {
                    source_name: s.source.clone(),
                    timestamp: s.timestamp_s,
                    watts: s.watts,
                });
            }
            let entry = grouped
                .entry(s.source.as_str())
                .or_insert_with(|| (Vec::new(), trace.nominal_interval_s));
            if let Some(&(prev, _)) = entry.0.last() {
                if s.timestamp_s <= prev {
                    return Err(IntegrateError::Unordered {
                        source_name: s.source.clone(),
                        timestamp: s.timestamp_s,
                    });
                }
            }
            entry.0.push((s.timestamp_s, s.watts));
        }
    }

    let mut per_source = BTreeMap::new();
    let mut failed = Vec::new();
    let mut sample_count = 0;
    let mut coverage_sum = 0.0;
    for (source, (points, interval)) in &grouped {
        if points.len() < 2 {
            failed.push(source.to_string());
            continue;
        }
        let r = integrate_source(points, duration_s, *interval, opts);
        sample_count += r.samples;
        coverage_sum += (r.covered_s / duration_s).min(1.0);
        per_source.insert(source.to_string(), r.energy_ws);
    }
    if per_source.is_empty() {
        return Err(IntegrateError::InsufficientTrace);
    }
    Ok(DynamicEstimate {
        energy_ws: per_source.values().sum(),
        coverage_fraction: coverage_sum / grouped.len() as f64,
        per_source_ws: per_source,
        sample_count,
        degraded: !failed.is_empty(),
        failed_sources: failed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PowerSample;

    fn trace(points: &[(f64, f64)], interval: f64) -> PowerTrace {
        PowerTrace::from_points("gpu", interval, points)
    }

    fn trap(points: &[(f64, f64)], interval: f64, duration: f64) -> DynamicEstimate {
        integrate_trace(&trace(points, interval), duration, &IntegrationOptions::default()).unwrap()
    }

    /// Independent oracle: midpoint sums of the piecewise-linear interpolant
    /// on a fine grid.
    fn fine_oracle(points: &[(f64, f64)], duration: f64, steps: usize) -> f64 {
        let interp = |t: f64| -> f64 {
            if t <= points[0].0 {
                return points[0].1;
            }
            for w in points.windows(2) {
                if t <= w[1].0 {
                    return w[0].1 + (w[1].1 - w[0].1) * (t - w[0].0) / (w[1].0 - w[0].0);
                }
            }
            points.last().unwrap().1
        };
        let h = duration / steps as f64;
        (0..steps).map(|i| interp((i as f64 + 0.5) * h) * h).sum()
    }

    #[test]
    fn constant_power() {
        let e = trap(&[(0.0, 100.0), (1.0, 100.0), (2.0, 100.0)], 1.0, 2.0);
        assert_eq!(e.energy_ws, 200.0);
        assert_eq!(e.coverage_fraction, 1.0);
        assert_eq!(e.sample_count, 3);
    }

    #[test]
    fn linear_ramp() {
        assert_eq!(trap(&[(0.0, 0.0), (10.0, 100.0)], 10.0, 10.0).energy_ws, 500.0);
    }

    #[test]
    fn uneven_spacing_matches_fine_oracle() {
        let pts = [(0.0, 100.0), (1.0, 100.0), (3.0, 200.0)];
        let oracle = fine_oracle(&pts, 3.0, 300_000);
        assert!((oracle - 400.0).abs() < 1e-6, "oracle {oracle}");
        let e = trap(&pts, 1.0, 3.0);
        assert!((e.energy_ws - 400.0).abs() < 1e-12);
        // the 2 s segment is bridged, not observed
        assert!((e.coverage_fraction - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn rectangle_variant() {
        let pts = [(0.0, 100.0), (1.0, 100.0), (3.0, 200.0)];
        let e = integrate_trace(
            &trace(&pts, 1.0),
            3.0,
            &IntegrationOptions::with_estimator(Estimator::Rectangle),
        )
        .unwrap();
        assert_eq!(e.energy_ws, 300.0);
        let e = integrate_trace(
            &trace(&[(0.0, 0.0), (10.0, 100.0)], 10.0),
            10.0,
            &IntegrationOptions::with_estimator(Estimator::Rectangle),
        )
        .unwrap();
        assert_eq!(e.energy_ws, 0.0);
    }

    #[test]
    fn boundary_hold_and_clipping() {
        // first sample late, last sample past the end
        let e = trap(&[(0.5, 10.0), (1.5, 10.0), (2.5, 30.0)], 1.0, 2.0);
        // 0..0.5 held at 10, 0.5..1.5 at 10, 1.5..2.0 ramps 10→20
        assert!((e.energy_ws - (5.0 + 10.0 + 7.5)).abs() < 1e-12);
        assert!((e.coverage_fraction - 1.0).abs() < 1e-12);
    }

    #[test]
    fn long_gap_contributes_nothing() {
        let e = trap(&[(0.0, 100.0), (1.0, 100.0), (9.0, 100.0), (10.0, 100.0)], 1.0, 10.0);
        assert_eq!(e.energy_ws, 200.0);
        assert!((e.coverage_fraction - 0.2).abs() < 1e-12);
    }

    #[test]
    fn insufficient_trace() {
        let err = integrate_trace(&trace(&[(0.0, 1.0)], 1.0), 1.0, &IntegrationOptions::default());
        assert_eq!(err, Err(IntegrateError::InsufficientTrace));
        let err = integrate_trace(&trace(&[], 1.0), 1.0, &IntegrationOptions::default());
        assert_eq!(err, Err(IntegrateError::InsufficientTrace));
    }

    #[test]
    fn unordered_rejected() {
        let err = integrate_trace(
            &trace(&[(1.0, 1.0), (0.5, 1.0)], 1.0),
            2.0,
            &IntegrationOptions::default(),
        );
        assert!(matches!(err, Err(IntegrateError::Unordered { .. })));
    }

    #[test]
    fn sources_add_up() {
        let cpu = PowerTrace::from_points("cpu", 1.0, &[(0.0, 10.0), (10.0, 10.0)]);
        let gpu = PowerTrace::from_points("gpu", 1.0, &[(0.0, 25.0), (10.0, 25.0)]);
        let opts = IntegrationOptions {
            max_gap_factor: 100.0,
            ..Default::default()
        };
        let both = dynamic_estimate(&[cpu.clone(), gpu], 10.0, &opts).unwrap();
        assert_eq!(both.energy_ws, 350.0);
        assert_eq!(both.per_source_ws.len(), 2);
        let single = dynamic_estimate(std::slice::from_ref(&cpu), 10.0, &opts).unwrap();
        assert_eq!(single, integrate_trace(&cpu, 10.0, &opts).unwrap());
    }

    #[test]
    fn one_insufficient_source_degrades() {
        let mut t = PowerTrace::from_points("gpu", 1.0, &[(0.0, 50.0), (1.0, 50.0), (2.0, 50.0)]);
        t.samples.push(PowerSample::new(1.0, 10.0, "cpu"));
        let e = integrate_trace(&t, 2.0, &IntegrationOptions::default()).unwrap();
        assert_eq!(e.energy_ws, 100.0);
        assert!(e.degraded);
        assert_eq!(e.failed_sources, vec!["cpu".to_string()]);
        assert!((e.coverage_fraction - 0.5).abs() < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        pub(super) fn sampled(f: impl Fn(f64) -> f64, duration: f64, h: f64) -> PowerTrace {
            let n = (duration / h).round() as usize;
            let pts: Vec<_> = (0..=n)
                .map(|i| {
                    let t = (i as f64 * h).min(duration);
                    (t, f(t))
                })
                .collect();
            PowerTrace::from_points("p", h, &pts)
        }

        proptest! {
            #[test]
            fn bounded_by_extremes(ws in proptest::collection::vec(0f64..1000.0, 2..60), h in 0.1f64..3.0) {
                let pts: Vec<_> = ws.iter().enumerate().map(|(i, &w)| (i as f64 * h, w)).collect();
                let duration = (ws.len() - 1) as f64 * h;
                let e = integrate_trace(&PowerTrace::from_points("p", h, &pts), duration, &IntegrationOptions::default()).unwrap();
                prop_assert!((e.coverage_fraction - 1.0).abs() < 1e-9);
                let lo = ws.iter().cloned().fold(f64::INFINITY, f64::min) * duration;
                let hi = ws.iter().cloned().fold(0.0, f64::max) * duration;
                prop_assert!(e.energy_ws >= lo - 1e-9 * hi.max(1.0));
                prop_assert!(e.energy_ws <= hi + 1e-9 * hi.max(1.0));
            }

            #[test]
            fn exact_for_linear(a in 0f64..500.0, b in 0f64..20.0, n in 1usize..200, h in 0.01f64..5.0) {
                let duration = n as f64 * h;
                let e = integrate_trace(&sampled(|t| a + b * t, duration, h), duration, &IntegrationOptions::default()).unwrap();
                let exact = a * duration + 0.5 * b * duration * duration;
                prop_assert!((e.energy_ws - exact).abs() <= 1e-9 * exact.max(1e-9));
            }

            #[test]
            fn concatenation(ws in proptest::collection::vec(0f64..1000.0, 3..60), split in 1usize..58) {
                let split = split.min(ws.len() - 2);
                let pts: Vec<_> = ws.iter().enumerate().map(|(i, &w)| (i as f64, w)).collect();
                let t1 = split as f64;
                let t2 = (ws.len() - 1) as f64;
                let opts = IntegrationOptions::default();
                let whole = integrate_trace(&PowerTrace::from_points("p", 1.0, &pts), t2, &opts).unwrap().energy_ws;
                let first = integrate_trace(&PowerTrace::from_points("p", 1.0, &pts[..=split]), t1, &opts).unwrap().energy_ws;
                let rest: Vec<_> = pts[split..].iter().map(|&(t, w)| (t - t1, w)).collect();
                let second = integrate_trace(&PowerTrace::from_points("p", 1.0, &rest), t2 - t1, &opts).unwrap().energy_ws;
                prop_assert!((whole - (first + second)).abs() <= 1e-9 * whole.max(1.0));
            }
        }
    }

    #[test]
    fn sinusoid_refinement_converges() {
        let p = |t: f64| 200.0 + 50.0 * t.sin();
        let duration: f64 = 40.0;
        let exact = 200.0 * duration + 50.0 * (1.0 - duration.cos());
        let mut prev = f64::INFINITY;
        for h in [4.0, 2.0, 1.0, 0.5, 0.25] {
            let e = integrate_trace(&props::sampled(p, duration, h), duration, &IntegrationOptions::default()).unwrap();
            let err = (e.energy_ws - exact).abs();
            assert!(err < prev, "h={h}: {err} !< {prev}");
            prev = err;
        }
    }
}
