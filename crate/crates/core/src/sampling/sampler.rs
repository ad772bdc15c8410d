use std::collections::BTreeMap;

use log::warn;

use super::backend::{SamplerBackend, SamplerError};
use super::clock::{Clock, StopSignal};
use super::integrate::MAX_GAP_FACTOR;
use crate::model::{PowerSample, PowerTrace};

/// What a sampling loop produced.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingOutcome {
    /// One trace per probed source, timestamps relative to loop start.
    pub traces: Vec<PowerTrace>,
    pub failed_reads: usize,
    /// Every source failed for longer than the max-gap tolerance at least once.
    pub degraded: bool,
}

/// Reads every probed source each `interval_s` until `stop` fires (or the
/// clock reports a stop). Failed reads leave a gap in the trace. A final
/// sample is taken on stop unless the last one is very recent.
pub fn sample_loop<B, C>(
    backend: &B,
    interval_s: f64,
    stop: &StopSignal,
    clock: &C,
) -> Result<SamplingOutcome, SamplerError>
where
    B: SamplerBackend + ?Sized,
    C: Clock + ?Sized,
{
    if !(interval_s > 0.0) || !interval_s.is_finite() {
        return Err(SamplerError::BadInterval(interval_s));
    }
    let sources: Vec<String> = backend.probe().into_iter().map(|p| p.name).collect();
    if sources.is_empty() {
        return Err(SamplerError::NoSources);
    }

    let origin = clock.now_s();
    let mut per_source: BTreeMap<&str, Vec<PowerSample>> =
        sources.iter().map(|s| (s.as_str(), Vec::new())).collect();
    let mut failed_reads = 0;
    let mut degraded = false;
    let mut last_success = 0.0;
    let mut last_sample_at;

    let mut take = |t: f64, failed_reads: &mut usize| -> bool {
        let mut any = false;
        for src in &sources {
            match backend.read_now(src) {
                Ok(w) if w.is_finite() && w >= 0.0 => {
                    any = true;
                    per_source.get_mut(src.as_str()).unwrap().push(PowerSample::new(t, w, src));
                }
                Ok(w) => {
                    *failed_reads += 1;
                    warn!("discarding invalid reading {w} W from `{src}`");
                }
                Err(e) => {
                    *failed_reads += 1;
                    warn!("{e}");
                }
            }
        }
        any
    };

    let mut next = origin;
    loop {
        let t = clock.now_s() - origin;
        if take(t, &mut failed_reads) {
            last_success = t;
        } else if t - last_success > MAX_GAP_FACTOR * interval_s {
            degraded = true;
        }
        last_sample_at = t;
        next += interval_s;
        let now = clock.now_s();
        if next < now {
            // fell behind; skip missed ticks instead of bursting
            next = now + interval_s - (now - next) % interval_s;
        }
        if clock.wait_until(next, stop) {
            break;
        }
    }

    let t = clock.now_s() - origin;
    if t - last_sample_at >= 0.05 * interval_s && take(t, &mut failed_reads) {
        last_success = t;
    }
    if t - last_success > MAX_GAP_FACTOR * interval_s {
        degraded = true;
    }

    let traces = per_source
        .into_values()
        .map(|samples| PowerTrace {
            samples,
            nominal_interval_s: interval_s,
        })
        .collect();
    Ok(SamplingOutcome {
        traces,
        failed_reads,
        degraded,
    })
}
