use std::collections::BTreeSet;
use std::sync::Arc;

use log::{info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::plan::{Execution, MeterSource, RunPlan, SamplerChoice, VirtualWorkload};
use super::workload::{run_workload, WorkCounter};
use super::RunError;
use crate::meter::{
    build_timeline, ground_truth_energy, ingest_frames, list_frames, load_reading_file, GrayRaster, MeterError,
    MeterFrame, MeterReading, MeterTimeline, SegmentDecoder, TimelineOptions,
};
use crate::model::{
    validate_config, validate_record, EnergyTriple, ProcessorRef, RunLog, RunRecord, RunStatus, WallTime,
};
use crate::sampling::{
    dynamic_estimate, sample_loop, Clock, IntegrationOptions, MonotonicClock, NvidiaSmiBackend, RaplBackend,
    SamplerBackend, SamplerError, SamplingOutcome, StopSignal, VirtualClock,
};
use crate::sim::{EvidenceKind, SimulatedBackend, SimulatedMeter};
use crate::static_energy::static_estimate;
use crate::units::WS_PER_KWH;

/// Executes a single run and appends its record to the plan's log.
pub fn execute_run(plan: &RunPlan) -> Result<RunRecord, RunError> {
    let mut series = Series::prepare(plan)?;
    series.run(0)
}

/// Executes `plan.config.repetitions` runs back to back under one series
/// identifier. A failing run is recorded and the series continues; only an
/// unwritable log aborts it.
pub fn execute_series(plan: &RunPlan) -> Result<Vec<RunRecord>, RunError> {
    let mut series = Series::prepare(plan)?;
    (0..plan.config.repetitions).map(|i| series.run(i)).collect()
}

/// Restricts a backend to the sources named in the active set. Falls back to
/// every source when none matches, so a naming mismatch is visible in the
/// traces rather than silently empty.
struct ActiveSources {
    inner: Arc<dyn SamplerBackend>,
    keep: BTreeSet<String>,
}

impl SamplerBackend for ActiveSources {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn probe(&self) -> Vec<ProcessorRef> {
        let all = self.inner.probe();
        let kept: Vec<ProcessorRef> = all.iter().filter(|p| self.keep.contains(&p.name)).cloned().collect();
        if kept.is_empty() {
            warn!(
                "no `{}` source matches the active processors {:?}; sampling all of them",
                self.inner.name(),
                self.keep
            );
            all
        } else {
            kept
        }
    }

    fn read_now(&self, processor: &str) -> Result<f64, SamplerError> {
        self.inner.read_now(processor)
    }
}

struct Series<'a> {
    plan: &'a RunPlan,
    log: RunLog,
    clock: Arc<dyn Clock>,
    virtual_clock: Option<Arc<VirtualClock>>,
    backend: Option<Arc<dyn SamplerBackend>>,
    simulated: Option<Arc<SimulatedBackend>>,
    rng: ChaCha8Rng,
    series_id: String,
    /// Virtual seconds elapsed since the series started.
    elapsed_s: f64,
    /// True energy consumed by earlier simulated runs; feeds the simulated
    /// meter so its counter keeps counting across the series.
    metered_ws: f64,
}

impl<'a> Series<'a> {
    fn prepare(plan: &'a RunPlan) -> Result<Self, RunError> {
        validate_config(&plan.config, &plan.env).map_err(RunError::Invalid)?;
        if !(plan.interval_s > 0.0) || !plan.interval_s.is_finite() {
            return Err(RunError::Sampler(SamplerError::BadInterval(plan.interval_s)));
        }
        if matches!(plan.meter, Some(MeterSource::Simulated { .. })) && !matches!(plan.sampler, SamplerChoice::Simulated(_)) {
            return Err(RunError::Plan("a simulated meter needs the simulated sampler".into()));
        }
        if let Execution::Virtual(w) = &plan.execution {
            if !(w.duration_s > 0.0) || !w.duration_s.is_finite() {
                return Err(RunError::Plan(format!("virtual duration must be positive, got {}", w.duration_s)));
            }
        }
        let log = RunLog::new(&plan.output_log);
        log.check_writable()?;

        let (clock, virtual_clock): (Arc<dyn Clock>, _) = match plan.execution {
            Execution::Live => (Arc::new(MonotonicClock::new()), None),
            Execution::Virtual(_) => {
                let c = Arc::new(VirtualClock::new(0.0));
                (c.clone(), Some(c))
            }
        };

        let mut simulated = None;
        let opened: Result<Arc<dyn SamplerBackend>, SamplerError> = match &plan.sampler {
            SamplerChoice::Simulated(model) => {
                model.check().map_err(|e| RunError::Plan(e.to_string()))?;
                let processors = plan
                    .config
                    .active_processors
                    .iter()
                    .filter_map(|n| plan.env.processor(n).cloned())
                    .collect();
                let b = Arc::new(SimulatedBackend::new(model.clone(), processors, clock.clone(), 0.0));
                simulated = Some(b.clone());
                Ok(b)
            }
            SamplerChoice::Rapl => RaplBackend::open().map(|b| Arc::new(b) as Arc<dyn SamplerBackend>),
            SamplerChoice::NvidiaSmi => NvidiaSmiBackend::open().map(|b| Arc::new(b) as Arc<dyn SamplerBackend>),
            SamplerChoice::Backend(b) => Ok(b.clone()),
        };
        let opened = opened.and_then(|b| {
            let filtered: Arc<dyn SamplerBackend> = Arc::new(ActiveSources {
                inner: b,
                keep: plan.config.active_processors.clone(),
            });
            if filtered.probe().is_empty() {
                Err(SamplerError::NoSources)
            } else {
                Ok(filtered)
            }
        });
        let backend = match opened {
            Ok(b) => Some(b),
            Err(e) if plan.allow_static_only => {
                warn!("{e}; continuing with static estimates only");
                None
            }
            Err(e) => return Err(RunError::SamplerUnavailable(e)),
        };

        let (mut rng, start) = match &plan.execution {
            Execution::Live => (ChaCha8Rng::from_entropy(), WallTime::now()),
            Execution::Virtual(w) => (ChaCha8Rng::seed_from_u64(w.seed), w.start),
        };
        let series_id = format!("s{}-{:08x}", start.epoch_millis(), rng.gen::<u32>());
        Ok(Self {
            plan,
            log,
            clock,
            virtual_clock,
            backend,
            simulated,
            rng,
            series_id,
            elapsed_s: 0.0,
            metered_ws: 0.0,
        })
    }

    fn run(&mut self, index: u32) -> Result<RunRecord, RunError> {
        let plan = self.plan;
        let mut notes: Vec<String> = Vec::new();

        let (started_at, duration_s, status, work_units, outcome) = match &plan.execution {
            Execution::Virtual(w) => self.run_virtual(w, index),
            Execution::Live => self.run_live(),
        };
        let ended_at = started_at.offset_secs(duration_s).max(started_at.offset_secs(0.001));
        if let RunStatus::Failed { reason, .. } = &status {
            warn!("run {index} failed: {reason}");
        }

        let static_ws = static_estimate(&plan.config, &plan.env, duration_s)?.energy_ws;
        let mut traces = Vec::new();
        let mut degraded = false;
        let (dynamic_ws, coverage) = match outcome {
            None => {
                notes.push("dynamic estimate unavailable: no sampler".into());
                (None, None)
            }
            Some(Err(e)) => {
                notes.push(format!("sampling failed: {e}"));
                degraded = true;
                (None, Some(0.0))
            }
            Some(Ok(o)) => {
                degraded = o.degraded;
                if o.failed_reads > 0 {
                    notes.push(format!("{} failed sampler reads", o.failed_reads));
                }
                let opts = IntegrationOptions::with_estimator(plan.estimator);
                let est = dynamic_estimate(&o.traces, duration_s, &opts);
                traces = o.traces;
                match est {
                    Ok(est) => {
                        degraded |= est.degraded;
                        if !est.failed_sources.is_empty() {
                            notes.push(format!("sources without usable samples: {}", est.failed_sources.join(", ")));
                        }
                        (Some(est.energy_ws), Some(est.coverage_fraction))
                    }
                    Err(e) => {
                        notes.push(format!("dynamic estimate unavailable: {e}"));
                        degraded = true;
                        (None, Some(0.0))
                    }
                }
            }
        };
        let mut energies = EnergyTriple::new(static_ws, dynamic_ws);

        let mut meter_timeline = None;
        if let Some(source) = &plan.meter {
            let from = started_at.offset_secs(plan.clock_offset_s);
            let to = ended_at.offset_secs(plan.clock_offset_s);
            match self.meter_timeline(source, from, to, duration_s) {
                Ok(timeline) => {
                    match ground_truth_energy(&timeline, from, to) {
                        Ok(g) => energies = energies.with_truth(g.energy_ws, g.uncertainty_ws),
                        Err(e) => notes.push(format!("ground truth unavailable: {e}")),
                    }
                    meter_timeline = Some(clip(timeline, from, to));
                }
                Err(e) => notes.push(format!("ground truth unavailable: {e}")),
            }
        }
        if let SamplerChoice::Simulated(model) = &plan.sampler {
            self.metered_ws += model.true_energy(duration_s);
        }

        let record = RunRecord {
            run_id: format!("{}-{:08x}", started_at.epoch_millis(), self.rng.gen::<u32>()),
            series_id: Some(self.series_id.clone()),
            run_index: index,
            config: plan.config.clone(),
            environment: plan.env.clone(),
            started_at,
            ended_at,
            duration_s,
            work_units_completed: work_units,
            traces,
            meter_timeline,
            energies,
            dynamic_coverage: coverage,
            sampling_degraded: degraded,
            status,
            notes: notes.join("; "),
        };
        validate_record(&record).map_err(RunError::Record)?;
        self.log.append(&record)?;
        info!(
            "run {} ({}) done in {:.3} s: static {:.1} Ws, dynamic {:?} Ws, truth {:?} Ws",
            index, record.run_id, duration_s, record.energies.static_ws, record.energies.dynamic_ws, record.energies.ground_truth_ws
        );
        Ok(record)
    }

    fn run_virtual(
        &mut self,
        w: &VirtualWorkload,
        index: u32,
    ) -> (WallTime, f64, RunStatus, u64, Option<Result<SamplingOutcome, SamplerError>>) {
        let clock = self.virtual_clock.as_ref().expect("virtual execution has a virtual clock");
        let t0 = self.elapsed_s;
        clock.set(t0);
        if let Some(sim) = &self.simulated {
            sim.restart_at(t0);
        }
        clock.stop_at(Some(t0 + w.duration_s));
        let outcome = self
            .backend
            .as_ref()
            .map(|b| sample_loop(&**b, self.plan.interval_s, &StopSignal::new(), &**clock));
        clock.stop_at(None);
        clock.set(t0 + w.duration_s);
        self.elapsed_s = t0 + w.duration_s;

        let status = if w.fail_runs.contains(&index) {
            RunStatus::Failed {
                exit_code: Some(1),
                reason: "scripted failure".into(),
            }
        } else {
            RunStatus::Completed
        };
        // exact run-relative offsets keep consecutive runs contiguous
        let started_at = w.start.offset_secs(t0);
        let duration_s = w.start.offset_secs(t0 + w.duration_s).secs_since(started_at);
        (started_at, duration_s, status, w.work_units, outcome)
    }

    fn run_live(&self) -> (WallTime, f64, RunStatus, u64, Option<Result<SamplingOutcome, SamplerError>>) {
        let counter = Arc::new(WorkCounter::default());
        let stop = StopSignal::new();
        let started_at = WallTime::now();
        let t0 = self.clock.now_s();
        if let Some(sim) = &self.simulated {
            sim.restart_at(t0);
        }
        let (clock, interval_s) = (&*self.clock, self.plan.interval_s);
        let (status, t1, outcome) = std::thread::scope(|scope| {
            let sampler = self.backend.as_deref().map(|b| {
                let stop = &stop;
                scope.spawn(move || sample_loop(b, interval_s, stop, clock))
            });
            let status = run_workload(&self.plan.config.workload_command, counter.clone());
            let t1 = clock.now_s();
            stop.trigger();
            let outcome = sampler.map(|h| h.join().expect("sampling thread panicked"));
            (status, t1, outcome)
        });
        let duration_s = (t1 - t0).max(0.001);
        (started_at, duration_s, status, counter.get(), outcome)
    }

    /// Builds the meter timeline for a run whose meter-clock window is
    /// `[from, to]`.
    fn meter_timeline(
        &self,
        source: &MeterSource,
        from: WallTime,
        to: WallTime,
        duration_s: f64,
    ) -> Result<MeterTimeline, MeterError> {
        let plan = self.plan;
        let (readings, opts) = match source {
            MeterSource::File(path) => (load_reading_file(path)?, plan.timeline),
            MeterSource::Readings(r) => (r.clone(), plan.timeline),
            MeterSource::Frames { dir, layout } => {
                let listed = list_frames(dir)?;
                let frames = window(&listed, |f| f.0, from, to)
                    .iter()
                    .map(|(ts, path)| {
                        GrayRaster::load(path).map(|pixels| MeterFrame {
                            timestamp: *ts,
                            pixels,
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let ingest = ingest_frames(&frames, layout, &SegmentDecoder::new(layout.segments.clone()));
                (ingest.readings, TimelineOptions { resolution_kwh: layout.resolution_kwh(), ..plan.timeline })
            }
            MeterSource::Simulated { meter, evidence } => {
                let SamplerChoice::Simulated(model) = &plan.sampler else {
                    unreachable!("checked in prepare");
                };
                let meter = SimulatedMeter {
                    initial_kwh: meter.initial_kwh + self.metered_ws / WS_PER_KWH,
                    ..meter.clone()
                };
                let opts = TimelineOptions { resolution_kwh: meter.resolution_kwh, ..plan.timeline };
                let sim = |e: crate::sim::SimError| MeterError::Layout(e.to_string());
                let readings = match evidence {
                    EvidenceKind::Readings => meter.readings(model, from, duration_s).map_err(sim)?,
                    EvidenceKind::Frames { layout, style } => {
                        let frames = meter.frames(model, layout, style, from, duration_s).map_err(sim)?;
                        ingest_frames(&frames, layout, &SegmentDecoder::new(layout.segments.clone())).readings
                    }
                };
                (readings, opts)
            }
        };
        build_timeline(&readings, &opts)
    }
}

/// Items in `[from, to]` plus two neighbours on either side, so the median
/// vote and the bracketing readings have context. `items` must be sorted.
fn window<T>(items: &[T], key: impl Fn(&T) -> WallTime, from: WallTime, to: WallTime) -> &[T] {
    let lo = items.partition_point(|x| key(x) < from).saturating_sub(3);
    let hi = (items.partition_point(|x| key(x) <= to) + 3).min(items.len());
    &items[lo..hi.max(lo)]
}

/// Keeps the readings that bracket `[from, to]` and everything between.
fn clip(timeline: MeterTimeline, from: WallTime, to: WallTime) -> MeterTimeline {
    let r = &timeline.readings;
    let lo = r.iter().rposition(|x| x.timestamp <= from).unwrap_or(0);
    let hi = r.iter().position(|x| x.timestamp >= to).map_or(r.len(), |i| i + 1);
    let readings: Vec<MeterReading> = r[lo..hi.max(lo)].to_vec();
    MeterTimeline {
        readings,
        resolution_kwh: timeline.resolution_kwh,
    }
}
