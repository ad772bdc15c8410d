use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use enertrace::meter::{DisplayLayout, RenderStyle};
use enertrace::model::{serialize_run, RunLog};
use enertrace::runner::{execute_run, execute_series, MeterSource, RunPlan, SamplerChoice, VirtualWorkload};
use enertrace::sampling::{SamplerBackend, SamplerError};
use enertrace::sim::{expected_dynamic_error, EvidenceKind, PowerModel, Profile, SimulatedMeter};
use enertrace::{
    Environment, ExperimentConfig, MeterReading, ProcessorKind, ProcessorRef, RunError, RunStatus, WorkUnit,
};

fn env() -> Environment {
    Environment {
        processors: vec![
            ProcessorRef::new(ProcessorKind::Gpu, "gpu0", 300.0),
            ProcessorRef::new(ProcessorKind::Cpu, "cpu0", 125.0),
        ],
        host_label: "testbed".into(),
        co2_efficiency_kg_per_kwh: 0.38,
    }
}

fn config(command: &[&str]) -> ExperimentConfig {
    ExperimentConfig {
        workload_command: command.iter().map(|s| s.to_string()).collect(),
        domain_tag: "vision".into(),
        work_unit: WorkUnit::Inference,
        work_unit_scale: 1000,
        hyperparameters: BTreeMap::from([("model".to_string(), "tiny".to_string())]),
        active_processors: BTreeSet::from(["gpu0".to_string()]),
        planned_duration_s: None,
        repetitions: 3,
    }
}

fn virtual_plan(model: PowerModel, duration_s: f64, log: &std::path::Path) -> RunPlan {
    RunPlan::new(config(&["scripted"]), env(), SamplerChoice::Simulated(model), log)
        .virtual_time(VirtualWorkload::new(duration_s, 1000))
}

fn sim_meter(resolution_kwh: f64) -> MeterSource {
    MeterSource::Simulated {
        meter: SimulatedMeter::with_resolution(resolution_kwh),
        evidence: EvidenceKind::Readings,
    }
}

#[test]
fn constant_run_populates_all_three_energies() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("runs.jsonl");
    let plan = virtual_plan(PowerModel::constant(0.0, 100.0, 1.0), 10.0, &log).with_meter(sim_meter(1e-6));
    let r = execute_run(&plan).unwrap();
    assert_eq!(r.energies.static_ws, 3_000.0);
    assert!((r.energies.dynamic_ws.unwrap() - 1_000.0).abs() < 1e-9);
    let truth = r.energies.ground_truth_ws.unwrap();
    assert!((truth - 1_000.0).abs() <= r.energies.truth_uncertainty_ws.unwrap());
    assert_eq!(r.dynamic_coverage, Some(1.0));
    assert!(r.traces[0].samples.len() >= 10);
    assert!(r.traces[0].samples.iter().all(|s| s.watts == 100.0));
    assert_eq!(r.duration_s, 10.0);
    assert_eq!(RunLog::new(&log).read_all().unwrap(), vec![r]);
}

#[test]
fn without_meter_truth_is_absent() {
    let dir = tempfile::tempdir().unwrap();
    let plan = virtual_plan(PowerModel::constant(0.0, 100.0, 1.0), 10.0, &dir.path().join("l"));
    let r = execute_run(&plan).unwrap();
    assert!(r.energies.ground_truth_ws.is_none());
    assert!(r.energies.truth_uncertainty_ws.is_none());
    assert!(r.energies.dynamic_ws.is_some());
}

#[test]
fn series_with_failing_middle_run() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("runs.jsonl");
    let mut workload = VirtualWorkload::new(20.0, 500);
    workload.fail_runs.insert(1);
    let plan = RunPlan::new(
        config(&["scripted"]),
        env(),
        SamplerChoice::Simulated(PowerModel::constant(50.0, 250.0, 0.5)),
        &log,
    )
    .with_meter(sim_meter(0.0001))
    .virtual_time(workload);
    let runs = execute_series(&plan).unwrap();
    assert_eq!(runs.len(), 3);
    assert!(runs[0].status.is_completed() && runs[2].status.is_completed());
    assert!(matches!(runs[1].status, RunStatus::Failed { .. }));
    assert!(runs[1].energies.dynamic_ws.is_some());
    let series: BTreeSet<_> = runs.iter().map(|r| r.series_id.clone().unwrap()).collect();
    assert_eq!(series.len(), 1);
    let ids: BTreeSet<_> = runs.iter().map(|r| r.run_id.clone()).collect();
    assert_eq!(ids.len(), 3);
    // back to back: each run starts where the previous ended
    assert_eq!(runs[0].ended_at, runs[1].started_at);
    assert_eq!(runs[1].ended_at, runs[2].started_at);
    // the meter keeps counting across the series; every run still sees ~3000 Ws
    for r in &runs {
        let truth = r.energies.ground_truth_ws.unwrap();
        assert!((truth - 3_000.0).abs() <= r.energies.truth_uncertainty_ws.unwrap(), "{truth}");
    }
    assert_eq!(RunLog::new(&log).read_all().unwrap().len(), 3);
}

#[test]
fn fixed_seed_series_are_bit_identical() {
    let model = PowerModel::constant(40.0, 400.0, 0.0)
        .with_profile(Profile::Sinusoid {
            mean: 0.5,
            amplitude: 0.3,
            period_s: 17.0,
            phase_rad: 0.0,
        })
        .with_jitter(4.0, 99)
        .with_sampled_fraction(0.8);
    let run = || {
        let dir = tempfile::tempdir().unwrap();
        let log = dir.path().join("l");
        let mut w = VirtualWorkload::new(30.0, 10);
        w.seed = 5;
        let plan = RunPlan::new(config(&["x"]), env(), SamplerChoice::Simulated(model.clone()), &log)
            .with_meter(sim_meter(0.001))
            .virtual_time(w);
        let records = execute_series(&plan).unwrap();
        let bytes = std::fs::read(&log).unwrap();
        (records, bytes)
    };
    let (a, la) = run();
    let (b, lb) = run();
    assert_eq!(a, b);
    assert_eq!(la, lb);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(serialize_run(x).unwrap(), serialize_run(y).unwrap());
    }
}

#[test]
fn single_repetition_matches_execute_run() {
    let dir = tempfile::tempdir().unwrap();
    let mut plan = virtual_plan(PowerModel::constant(0.0, 200.0, 0.7), 12.0, &dir.path().join("a"));
    plan.config.repetitions = 1;
    let single = execute_run(&plan).unwrap();
    plan.output_log = dir.path().join("b");
    let series = execute_series(&plan).unwrap();
    assert_eq!(series, vec![single]);
}

#[test]
fn pipeline_fidelity_across_profiles_and_intervals() {
    let duration = 120.0;
    let profiles = [
        Profile::Constant { level: 0.6 },
        Profile::Ramp {
            from: 0.1,
            to: 0.9,
            over_s: 77.0,
        },
        Profile::Sinusoid {
            mean: 0.5,
            amplitude: 0.45,
            period_s: 37.0,
            phase_rad: 0.4,
        },
        // edges on the sampling grid
        Profile::SquareWave {
            low: 0.1,
            high: 0.9,
            period_s: 12.0,
            duty: 0.5,
        },
    ];
    let dir = tempfile::tempdir().unwrap();
    for (i, profile) in profiles.into_iter().enumerate() {
        for f in [0.7, 0.75, 0.8, 1.0] {
            for interval in [0.5, 1.0, 2.0, 3.0] {
                let model = PowerModel::constant(60.0, 360.0, 0.0).with_profile(profile).with_sampled_fraction(f);
                let mut plan = virtual_plan(model.clone(), duration, &dir.path().join(format!("{i}.jsonl")));
                plan.interval_s = interval;
                let r = execute_run(&plan).unwrap();
                let rel = r.energies.dynamic_ws.unwrap() / model.true_energy(duration) - 1.0;
                let expected = expected_dynamic_error(&model);
                assert!((rel - expected).abs() <= 0.005, "{profile:?} f={f} h={interval}: {rel} vs {expected}");
            }
        }
    }
}

#[test]
fn rendered_frames_on_disk_go_through_ocr() {
    let dir = tempfile::tempdir().unwrap();
    let frames = dir.path().join("frames");
    std::fs::create_dir(&frames).unwrap();
    let model = PowerModel::constant(0.0, 300.0, 1.0);
    let layout = DisplayLayout::default();
    let workload = VirtualWorkload::new(600.0, 1);
    let meter = SimulatedMeter {
        frame_rate_hz: 1.0 / 30.0,
        initial_kwh: 12.34,
        ..SimulatedMeter::default()
    };
    for f in meter.frames(&model, &layout, &RenderStyle::default(), workload.start, 600.0).unwrap() {
        f.pixels.save(&frames.join(format!("{}.png", f.timestamp.epoch_millis()))).unwrap();
    }
    let plan = RunPlan::new(config(&["x"]), env(), SamplerChoice::Simulated(model), dir.path().join("l"))
        .with_meter(MeterSource::Frames { dir: frames, layout })
        .virtual_time(workload);
    let r = execute_run(&plan).unwrap();
    let truth = r.energies.ground_truth_ws.unwrap();
    assert!((truth - 180_000.0).abs() <= 72_000.0, "{truth}");
    let t = r.meter_timeline.unwrap();
    assert!(t.is_monotone());
    assert!((t.readings[0].cumulative_kwh - 12.34).abs() < 1e-9);
}

#[test]
fn meter_failure_keeps_record() {
    let dir = tempfile::tempdir().unwrap();
    let plan = virtual_plan(PowerModel::constant(0.0, 100.0, 1.0), 10.0, &dir.path().join("l"))
        .with_meter(MeterSource::File(dir.path().join("missing.txt")));
    let r = execute_run(&plan).unwrap();
    assert!(r.energies.ground_truth_ws.is_none());
    assert!(r.notes.contains("ground truth unavailable"), "{}", r.notes);

    // readings that stop before the run ends cannot bracket it
    let start = VirtualWorkload::new(10.0, 1).start;
    let readings = vec![MeterReading::from_file(start, 1.0), MeterReading::from_file(start.offset_secs(5.0), 1.0)];
    let plan = virtual_plan(PowerModel::constant(0.0, 100.0, 1.0), 10.0, &dir.path().join("l2"))
        .with_meter(MeterSource::Readings(readings));
    let r = execute_run(&plan).unwrap();
    assert!(r.energies.ground_truth_ws.is_none());
    assert!(r.meter_timeline.is_some());
}

struct NoHardware;

impl SamplerBackend for NoHardware {
    fn name(&self) -> &str {
        "none"
    }
    fn probe(&self) -> Vec<ProcessorRef> {
        Vec::new()
    }
    fn read_now(&self, p: &str) -> Result<f64, SamplerError> {
        Err(SamplerError::UnknownSource(p.into()))
    }
}

#[test]
fn unavailable_sampler_needs_opt_in() {
    let dir = tempfile::tempdir().unwrap();
    let mut plan = RunPlan::new(config(&["x"]), env(), SamplerChoice::Backend(Arc::new(NoHardware)), dir.path().join("l"))
        .virtual_time(VirtualWorkload::new(5.0, 1));
    assert!(matches!(execute_run(&plan), Err(RunError::SamplerUnavailable(_))));
    plan.allow_static_only = true;
    let r = execute_run(&plan).unwrap();
    assert_eq!(r.energies.dynamic_ws, None);
    assert_eq!(r.energies.static_ws, 1_500.0);
}

#[test]
fn invalid_config_and_unwritable_log() {
    let dir = tempfile::tempdir().unwrap();
    let mut plan = virtual_plan(PowerModel::constant(0.0, 1.0, 1.0), 5.0, &dir.path().join("l"));
    plan.config.active_processors.insert("tpu9".into());
    assert!(matches!(execute_run(&plan), Err(RunError::Invalid(_))));

    let plan = virtual_plan(PowerModel::constant(0.0, 1.0, 1.0), 5.0, &dir.path().join("no/such/dir/l"));
    assert!(matches!(execute_series(&plan), Err(RunError::Log(_))));
}

#[cfg(unix)]
mod live {
    use super::*;

    #[test]
    fn workload_progress_and_prompt_stop() {
        let dir = tempfile::tempdir().unwrap();
        let mut plan = RunPlan::new(
            config(&["sh", "-c", "echo work_units=3; sleep 0.4; echo work_units=7"]),
            env(),
            SamplerChoice::Simulated(PowerModel::constant(0.0, 100.0, 1.0)),
            dir.path().join("l"),
        );
        plan.interval_s = 0.05;
        let r = execute_run(&plan).unwrap();
        assert!(r.status.is_completed());
        assert_eq!(r.work_units_completed, 7);
        assert!(r.duration_s >= 0.4);
        let last = r.traces[0].samples.last().unwrap().timestamp_s;
        assert!(last <= r.duration_s + 2.0 * plan.interval_s, "{last} vs {}", r.duration_s);
        let dynamic = r.energies.dynamic_ws.unwrap();
        assert!((dynamic / (100.0 * r.duration_s) - 1.0).abs() < 0.1, "{dynamic}");
    }

    #[test]
    fn immediate_failure_is_recorded() {
        let dir = tempfile::tempdir().unwrap();
        let plan = RunPlan::new(
            config(&["sh", "-c", "exit 2"]),
            env(),
            SamplerChoice::Simulated(PowerModel::constant(0.0, 100.0, 1.0)),
            dir.path().join("l"),
        );
        let r = execute_run(&plan).unwrap();
        assert!(matches!(r.status, RunStatus::Failed { exit_code: Some(2), .. }));
        assert!(r.duration_s > 0.0 && r.duration_s < 1.0);
        assert_eq!(RunLog::new(dir.path().join("l")).read_all().unwrap().len(), 1);
    }
}
