use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::{error, info, warn};
use serde::Serialize;

use enertrace::analysis::{emit_report, ReportFormat, ReportOptions};
use enertrace::meter::{write_reading_file, DisplayLayout, RenderStyle, TimelineOptions};
use enertrace::model::{load_config, load_environment, RunLog};
use enertrace::runner::{execute_series, MeterSource, RunPlan, SamplerChoice, VirtualWorkload};
use enertrace::sampling::{write_trace_dump, Estimator};
use enertrace::sim::{
    expected_dynamic_error, expected_dynamic_error_over, simulate_run, EvidenceKind, MeterEvidence, PowerModel,
    SimOptions, SimulatedMeter,
};
use enertrace::{ws_to_kwh, RunRecord, TdpTable};

#[derive(Parser)]
#[command(name = "enertrace", version, about = "Measure workload energy three ways and compare them")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a workload, sample power, read the meter and log each run.
    Run(RunArgs),
    /// Turn a run log into report tables and plot data.
    Analyze(AnalyzeArgs),
    /// Produce synthetic meter evidence and analytic values for a power model.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    env: PathBuf,
    /// simulated, rapl or nvidia-smi.
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(SamplerChoice::NAMES))]
    sampler: String,
    /// Power model file; required by the simulated sampler.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Directory of meter display photos.
    #[arg(long, group = "meter")]
    meter_frames: Option<PathBuf>,
    /// Plain-text `seconds kwh` meter readings.
    #[arg(long, group = "meter")]
    meter_file: Option<PathBuf>,
    /// Synthesize meter readings from the power model (virtual runs only).
    #[arg(long, group = "meter", requires = "virtual_duration")]
    simulated_meter: bool,
    /// Display geometry for --meter-frames; defaults to the built-in layout.
    #[arg(long, requires = "meter_frames")]
    layout: Option<PathBuf>,
    /// Meter resolution, kWh. Defaults to the layout's, or 0.01.
    #[arg(long)]
    meter_resolution: Option<f64>,
    /// Seconds to add to run timestamps to land on the meter's clock.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    clock_offset: f64,
    /// Overrides the configuration's repetition count.
    #[arg(long)]
    repetitions: Option<u32>,
    #[arg(long)]
    log: PathBuf,
    /// Sampling interval, seconds.
    #[arg(long, default_value_t = enertrace::sampling::DEFAULT_INTERVAL_S)]
    interval: f64,
    /// Integrate with the left-rectangle sum instead of the trapezoid rule.
    #[arg(long)]
    rectangle: bool,
    /// Proceed without dynamic estimates when the sampler is unavailable.
    #[arg(long)]
    allow_static_only: bool,
    /// TDP table consulted for processors without an explicit rating.
    #[arg(long)]
    tdp_table: Option<PathBuf>,
    /// Write each run's power trace to `<dir>/<run_id>.trace`.
    #[arg(long)]
    dump_traces: Option<PathBuf>,
    /// Script the workload in virtual time for this many seconds instead of
    /// launching it (simulated sampler only).
    #[arg(long, requires = "model")]
    virtual_duration: Option<f64>,
    /// Work units a virtual run reports.
    #[arg(long, default_value_t = 0, requires = "virtual_duration")]
    work_units: u64,
    /// Seed for virtual-run identifiers.
    #[arg(long, default_value_t = 0, requires = "virtual_duration")]
    seed: u64,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    log: PathBuf,
    /// `processor` or a hyperparameter key (optionally `hp:<key>`).
    #[arg(long)]
    group: Option<String>,
    #[arg(long)]
    out: PathBuf,
    /// csv or json.
    #[arg(long, default_value = "csv")]
    format: String,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    model: PathBuf,
    /// Run length, seconds.
    #[arg(long)]
    duration: f64,
    #[arg(long)]
    out: PathBuf,
    /// Meter resolution, kWh.
    #[arg(long, default_value_t = 0.01)]
    resolution: f64,
    /// Meter observations per second.
    #[arg(long, default_value_t = 1.0)]
    frame_rate: f64,
    /// Counter value at the start of the run, kWh.
    #[arg(long, default_value_t = 0.0)]
    initial_kwh: f64,
    /// Also render display frames into `<out>/frames`.
    #[arg(long)]
    frames: bool,
    /// Intensity noise added to rendered frames.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Rotation of rendered frames, degrees.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    rotation: f64,
    /// Sampling interval for the simulated trace dump, seconds.
    #[arg(long, default_value_t = enertrace::sampling::DEFAULT_INTERVAL_S)]
    interval: f64,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => run(args),
        Command::Analyze(args) => analyze(args).map(|()| true),
        Command::Simulate(args) => simulate(args).map(|()| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            error!("{e:#}");
            ExitCode::from(2)
        }
    }
}

fn tdp_table(path: Option<&Path>) -> Result<TdpTable> {
    match path {
        Some(p) => TdpTable::load(p).with_context(|| format!("loading {}", p.display())),
        None => Ok(TdpTable::bundled()),
    }
}

fn load_model(path: &Path) -> Result<PowerModel> {
    PowerModel::load(path).with_context(|| format!("loading power model {}", path.display()))
}

/// Returns whether every run completed.
fn run(args: RunArgs) -> Result<bool> {
    let mut config = load_config(&args.config).with_context(|| format!("loading {}", args.config.display()))?;
    if let Some(n) = args.repetitions {
        config.repetitions = n;
    }
    let tdp = tdp_table(args.tdp_table.as_deref())?;
    let env = load_environment(&args.env, &tdp).with_context(|| format!("loading {}", args.env.display()))?;

    let sampler = match args.sampler.as_str() {
        "simulated" => {
            let Some(path) = &args.model else {
                bail!("--sampler simulated needs --model <file>");
            };
            SamplerChoice::Simulated(load_model(path)?)
        }
        "rapl" => SamplerChoice::Rapl,
        "nvidia-smi" => SamplerChoice::NvidiaSmi,
        other => bail!("unknown sampler {other}"),
    };
    if args.virtual_duration.is_some() && !matches!(sampler, SamplerChoice::Simulated(_)) {
        bail!("--virtual-duration needs --sampler simulated");
    }

    let mut plan = RunPlan::new(config, env, sampler, &args.log);
    plan.interval_s = args.interval;
    plan.allow_static_only = args.allow_static_only;
    plan.clock_offset_s = args.clock_offset;
    if args.rectangle {
        plan.estimator = Estimator::Rectangle;
    }

    let layout = match &args.layout {
        Some(p) => DisplayLayout::load(p).with_context(|| format!("loading layout {}", p.display()))?,
        None => DisplayLayout::default(),
    };
    let resolution = args.meter_resolution.unwrap_or(if args.meter_frames.is_some() {
        layout.resolution_kwh()
    } else {
        TimelineOptions::default().resolution_kwh
    });
    plan.timeline = TimelineOptions::with_resolution(resolution);
    if let Some(dir) = args.meter_frames {
        plan.meter = Some(MeterSource::Frames { dir, layout });
    } else if let Some(file) = args.meter_file {
        plan.meter = Some(MeterSource::File(file));
    } else if args.simulated_meter {
        plan.meter = Some(MeterSource::Simulated {
            meter: SimulatedMeter::with_resolution(resolution),
            evidence: EvidenceKind::Readings,
        });
    }
    if let Some(duration) = args.virtual_duration {
        let mut workload = VirtualWorkload::new(duration, args.work_units);
        workload.seed = args.seed;
        plan = plan.virtual_time(workload);
    }

    let records = execute_series(&plan)?;
    if let Some(dir) = &args.dump_traces {
        dump_traces(dir, &records)?;
    }
    for r in &records {
        info!(
            "{} {}: static {:.1} Ws, dynamic {}, ground truth {}",
            r.run_id,
            if r.status.is_completed() { "completed" } else { "FAILED" },
            r.energies.static_ws,
            opt_ws(r.energies.dynamic_ws),
            opt_ws(r.energies.ground_truth_ws),
        );
    }
    let failed = records.iter().filter(|r| !r.status.is_completed()).count();
    if failed > 0 {
        warn!("{failed} of {} run(s) failed", records.len());
    }
    info!("{} run(s) appended to {}", records.len(), args.log.display());
    Ok(failed == 0)
}

fn opt_ws(v: Option<f64>) -> String {
    v.map_or_else(|| "absent".into(), |v| format!("{v:.1} Ws"))
}

fn dump_traces(dir: &Path, records: &[RunRecord]) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for r in records {
        let path = dir.join(format!("{}.trace", r.run_id));
        fs::write(&path, write_trace_dump(&r.traces)).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn analyze(args: AnalyzeArgs) -> Result<()> {
    let format: ReportFormat = args.format.parse().map_err(anyhow::Error::msg)?;
    let group = args.group.as_deref().map(str::parse).transpose().map_err(anyhow::Error::msg)?;
    let records = RunLog::new(&args.log)
        .read_all()
        .with_context(|| format!("reading {}", args.log.display()))?;
    let written = emit_report(&records, &ReportOptions { format, group }, &args.out)?;
    info!("{} run(s) analyzed", records.len());
    for p in written {
        println!("{}", p.display());
    }
    Ok(())
}

#[derive(Serialize)]
struct Manifest {
    duration_s: f64,
    start_epoch_millis: i64,
    true_energy_ws: f64,
    true_energy_kwh: f64,
    visible_energy_ws: f64,
    expected_dynamic_error: f64,
    expected_dynamic_error_with_overhead: f64,
    sampled_energy_ws: f64,
    meter_resolution_kwh: f64,
    meter_start_kwh: f64,
    meter_end_kwh: f64,
    metered_energy_ws: f64,
    frame_rate_hz: f64,
    readings: String,
    trace: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    frames: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    layout: Option<String>,
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let meter = SimulatedMeter {
        resolution_kwh: args.resolution,
        frame_rate_hz: args.frame_rate,
        render_noise_std: args.noise,
        rotation_deg: args.rotation,
        initial_kwh: args.initial_kwh,
    };
    let mut layout = DisplayLayout::default();
    if args.frames {
        // fit the display's decimals to the meter resolution
        let decimals = (-args.resolution.log10()).round().max(0.0) as usize;
        if decimals >= layout.digit_count {
            bail!("resolution {} kWh is too fine for a {}-digit display", args.resolution, layout.digit_count);
        }
        layout.decimal_after = layout.digit_count - decimals;
    }
    let opts = SimOptions {
        meter: meter.clone(),
        evidence: if args.frames {
            EvidenceKind::Frames {
                layout: layout.clone(),
                style: RenderStyle::default(),
            }
        } else {
            EvidenceKind::Readings
        },
        ..SimOptions::default()
    };
    let sim = simulate_run(&model, args.duration, &opts)?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;

    let readings = meter.readings(&model, sim.start, args.duration)?;
    fs::write(args.out.join("readings.txt"), write_reading_file(&readings))?;

    let outcome = sim.sample(args.interval)?;
    fs::write(args.out.join("trace.csv"), write_trace_dump(&outcome.traces))?;
    let sampled = enertrace::dynamic_estimate(&outcome.traces, args.duration, &Default::default())?;

    let (mut frames, mut layout_file) = (None, None);
    if let MeterEvidence::Frames(rendered) = &sim.evidence {
        let dir = args.out.join("frames");
        fs::create_dir_all(&dir)?;
        for f in rendered {
            f.pixels.save(&dir.join(format!("{}.png", f.timestamp.epoch_millis())))?;
        }
        fs::write(args.out.join("layout.toml"), layout.to_toml())?;
        frames = Some("frames".to_string());
        layout_file = Some("layout.toml".to_string());
        info!("{} frame(s) rendered", rendered.len());
    }

    let (first, last) = (readings.first(), readings.last());
    let meter_start_kwh = first.map_or(args.initial_kwh, |r| r.cumulative_kwh);
    let meter_end_kwh = last.map_or(args.initial_kwh, |r| r.cumulative_kwh);
    let manifest = Manifest {
        duration_s: args.duration,
        start_epoch_millis: sim.start.epoch_millis(),
        true_energy_ws: sim.truth_ws,
        true_energy_kwh: ws_to_kwh(sim.truth_ws),
        visible_energy_ws: sim.visible_ws,
        expected_dynamic_error: expected_dynamic_error(&model),
        expected_dynamic_error_with_overhead: expected_dynamic_error_over(&model, args.duration),
        sampled_energy_ws: sampled.energy_ws,
        meter_resolution_kwh: args.resolution,
        meter_start_kwh,
        meter_end_kwh,
        metered_energy_ws: enertrace::kwh_to_ws(meter_end_kwh - meter_start_kwh),
        frame_rate_hz: args.frame_rate,
        readings: "readings.txt".into(),
        trace: "trace.csv".into(),
        frames,
        layout: layout_file,
    };
    fs::write(args.out.join("manifest.toml"), toml::to_string(&manifest)?)?;
    info!(
        "true energy {:.1} Ws ({:.6} kWh), written to {}",
        sim.truth_ws,
        manifest.true_energy_kwh,
        args.out.display()
    );
    Ok(())
}
