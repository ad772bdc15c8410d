use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;
use std::sync::Arc;

use crate::meter::{DisplayLayout, MeterReading, TimelineOptions};
use crate::model::{Environment, ExperimentConfig, WallTime};
use crate::sampling::{Estimator, SamplerBackend, DEFAULT_INTERVAL_S};
use crate::sim::{EvidenceKind, PowerModel, SimulatedMeter, SIM_EPOCH_MILLIS};

/// Which telemetry backend drives the sampling loop.
#[derive(Clone)]
pub enum SamplerChoice {
    Simulated(PowerModel),
    Rapl,
    NvidiaSmi,
    /// A caller-provided backend; it is used as is in either mode.
    Backend(Arc<dyn SamplerBackend>),
}

impl fmt::Debug for SamplerChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SamplerChoice::Simulated(m) => f.debug_tuple("Simulated").field(m).finish(),
            SamplerChoice::Rapl => f.write_str("Rapl"),
            SamplerChoice::NvidiaSmi => f.write_str("NvidiaSmi"),
            SamplerChoice::Backend(b) => write!(f, "Backend({})", b.name()),
        }
    }
}

impl SamplerChoice {
    /// Backend names accepted on the command line.
    pub const NAMES: [&'static str; 3] = ["simulated", "rapl", "nvidia-smi"];
}

/// Where ground-truth evidence comes from.
#[derive(Debug, Clone)]
pub enum MeterSource {
    Frames { dir: PathBuf, layout: DisplayLayout },
    File(PathBuf),
    Readings(Vec<MeterReading>),
    /// Generated from the simulated sampler's power model. Only valid with
    /// [`SamplerChoice::Simulated`].
    Simulated { meter: SimulatedMeter, evidence: EvidenceKind },
}

/// A scripted workload in virtual time: no process is launched and the
/// clock jumps straight to each sampling deadline.
#[derive(Debug, Clone)]
pub struct VirtualWorkload {
    /// Wall-clock instant of the first run's start.
    pub start: WallTime,
    pub duration_s: f64,
    pub work_units: u64,
    /// Run indices that end with a scripted failure.
    pub fail_runs: BTreeSet<u32>,
    /// Seeds run and series identifiers.
    pub seed: u64,
}

impl VirtualWorkload {
    pub fn new(duration_s: f64, work_units: u64) -> Self {
        Self {
            start: WallTime::from_epoch_millis(SIM_EPOCH_MILLIS),
            duration_s,
            work_units,
            fail_runs: BTreeSet::new(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Execution {
    /// Launch `workload_command` and sample in real time.
    Live,
    Virtual(VirtualWorkload),
}

#[derive(Debug, Clone)]
pub struct RunPlan {
    pub config: ExperimentConfig,
    pub env: Environment,
    pub sampler: SamplerChoice,
    pub meter: Option<MeterSource>,
    pub output_log: PathBuf,
    pub interval_s: f64,
    pub estimator: Estimator,
    /// Proceed without dynamic estimates when the sampler is unavailable.
    pub allow_static_only: bool,
    /// Meter clock minus host clock, seconds.
    pub clock_offset_s: f64,
    /// Timeline options for reading files; frame input uses the layout's
    /// resolution instead.
    pub timeline: TimelineOptions,
    pub execution: Execution,
}

impl RunPlan {
    pub fn new(config: ExperimentConfig, env: Environment, sampler: SamplerChoice, output_log: impl Into<PathBuf>) -> Self {
        Self {
            config,
            env,
            sampler,
            meter: None,
            output_log: output_log.into(),
            interval_s: DEFAULT_INTERVAL_S,
            estimator: Estimator::default(),
            allow_static_only: false,
            clock_offset_s: 0.0,
            timeline: TimelineOptions::default(),
            execution: Execution::Live,
        }
    }

    pub fn with_meter(mut self, meter: MeterSource) -> Self {
        self.meter = Some(meter);
        self
    }

    pub fn virtual_time(mut self, workload: VirtualWorkload) -> Self {
        self.execution = Execution::Virtual(workload);
        self
    }
}
