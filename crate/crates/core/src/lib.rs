//! Energy quantification for compute workloads.
//!
//! A run is measured three ways at once: a static estimate from processor
//! TDPs, a dynamic estimate integrated from sampled power traces, and ground
//! truth read off an external energy meter. [`analysis`] compares them.
//! [`sim`] supplies synthetic environments with exact analytic answers.

pub mod analysis;
pub mod meter;
pub mod model;
pub mod runner;
pub mod sampling;
pub mod sim;
pub mod static_energy;
pub mod units;

pub use analysis::{
    aggregate_series, average_power, emit_report, estimation_errors, grouped_comparison, per_unit_energy, Aggregate,
    AnalysisError, Approach, ErrorFigure, GroupDimension, GroupedComparison, Metric, ReportFormat, ReportOptions,
};
pub use meter::{
    build_timeline, decode_digit, ground_truth_energy, read_frame, segment_display, DisplayLayout, MeterError,
    MeterReading, MeterTimeline,
};
pub use model::{
    validate_config, EnergyTriple, Environment, ExperimentConfig, PowerSample, PowerTrace, ProcessorKind,
    ProcessorRef, RunLog, RunRecord, RunStatus, WallTime, WorkUnit,
};
pub use runner::{execute_run, execute_series, RunError, RunPlan};
pub use sampling::{dynamic_estimate, integrate_trace, sample_loop, DynamicEstimate, SamplerBackend};
pub use sim::{expected_dynamic_error, simulate_run, PowerModel};
pub use static_energy::{co2_equivalents, static_estimate, CarbonFigure, StaticEstimate, TdpTable};
pub use units::{kwh_to_ws, ws_to_kwh, WS_PER_KWH};
