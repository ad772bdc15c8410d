//! Derived quantities over persisted runs: estimation errors, per-unit
//! energy, average power, aggregates, grouped comparisons and reports.

mod aggregate;
mod errors;
mod grouped;
mod measures;
mod report;

use thiserror::Error;

pub use aggregate::{aggregate_series, nearest_rank, Aggregate, BoxStats, Metric};
pub use errors::{estimation_errors, Approach, ErrorFigure, EstimationErrors};
pub use grouped::{grouped_comparison, GroupDimension, GroupRatio, GroupStats, GroupedComparison, GROUP_METRICS, RATIO_METRICS};
pub use measures::{average_power, energies, per_unit_energy, PerApproach, Source};
pub use report::{
    build_report, emit_report, BoxRow, EnergyRow, ErrorRow, PowerRow, Report, ReportFormat, ReportOptions, RunRow,
    BOX_METRICS, RUN_COLUMNS,
};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("no ground truth")]
    NoGroundTruth,
    #[error("run {0} completed no work units")]
    NoWorkUnits(String),
    #[error("normalization basis must be ≥ 1")]
    ZeroBasis,
    #[error("run {0} has non-positive duration")]
    NonPositiveDuration(String),
    #[error("no records")]
    Empty,
    #[error("runs {first} and {other} have different configurations")]
    MixedConfigs { first: String, other: String },
    #[error("metric {0} is absent from every run")]
    MetricAbsent(String),
    #[error("io: {0}")]
    Io(String),
}
