//! Run orchestration: launches the workload, samples power alongside it,
//! ingests meter evidence and persists one record per run.

mod execute;
mod plan;
mod workload;

use thiserror::Error;

pub use execute::{execute_run, execute_series};
pub use plan::{Execution, MeterSource, RunPlan, SamplerChoice, VirtualWorkload};
pub use workload::{parse_progress, WorkCounter};

use crate::model::{LogError, Violation};
use crate::sampling::SamplerError;
use crate::static_energy::StaticError;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid configuration: {}", join(.0))]
    Invalid(Vec<Violation>),
    #[error("{0}")]
    Plan(String),
    #[error("{0} (pass --allow-static-only to run without dynamic estimates)")]
    SamplerUnavailable(SamplerError),
    #[error(transparent)]
    Sampler(SamplerError),
    #[error(transparent)]
    Static(#[from] StaticError),
    #[error("run log: {0}")]
    Log(#[from] LogError),
    #[error("produced an invalid record: {}", join(.0))]
    Record(Vec<Violation>),
}

fn join(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}
