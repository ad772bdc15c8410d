//! Shared domain types, validation and the persisted run-log format.

mod files;
mod log;
mod types;
mod validate;

pub use files::{load_config, load_environment, parse_config, parse_environment, FileError};
pub use log::{deserialize_log, deserialize_run, serialize_run, LogError, RunLog, SCHEMA_VERSION};
pub use types::{
    EnergyTriple, Environment, ExperimentConfig, PowerSample, PowerTrace, ProcessorKind, ProcessorRef,
    RunRecord, RunStatus, WallTime, WorkUnit,
};
pub use validate::{validate_config, validate_environment, validate_record, Violation};
