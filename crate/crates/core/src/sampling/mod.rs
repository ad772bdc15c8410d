//! Power sampling: backend contract, the sampling loop, and trace integration.

mod backend;
mod clock;
mod integrate;
pub mod nvidia;
pub mod rapl;
mod sampler;
mod trace_io;

pub use backend::{counter_delta, SamplerBackend, SamplerError};
pub use clock::{Clock, MonotonicClock, StopSignal, VirtualClock};
pub use integrate::{
    dynamic_estimate, integrate_trace, DynamicEstimate, Estimator, IntegrateError, IntegrationOptions,
    BRIDGE_FACTOR, MAX_GAP_FACTOR,
};
pub use nvidia::NvidiaSmiBackend;
pub use rapl::RaplBackend;
pub use sampler::{sample_loop, SamplingOutcome};
pub use trace_io::{parse_trace_dump, write_trace_dump, TraceParseError};

/// Default sampling interval in seconds.
pub const DEFAULT_INTERVAL_S: f64 = 1.0;
