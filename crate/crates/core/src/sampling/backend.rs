use thiserror::Error;

use crate::model::ProcessorRef;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SamplerError {
    #[error("sampler backend `{backend}` unavailable: {reason}")]
    Unavailable { backend: String, reason: String },
    #[error("reading `{source_name}` failed: {message}")]
    Read { source_name: String, message: String },
    #[error("unknown power source `{0}`")]
    UnknownSource(String),
    #[error("backend exposes no power source")]
    NoSources,
    #[error("sampling interval must be positive, got {0} s")]
    BadInterval(f64),
}

/// Something that can report instantaneous power for a set of processors.
///
/// `read_now` takes `&self`; implementations that keep per-source state
/// guard it internally so one backend can serve concurrent readers.
pub trait SamplerBackend: Send + Sync {
    fn name(&self) -> &str;

    /// Power sources this backend can read. Must stay stable over a run.
    fn probe(&self) -> Vec<ProcessorRef>;

    /// Instantaneous draw of `processor` in watts (≥ 0).
    fn read_now(&self, processor: &str) -> Result<f64, SamplerError>;
}

impl<B: SamplerBackend + ?Sized> SamplerBackend for Box<B> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn probe(&self) -> Vec<ProcessorRef> {
        (**self).probe()
    }
    fn read_now(&self, processor: &str) -> Result<f64, SamplerError> {
        (**self).read_now(processor)
    }
}

impl<B: SamplerBackend + ?Sized> SamplerBackend for std::sync::Arc<B> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn probe(&self) -> Vec<ProcessorRef> {
        (**self).probe()
    }
    fn read_now(&self, processor: &str) -> Result<f64, SamplerError> {
        (**self).read_now(processor)
    }
}

/// Non-negative difference between two readings of a wrapping energy
/// counter whose range is `[0, max_range]`.
pub fn counter_delta(prev: u64, now: u64, max_range: u64) -> u64 {
    if now >= prev {
        now - prev
    } else {
        (max_range - prev) + now
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wraparound() {
        assert_eq!(counter_delta(100, 250, 1000), 150);
        assert_eq!(counter_delta(900, 50, 1000), 150);
        assert_eq!(counter_delta(7, 7, 1000), 0);
    }
}
