use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::model::PowerModel;
use crate::model::ProcessorRef;
use crate::sampling::{Clock, SamplerBackend, SamplerError};

/// Serves the sampler-visible power of a [`PowerModel`], split across
/// processors in proportion to their TDP.
pub struct SimulatedBackend {
    model: PowerModel,
    processors: Vec<ProcessorRef>,
    weights: Vec<f64>,
    clock: Arc<dyn Clock>,
    origin_bits: AtomicU64,
    rng: Mutex<ChaCha8Rng>,
}

impl SimulatedBackend {
    /// Model time is `clock.now_s() − origin_s`.
    pub fn new(model: PowerModel, processors: Vec<ProcessorRef>, clock: Arc<dyn Clock>, origin_s: f64) -> Self {
        let total: f64 = processors.iter().map(|p| p.tdp_watts.max(0.0)).sum();
        let weights = processors
            .iter()
            .map(|p| {
                if total > 0.0 {
                    p.tdp_watts.max(0.0) / total
                } else {
                    1.0 / processors.len() as f64
                }
            })
            .collect();
        let rng = Mutex::new(ChaCha8Rng::seed_from_u64(model.seed));
        Self {
            model,
            processors,
            weights,
            clock,
            origin_bits: AtomicU64::new(origin_s.to_bits()),
            rng,
        }
    }

    pub fn model(&self) -> &PowerModel {
        &self.model
    }

    /// Moves model time zero to `origin_s` on the shared clock.
    pub fn restart_at(&self, origin_s: f64) {
        self.origin_bits.store(origin_s.to_bits(), Ordering::SeqCst);
    }

    fn model_time(&self) -> f64 {
        self.clock.now_s() - f64::from_bits(self.origin_bits.load(Ordering::SeqCst))
    }
}

impl SamplerBackend for SimulatedBackend {
    fn name(&self) -> &str {
        "simulated"
    }

    fn probe(&self) -> Vec<ProcessorRef> {
        self.processors.clone()
    }

    fn read_now(&self, processor: &str) -> Result<f64, SamplerError> {
        let i = self
            .processors
            .iter()
            .position(|p| p.name == processor)
            .ok_or_else(|| SamplerError::UnknownSource(processor.to_string()))?;
        let clean = self.weights[i] * self.model.visible_power(self.model_time());
        if self.model.jitter_std_w == 0.0 {
            return Ok(clean);
        }
        let noise = Normal::new(0.0, self.model.jitter_std_w).expect("checked jitter");
        let mut rng = self.rng.lock().unwrap_or_else(|e| e.into_inner());
        Ok((clean + noise.sample(&mut *rng)).max(0.0))
    }
}
