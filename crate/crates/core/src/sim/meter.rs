use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::model::PowerModel;
use super::SimError;
use crate::meter::{
    display_digits, render_display, DisplayLayout, MeterFrame, MeterReading, Provenance, RenderOptions, RenderStyle,
};
use crate::model::WallTime;
use crate::units::WS_PER_KWH;

/// Test double for a wall meter that displays the quantized true integral.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedMeter {
    pub resolution_kwh: f64,
    pub frame_rate_hz: f64,
    pub render_noise_std: f64,
    pub rotation_deg: f64,
    /// Counter value before the simulated run starts.
    pub initial_kwh: f64,
}

impl Default for SimulatedMeter {
    fn default() -> Self {
        Self {
            resolution_kwh: 0.01,
            frame_rate_hz: 1.0,
            render_noise_std: 0.0,
            rotation_deg: 0.0,
            initial_kwh: 0.0,
        }
    }
}

/// What the simulated meter produced.
#[derive(Debug, Clone)]
pub enum MeterEvidence {
    Readings(Vec<MeterReading>),
    Frames(Vec<MeterFrame>),
}

impl SimulatedMeter {
    pub fn with_resolution(resolution_kwh: f64) -> Self {
        Self {
            resolution_kwh,
            ..Self::default()
        }
    }

    fn check(&self) -> Result<(), SimError> {
        if !(self.resolution_kwh > 0.0) || !(self.frame_rate_hz > 0.0) || !(self.render_noise_std >= 0.0) {
            return Err(SimError::Meter(format!("invalid meter parameters {self:?}")));
        }
        Ok(())
    }

    /// Displayed counter after `energy_ws` on top of `initial_kwh`.
    pub fn displayed_kwh(&self, energy_ws: f64) -> f64 {
        let counts = ((self.initial_kwh + energy_ws / WS_PER_KWH) / self.resolution_kwh + 1e-9).floor();
        counts * self.resolution_kwh
    }

    /// Instants (seconds from run start) at which the meter is observed:
    /// every frame period, plus the run end.
    pub fn observation_times(&self, duration_s: f64) -> Vec<f64> {
        let period = 1.0 / self.frame_rate_hz;
        let mut times: Vec<f64> = (0..).map(|k| k as f64 * period).take_while(|t| *t < duration_s - 1e-9).collect();
        times.push(duration_s);
        times
    }

    /// Readings of the quantized true integral, `provenance = file`.
    pub fn readings(&self, model: &PowerModel, start: WallTime, duration_s: f64) -> Result<Vec<MeterReading>, SimError> {
        self.check()?;
        Ok(self
            .observation_times(duration_s)
            .into_iter()
            .map(|t| MeterReading {
                timestamp: start.offset_secs(t),
                cumulative_kwh: self.displayed_kwh(model.true_energy(t)),
                confidence: 1.0,
                provenance: Provenance::File,
            })
            .collect())
    }

    /// Rendered seven-segment frames of the same readings.
    pub fn frames(
        &self,
        model: &PowerModel,
        layout: &DisplayLayout,
        style: &RenderStyle,
        start: WallTime,
        duration_s: f64,
    ) -> Result<Vec<MeterFrame>, SimError> {
        if (layout.resolution_kwh() - self.resolution_kwh).abs() > 1e-12 {
            return Err(SimError::Meter(format!(
                "layout resolution {} kWh differs from meter resolution {} kWh",
                layout.resolution_kwh(),
                self.resolution_kwh
            )));
        }
        let opts = RenderOptions {
            rotation_deg: self.rotation_deg,
            noise_std: self.render_noise_std,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(model.seed ^ 0x6d_6574_6572);
        self.readings(model, start, duration_s)?
            .into_iter()
            .map(|r| {
                let digits = display_digits(r.cumulative_kwh, layout)?;
                let pixels = render_display(&digits, layout, style, opts, &mut rng)?;
                Ok(MeterFrame {
                    timestamp: r.timestamp,
                    pixels,
                })
            })
            .collect()
    }
}
