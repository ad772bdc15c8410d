use std::f64::consts::TAU;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SimError;

/// Utilization over time, always within `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Profile {
    Constant {
        level: f64,
    },
    /// Linear from `from` to `to` over `over_s`, then flat at `to`.
    Ramp {
        from: f64,
        to: f64,
        over_s: f64,
    },
    /// `mean + amplitude × sin(2πt / period_s + phase_rad)`.
    Sinusoid {
        mean: f64,
        amplitude: f64,
        period_s: f64,
        #[serde(default)]
        phase_rad: f64,
    },
    /// `high` for the first `duty` share of every period, `low` otherwise.
    SquareWave {
        low: f64,
        high: f64,
        period_s: f64,
        #[serde(default = "half")]
        duty: f64,
    },
}

fn half() -> f64 {
    0.5
}

impl Profile {
    pub fn utilization(&self, t: f64) -> f64 {
        match *self {
            Profile::Constant { level } => level,
            Profile::Ramp { from, to, over_s } => from + (to - from) * (t / over_s).clamp(0.0, 1.0),
            Profile::Sinusoid {
                mean,
                amplitude,
                period_s,
                phase_rad,
            } => mean + amplitude * (TAU * t / period_s + phase_rad).sin(),
            Profile::SquareWave {
                low,
                high,
                period_s,
                duty,
            } => {
                if t.rem_euclid(period_s) < duty * period_s {
                    high
                } else {
                    low
                }
            }
        }
    }

    /// `∫₀ᵗ u(s) ds` in closed form.
    pub fn integral(&self, t: f64) -> f64 {
        match *self {
            Profile::Constant { level } => level * t,
            Profile::Ramp { from, to, over_s } => {
                if t <= over_s {
                    from * t + (to - from) * t * t / (2.0 * over_s)
                } else {
                    (from + to) / 2.0 * over_s + to * (t - over_s)
                }
            }
            Profile::Sinusoid {
                mean,
                amplitude,
                period_s,
                phase_rad,
            } => mean * t + amplitude * period_s / TAU * (phase_rad.cos() - (TAU * t / period_s + phase_rad).cos()),
            Profile::SquareWave {
                low,
                high,
                period_s,
                duty,
            } => {
                let periods = (t / period_s).floor();
                let rest = t - periods * period_s;
                let on = duty * period_s;
                periods * (high * on + low * (period_s - on)) + high * rest.min(on) + low * (rest - on).max(0.0)
            }
        }
    }

    fn check(&self) -> Result<(), String> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(format!("{name} must lie in [0, 1], got {v}"))
            }
        };
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(format!("{name} must be positive, got {v}"))
            }
        };
        match *self {
            Profile::Constant { level } => unit("level", level),
            Profile::Ramp { from, to, over_s } => {
                unit("from", from)?;
                unit("to", to)?;
                positive("over_s", over_s)
            }
            Profile::Sinusoid {
                mean,
                amplitude,
                period_s,
                phase_rad,
            } => {
                unit("mean - amplitude", mean - amplitude.abs())?;
                unit("mean + amplitude", mean + amplitude.abs())?;
                positive("period_s", period_s)?;
                if phase_rad.is_finite() {
                    Ok(())
                } else {
                    Err("phase_rad must be finite".into())
                }
            }
            Profile::SquareWave {
                low,
                high,
                period_s,
                duty,
            } => {
                unit("low", low)?;
                unit("high", high)?;
                unit("duty", duty)?;
                positive("period_s", period_s)
            }
        }
    }
}

/// Synthetic machine with known power behavior.
///
/// True draw is `idle_w + u(t) × (max_w − idle_w) + overhead_w`. Samplers see
/// only `sampled_fraction × (idle_w + u(t) × (max_w − idle_w))` plus noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerModel {
    pub idle_w: f64,
    pub max_w: f64,
    pub profile: Profile,
    #[serde(default = "one")]
    pub sampled_fraction: f64,
    /// Constant draw no sampler sees.
    #[serde(default)]
    pub overhead_w: f64,
    #[serde(default)]
    pub jitter_std_w: f64,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> f64 {
    1.0
}

impl PowerModel {
    pub fn constant(idle_w: f64, max_w: f64, level: f64) -> Self {
        Self {
            idle_w,
            max_w,
            profile: Profile::Constant { level },
            sampled_fraction: 1.0,
            overhead_w: 0.0,
            jitter_std_w: 0.0,
            seed: 0,
        }
    }

    pub fn with_sampled_fraction(mut self, f: f64) -> Self {
        self.sampled_fraction = f;
        self
    }

    pub fn with_profile(mut self, profile: Profile) -> Self {
        self.profile = profile;
        self
    }

    pub fn with_jitter(mut self, std_w: f64, seed: u64) -> Self {
        self.jitter_std_w = std_w;
        self.seed = seed;
        self
    }

    pub fn check(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Model(m));
        if !(self.idle_w >= 0.0) || !self.idle_w.is_finite() {
            return bad(format!("idle_w must be nonnegative, got {}", self.idle_w));
        }
        if !(self.max_w > self.idle_w) || !self.max_w.is_finite() {
            return bad(format!("max_w ({}) must exceed idle_w ({})", self.max_w, self.idle_w));
        }
        if !(self.sampled_fraction > 0.0 && self.sampled_fraction <= 1.0) {
            return bad(format!("sampled_fraction must lie in (0, 1], got {}", self.sampled_fraction));
        }
        if !(self.overhead_w >= 0.0) || !self.overhead_w.is_finite() {
            return bad(format!("overhead_w must be nonnegative, got {}", self.overhead_w));
        }
        if !(self.jitter_std_w >= 0.0) || !self.jitter_std_w.is_finite() {
            return bad(format!("jitter_std_w must be nonnegative, got {}", self.jitter_std_w));
        }
        self.profile.check().map_err(SimError::Model)
    }

    /// Draw the samplers can see, before noise.
    pub fn system_power(&self, t: f64) -> f64 {
        self.idle_w + self.profile.utilization(t) * (self.max_w - self.idle_w)
    }

    pub fn visible_power(&self, t: f64) -> f64 {
        self.sampled_fraction * self.system_power(t)
    }

    /// What a wall meter would see.
    pub fn true_power(&self, t: f64) -> f64 {
        self.system_power(t) + self.overhead_w
    }

    /// True energy over `[0, t]` in Ws.
    pub fn true_energy(&self, t: f64) -> f64 {
        self.system_energy(t) + self.overhead_w * t
    }

    /// Noise-free sampler-visible energy over `[0, t]` in Ws.
    pub fn visible_energy(&self, t: f64) -> f64 {
        self.sampled_fraction * self.system_energy(t)
    }

    fn system_energy(&self, t: f64) -> f64 {
        self.idle_w * t + (self.max_w - self.idle_w) * self.profile.integral(t)
    }

    pub fn parse(text: &str) -> Result<Self, SimError> {
        let model: Self = toml::from_str(text).map_err(|e| SimError::Model(e.message().to_string()))?;
        model.check()?;
        Ok(model)
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("power model serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fine_integral(m: &PowerModel, t: f64) -> f64 {
        // composite midpoint rule; independent of the closed forms
        let n = 200_000;
        let h = t / n as f64;
        (0..n).map(|i| m.true_power((i as f64 + 0.5) * h)).sum::<f64>() * h
    }

    #[test]
    fn constant_truth() {
        let m = PowerModel::constant(50.0, 450.0, 1.0);
        assert_eq!(m.true_energy(100.0), 45_000.0);
    }

    #[test]
    fn ramp_truth() {
        let m = PowerModel::constant(50.0, 450.0, 0.0).with_profile(Profile::Ramp {
            from: 0.0,
            to: 1.0,
            over_s: 100.0,
        });
        assert_eq!(m.true_energy(100.0), 25_000.0);
        assert!((m.true_energy(150.0) - (25_000.0 + 450.0 * 50.0)).abs() < 1e-9);
    }

    #[test]
    fn sinusoid_full_periods_equal_mean() {
        let m = PowerModel::constant(100.0, 300.0, 0.0).with_profile(Profile::Sinusoid {
            mean: 0.5,
            amplitude: 0.4,
            period_s: 7.0,
            phase_rad: 0.3,
        });
        let t = 7.0 * 6.0;
        assert!((m.true_energy(t) - 200.0 * t).abs() < 1e-9);
    }

    #[test]
    fn closed_forms_match_numeric() {
        let profiles = [
            Profile::Constant { level: 0.3 },
            Profile::Ramp {
                from: 0.9,
                to: 0.1,
                over_s: 33.0,
            },
            Profile::Sinusoid {
                mean: 0.5,
                amplitude: 0.5,
                period_s: 13.0,
                phase_rad: 1.0,
            },
            Profile::SquareWave {
                low: 0.1,
                high: 0.8,
                period_s: 9.0,
                duty: 0.3,
            },
        ];
        for p in profiles {
            let mut m = PowerModel::constant(40.0, 240.0, 0.0).with_profile(p);
            m.overhead_w = 15.0;
            for t in [5.0, 47.5, 100.0] {
                let exact = m.true_energy(t);
                let numeric = fine_integral(&m, t);
                assert!((exact - numeric).abs() < 1e-3 * exact.max(1.0), "{p:?} t={t}: {exact} vs {numeric}");
            }
        }
    }

    #[test]
    fn model_file_round_trip() {
        let text = r#"
            idle_w = 50
            max_w = 450
            sampled_fraction = 0.75
            seed = 7

            [profile]
            kind = "square-wave"
            low = 0.2
            high = 1.0
            period_s = 10
        "#;
        let m = PowerModel::parse(text).unwrap();
        assert_eq!(m.seed, 7);
        assert!(matches!(m.profile, Profile::SquareWave { duty, .. } if duty == 0.5));
        assert_eq!(PowerModel::parse(&m.to_toml()).unwrap(), m);
    }

    #[test]
    fn unknown_profile_rejected() {
        let err = PowerModel::parse("idle_w = 1\nmax_w = 2\n[profile]\nkind = \"sawtooth\"\n").unwrap_err();
        assert!(err.to_string().contains("sawtooth"), "{err}");
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(PowerModel::constant(50.0, 40.0, 1.0).check().is_err());
        assert!(PowerModel::constant(0.0, 40.0, 1.0).with_sampled_fraction(0.0).check().is_err());
        assert!(PowerModel::constant(0.0, 40.0, 1.2).check().is_err());
        let m = PowerModel::constant(0.0, 40.0, 0.0).with_profile(Profile::Sinusoid {
            mean: 0.8,
            amplitude: 0.5,
            period_s: 1.0,
            phase_rad: 0.0,
        });
        assert!(m.check().is_err());
    }
}
