//! Constant-power energy estimation and CO₂-equivalent conversion.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Environment, ExperimentConfig};
use crate::units::ws_to_kwh;

/// The bundled TDP table shipped with the crate.
pub const BUNDLED_TDP_TABLE: &str = include_str!("../data/tdp.txt");

#[derive(Debug, Error, PartialEq)]
pub enum StaticError {
    #[error("unknown processor `{0}`")]
    UnknownProcessor(String),
    #[error("no active processor")]
    NoActiveProcessor,
    #[error("duration must be positive, got {0} s")]
    NonPositiveDuration(f64),
    #[error("{what} must be ≥ 0, got {value}")]
    Negative { what: &'static str, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaticEstimate {
    pub energy_ws: f64,
    pub assumed_power_w: f64,
    pub duration_s: f64,
}

/// Sums the TDPs of every active processor and multiplies by `duration_s`.
/// Inactive processors of the environment do not contribute.
pub fn static_estimate(
    config: &ExperimentConfig,
    env: &Environment,
    duration_s: f64,
) -> Result<StaticEstimate, StaticError> {
    if !(duration_s > 0.0) || !duration_s.is_finite() {
        return Err(StaticError::NonPositiveDuration(duration_s));
    }
    if config.active_processors.is_empty() {
        return Err(StaticError::NoActiveProcessor);
    }
    let mut power = 0.0;
    for name in &config.active_processors {
        let p = env
            .processor(name)
            .ok_or_else(|| StaticError::UnknownProcessor(name.clone()))?;
        power += p.tdp_watts;
    }
    Ok(StaticEstimate {
        energy_ws: power * duration_s,
        assumed_power_w: power,
        duration_s,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarbonFigure {
    pub kg_co2_equiv: f64,
    pub efficiency_kg_per_kwh: f64,
    pub energy_kwh: f64,
}

impl fmt::Display for CarbonFigure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.2} kg CO2-eq", self.kg_co2_equiv)
    }
}

pub fn co2_equivalents(energy_ws: f64, efficiency_kg_per_kwh: f64) -> Result<CarbonFigure, StaticError> {
    if !(energy_ws >= 0.0) {
        return Err(StaticError::Negative {
            what: "energy",
            value: energy_ws,
        });
    }
    if !(efficiency_kg_per_kwh >= 0.0) {
        return Err(StaticError::Negative {
            what: "co2 efficiency",
            value: efficiency_kg_per_kwh,
        });
    }
    let energy_kwh = ws_to_kwh(energy_ws);
    Ok(CarbonFigure {
        kg_co2_equiv: energy_kwh * efficiency_kg_per_kwh,
        efficiency_kg_per_kwh,
        energy_kwh,
    })
}

#[derive(Debug, Error)]
pub enum TdpTableError {
    #[error("tdp table line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("reading tdp table: {0}")]
    Io(#[from] std::io::Error),
}

/// Name → TDP lookup loaded from a two-column text file.
///
/// Lookups are case-insensitive. There is no fallback value for unknown
/// names.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TdpTable {
    entries: BTreeMap<String, f64>,
}

impl TdpTable {
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_TDP_TABLE).expect("bundled tdp table parses")
    }

    pub fn load(path: &Path) -> Result<Self, TdpTableError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Self, TdpTableError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: &str| TdpTableError::Parse {
                line: i + 1,
                message: message.to_string(),
            };
            let (name, watts) = line
                .rsplit_once(|c: char| c.is_whitespace() || c == ',')
                .ok_or_else(|| err("expected `<name> <watts>`"))?;
            let name = name.trim().trim_end_matches(',').trim();
            if name.is_empty() {
                return Err(err("empty processor name"));
            }
            let watts: f64 = watts.trim().parse().map_err(|_| err("watts is not a number"))?;
            if !(watts > 0.0) {
                return Err(err("watts must be positive"));
            }
            entries.insert(name.to_lowercase(), watts);
        }
        Ok(Self { entries })
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries.get(&name.to_lowercase()).copied()
    }

    pub fn insert(&mut self, name: &str, watts: f64) {
        self.entries.insert(name.to_lowercase(), watts);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ProcessorKind, ProcessorRef, WorkUnit};

    fn env() -> Environment {
        Environment {
            processors: vec![
                ProcessorRef::new(ProcessorKind::Gpu, "gpu", 300.0),
                ProcessorRef::new(ProcessorKind::Cpu, "cpu", 125.0),
            ],
            host_label: String::new(),
            co2_efficiency_kg_per_kwh: 0.38,
        }
    }

    fn config(active: &[&str]) -> ExperimentConfig {
        ExperimentConfig {
            workload_command: vec!["true".into()],
            domain_tag: String::new(),
            work_unit: WorkUnit::Query,
            work_unit_scale: 1,
            hyperparameters: Default::default(),
            active_processors: active.iter().map(|s| s.to_string()).collect(),
            planned_duration_s: None,
            repetitions: 1,
        }
    }

    #[test]
    fn gpu_vision_run() {
        let e = static_estimate(&config(&["gpu"]), &env(), 120.0).unwrap();
        assert_eq!(e.energy_ws, 36_000.0);
        assert_eq!(e.assumed_power_w, 300.0);
    }

    #[test]
    fn cpu_language_run() {
        let e = static_estimate(&config(&["cpu"]), &env(), 900.0).unwrap();
        assert_eq!(e.energy_ws, 112_500.0);
    }

    #[test]
    fn zero_duration_rejected() {
        assert_eq!(
            static_estimate(&config(&["gpu"]), &env(), 0.0),
            Err(StaticError::NonPositiveDuration(0.0))
        );
    }

    #[test]
    fn unresolved_processor() {
        assert_eq!(
            static_estimate(&config(&["tpu"]), &env(), 1.0),
            Err(StaticError::UnknownProcessor("tpu".into()))
        );
    }

    #[test]
    fn multi_processor_sums() {
        let both = static_estimate(&config(&["gpu", "cpu"]), &env(), 10.0).unwrap();
        assert_eq!(both.assumed_power_w, 425.0);
    }

    #[test]
    fn carbon_examples() {
        let c = co2_equivalents(72_144_000.0, 0.38).unwrap();
        assert!((c.kg_co2_equiv - 7.6152).abs() < 1e-12);
        assert_eq!(c.to_string(), "7.62 kg CO2-eq");
        assert_eq!(co2_equivalents(0.0, 0.7).unwrap().kg_co2_equiv, 0.0);
        assert_eq!(co2_equivalents(3_600_000.0, 0.5).unwrap().kg_co2_equiv, 0.5);
        assert!(co2_equivalents(-1.0, 0.5).is_err());
        assert!(co2_equivalents(1.0, -0.5).is_err());
    }

    #[test]
    fn tdp_table_parsing() {
        let t = TdpTable::bundled();
        assert_eq!(t.get("NVIDIA-RTX-4090"), Some(300.0));
        assert_eq!(t.get("intel-i9-13900k"), Some(125.0));
        assert_eq!(t.get("mystery-chip"), None);

        let t = TdpTable::parse("# c\nAMD Ryzen 9 7950X 170\n\nfoo,65\n").unwrap();
        assert_eq!(t.get("amd ryzen 9 7950x"), Some(170.0));
        assert_eq!(t.get("foo"), Some(65.0));
        assert!(TdpTable::parse("bad").is_err());
        assert!(TdpTable::parse("x -3").is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn linear_in_duration(t in 0.001f64..1e6) {
                let c = config(&["gpu"]);
                let one = static_estimate(&c, &env(), t).unwrap().energy_ws;
                let two = static_estimate(&c, &env(), 2.0 * t).unwrap().energy_ws;
                prop_assert!((two - 2.0 * one).abs() <= 1e-9 * two);
            }

            #[test]
            fn additive_over_processors(t in 0.001f64..1e6) {
                let a = static_estimate(&config(&["gpu"]), &env(), t).unwrap().energy_ws;
                let b = static_estimate(&config(&["cpu"]), &env(), t).unwrap().energy_ws;
                let ab = static_estimate(&config(&["gpu", "cpu"]), &env(), t).unwrap().energy_ws;
                prop_assert!((ab - (a + b)).abs() <= 1e-9 * ab);
            }

            #[test]
            fn carbon_bilinear(e in 0f64..1e9, k in 0f64..2.0, c in 0.01f64..100.0) {
                let base = co2_equivalents(e, k).unwrap().kg_co2_equiv;
                let se = co2_equivalents(e * c, k).unwrap().kg_co2_equiv;
                let sk = co2_equivalents(e, k * c).unwrap().kg_co2_equiv;
                prop_assert!((se - c * base).abs() <= 1e-9 * se.max(1e-12));
                prop_assert!((sk - c * base).abs() <= 1e-9 * sk.max(1e-12));
                prop_assert_eq!(co2_equivalents(0.0, k).unwrap().kg_co2_equiv, 0.0);
                prop_assert_eq!(co2_equivalents(e, 0.0).unwrap().kg_co2_equiv, 0.0);
            }
        }
    }
}
