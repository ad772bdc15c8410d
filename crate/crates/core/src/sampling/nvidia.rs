//! GPU board power via the `nvidia-smi` query interface.

use std::process::Command;

use super::backend::{SamplerBackend, SamplerError};
use crate::model::{ProcessorKind, ProcessorRef};

const QUERY: &str = "--query-gpu=index,name,power.draw,power.limit";

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct GpuRow {
    pub index: u32,
    pub name: String,
    pub draw_w: Option<f64>,
    pub limit_w: Option<f64>,
}

/// Parses `index, name, power.draw, power.limit` CSV rows (no header, no units).
pub(crate) fn parse_query(output: &str) -> Vec<GpuRow> {
    output
        .lines()
        .filter_map(|line| {
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() < 4 {
                return None;
            }
            Some(GpuRow {
                index: cols[0].parse().ok()?,
                name: cols[1].to_string(),
                draw_w: cols[2].parse().ok(),
                limit_w: cols[3].parse().ok(),
            })
        })
        .collect()
}

pub struct NvidiaSmiBackend {
    gpus: Vec<GpuRow>,
}

fn query(extra: &[&str]) -> Result<String, String> {
    let out = Command::new("nvidia-smi")
        .arg(QUERY)
        .arg("--format=csv,noheader,nounits")
        .args(extra)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(String::from_utf8_lossy(&out.stderr).trim().to_string());
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

impl NvidiaSmiBackend {
    pub fn open() -> Result<Self, SamplerError> {
        let unavailable = |reason: String| SamplerError::Unavailable {
            backend: "nvidia-smi".into(),
            reason,
        };
        let gpus = parse_query(&query(&[]).map_err(unavailable)?);
        if gpus.is_empty() {
            return Err(unavailable("no GPU reported".into()));
        }
        Ok(Self { gpus })
    }

    fn source_name(row: &GpuRow) -> String {
        format!("gpu{}", row.index)
    }
}

impl SamplerBackend for NvidiaSmiBackend {
    fn name(&self) -> &str {
        "nvidia-smi"
    }

    fn probe(&self) -> Vec<ProcessorRef> {
        self.gpus
            .iter()
            .map(|g| ProcessorRef::new(ProcessorKind::Gpu, Self::source_name(g), g.limit_w.unwrap_or(0.0)))
            .collect()
    }

    fn read_now(&self, processor: &str) -> Result<f64, SamplerError> {
        let gpu = self
            .gpus
            .iter()
            .find(|g| Self::source_name(g) == processor)
            .ok_or_else(|| SamplerError::UnknownSource(processor.into()))?;
        let read_err = |message: String| SamplerError::Read {
            source_name: processor.into(),
            message,
        };
        let out = query(&["-i", &gpu.index.to_string()]).map_err(read_err)?;
        parse_query(&out)
            .first()
            .and_then(|r| r.draw_w)
            .ok_or_else(|| read_err("power.draw not reported".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_rows() {
        let rows = parse_query("0, NVIDIA GeForce RTX 4090, 287.41, 450.00\n1, Old Card, [N/A], [N/A]\n");
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].draw_w, Some(287.41));
        assert_eq!(rows[0].limit_w, Some(450.0));
        assert_eq!(rows[1].draw_w, None);
        assert!(parse_query("garbage").is_empty());
    }
}
