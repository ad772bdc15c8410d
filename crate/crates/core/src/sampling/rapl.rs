//! Processor energy counters exposed through the Linux powercap tree.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use super::backend::{counter_delta, SamplerBackend, SamplerError};
use crate::model::{ProcessorKind, ProcessorRef};

pub const POWERCAP_ROOT: &str = "/sys/class/powercap";

struct Domain {
    name: String,
    dir: PathBuf,
    max_range_uj: u64,
    tdp_watts: f64,
}

/// Top-level `intel-rapl:N` zones. Power is the counter difference between
/// successive reads divided by the elapsed time.
pub struct RaplBackend {
    domains: Vec<Domain>,
    last: Mutex<HashMap<String, (u64, Instant)>>,
}

fn read_u64(path: &Path) -> Option<u64> {
    fs::read_to_string(path).ok()?.trim().parse().ok()
}

impl RaplBackend {
    pub fn open() -> Result<Self, SamplerError> {
        Self::open_at(Path::new(POWERCAP_ROOT))
    }

    pub fn open_at(root: &Path) -> Result<Self, SamplerError> {
        let unavailable = |reason: String| SamplerError::Unavailable {
            backend: "rapl".into(),
            reason,
        };
        let entries = fs::read_dir(root).map_err(|e| unavailable(format!("{}: {e}", root.display())))?;
        let mut domains = Vec::new();
        for entry in entries.flatten() {
            let file_name = entry.file_name().to_string_lossy().into_owned();
            // top-level zones only: intel-rapl:0, not intel-rapl:0:1
            if !file_name.starts_with("intel-rapl:") || file_name.matches(':').count() != 1 {
                continue;
            }
            let dir = entry.path();
            let Some(max_range_uj) = read_u64(&dir.join("max_energy_range_uj")) else {
                continue;
            };
            let name = fs::read_to_string(dir.join("name"))
                .map(|s| s.trim().to_string())
                .unwrap_or_else(|_| file_name.clone());
            // rating unknown when no limit is exposed
            let tdp_watts = read_u64(&dir.join("constraint_0_max_power_uw"))
                .or_else(|| read_u64(&dir.join("constraint_0_power_limit_uw")))
                .map_or(0.0, |uw| uw as f64 / 1e6);
            domains.push(Domain {
                name,
                dir,
                max_range_uj,
                tdp_watts,
            });
        }
        domains.sort_by(|a, b| a.name.cmp(&b.name));
        if domains.is_empty() {
            return Err(unavailable("no readable intel-rapl zones".into()));
        }
        let backend = Self {
            domains,
            last: Mutex::new(HashMap::new()),
        };
        for d in &backend.domains {
            let uj = backend.read_counter(d)?;
            backend.last.lock().unwrap().insert(d.name.clone(), (uj, Instant::now()));
        }
        Ok(backend)
    }

    fn read_counter(&self, d: &Domain) -> Result<u64, SamplerError> {
        let path = d.dir.join("energy_uj");
        let text = fs::read_to_string(&path).map_err(|e| SamplerError::Read {
            source_name: d.name.clone(),
            message: format!("{}: {e}", path.display()),
        })?;
        text.trim().parse().map_err(|_| SamplerError::Read {
            source_name: d.name.clone(),
            message: format!("unparseable counter `{}`", text.trim()),
        })
    }
}

impl SamplerBackend for RaplBackend {
    fn name(&self) -> &str {
        "rapl"
    }

    fn probe(&self) -> Vec<ProcessorRef> {
        self.domains
            .iter()
            .map(|d| ProcessorRef::new(ProcessorKind::Cpu, d.name.clone(), d.tdp_watts))
            .collect()
    }

    fn read_now(&self, processor: &str) -> Result<f64, SamplerError> {
        let d = self
            .domains
            .iter()
            .find(|d| d.name == processor)
            .ok_or_else(|| SamplerError::UnknownSource(processor.into()))?;
        let uj = self.read_counter(d)?;
        let now = Instant::now();
        let mut last = self.last.lock().unwrap();
        let (prev_uj, prev_at) = last.insert(d.name.clone(), (uj, now)).unwrap_or((uj, now));
        let dt = now.duration_since(prev_at).as_secs_f64();
        if dt <= 0.0 {
            return Err(SamplerError::Read {
                source_name: d.name.clone(),
                message: "no time elapsed since previous read".into(),
            });
        }
        Ok(counter_delta(prev_uj, uj, d.max_range_uj) as f64 / 1e6 / dt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zone(root: &Path, idx: u32, name: &str, energy: u64) -> PathBuf {
        let dir = root.join(format!("intel-rapl:{idx}"));
        fs::create_dir_all(&dir).unwrap();
        fs::write(dir.join("name"), format!("{name}\n")).unwrap();
        fs::write(dir.join("max_energy_range_uj"), "1000000000\n").unwrap();
        fs::write(dir.join("constraint_0_power_limit_uw"), "125000000\n").unwrap();
        fs::write(dir.join("energy_uj"), format!("{energy}\n")).unwrap();
        dir
    }

    #[test]
    fn reads_fake_powercap_tree() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = zone(tmp.path(), 0, "package-0", 999_000_000);
        fs::create_dir_all(tmp.path().join("intel-rapl:0:0")).unwrap();
        let b = RaplBackend::open_at(tmp.path()).unwrap();
        let probed = b.probe();
        assert_eq!(probed.len(), 1);
        assert_eq!(probed[0].name, "package-0");
        assert_eq!(probed[0].tdp_watts, 125.0);
        std::thread::sleep(std::time::Duration::from_millis(50));
        // counter wrapped past its range
        fs::write(dir.join("energy_uj"), "4000000\n").unwrap();
        let w = b.read_now("package-0").unwrap();
        // 5 J over roughly 50 ms
        assert!(w > 5.0 && w < 100.0 / 0.05 * 5.0, "{w}");
        assert!(matches!(b.read_now("dram"), Err(SamplerError::UnknownSource(_))));
    }

    #[test]
    fn missing_tree_is_unavailable() {
        let tmp = tempfile::tempdir().unwrap();
        assert!(matches!(
            RaplBackend::open_at(&tmp.path().join("nope")),
            Err(SamplerError::Unavailable { .. })
        ));
    }
}
