//! Meter evidence from disk: reading files and frame directories.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::{debug, warn};
use rayon::prelude::*;

use super::decode::DigitDecoder;
use super::layout::DisplayLayout;
use super::raster::GrayRaster;
use super::reading::{read_frame, FrameSkip, MeterReading};
use super::segment::MeterFrame;
use super::MeterError;
use crate::model::WallTime;

/// Parses `<epoch seconds> <kWh>` lines (whitespace or comma separated,
/// `#` comments allowed).
pub fn parse_reading_file(text: &str) -> Result<Vec<MeterReading>, MeterError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = || MeterError::ReadingLine {
            line: i + 1,
            content: line.to_string(),
        };
        let mut cols = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty());
        let secs: f64 = cols.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let kwh: f64 = cols.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        if cols.next().is_some() || !secs.is_finite() || !(kwh >= 0.0) || !kwh.is_finite() {
            return Err(bad());
        }
        out.push(MeterReading::from_file(WallTime::from_epoch_secs(secs), kwh));
    }
    Ok(out)
}

pub fn load_reading_file(path: &Path) -> Result<Vec<MeterReading>, MeterError> {
    let text = std::fs::read_to_string(path).map_err(|e| MeterError::Io(format!("{}: {e}", path.display())))?;
    parse_reading_file(&text)
}

pub fn write_reading_file(readings: &[MeterReading]) -> String {
    let mut out = String::from("# epoch_seconds kwh\n");
    for r in readings {
        writeln!(out, "{:.3} {}", r.timestamp.epoch_secs(), r.cumulative_kwh).unwrap();
    }
    out
}

const IMAGE_EXTENSIONS: &[&str] = &["png", "pgm", "pnm", "ppm"];
pub const MANIFEST_NAME: &str = "manifest.txt";

/// Lists frames in `dir`. Uses `manifest.txt` (`<file>,<epoch_millis>` per
/// line) when present, otherwise files named `<epoch_millis>.<ext>`.
pub fn list_frames(dir: &Path) -> Result<Vec<(WallTime, PathBuf)>, MeterError> {
    let io = |e: std::io::Error| MeterError::Io(format!("{}: {e}", dir.display()));
    let manifest = dir.join(MANIFEST_NAME);
    let mut frames = Vec::new();
    if manifest.exists() {
        let text = std::fs::read_to_string(&manifest).map_err(io)?;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (name, ms) = line
                .rsplit_once([',', ' ', '\t'])
                .and_then(|(n, m)| Some((n.trim(), m.trim().parse::<i64>().ok()?)))
                .ok_or_else(|| MeterError::ReadingLine {
                    line: i + 1,
                    content: line.to_string(),
                })?;
            frames.push((WallTime::from_epoch_millis(ms), dir.join(name)));
        }
    } else {
        for entry in std::fs::read_dir(dir).map_err(io)? {
            let path = entry.map_err(io)?.path();
            let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
            if !IMAGE_EXTENSIONS.contains(&ext.as_str()) {
                continue;
            }
            match path.file_stem().and_then(|s| s.to_str()).and_then(|s| s.parse::<i64>().ok()) {
                Some(ms) => frames.push((WallTime::from_epoch_millis(ms), path)),
                None => debug!("ignoring {}: name is not epoch milliseconds", path.display()),
            }
        }
    }
    frames.sort();
    Ok(frames)
}

#[derive(Debug, Default)]
pub struct FrameIngest {
    pub readings: Vec<MeterReading>,
    /// Frames that produced no reading, with the reason.
    pub skipped: Vec<(WallTime, String)>,
}

/// Decodes frames in parallel. Per-frame failures are collected, not fatal.
pub fn ingest_frames(frames: &[MeterFrame], layout: &DisplayLayout, decoder: &dyn DigitDecoder) -> FrameIngest {
    let results: Vec<(WallTime, Result<MeterReading, FrameSkip>)> = frames
        .par_iter()
        .map(|f| (f.timestamp, read_frame(f, layout, decoder)))
        .collect();
    let mut out = FrameIngest::default();
    for (ts, r) in results {
        match r {
            Ok(reading) => out.readings.push(reading),
            Err(skip) => {
                warn!("frame {ts} skipped: {skip}");
                out.skipped.push((ts, skip.to_string()));
            }
        }
    }
    out
}

/// Loads and decodes every frame listed in `dir`.
pub fn ingest_frame_dir(dir: &Path, layout: &DisplayLayout, decoder: &dyn DigitDecoder) -> Result<FrameIngest, MeterError> {
    let listed = list_frames(dir)?;
    let loaded: Vec<Result<MeterFrame, (WallTime, MeterError)>> = listed
        .par_iter()
        .map(|(ts, path)| {
            GrayRaster::load(path)
                .map(|pixels| MeterFrame { timestamp: *ts, pixels })
                .map_err(|e| (*ts, e))
        })
        .collect();
    let mut frames = Vec::with_capacity(loaded.len());
    let mut unreadable = Vec::new();
    for f in loaded {
        match f {
            Ok(frame) => frames.push(frame),
            Err((ts, e)) => unreadable.push((ts, e.to_string())),
        }
    }
    let mut ingest = ingest_frames(&frames, layout, decoder);
    ingest.skipped.extend(unreadable);
    Ok(ingest)
}
