use log::warn;

use super::layout::DisplayLayout;
use super::raster::{BinaryRaster, GrayRaster};
use super::MeterError;
use crate::model::WallTime;

/// One captured image of the meter display.
#[derive(Debug, Clone, PartialEq)]
pub struct MeterFrame {
    pub timestamp: WallTime,
    pub pixels: GrayRaster,
}

/// Per-digit binarized rasters, left to right.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentedDisplay {
    pub digits: Vec<BinaryRaster>,
    pub threshold: u8,
    /// The display crop was nearly uniform (all dark or all bright).
    pub low_contrast: bool,
}

/// Intensity spread (5th to 95th percentile) below which a crop is flagged.
pub const LOW_CONTRAST_SPREAD: u8 = 40;

/// Otsu's between-class-variance threshold. Pixels `> threshold` are one class.
pub fn otsu_threshold(values: impl Iterator<Item = u8>) -> u8 {
    let mut hist = [0u64; 256];
    for v in values {
        hist[v as usize] += 1;
    }
    otsu_from_histogram(&hist)
}

fn otsu_from_histogram(hist: &[u64; 256]) -> u8 {
    let total: u64 = hist.iter().sum();
    if total == 0 {
        return 127;
    }
    let sum_all: f64 = hist.iter().enumerate().map(|(i, &c)| i as f64 * c as f64).sum();
    let (mut w0, mut sum0) = (0f64, 0f64);
    let (mut best, mut best_var) = (0u8, -1.0f64);
    for t in 0..256 {
        w0 += hist[t] as f64;
        if w0 == 0.0 {
            continue;
        }
        let w1 = total as f64 - w0;
        if w1 == 0.0 {
            break;
        }
        sum0 += t as f64 * hist[t] as f64;
        let m0 = sum0 / w0;
        let m1 = (sum_all - sum0) / w1;
        let var = w0 * w1 * (m0 - m1) * (m0 - m1);
        if var > best_var {
            best_var = var;
            best = t as u8;
        }
    }
    best
}

fn percentile_spread(hist: &[u64; 256], total: u64) -> u8 {
    let pick = |q: f64| -> u8 {
        let target = (q * total as f64).ceil().max(1.0) as u64;
        let mut acc = 0;
        for (i, &c) in hist.iter().enumerate() {
            acc += c;
            if acc >= target {
                return i as u8;
            }
        }
        255
    };
    pick(0.95) - pick(0.05)
}

/// Shifts `raster` vertically so its ink extent is centered in the cell.
/// Compensates the vertical offset a slightly rotated display gives each digit.
fn center_vertically(raster: &BinaryRaster) -> BinaryRaster {
    let rows: Vec<usize> = (0..raster.height)
        .filter(|&y| (0..raster.width).any(|x| raster.get(x, y)))
        .collect();
    let (Some(&top), Some(&bottom)) = (rows.first(), rows.last()) else {
        return raster.clone();
    };
    let shift = (raster.height as f64 / 2.0 - (top + bottom + 1) as f64 / 2.0).round() as isize;
    if shift == 0 {
        return raster.clone();
    }
    let mut out = BinaryRaster::new(raster.width, raster.height);
    for y in 0..raster.height {
        let src = y as isize - shift;
        if src < 0 || src >= raster.height as isize {
            continue;
        }
        for x in 0..raster.width {
            out.set(x, y, raster.get(x, src as usize));
        }
    }
    out
}

/// Crops the display, binarizes it with one global threshold and splits it
/// into `layout.digit_count` digit rasters.
pub fn segment_display(frame: &MeterFrame, layout: &DisplayLayout) -> Result<SegmentedDisplay, MeterError> {
    layout.check()?;
    let img = &frame.pixels;
    let b = layout.bbox;
    if b.x + b.width > img.width || b.y + b.height > img.height {
        return Err(MeterError::BoxOutsideFrame {
            bbox: b,
            width: img.width,
            height: img.height,
        });
    }
    let mut hist = [0u64; 256];
    for y in b.y..b.y + b.height {
        for x in b.x..b.x + b.width {
            hist[img.get(x, y) as usize] += 1;
        }
    }
    let total = (b.width * b.height) as u64;
    let low_contrast = percentile_spread(&hist, total) < LOW_CONTRAST_SPREAD;
    if low_contrast {
        warn!("display crop at {} has low contrast", frame.timestamp);
    }
    // a uniform crop has no meaningful class split; fall back to mid-scale
    let threshold = if low_contrast { 127 } else { otsu_from_histogram(&hist) };

    let digits = (0..layout.digit_count)
        .map(|i| {
            let cell = layout.cell(i);
            let mut r = BinaryRaster::new(cell.width, cell.height);
            for y in 0..cell.height {
                for x in 0..cell.width {
                    let v = img.get(cell.x + x, cell.y + y);
                    let lit = if layout.lit_is_bright { v > threshold } else { v <= threshold };
                    r.set(x, y, lit);
                }
            }
            center_vertically(&r)
        })
        .collect();
    Ok(SegmentedDisplay {
        digits,
        threshold,
        low_contrast,
    })
}
