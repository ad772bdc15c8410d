//! Synthetic seven-segment display renderer used for test corpora and the
//! simulated meter.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::decode::DigitPattern;
use super::layout::{CellRect, DisplayLayout};
use super::raster::GrayRaster;
use super::MeterError;

#[derive(Debug, Clone, PartialEq)]
pub struct RenderStyle {
    pub frame_width: usize,
    pub frame_height: usize,
    pub background: u8,
    pub foreground: u8,
    /// Drawn segment rectangles, `a`–`g`, in cell coordinates. Ink spans the
    /// same vertical extent for every digit.
    pub segments: [CellRect; 7],
}

impl Default for RenderStyle {
    fn default() -> Self {
        Self {
            frame_width: 320,
            frame_height: 120,
            background: 30,
            foreground: 220,
            segments: [
                [0.22, 0.10, 0.78, 0.19],   // a
                [0.71, 0.10, 0.85, 0.50],   // b
                [0.71, 0.50, 0.85, 0.90],   // c
                [0.22, 0.81, 0.78, 0.90],   // d
                [0.15, 0.50, 0.29, 0.90],   // e
                [0.15, 0.10, 0.29, 0.50],   // f
                [0.22, 0.455, 0.78, 0.545], // g
            ],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RenderOptions {
    /// Rotation of the whole frame about its center, degrees.
    pub rotation_deg: f64,
    /// Standard deviation of additive Gaussian intensity noise.
    pub noise_std: f64,
}

/// Digits shown for `value_kwh` on `layout`, most significant first.
pub fn display_digits(value_kwh: f64, layout: &DisplayLayout) -> Result<Vec<u8>, MeterError> {
    let scale = 10f64.powi((layout.digit_count - layout.decimal_after) as i32);
    let counts = (value_kwh * scale).round();
    if !(counts >= 0.0) || counts >= 10f64.powi(layout.digit_count as i32) {
        return Err(MeterError::OutOfRange(value_kwh));
    }
    let text = format!("{:0width$}", counts as u64, width = layout.digit_count);
    Ok(text.bytes().map(|b| b - b'0').collect())
}

/// Renders `digits` into a frame. Lit segments use the foreground intensity
/// when `layout.lit_is_bright`, the background intensity otherwise.
pub fn render_display<R: Rng + ?Sized>(
    digits: &[u8],
    layout: &DisplayLayout,
    style: &RenderStyle,
    opts: RenderOptions,
    rng: &mut R,
) -> Result<GrayRaster, MeterError> {
    if digits.len() != layout.digit_count || digits.iter().any(|d| *d > 9) {
        return Err(MeterError::Layout(format!(
            "cannot render {digits:?} on a {}-digit display",
            layout.digit_count
        )));
    }
    let (ink, paper) = if layout.lit_is_bright {
        (style.foreground, style.background)
    } else {
        (style.background, style.foreground)
    };
    let patterns: Vec<DigitPattern> = digits.iter().map(|&d| DigitPattern::of_digit(d)).collect();
    let noise = Normal::new(0.0, opts.noise_std.max(0.0)).map_err(|e| MeterError::Layout(e.to_string()))?;
    let (cx, cy) = (style.frame_width as f64 / 2.0, style.frame_height as f64 / 2.0);
    let (sin, cos) = (-opts.rotation_deg.to_radians()).sin_cos();
    let b = layout.bbox;
    let n = layout.digit_count as f64;

    let mut pixels = Vec::with_capacity(style.frame_width * style.frame_height);
    for py in 0..style.frame_height {
        for px in 0..style.frame_width {
            // inverse-rotate the pixel centre into display coordinates
            let (dx, dy) = (px as f64 + 0.5 - cx, py as f64 + 0.5 - cy);
            let sx = cx + dx * cos - dy * sin;
            let sy = cy + dx * sin + dy * cos;
            let rel_x = (sx - b.x as f64) / b.width as f64;
            let v = (sy - b.y as f64) / b.height as f64;
            let mut lit = false;
            if (0.0..1.0).contains(&rel_x) && (0.0..1.0).contains(&v) {
                let cell = (rel_x * n).floor();
                let u = rel_x * n - cell;
                let pattern = &patterns[cell as usize];
                lit = style
                    .segments
                    .iter()
                    .zip(pattern.0.iter())
                    .any(|(r, &on)| on && u >= r[0] && u < r[2] && v >= r[1] && v < r[3]);
            }
            let base = if lit { ink } else { paper } as f64;
            let value = if opts.noise_std > 0.0 { base + noise.sample(rng) } else { base };
            pixels.push(value.round().clamp(0.0, 255.0) as u8);
        }
    }
    GrayRaster::new(style.frame_width, style.frame_height, pixels)
}
