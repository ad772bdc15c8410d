use std::path::Path;

use serde::{Deserialize, Serialize};

use super::MeterError;

/// Pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

/// Normalized `[u0, v0, u1, v1]` rectangle inside one digit cell, `v` downward.
pub type CellRect = [f64; 4];

/// Probe region per segment, in `a`–`g` order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentRegions {
    pub a: CellRect,
    pub b: CellRect,
    pub c: CellRect,
    pub d: CellRect,
    pub e: CellRect,
    pub f: CellRect,
    pub g: CellRect,
}

impl SegmentRegions {
    pub fn as_array(&self) -> [CellRect; 7] {
        [self.a, self.b, self.c, self.d, self.e, self.f, self.g]
    }
}

impl Default for SegmentRegions {
    /// Central patches of the segments drawn by the bundled renderer.
    fn default() -> Self {
        Self {
            a: [0.38, 0.125, 0.62, 0.165],
            b: [0.74, 0.24, 0.82, 0.36],
            c: [0.74, 0.64, 0.82, 0.76],
            d: [0.38, 0.835, 0.62, 0.875],
            e: [0.18, 0.64, 0.26, 0.76],
            f: [0.18, 0.24, 0.26, 0.36],
            g: [0.38, 0.48, 0.62, 0.52],
        }
    }
}

fn default_true() -> bool {
    true
}

/// Where the display sits in a frame and how to read it.
///
/// The bounding box is split into `digit_count` equal cells, left to right.
/// `decimal_after` is the number of digits before the decimal point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisplayLayout {
    pub bbox: Rect,
    pub digit_count: usize,
    pub decimal_after: usize,
    #[serde(default = "default_true")]
    pub lit_is_bright: bool,
    #[serde(default)]
    pub segments: SegmentRegions,
}

impl Default for DisplayLayout {
    /// `NNN.NN` kWh display matching [`super::RenderStyle::default`].
    fn default() -> Self {
        Self {
            bbox: Rect {
                x: 40,
                y: 20,
                width: 240,
                height: 80,
            },
            digit_count: 5,
            decimal_after: 3,
            lit_is_bright: true,
            segments: SegmentRegions::default(),
        }
    }
}

impl DisplayLayout {
    pub fn load(path: &Path) -> Result<Self, MeterError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| MeterError::Layout(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, MeterError> {
        let layout: Self = toml::from_str(text).map_err(|e| MeterError::Layout(e.to_string()))?;
        layout.check()?;
        Ok(layout)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("layout serializes")
    }

    pub fn check(&self) -> Result<(), MeterError> {
        if self.digit_count == 0 {
            return Err(MeterError::Layout("digit_count must be ≥ 1".into()));
        }
        if self.decimal_after > self.digit_count {
            return Err(MeterError::Layout("decimal_after exceeds digit_count".into()));
        }
        if self.bbox.width < self.digit_count || self.bbox.height == 0 {
            return Err(MeterError::Layout("bounding box too small".into()));
        }
        for r in self.segments.as_array() {
            if !(0.0..=1.0).contains(&r[0]) || !(0.0..=1.0).contains(&r[3]) || r[0] >= r[2] || r[1] >= r[3] || r[2] > 1.0 {
                return Err(MeterError::Layout(format!("bad segment region {r:?}")));
            }
        }
        Ok(())
    }

    /// Resolution implied by the digit count and decimal position.
    pub fn resolution_kwh(&self) -> f64 {
        10f64.powi(-((self.digit_count - self.decimal_after) as i32))
    }

    /// Largest displayable value.
    pub fn max_value_kwh(&self) -> f64 {
        (10f64.powi(self.digit_count as i32) - 1.0) * self.resolution_kwh()
    }

    /// Pixel rectangle of digit `i`.
    pub fn cell(&self, i: usize) -> Rect {
        let x0 = self.bbox.x + i * self.bbox.width / self.digit_count;
        let x1 = self.bbox.x + (i + 1) * self.bbox.width / self.digit_count;
        Rect {
            x: x0,
            y: self.bbox.y,
            width: x1 - x0,
            height: self.bbox.height,
        }
    }
}
