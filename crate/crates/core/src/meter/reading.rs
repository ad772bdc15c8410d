use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::decode::{Decoded, DigitDecoder};
use super::layout::DisplayLayout;
use super::segment::{segment_display, MeterFrame};
use super::MeterError;
use crate::model::WallTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Ocr,
    Manual,
    File,
}

/// One cumulative energy value read off the meter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeterReading {
    pub timestamp: WallTime,
    pub cumulative_kwh: f64,
    pub confidence: f64,
    pub provenance: Provenance,
}

impl MeterReading {
    pub fn from_file(timestamp: WallTime, cumulative_kwh: f64) -> Self {
        Self {
            timestamp,
            cumulative_kwh,
            confidence: 1.0,
            provenance: Provenance::File,
        }
    }
}

/// Why a frame produced no reading.
#[derive(Debug, Error)]
pub enum FrameSkip {
    #[error(transparent)]
    Segmentation(#[from] MeterError),
    #[error("digits at positions {0:?} rejected")]
    Rejected(Vec<usize>),
    #[error("all digits rejected")]
    AllRejected,
}

/// Decodes every digit of `frame` and composes the displayed kWh value.
/// A single rejected digit drops the whole frame.
pub fn read_frame(
    frame: &MeterFrame,
    layout: &DisplayLayout,
    decoder: &dyn DigitDecoder,
) -> Result<MeterReading, FrameSkip> {
    let display = segment_display(frame, layout)?;
    let mut text = String::with_capacity(layout.digit_count + 1);
    let mut rejected = Vec::new();
    let mut confidence = 1.0f64;
    for (i, raster) in display.digits.iter().enumerate() {
        if i == layout.decimal_after {
            text.push('.');
        }
        match decoder.decode(raster) {
            Decoded::Digit { value, confidence: c } => {
                text.push((b'0' + value) as char);
                confidence = confidence.min(c);
            }
            Decoded::Rejected => rejected.push(i),
        }
    }
    if rejected.len() == layout.digit_count {
        return Err(FrameSkip::AllRejected);
    }
    if !rejected.is_empty() {
        return Err(FrameSkip::Rejected(rejected));
    }
    let cumulative_kwh: f64 = text.parse().expect("composed digits parse as a number");
    Ok(MeterReading {
        timestamp: frame.timestamp,
        cumulative_kwh,
        confidence,
        provenance: Provenance::Ocr,
    })
}
