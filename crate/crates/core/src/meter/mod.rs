//! External meter evidence: seven-segment OCR, reading files, the monotone
//! cumulative timeline and ground-truth energy.

mod decode;
mod ingest;
mod layout;
mod raster;
mod reading;
mod render;
mod segment;
mod timeline;

use thiserror::Error;

use crate::model::WallTime;

pub use decode::{
    decode_activations, decode_digit, CentroidDecoder, Decoded, DigitDecoder, DigitPattern, SegmentDecoder, CANONICAL,
};
pub use ingest::{
    ingest_frame_dir, ingest_frames, list_frames, load_reading_file, parse_reading_file, write_reading_file,
    FrameIngest, MANIFEST_NAME,
};
pub use layout::{CellRect, DisplayLayout, Rect, SegmentRegions};
pub use raster::{BinaryRaster, GrayRaster};
pub use reading::{read_frame, FrameSkip, MeterReading, Provenance};
pub use render::{display_digits, render_display, RenderOptions, RenderStyle};
pub use segment::{otsu_threshold, segment_display, MeterFrame, SegmentedDisplay, LOW_CONTRAST_SPREAD};
pub use timeline::{
    build_timeline, ground_truth_energy, GroundTruth, MeterTimeline, TimelineOptions, DEFAULT_MAX_POWER_KW,
    DEFAULT_RESOLUTION_KWH,
};

#[derive(Debug, Error)]
pub enum MeterError {
    #[error("bounding box {bbox:?} exceeds {width}x{height} frame")]
    BoxOutsideFrame { bbox: Rect, width: usize, height: usize },
    #[error("raster {width}x{height} does not match {len} pixels")]
    BadRaster { width: usize, height: usize, len: usize },
    #[error("layout: {0}")]
    Layout(String),
    #[error("image: {0}")]
    Image(String),
    #[error("io: {0}")]
    Io(String),
    #[error("line {line}: cannot parse `{content}`")]
    ReadingLine { line: usize, content: String },
    #[error("value {0} kWh does not fit the display")]
    OutOfRange(f64),
    #[error("resolution must be positive, got {0}")]
    BadResolution(f64),
    #[error("empty timeline: no reading survived validation")]
    EmptyTimeline,
    #[error("interval end {end} is not after start {start}")]
    BadInterval { start: WallTime, end: WallTime },
    #[error("timeline does not cover {start} .. {end}")]
    NotCovered { start: WallTime, end: WallTime },
}
