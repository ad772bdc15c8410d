//! Seven-segment digit classification.
//!
//! The default [`SegmentDecoder`] measures the lit share of each segment's
//! probe region and matches the resulting pattern against the ten canonical
//! digits by Hamming distance. [`CentroidDecoder`] is a trainable
//! alternative working on downsampled pixel features.

use std::fmt;

use super::layout::SegmentRegions;
use super::raster::BinaryRaster;

/// Segment activations in conventional `a`–`g` order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DigitPattern(pub [bool; 7]);

/// Canonical patterns for 0–9.
pub const CANONICAL: [DigitPattern; 10] = {
    const T: bool = true;
    const F: bool = false;
    [
        DigitPattern([T, T, T, T, T, T, F]), // 0
        DigitPattern([F, T, T, F, F, F, F]), // 1
        DigitPattern([T, T, F, T, T, F, T]), // 2
        DigitPattern([T, T, T, T, F, F, T]), // 3
        DigitPattern([F, T, T, F, F, T, T]), // 4
        DigitPattern([T, F, T, T, F, T, T]), // 5
        DigitPattern([T, F, T, T, T, T, T]), // 6
        DigitPattern([T, T, T, F, F, F, F]), // 7
        DigitPattern([T, T, T, T, T, T, T]), // 8
        DigitPattern([T, T, T, T, F, T, T]), // 9
    ]
};

impl DigitPattern {
    /// Pattern from a segment string such as `"bc"`.
    pub fn from_segments(segments: &str) -> Self {
        let mut p = [false; 7];
        for ch in segments.chars() {
            if let Some(i) = "abcdefg".find(ch) {
                p[i] = true;
            }
        }
        DigitPattern(p)
    }

    pub fn of_digit(d: u8) -> Self {
        CANONICAL[d as usize]
    }

    pub fn hamming(&self, other: &DigitPattern) -> u32 {
        self.0.iter().zip(other.0.iter()).filter(|(a, b)| a != b).count() as u32
    }
}

impl fmt::Display for DigitPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, on) in self.0.iter().enumerate() {
            if *on {
                write!(f, "{}", (b'a' + i as u8) as char)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Decoded {
    Digit { value: u8, confidence: f64 },
    Rejected,
}

impl Decoded {
    pub fn value(&self) -> Option<u8> {
        match self {
            Decoded::Digit { value, .. } => Some(*value),
            Decoded::Rejected => None,
        }
    }
}

pub trait DigitDecoder: Send + Sync {
    fn decode(&self, raster: &BinaryRaster) -> Decoded;
}

/// Decodes a segment activation vector (lit shares in `[0,1]`, `a`–`g`).
///
/// A segment is on when more than half its probe region is lit. The best
/// canonical match must be within Hamming distance 1; ties are broken by the
/// soft L1 distance between shares and patterns. Confidence is the soft
/// margin between the best and second-best digit, capped at 1 (the smallest
/// distance between two canonical patterns).
pub fn decode_activations(shares: &[f64; 7]) -> Decoded {
    let pattern = DigitPattern(shares.map(|s| s > 0.5));
    let soft = |p: &DigitPattern| -> f64 {
        shares
            .iter()
            .zip(p.0.iter())
            .map(|(s, &on)| (s - if on { 1.0 } else { 0.0 }).abs())
            .sum()
    };
    let mut ranked: Vec<(u32, f64, u8)> = CANONICAL
        .iter()
        .enumerate()
        .map(|(d, p)| (pattern.hamming(p), soft(p), d as u8))
        .collect();
    ranked.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let (hd, best_soft, value) = ranked[0];
    if hd > 1 {
        return Decoded::Rejected;
    }
    let second_soft = ranked[1..].iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let confidence = (second_soft - best_soft).clamp(0.0, 1.0);
    Decoded::Digit { value, confidence }
}

/// Fixed-geometry segment activation decoder.
#[derive(Debug, Clone, Default)]
pub struct SegmentDecoder {
    pub regions: SegmentRegions,
}

impl SegmentDecoder {
    pub fn new(regions: SegmentRegions) -> Self {
        Self { regions }
    }

    pub fn activations(&self, raster: &BinaryRaster) -> [f64; 7] {
        self.regions.as_array().map(|r| raster.lit_fraction(r))
    }
}

impl DigitDecoder for SegmentDecoder {
    fn decode(&self, raster: &BinaryRaster) -> Decoded {
        decode_activations(&self.activations(raster))
    }
}

/// Decodes one binarized digit raster with the default segment geometry.
pub fn decode_digit(raster: &BinaryRaster) -> Decoded {
    SegmentDecoder::default().decode(raster)
}

const GRID_W: usize = 6;
const GRID_H: usize = 10;

fn features(raster: &BinaryRaster) -> Vec<f64> {
    let mut out = Vec::with_capacity(GRID_W * GRID_H);
    for gy in 0..GRID_H {
        for gx in 0..GRID_W {
            out.push(raster.lit_fraction([
                gx as f64 / GRID_W as f64,
                gy as f64 / GRID_H as f64,
                (gx + 1) as f64 / GRID_W as f64,
                (gy + 1) as f64 / GRID_H as f64,
            ]));
        }
    }
    out
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Nearest-centroid classifier over a coarse lit-share grid.
#[derive(Debug, Clone)]
pub struct CentroidDecoder {
    centroids: Vec<(u8, Vec<f64>)>,
    reject_radius: f64,
}

impl CentroidDecoder {
    /// Trains on labelled rasters. Digits without examples are never predicted.
    /// The rejection radius is twice the largest training distance to its own
    /// centroid.
    pub fn train<'a>(examples: impl IntoIterator<Item = (u8, &'a BinaryRaster)>) -> Self {
        let mut sums: Vec<(usize, Vec<f64>)> = vec![(0, vec![0.0; GRID_W * GRID_H]); 10];
        let mut feats = Vec::new();
        for (label, raster) in examples {
            let f = features(raster);
            let (n, acc) = &mut sums[label as usize];
            *n += 1;
            acc.iter_mut().zip(&f).for_each(|(a, v)| *a += v);
            feats.push((label, f));
        }
        let centroids: Vec<(u8, Vec<f64>)> = sums
            .into_iter()
            .enumerate()
            .filter(|(_, (n, _))| *n > 0)
            .map(|(d, (n, acc))| (d as u8, acc.into_iter().map(|v| v / n as f64).collect()))
            .collect();
        let spread = feats
            .iter()
            .map(|(label, f)| {
                let c = &centroids.iter().find(|(d, _)| d == label).unwrap().1;
                dist(f, c)
            })
            .fold(0.0, f64::max);
        Self {
            centroids,
            reject_radius: (2.0 * spread).max(0.5),
        }
    }
}

impl DigitDecoder for CentroidDecoder {
    fn decode(&self, raster: &BinaryRaster) -> Decoded {
        let f = features(raster);
        let mut ranked: Vec<(f64, u8)> = self.centroids.iter().map(|(d, c)| (dist(&f, c), *d)).collect();
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0));
        let Some(&(best, value)) = ranked.first() else {
            return Decoded::Rejected;
        };
        if best > self.reject_radius {
            return Decoded::Rejected;
        }
        let second = ranked.get(1).map_or(f64::INFINITY, |r| r.0);
        let confidence = if second.is_finite() {
            ((second - best) / (second + best).max(1e-12)).clamp(0.0, 1.0)
        } else {
            1.0
        };
        Decoded::Digit { value, confidence }
    }
}
