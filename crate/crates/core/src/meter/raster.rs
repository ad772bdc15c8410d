use std::path::Path;

use super::MeterError;

/// Row-major 8-bit grayscale image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayRaster {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl GrayRaster {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, MeterError> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return Err(MeterError::BadRaster { width, height, len: pixels.len() });
        }
        Ok(Self { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self {
            width,
            height,
            pixels: vec![value; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    /// Loads any image format the `image` crate was built with, as luma.
    pub fn load(path: &Path) -> Result<Self, MeterError> {
        let img = image::open(path)
            .map_err(|e| MeterError::Image(format!("{}: {e}", path.display())))?
            .into_luma8();
        let (w, h) = img.dimensions();
        Self::new(w as usize, h as usize, img.into_raw())
    }

    /// Writes a PNG (or any format inferred from the extension).
    pub fn save(&self, path: &Path) -> Result<(), MeterError> {
        image::GrayImage::from_raw(self.width as u32, self.height as u32, self.pixels.clone())
            .expect("raster dimensions match buffer")
            .save(path)
            .map_err(|e| MeterError::Image(format!("{}: {e}", path.display())))
    }
}

/// Binarized raster; `true` marks a lit (ink) pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryRaster {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<bool>,
}

impl BinaryRaster {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    /// Share of lit pixels inside the normalized rectangle `[u0,u1)×[v0,v1)`.
    pub fn lit_fraction(&self, r: [f64; 4]) -> f64 {
        let (x0, x1) = span(r[0], r[2], self.width);
        let (y0, y1) = span(r[1], r[3], self.height);
        let mut lit = 0usize;
        for y in y0..y1 {
            for x in x0..x1 {
                lit += self.get(x, y) as usize;
            }
        }
        let n = (x1 - x0) * (y1 - y0);
        if n == 0 {
            0.0
        } else {
            lit as f64 / n as f64
        }
    }

    pub fn lit_count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }
}

/// Pixel index range covering `[a, b)` of a unit interval mapped to `n` pixels.
/// Always at least one pixel wide.
fn span(a: f64, b: f64, n: usize) -> (usize, usize) {
    let lo = ((a * n as f64).round() as usize).min(n.saturating_sub(1));
    let hi = ((b * n as f64).round() as usize).clamp(lo + 1, n);
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_mismatched_buffer() {
        assert!(GrayRaster::new(2, 2, vec![0; 3]).is_err());
        assert!(GrayRaster::new(0, 2, vec![]).is_err());
    }

    #[test]
    fn lit_fraction_counts_region() {
        let mut b = BinaryRaster::new(10, 10);
        for x in 0..5 {
            for y in 0..10 {
                b.set(x, y, true);
            }
        }
        assert_eq!(b.lit_fraction([0.0, 0.0, 0.5, 1.0]), 1.0);
        assert_eq!(b.lit_fraction([0.0, 0.0, 1.0, 1.0]), 0.5);
        assert_eq!(b.lit_fraction([0.5, 0.0, 1.0, 1.0]), 0.0);
    }

    #[test]
    fn png_round_trip() {
        let tmp = tempfile::tempdir().unwrap();
        let r = GrayRaster::new(3, 2, vec![0, 50, 100, 150, 200, 250]).unwrap();
        let p = tmp.path().join("x.png");
        r.save(&p).unwrap();
        assert_eq!(GrayRaster::load(&p).unwrap(), r);
    }
}
