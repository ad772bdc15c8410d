//! Deterministic inputs for the pipeline benchmarks.

use enertrace::meter::{
    render_display, segment_display, BinaryRaster, DisplayLayout, MeterFrame, MeterReading, RenderOptions,
    RenderStyle,
};
use enertrace::sim::{PowerModel, Profile};
use enertrace::{PowerTrace, WallTime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n` samples of a sinusoidal load at `interval_s` spacing.
pub fn sinusoid_trace(n: usize, interval_s: f64) -> PowerTrace {
    let model = PowerModel::constant(60.0, 360.0, 0.0).with_profile(Profile::Sinusoid {
        mean: 0.5,
        amplitude: 0.4,
        period_s: 37.0,
        phase_rad: 0.0,
    });
    let points: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let t = k as f64 * interval_s;
            (t, model.system_power(t))
        })
        .collect();
    PowerTrace::from_points("gpu0", interval_s, &points)
}

/// A rendered frame showing `digits` with the given distortion.
pub fn frame(digits: &[u8], noise_std: f64, rotation_deg: f64, seed: u64) -> MeterFrame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let opts = RenderOptions { rotation_deg, noise_std };
    let pixels = render_display(digits, &DisplayLayout::default(), &RenderStyle::default(), opts, &mut rng)
        .expect("valid digits");
    MeterFrame {
        timestamp: WallTime::from_epoch_millis(0),
        pixels,
    }
}

/// Binarized digit rasters cut from a noisy frame showing 0 to 4.
pub fn digit_rasters() -> Vec<BinaryRaster> {
    let f = frame(&[0, 1, 2, 3, 4], 10.0, 1.0, 3);
    segment_display(&f, &DisplayLayout::default()).expect("segments").digits
}

/// `n` cumulative readings one minute apart with 5% glitches.
pub fn glitchy_readings(n: usize) -> Vec<MeterReading> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut kwh = 100.0;
    (0..n)
        .map(|k| {
            kwh += rng.gen_range(0.0..0.04);
            let shown = if rng.gen_bool(0.05) { rng.gen_range(0.0..999.0) } else { kwh };
            MeterReading::from_file(WallTime::from_epoch_millis(k as i64 * 60_000), (shown * 100.0f64).floor() / 100.0)
        })
        .collect()
}
