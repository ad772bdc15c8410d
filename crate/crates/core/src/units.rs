//! Energy unit conversions. Every energy inside the crate is carried in
//! watt-seconds; kilowatt-hours only appear at file and report boundaries.

/// Watt-seconds in one kilowatt-hour.
pub const WS_PER_KWH: f64 = 3_600_000.0;

pub fn kwh_to_ws(kwh: f64) -> f64 {
    kwh * WS_PER_KWH
}

pub fn ws_to_kwh(ws: f64) -> f64 {
    ws / WS_PER_KWH
}
