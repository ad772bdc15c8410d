//! Plain-text trace dumps: `timestamp_s,source,watts` per line, with an
//! optional `# nominal_interval_s=<s>` header.

use std::fmt::Write as _;

use thiserror::Error;

use crate::model::{PowerSample, PowerTrace};

#[derive(Debug, Error, PartialEq)]
#[error("trace dump line {line}: {message}")]
pub struct TraceParseError {
    pub line: usize,
    pub message: String,
}

pub fn write_trace_dump(traces: &[PowerTrace]) -> String {
    let mut out = String::new();
    if let Some(t) = traces.first() {
        writeln!(out, "# nominal_interval_s={}", t.nominal_interval_s).unwrap();
    }
    for trace in traces {
        for s in &trace.samples {
            writeln!(out, "{},{},{}", s.timestamp_s, s.source, s.watts).unwrap();
        }
    }
    out
}

/// Parses a dump into a single multi-source trace. `default_interval_s` is
/// used when the header is missing.
pub fn parse_trace_dump(text: &str, default_interval_s: f64) -> Result<PowerTrace, TraceParseError> {
    let mut trace = PowerTrace::new(default_interval_s);
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let err = |message: String| TraceParseError { line: i + 1, message };
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(v) = comment.trim().strip_prefix("nominal_interval_s=") {
                trace.nominal_interval_s = v
                    .trim()
                    .parse()
                    .map_err(|_| err(format!("bad interval `{v}`")))?;
            }
            continue;
        }
        let (ts, rest) = line
            .split_once(',')
            .ok_or_else(|| err("expected `timestamp_s,source,watts`".into()))?;
        let (source, watts) = rest
            .rsplit_once(',')
            .ok_or_else(|| err("expected `timestamp_s,source,watts`".into()))?;
        let timestamp_s: f64 = ts.trim().parse().map_err(|_| err(format!("bad timestamp `{ts}`")))?;
        let watts: f64 = watts.trim().parse().map_err(|_| err(format!("bad watts `{watts}`")))?;
        trace.samples.push(PowerSample::new(timestamp_s, watts, source.trim()));
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut t = PowerTrace::from_points("gpu 0", 0.5, &[(0.0, 1.5), (0.5, 2.25)]);
        t.samples.push(PowerSample::new(0.25, 30.0, "package,0"));
        let text = write_trace_dump(std::slice::from_ref(&t));
        assert_eq!(parse_trace_dump(&text, 1.0).unwrap(), t);
    }

    #[test]
    fn bad_line() {
        let e = parse_trace_dump("0,cpu,1\nx,cpu,2\n", 1.0).unwrap_err();
        assert_eq!(e.line, 2);
    }
}
