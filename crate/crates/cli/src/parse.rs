//! Flag-value parsers: durations with s/m/h suffixes and crash-rate ranges.

/// Duration in seconds from `<number><s|m|h>`. The suffix is mandatory so
/// a bare number can never be misread as the wrong unit.
pub fn duration_s(text: &str) -> Result<f64, String> {
    let (number, multiplier) = match text.as_bytes().last() {
        Some(b's') => (&text[..text.len() - 1], 1.0),
        Some(b'm') => (&text[..text.len() - 1], 60.0),
        Some(b'h') => (&text[..text.len() - 1], 3600.0),
        _ => return Err(format!("{text:?}: expected <number><s|m|h>, e.g. 30s, 90m, 4h")),
    };
    let value: f64 = number
        .parse()
        .map_err(|_| format!("{text:?}: expected <number><s|m|h>, e.g. 30s, 90m, 4h"))?;
    if !value.is_finite() || value < 0.0 {
        return Err(format!("{text:?}: duration must be finite and non-negative"));
    }
    Ok(value * multiplier)
}

pub fn duration_hours(text: &str) -> Result<f64, String> {
    Ok(duration_s(text)? / 3600.0)
}

/// Inclusive rate range `lo..hi` (scientific notation accepted), or a
/// single rate standing for a one-point range.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateRange {
    pub lo: f64,
    pub hi: f64,
}

pub fn rate_range(text: &str) -> Result<RateRange, String> {
    let (lo_text, hi_text) = match text.split_once("..") {
        Some(parts) => parts,
        None => (text, text),
    };
    let parse = |part: &str| -> Result<f64, String> {
        let v: f64 = part
            .parse()
            .map_err(|_| format!("{text:?}: expected <rate> or <rate>..<rate> per hour"))?;
        if !v.is_finite() || v <= 0.0 {
            return Err(format!("{text:?}: rates must be positive and finite"));
        }
        Ok(v)
    };
    let range = RateRange { lo: parse(lo_text)?, hi: parse(hi_text)? };
    if range.lo > range.hi {
        return Err(format!("{text:?}: range start exceeds range end"));
    }
    Ok(range)
}

impl RateRange {
    /// Log-spaced grid over the range; a degenerate range yields one point.
    pub fn log_grid(&self, points: u32) -> Vec<f64> {
        if points <= 1 || self.lo == self.hi {
            return vec![self.lo];
        }
        let ratio = self.hi / self.lo;
        (0..points)
            .map(|i| self.lo * ratio.powf(i as f64 / (points - 1) as f64))
            .collect()
    }
}
