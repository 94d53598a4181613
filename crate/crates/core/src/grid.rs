//! Grid syntax for the command line: `lo:hi:step` or a comma-separated list.
//!
//! `lo:hi:step` yields `lo + i·step` for `i = 0, 1, …` while the point does
//! not pass `hi`; `hi` itself is included when `(hi − lo)/step` is an integer
//! to within `1e−9`, in which case the last point is exactly `hi`.

use crate::error::{Error, Result};

/// Relative slack when deciding whether `hi` lies on the grid.
pub const ENDPOINT_SLACK: f64 = 1e-9;

/// Upper bound on the number of grid points.
pub const MAX_POINTS: usize = 10_000_000;

pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let text = text.trim();
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::Config(format!("grid {text:?} must be lo:hi:step")));
        }
        let lo = number(parts[0])?;
        let hi = number(parts[1])?;
        let step = number(parts[2])?;
        range(lo, hi, step)
    } else {
        let values = text.split(',').map(number).collect::<Result<Vec<_>>>()?;
        if values.is_empty() {
            return Err(Error::Config("empty grid".into()));
        }
        Ok(values)
    }
}

pub fn range(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) {
        return Err(Error::Config(format!("grid step must be positive, got {step}")));
    }
    if hi < lo {
        return Err(Error::Config(format!("grid upper end {hi} is below lower end {lo}")));
    }
    let span = (hi - lo) / step;
    if span > MAX_POINTS as f64 {
        return Err(Error::Config(format!("grid would have more than {MAX_POINTS} points")));
    }
    let nearest = span.round();
    let on_grid = (span - nearest).abs() <= ENDPOINT_SLACK;
    let last = if on_grid { nearest as usize } else { span.floor() as usize };
    let mut points: Vec<f64> = (0..=last).map(|i| lo + i as f64 * step).collect();
    if on_grid {
        *points.last_mut().expect("non-empty") = hi;
    }
    Ok(points)
}

fn number(s: &str) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("{s:?} is not a number")))?;
    if !v.is_finite() {
        return Err(Error::Config(format!("{s:?} is not finite")));
    }
    Ok(v)
}
