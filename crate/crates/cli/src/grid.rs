//! Parameter grids: `a:b:step` (inclusive), `log:lo:hi:count`, comma lists
//! and single values.

use crate::error::{CliError, Result};

fn number(field: &str, text: &str) -> Result<f64> {
    let v: f64 = text.trim().parse().map_err(|_| CliError::config(field, format!("not a number: {text:?}")))?;
    if !v.is_finite() {
        return Err(CliError::config(field, format!("not finite: {text:?}")));
    }
    Ok(v)
}

pub fn parse_grid(field: &str, text: &str) -> Result<Vec<f64>> {
    let text = text.trim();
    if text.is_empty() {
        return Err(CliError::config(field, "empty grid"));
    }
    if let Some(rest) = text.strip_prefix("log:") {
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() != 3 {
            return Err(CliError::config(field, format!("expected log:lo:hi:count, got {text:?}")));
        }
        let lo = number(field, parts[0])?;
        let hi = number(field, parts[1])?;
        let count: usize =
            parts[2].trim().parse().map_err(|_| CliError::config(field, format!("bad count {:?}", parts[2])))?;
        if !(lo > 0.0 && hi >= lo) {
            return Err(CliError::config(field, format!("need 0 < lo <= hi, got {lo}..{hi}")));
        }
        if count == 0 || (count == 1 && hi != lo) {
            return Err(CliError::config(field, "count must be at least 2 for a nontrivial range"));
        }
        if count == 1 {
            return Ok(vec![lo]);
        }
        let (a, b) = (lo.ln(), hi.ln());
        return Ok((0..count)
            .map(|i| match i {
                0 => lo,
                _ if i + 1 == count => hi,
                _ => (a + (b - a) * i as f64 / (count - 1) as f64).exp(),
            })
            .collect());
    }
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(CliError::config(field, format!("expected start:stop:step, got {text:?}")));
        }
        let a = number(field, parts[0])?;
        let b = number(field, parts[1])?;
        let step = number(field, parts[2])?;
        if !(step > 0.0) || b < a {
            return Err(CliError::config(field, format!("need start <= stop and step > 0, got {text:?}")));
        }
        let count = ((b - a) / step + 1e-9).floor() as usize + 1;
        if count > 10_000_000 {
            return Err(CliError::config(field, format!("{count} grid points")));
        }
        return Ok((0..count).map(|i| a + step * i as f64).collect());
    }
    text.split(',').map(|t| number(field, t)).collect()
}
