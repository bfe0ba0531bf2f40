//! Least-squares power-law fits on log-log data.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Fits `ln value = slope · ln x + intercept` by ordinary least squares.
pub fn fit_slope(rows: &[(f64, f64)]) -> Result<SlopeFit> {
    if rows.len() < 2 {
        return Err(Error::TooFewRows { needed: 2, got: rows.len() });
    }
    if let Some(&(x, y)) = rows.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0)) {
        return Err(Error::NonPositive(if x > 0.0 { y } else { x }));
    }
    let n = rows.len() as f64;
    let (mut sx, mut sy) = (0.0, 0.0);
    for &(x, y) in rows {
        sx += x.ln();
        sy += y.ln();
    }
    let (mx, my) = (sx / n, sy / n);
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in rows {
        let (dx, dy) = (x.ln() - mx, y.ln() - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::Degenerate);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse = (syy - slope * sxy).max(0.0);
    // a perfectly flat series is fitted exactly
    let r_squared = if syy <= f64::EPSILON * f64::EPSILON { 1.0 } else { 1.0 - sse / syy };
    Ok(SlopeFit { slope, intercept, r_squared })
}

/// Rate `ρ` of the least-squares fit `ln v(t) = ln v₀ + ρt`.
pub fn growth_rate(series: &[(f64, f64)]) -> Result<f64> {
    if series.len() < 2 {
        return Err(Error::TooFewRows { needed: 2, got: series.len() });
    }
    if let Some(&(_, v)) = series.iter().find(|(_, v)| !(*v > 0.0)) {
        return Err(Error::NonPositive(v));
    }
    let n = series.len() as f64;
    let mt = series.iter().map(|(t, _)| t).sum::<f64>() / n;
    let mv = series.iter().map(|(_, v)| v.ln()).sum::<f64>() / n;
    let (mut stt, mut stv) = (0.0, 0.0);
    for &(t, v) in series {
        stt += (t - mt) * (t - mt);
        stv += (t - mt) * (v.ln() - mv);
    }
    if stt == 0.0 {
        return Err(Error::Degenerate);
    }
    Ok(stv / stt)
}

/// Smallest `ρ` with `v(t) ≤ v(t₀)e^{ρ(t−t₀)}` at every sample after the first.
pub fn envelope_rate(series: &[(f64, f64)]) -> Result<f64> {
    let Some((&(t0, v0), rest)) = series.split_first() else {
        return Err(Error::TooFewRows { needed: 2, got: 0 });
    };
    if rest.is_empty() {
        return Err(Error::TooFewRows { needed: 2, got: 1 });
    }
    if let Some(&(_, v)) = series.iter().find(|(_, v)| !(*v > 0.0)) {
        return Err(Error::NonPositive(v));
    }
    let mut rate = f64::NEG_INFINITY;
    for &(t, v) in rest {
        if !(t > t0) {
            return Err(Error::Degenerate);
        }
        rate = rate.max((v / v0).ln() / (t - t0));
    }
    Ok(rate)
}
