//! Two-column envelope text format.
//!
//! ```text
//! # X   A
//! 0.0   1+0i
//! 0.12  0.98-0.01i
//! ```
//!
//! `X` must list the slow grid points `0, dX, 2dX, …` in order and `A` is a
//! complex number written `a+bi` (a bare real is accepted). Lines starting
//! with `#` and blank lines are skipped.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use packetlab_core::nls::Envelope;
use packetlab_core::spectral::{Field, Grid1D};

use crate::LabError;

pub fn parse_envelope(text: &str, grid: &Arc<Grid1D>) -> Result<Envelope, LabError> {
    let mut values = Vec::with_capacity(grid.num_points());
    let tol = 1e-9 * grid.length();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| LabError::Envelope { line: n + 1, msg };
        let mut cols = line.split_whitespace();
        let (Some(x), Some(a), None) = (cols.next(), cols.next(), cols.next()) else {
            return Err(err("expected two columns".into()));
        };
        let x: f64 = x.parse().map_err(|e| err(format!("bad X: {e}")))?;
        let a: Complex64 = a.parse().map_err(|_| err(format!("bad complex value `{a}`")))?;
        let expected = values.len() as f64 * grid.spacing();
        if values.len() >= grid.num_points() || (x - expected).abs() > tol {
            return Err(err(format!("X = {x} does not match slow grid point {expected}")));
        }
        values.push(a);
    }
    if values.len() != grid.num_points() {
        return Err(LabError::Envelope {
            line: 0,
            msg: format!("expected {} rows, found {}", grid.num_points(), values.len()),
        });
    }
    Ok(Envelope::new(Field::from_complex(grid, values)?, 0.0))
}

pub fn read_envelope(path: &Path, grid: &Arc<Grid1D>) -> Result<Envelope, LabError> {
    let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
    parse_envelope(&text, grid)
}

pub fn format_envelope(env: &Envelope) -> String {
    let mut out = String::from("# X A\n");
    for (x, a) in env.grid().points().zip(env.field().samples()) {
        let _ = writeln!(out, "{x:?} {a}");
    }
    out
}
