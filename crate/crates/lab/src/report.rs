//! Scaling reports, their CSV table and JSON form.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use packetlab_core::fit::{fit_slope, SlopeFit};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::LabError;

pub const CSV_HEADER: &str = "eps,metric,t_of_sup,grid_n,dt";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub eps: f64,
    pub metric: f64,
    pub t_of_sup: f64,
    pub grid_n: usize,
    pub dt: f64,
    /// Secondary measurements, keyed by name.
    pub extra: BTreeMap<String, f64>,
}

/// Step-size refinement record for one `ε`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DtEvidence {
    pub eps: f64,
    /// `(dt, metric)` for every step tried, coarsest first.
    pub trials: Vec<(f64, f64)>,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub experiment: String,
    pub config_hash: String,
    pub version: String,
    pub wall_time_s: f64,
    pub dt_evidence: Vec<DtEvidence>,
    pub warnings: Vec<String>,
    /// `(eps, message)` for runs that failed.
    pub failures: Vec<(f64, String)>,
}

impl Metadata {
    pub fn new(cfg: &ExperimentConfig, warnings: Vec<String>) -> Self {
        Self {
            experiment: cfg.experiment.as_str().into(),
            config_hash: cfg.hash(),
            version: env!("CARGO_PKG_VERSION").into(),
            wall_time_s: 0.0,
            dt_evidence: Vec::new(),
            warnings,
            failures: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    /// Fit of `metric` against `eps`; absent with fewer than three rows.
    pub fit: Option<SlopeFit>,
    /// Fits of named `extra` columns.
    pub extra_fits: BTreeMap<String, SlopeFit>,
    pub metadata: Metadata,
}

/// Least-squares fit on `(eps, value)`, or `None` below three rows or on degenerate data.
pub fn fit_rows(rows: &[(f64, f64)]) -> Option<SlopeFit> {
    if rows.len() < 3 {
        return None;
    }
    fit_slope(rows).ok()
}

impl ScalingReport {
    pub fn new(rows: Vec<ScalingRow>, metadata: Metadata) -> Self {
        let fit = fit_rows(&rows.iter().map(|r| (r.eps, r.metric)).collect::<Vec<_>>());
        Self { rows, fit, extra_fits: BTreeMap::new(), metadata }
    }

    pub fn fit_extra(&mut self, key: &str) {
        let pts: Vec<_> = self.rows.iter().filter_map(|r| r.extra.get(key).map(|v| (r.eps, *v))).collect();
        if let Some(f) = fit_rows(&pts) {
            self.extra_fits.insert(key.into(), f);
        }
    }

    pub fn slope(&self) -> Option<f64> {
        self.fit.map(|f| f.slope)
    }

    /// Ratio of the largest to the smallest metric.
    pub fn spread(&self) -> Option<f64> {
        spread(self.rows.iter().map(|r| r.metric))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(out, "{:?},{:?},{:?},{},{:?}", r.eps, r.metric, r.t_of_sup, r.grid_n, r.dt);
        }
        out
    }

    /// Writes `<name>.csv` and `<name>.json` into `dir`.
    pub fn write(&self, dir: &Path, name: &str) -> Result<(), LabError> {
        write_file(&dir.join(format!("{name}.csv")), &self.to_csv())?;
        write_file(&dir.join(format!("{name}.json")), &serde_json::to_string_pretty(self)?)
    }
}

pub fn spread(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo > 0.0 && lo.is_finite()).then(|| hi / lo)
}

pub fn write_file(path: &Path, text: &str) -> Result<(), LabError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| LabError::io(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| LabError::io(path, e))
}
