//! Flat `key = value` experiment configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown keys are an
//! error so typos do not silently fall back to defaults.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use packetlab_core::nls::{CarrierParams, GridSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::LabError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Existence,
    NlsValidity,
    ResidualScaling,
    EnergyDrift,
    PropertySuite,
}

impl Experiment {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Existence => "existence",
            Self::NlsValidity => "nls_validity",
            Self::ResidualScaling => "residual_scaling",
            Self::EnergyDrift => "energy_drift",
            Self::PropertySuite => "property_suite",
        }
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "existence" => Self::Existence,
            "nls_validity" => Self::NlsValidity,
            "residual_scaling" => Self::ResidualScaling,
            "energy_drift" => Self::EnergyDrift,
            "property_suite" => Self::PropertySuite,
            _ => return Err(format!("unknown experiment `{s}`")),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeSpec {
    Gaussian,
    File(PathBuf),
}

impl EnvelopeSpec {
    fn render(&self) -> String {
        match self {
            Self::Gaussian => "gaussian".into(),
            Self::File(p) => format!("file:{}", p.display()),
        }
    }
}

impl FromStr for EnvelopeSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            _ => match s.strip_prefix("file:") {
                Some(p) if !p.is_empty() => Ok(Self::File(PathBuf::from(p))),
                _ => Err(format!("envelope must be `gaussian` or `file:<path>`, got `{s}`")),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    /// Strictly decreasing.
    pub eps_list: Vec<f64>,
    pub k0: f64,
    pub delta: f64,
    /// Horizon in slow time; runs go to `t0 / ε²`.
    pub t0: f64,
    /// Sobolev index of the reported norms.
    pub s: u32,
    /// Ansatz grid rule: slow domain length, slow points and fast resolution in points per 2π.
    pub slow_length: f64,
    pub slow_points: usize,
    pub fast_nyquist: f64,
    /// Grid for random-data runs.
    pub grid_points: usize,
    pub grid_length: f64,
    pub field_max_wavenumber: f64,
    /// Initial step, halved until the observed metric changes by less than `dt_tolerance`.
    pub dt: f64,
    pub dt_min: f64,
    pub dt_tolerance: f64,
    /// Slow-time step of the envelope integrator.
    pub envelope_dt: f64,
    pub observer_interval: f64,
    pub envelope: EnvelopeSpec,
    /// Fourier radius of each packet around `jk₀`; defaults to `0.49 k₀`.
    pub packet_radius: Option<f64>,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let grid = GridSpec::default();
        Self {
            experiment: Experiment::NlsValidity,
            eps_list: vec![0.2, 0.1, 0.05, 0.025],
            k0: 1.0,
            delta: 0.045,
            t0: 1.0,
            s: 7,
            slow_length: grid.slow_length,
            slow_points: grid.slow_points,
            fast_nyquist: grid.fast_nyquist,
            grid_points: 512,
            grid_length: 64.0 * std::f64::consts::PI,
            field_max_wavenumber: 2.0,
            dt: 0.05,
            dt_min: 0.05 / 16.0,
            dt_tolerance: 0.05,
            envelope_dt: 1e-3,
            observer_interval: 0.5,
            envelope: EnvelopeSpec::Gaussian,
            packet_radius: None,
            output_dir: PathBuf::from("out"),
            seed: 1,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| format!("bad value for `{key}`: {e}"))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>, String> {
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, LabError> {
        let mut cfg = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| LabError::Config { line: n + 1, msg };
            let (key, value) = line.split_once('=').ok_or_else(|| err("expected `key = value`".into()))?;
            cfg.set(key.trim(), value.trim()).map_err(err)?;
        }
        Ok(cfg)
    }

    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "experiment" => self.experiment = parse(key, value)?,
            "eps_list" => self.eps_list = parse_list(key, value)?,
            "k0" => self.k0 = parse(key, value)?,
            "delta" => self.delta = parse(key, value)?,
            "t0" => self.t0 = parse(key, value)?,
            "s" => self.s = parse(key, value)?,
            "slow_length" => self.slow_length = parse(key, value)?,
            "slow_points" => self.slow_points = parse(key, value)?,
            "fast_nyquist" => self.fast_nyquist = parse(key, value)?,
            "grid_points" => self.grid_points = parse(key, value)?,
            "grid_length" => self.grid_length = parse(key, value)?,
            "field_max_wavenumber" => self.field_max_wavenumber = parse(key, value)?,
            "dt" => self.dt = parse(key, value)?,
            "dt_min" => self.dt_min = parse(key, value)?,
            "dt_tolerance" => self.dt_tolerance = parse(key, value)?,
            "envelope_dt" => self.envelope_dt = parse(key, value)?,
            "observer_interval" => self.observer_interval = parse(key, value)?,
            "envelope" => self.envelope = parse(key, value)?,
            "packet_radius" => self.packet_radius = Some(parse(key, value)?),
            "output_dir" => self.output_dir = PathBuf::from(value),
            "seed" => self.seed = parse(key, value)?,
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    /// Canonical text form; parsing it gives back the same config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let list: Vec<String> = self.eps_list.iter().map(|e| format!("{e:?}")).collect();
        let _ = writeln!(out, "experiment = {}", self.experiment.as_str());
        let _ = writeln!(out, "eps_list = {}", list.join(","));
        let _ = writeln!(out, "k0 = {:?}", self.k0);
        let _ = writeln!(out, "delta = {:?}", self.delta);
        let _ = writeln!(out, "t0 = {:?}", self.t0);
        let _ = writeln!(out, "s = {}", self.s);
        let _ = writeln!(out, "slow_length = {:?}", self.slow_length);
        let _ = writeln!(out, "slow_points = {}", self.slow_points);
        let _ = writeln!(out, "fast_nyquist = {:?}", self.fast_nyquist);
        let _ = writeln!(out, "grid_points = {}", self.grid_points);
        let _ = writeln!(out, "grid_length = {:?}", self.grid_length);
        let _ = writeln!(out, "field_max_wavenumber = {:?}", self.field_max_wavenumber);
        let _ = writeln!(out, "dt = {:?}", self.dt);
        let _ = writeln!(out, "dt_min = {:?}", self.dt_min);
        let _ = writeln!(out, "dt_tolerance = {:?}", self.dt_tolerance);
        let _ = writeln!(out, "envelope_dt = {:?}", self.envelope_dt);
        let _ = writeln!(out, "observer_interval = {:?}", self.observer_interval);
        let _ = writeln!(out, "envelope = {}", self.envelope.render());
        if let Some(r) = self.packet_radius {
            let _ = writeln!(out, "packet_radius = {r:?}");
        }
        let _ = writeln!(out, "output_dir = {}", self.output_dir.display());
        let _ = writeln!(out, "seed = {}", self.seed);
        out
    }

    /// SHA-256 of the canonical text, hex encoded.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_text().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn radius(&self) -> f64 {
        self.packet_radius.unwrap_or(0.49 * self.k0)
    }

    pub fn grid_spec(&self) -> GridSpec {
        GridSpec { slow_length: self.slow_length, slow_points: self.slow_points, fast_nyquist: self.fast_nyquist }
    }

    pub fn carrier(&self) -> Result<CarrierParams, LabError> {
        Ok(CarrierParams::new(self.k0, self.delta)?)
    }

    /// Checks hard invariants and returns soft warnings.
    pub fn validate(&self) -> Result<Vec<String>, LabError> {
        let bad = |msg: String| Err(LabError::Invalid(msg));
        if self.eps_list.is_empty() {
            return bad("eps_list is empty".into());
        }
        if self.eps_list.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
            return bad("every eps must lie in (0, 1)".into());
        }
        if self.eps_list.windows(2).any(|w| w[1] >= w[0]) {
            return bad("eps_list must be strictly decreasing".into());
        }
        self.carrier()?;
        let positive = [
            ("t0", self.t0),
            ("dt", self.dt),
            ("dt_min", self.dt_min),
            ("dt_tolerance", self.dt_tolerance),
            ("envelope_dt", self.envelope_dt),
            ("observer_interval", self.observer_interval),
            ("grid_length", self.grid_length),
            ("field_max_wavenumber", self.field_max_wavenumber),
            ("slow_length", self.slow_length),
            ("fast_nyquist", self.fast_nyquist),
        ];
        if let Some((name, v)) = positive.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return bad(format!("`{name}` must be positive, got {v}"));
        }
        if self.dt_min > self.dt {
            return bad("dt_min exceeds dt".into());
        }
        if self.s < 2 {
            return bad("s must be at least 2".into());
        }
        let r = self.radius();
        if !(r > 0.0 && r < self.k0 / 2.0) {
            return bad(format!("packet_radius must lie in (0, k0/2), got {r}"));
        }
        let mut warnings = Vec::new();
        if let Some(e) = self.eps_list.iter().find(|e| **e >= self.delta) {
            warnings.push(format!("eps = {e} is not below delta = {}; the small-eps regime is not reached", self.delta));
        }
        Ok(warnings)
    }
}
