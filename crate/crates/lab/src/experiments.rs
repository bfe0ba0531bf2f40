//! Per-ε scaling experiments.
//!
//! Each experiment maps one `ε` to a [`Case`] and runs the `ε` values on a
//! rayon pool. Runs share nothing mutable, so the rows do not depend on
//! scheduling and the CSV is reproducible byte for byte.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use packetlab_core::energy::{energy_e, error_field};
use packetlab_core::fit::{envelope_rate, growth_rate};
use packetlab_core::nls::{assemble_psi, residual, AnsatzGrids, AnsatzOrder, CarrierParams, Envelope};
use packetlab_core::solver::{run, RunLog, SimulationState, SolverConfig};
use packetlab_core::spectral::{Field, Grid1D, Spectrum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{EnvelopeSpec, Experiment, ExperimentConfig};
use crate::envelope_file::read_envelope;
use crate::report::{DtEvidence, Metadata, ScalingReport, ScalingRow};
use crate::LabError;

/// Outcome of one run at fixed `ε` and step.
#[derive(Debug, Clone, PartialEq)]
pub struct Case {
    pub metric: f64,
    pub t_of_sup: f64,
    pub grid_n: usize,
    pub dt: f64,
    pub extra: BTreeMap<String, f64>,
}

impl Case {
    fn into_row(self, eps: f64) -> ScalingRow {
        ScalingRow { eps, metric: self.metric, t_of_sup: self.t_of_sup, grid_n: self.grid_n, dt: self.dt, extra: self.extra }
    }
}

/// Running supremum with the time it was attained.
#[derive(Debug, Clone, Copy)]
struct Sup {
    value: f64,
    t: f64,
}

impl Default for Sup {
    fn default() -> Self {
        Self { value: f64::NEG_INFINITY, t: 0.0 }
    }
}

impl Sup {
    fn push(&mut self, v: f64, t: f64) {
        if v > self.value {
            self.value = v;
            self.t = t;
        }
    }
}

/// Halves the step from `cfg.dt` until the metric changes by less than
/// `cfg.dt_tolerance` relative, and keeps the finest run.
pub fn refine_dt<F>(cfg: &ExperimentConfig, eps: f64, mut case: F) -> Result<(Case, DtEvidence), LabError>
where
    F: FnMut(f64) -> Result<Case, LabError>,
{
    let mut dt = cfg.dt;
    let mut prev = case(dt)?;
    let mut trials = vec![(prev.dt, prev.metric)];
    loop {
        dt /= 2.0;
        if dt < cfg.dt_min {
            return Ok((prev, DtEvidence { eps, trials, converged: false }));
        }
        let cur = case(dt)?;
        trials.push((cur.dt, cur.metric));
        let change = (cur.metric - prev.metric).abs();
        if change <= cfg.dt_tolerance * cur.metric.abs() {
            return Ok((cur, DtEvidence { eps, trials, converged: true }));
        }
        prev = cur;
    }
}

pub fn initial_envelope(cfg: &ExperimentConfig, slow: &Arc<Grid1D>) -> Result<Envelope, LabError> {
    match &cfg.envelope {
        EnvelopeSpec::Gaussian => Ok(Envelope::gaussian(slow)),
        EnvelopeSpec::File(path) => read_envelope(path, slow),
    }
}

fn solver_config(cfg: &ExperimentConfig, dt: f64, t_end: f64) -> SolverConfig {
    let mut sc = SolverConfig::new(dt, t_end);
    sc.observer_stride = ((cfg.observer_interval / sc.effective_dt()).round() as usize).max(1);
    sc.log_sobolev_index = cfg.s as f64;
    sc
}

/// Largest `|u|` within `L/16` of `x` (periodically), relative to `max |u|`.
pub fn far_field_ratio(u: &Field, x: f64) -> f64 {
    let len = u.grid().length();
    let max = u.max_abs();
    if max == 0.0 {
        return 0.0;
    }
    let near = u
        .grid()
        .points()
        .zip(u.samples())
        .filter(|(p, _)| {
            let d = (p - x).rem_euclid(len);
            d.min(len - d) < len / 16.0
        })
        .fold(0.0f64, |m, (_, v)| m.max(v.norm()));
    near / max
}

/// `sup_{t ≤ t0/ε²} ‖u − εψ‖_{H^s}` for the full equation started from the basic ansatz.
///
/// Also records the `L^∞` error, the error against the corrected ansatz, the
/// scaled error field `R`, and the far-field amplitude opposite the packet.
pub fn validity_case(cfg: &ExperimentConfig, p: &CarrierParams, eps: f64, dt: f64) -> Result<Case, LabError> {
    let grids = AnsatzGrids::new(p, eps, &cfg.grid_spec())?;
    let env0 = initial_envelope(cfg, grids.slow())?;
    let radius = cfg.radius();
    let u0 = assemble_psi(&grids, &env0, 0.0, AnsatzOrder::Basic, radius)?.scaled_psi();
    let sc = solver_config(cfg, dt, cfg.t0 / (eps * eps));
    let s = cfg.s as f64;
    let len = grids.fast().length();
    let mut env = env0;
    let (mut hs, mut linf, mut corrected, mut r_hs, mut seam) =
        (Sup::default(), Sup::default(), Sup::default(), Sup::default(), Sup::default());
    let mut observe = |st: &SimulationState| -> packetlab_core::Result<()> {
        env = env.evolve_to(eps * eps * st.t, cfg.envelope_dt, p);
        let basic = assemble_psi(&grids, &env, st.t, AnsatzOrder::Basic, radius)?;
        let diff = &st.u - &basic.scaled_psi();
        hs.push(diff.sobolev_norm(s), st.t);
        linf.push(diff.max_abs(), st.t);
        r_hs.push(error_field(&st.u, &basic, eps)?.r.sobolev_norm(s), st.t);
        let c2 = assemble_psi(&grids, &env, st.t, AnsatzOrder::Corrected2, radius)?;
        corrected.push((&st.u - &c2.scaled_psi()).sobolev_norm(s), st.t);
        seam.push(far_field_ratio(&st.u, (len / 2.0 + p.cg() * st.t + len / 2.0).rem_euclid(len)), st.t);
        Ok(())
    };
    let (_, log) = run(&u0, &sc, &mut [&mut observe])?;
    let extra = BTreeMap::from([
        ("linf".to_string(), linf.value),
        ("corrected2".to_string(), corrected.value),
        ("error_field_hs".to_string(), r_hs.value),
        ("seam_ratio".to_string(), seam.value),
        ("stability_bound".to_string(), log.stability_bound),
    ]);
    Ok(Case { metric: hs.value, t_of_sup: hs.t, grid_n: grids.fast().num_points(), dt: log.dt_used, extra })
}

/// Seeded real field with random Fourier coefficients for `0 < |k| ≤ kmax`.
pub fn random_field(grid: &Arc<Grid1D>, kmax: f64, seed: u64) -> Result<Field, LabError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = grid.num_points();
    let top = ((kmax / grid.wavenumber_step()) as usize).min(grid.dealias_mode());
    let mut coeffs = vec![Complex64::new(0.0, 0.0); n];
    for m in 1..=top {
        let c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        coeffs[m] = c;
        coeffs[n - m] = c.conj();
    }
    Ok(Spectrum::new(grid.clone(), coeffs)?.inverse().into_real())
}

/// Random initial data with `‖u₀‖_{H²} = amplitude`.
pub fn random_initial(cfg: &ExperimentConfig, amplitude: f64) -> Result<Field, LabError> {
    let grid = Grid1D::new(cfg.grid_points, cfg.grid_length)?;
    let base = random_field(&grid, cfg.field_max_wavenumber, cfg.seed)?;
    Ok(base.scaled(amplitude / base.sobolev_norm(2.0)))
}

fn existence_ratio(cfg: &ExperimentConfig, u0: &Field, dt: f64, t_end: f64) -> Result<(Sup, RunLog), LabError> {
    let sc = solver_config(cfg, dt, t_end);
    let s = cfg.s as f64;
    let n0 = u0.sobolev_norm(s);
    let mut sup = Sup::default();
    let mut observe = |st: &SimulationState| -> packetlab_core::Result<()> {
        sup.push(st.u.sobolev_norm(s) / n0, st.t);
        Ok(())
    };
    let (_, log) = run(u0, &sc, &mut [&mut observe])?;
    Ok((sup, log))
}

/// `sup_{t ≤ t0/ε²} ‖u‖_{H^s} / ‖u₀‖_{H^s}` for random data with `‖u₀‖_{H²} = ε`.
///
/// `ratio_doubled` repeats the run from `2u₀`.
pub fn existence_case(cfg: &ExperimentConfig, eps: f64, dt: f64) -> Result<Case, LabError> {
    let u0 = random_initial(cfg, eps)?;
    let t_end = cfg.t0 / (eps * eps);
    let (sup, log) = existence_ratio(cfg, &u0, dt, t_end)?;
    let (doubled, _) = existence_ratio(cfg, &u0.scaled(2.0), dt, t_end)?;
    let l2_0 = log.samples[0].l2;
    let drift = log.samples.iter().fold(0.0f64, |m, s| m.max((s.l2 / l2_0 - 1.0).abs()));
    let extra = BTreeMap::from([
        ("ratio_doubled".to_string(), doubled.value),
        ("l2_drift".to_string(), drift),
    ]);
    Ok(Case { metric: sup.value, t_of_sup: sup.t, grid_n: cfg.grid_points, dt: log.dt_used, extra })
}

/// Exponential rate `ρ` of `𝓔_s(t) = Σ_ℓ E_ℓ` over `t ≤ t0/ε²`; the metric is `ρ/ε²`.
///
/// `ρ` is the rate of the tightest envelope `𝓔(0)e^{ρt}` above the sampled
/// series. The least-squares rate of `ln 𝓔` is kept as `rho_lsq`.
pub fn energy_drift_case(cfg: &ExperimentConfig, eps: f64, dt: f64) -> Result<Case, LabError> {
    let u0 = random_initial(cfg, eps)?;
    let sc = solver_config(cfg, dt, cfg.t0 / (eps * eps));
    let mut series = Vec::new();
    let mut sup = Sup::default();
    let mut observe = |st: &SimulationState| -> packetlab_core::Result<()> {
        let e = energy_e(&st.u, cfg.s)?.total;
        sup.push(e, st.t);
        series.push((st.t, e));
        Ok(())
    };
    let (_, log) = run(&u0, &sc, &mut [&mut observe])?;
    let rho = envelope_rate(&series)?;
    let e0 = series[0].1;
    let extra = BTreeMap::from([
        ("rho".to_string(), rho),
        ("rho_lsq".to_string(), growth_rate(&series)?),
        ("max_relative_change".to_string(), series.iter().fold(0.0f64, |m, (_, e)| m.max((e / e0 - 1.0).abs()))),
    ]);
    Ok(Case { metric: rho / (eps * eps), t_of_sup: sup.t, grid_n: cfg.grid_points, dt: log.dt_used, extra })
}

/// `sup ‖Res‖_{L²}` over observer times `t ≤ t0/ε²` for the basic ansatz,
/// with the corrected ansatz as `corrected2`. `dt` is the envelope step in slow time.
pub fn residual_case(cfg: &ExperimentConfig, p: &CarrierParams, eps: f64, envelope_dt: f64) -> Result<Case, LabError> {
    let grids = AnsatzGrids::new(p, eps, &cfg.grid_spec())?;
    let mut env = initial_envelope(cfg, grids.slow())?;
    let radius = cfg.radius();
    let t_end = cfg.t0 / (eps * eps);
    let samples = (t_end / cfg.observer_interval).round().max(1.0) as usize;
    let (mut basic, mut corrected) = (Sup::default(), Sup::default());
    for i in 0..=samples {
        let t = t_end * i as f64 / samples as f64;
        env = env.evolve_to(eps * eps * t, envelope_dt, p);
        let b = assemble_psi(&grids, &env, t, AnsatzOrder::Basic, radius)?;
        basic.push(residual(&b).l2_norm(), t);
        let c = assemble_psi(&grids, &env, t, AnsatzOrder::Corrected2, radius)?;
        corrected.push(residual(&c).l2_norm(), t);
    }
    let extra = BTreeMap::from([
        ("corrected2".to_string(), corrected.value),
        ("corrected2_t_of_sup".to_string(), corrected.t),
    ]);
    Ok(Case { metric: basic.value, t_of_sup: basic.t, grid_n: grids.fast().num_points(), dt: envelope_dt, extra })
}

fn sweep<F>(cfg: &ExperimentConfig, warnings: Vec<String>, refine: F) -> ScalingReport
where
    F: Fn(f64) -> Result<(Case, DtEvidence), LabError> + Sync,
{
    let start = Instant::now();
    let results: Vec<_> = cfg.eps_list.par_iter().map(|&eps| (eps, refine(eps))).collect();
    let mut meta = Metadata::new(cfg, warnings);
    let mut rows = Vec::new();
    for (eps, r) in results {
        match r {
            Ok((case, evidence)) => {
                rows.push(case.into_row(eps));
                meta.dt_evidence.push(evidence);
            }
            Err(e) => meta.failures.push((eps, e.to_string())),
        }
    }
    meta.wall_time_s = start.elapsed().as_secs_f64();
    ScalingReport::new(rows, meta)
}

pub fn run_nls_validity(cfg: &ExperimentConfig) -> Result<ScalingReport, LabError> {
    let warnings = cfg.validate()?;
    let p = cfg.carrier()?;
    let mut rep = sweep(cfg, warnings, |eps| refine_dt(cfg, eps, |dt| validity_case(cfg, &p, eps, dt)));
    rep.fit_extra("corrected2");
    rep.fit_extra("linf");
    Ok(rep)
}

pub fn run_long_time_existence(cfg: &ExperimentConfig) -> Result<ScalingReport, LabError> {
    let warnings = cfg.validate()?;
    Ok(sweep(cfg, warnings, |eps| refine_dt(cfg, eps, |dt| existence_case(cfg, eps, dt))))
}

pub fn run_energy_drift(cfg: &ExperimentConfig) -> Result<ScalingReport, LabError> {
    let warnings = cfg.validate()?;
    Ok(sweep(cfg, warnings, |eps| refine_dt(cfg, eps, |dt| energy_drift_case(cfg, eps, dt))))
}

pub fn run_residual_scaling(cfg: &ExperimentConfig) -> Result<ScalingReport, LabError> {
    let warnings = cfg.validate()?;
    let p = cfg.carrier()?;
    // the step being refined is the envelope step
    let mut env_cfg = cfg.clone();
    env_cfg.dt = cfg.envelope_dt;
    env_cfg.dt_min = cfg.envelope_dt / 16.0;
    let mut rep = sweep(cfg, warnings, |eps| refine_dt(&env_cfg, eps, |dt| residual_case(cfg, &p, eps, dt)));
    rep.fit_extra("corrected2");
    Ok(rep)
}

/// A pass/fail judgement on one measured quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    pub measured: Option<f64>,
    pub requirement: String,
}

impl Verdict {
    fn new(name: &str, measured: Option<f64>, requirement: &str, ok: impl Fn(f64) -> bool) -> Self {
        Self { name: name.into(), passed: measured.is_some_and(ok), measured, requirement: requirement.into() }
    }
}

/// Acceptance checks for a finished report.
pub fn verdicts(experiment: Experiment, rep: &ScalingReport) -> Vec<Verdict> {
    let mut out = Vec::new();
    if !rep.metadata.failures.is_empty() {
        out.push(Verdict::new("all runs completed", Some(rep.metadata.failures.len() as f64), "0 failures", |v| v == 0.0));
    }
    // a single surviving row cannot be judged
    if rep.rows.len() < 2 {
        return out;
    }
    match experiment {
        Experiment::NlsValidity => {
            if rep.fit.is_some() {
                out.push(Verdict::new("H^s error slope", rep.slope(), ">= 1.4", |s| s >= 1.4));
            }
        }
        Experiment::Existence => out.push(Verdict::new("sup norm ratio spread", rep.spread(), "< 2", |s| s < 2.0)),
        Experiment::EnergyDrift => out.push(Verdict::new("rho/eps^2 spread", rep.spread(), "< 3", |s| s < 3.0)),
        Experiment::ResidualScaling => {
            if rep.fit.is_some() {
                out.push(Verdict::new("basic residual slope", rep.slope(), "2.5 +- 0.3", |s| (s - 2.5).abs() <= 0.3));
                let c = rep.extra_fits.get("corrected2").map(|f| f.slope);
                out.push(Verdict::new("corrected2 residual slope", c, ">= 3.3", |s| s >= 3.3));
            }
        }
        Experiment::PropertySuite => {}
    }
    out
}
