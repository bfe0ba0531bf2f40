//! Integrating-factor RK4 for `∂ₜu = Lu − u∂ₓu` on a periodic grid.
//!
//! The linear part is diagonal in Fourier space and propagated exactly;
//! the quadratic term is evaluated alias-free with the 2/3 rule. The state
//! is kept spectrally truncated, so every product is exact.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::multiplier::Multiplier;
use crate::spectral::{Field, Grid1D, Spectrum};
use crate::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// RK4 stays stable on the imaginary axis up to `|λ dt| ≈ 2√2`.
const RK4_IMAG_AXIS: f64 = 2.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    IntegratingFactorRk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearPart {
    /// `−i tanh k`
    TanhK0,
    /// `−i sign k`
    Hilbert,
}

impl LinearPart {
    pub fn multiplier(self, grid: &Arc<Grid1D>) -> Multiplier {
        match self {
            LinearPart::TanhK0 => Multiplier::k0(grid),
            LinearPart::Hilbert => Multiplier::hilbert(grid),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Requested step; the step actually used is `t_end / ⌈t_end / dt⌉`.
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    pub observer_stride: usize,
    pub linear: LinearPart,
    /// `false` drops `−u∂ₓu` (linear control runs).
    pub nonlinear: bool,
    /// Sobolev index of the norm traced in the [`RunLog`].
    pub log_sobolev_index: f64,
}

impl SolverConfig {
    pub fn new(dt: f64, t_end: f64) -> Self {
        Self {
            dt,
            t_end,
            scheme: Scheme::IntegratingFactorRk4,
            observer_stride: 1,
            linear: LinearPart::TanhK0,
            nonlinear: true,
            log_sobolev_index: 2.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::ParameterOutOfRange { name: "dt", value: self.dt });
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::ParameterOutOfRange { name: "t_end", value: self.t_end });
        }
        if self.observer_stride == 0 {
            return Err(Error::ParameterOutOfRange { name: "observer_stride", value: 0.0 });
        }
        Ok(())
    }

    pub fn num_steps(&self) -> u64 {
        (self.t_end / self.dt).ceil() as u64
    }

    pub fn effective_dt(&self) -> f64 {
        match self.num_steps() {
            0 => self.dt,
            n => self.t_end / n as f64,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimulationState {
    pub t: f64,
    pub u: Field,
    pub step_count: u64,
}

impl SimulationState {
    pub fn new(u: Field) -> Self {
        Self { t: 0.0, u, step_count: 0 }
    }
}

/// `−u∂ₓu` with the product dealiased.
pub fn rhs_nonlinear(u: &Field) -> Field {
    u.dealiased_product(&u.derivative(1)).expect("same grid").scaled(-1.0)
}

/// `−½∂ₓ(u²)`, the conservative form of [`rhs_nonlinear`].
pub fn rhs_nonlinear_divergence(u: &Field) -> Field {
    u.dealiased_product(u).expect("same grid").derivative(1).scaled(-0.5)
}

/// Precomputed propagators for one grid and step size.
#[derive(Debug, Clone)]
pub struct Stepper {
    grid: Arc<Grid1D>,
    dt: f64,
    nonlinear: bool,
    half: Vec<Complex64>,
    full: Vec<Complex64>,
    /// `1 − k` (Nyquist: `1`), so that `û(1 − k)` transforms to `u + i∂ₓu`.
    zfactor: Vec<Complex64>,
    retained: Vec<bool>,
}

impl Stepper {
    pub fn new(grid: &Arc<Grid1D>, config: &SolverConfig) -> Result<Self> {
        config.validate()?;
        let dt = config.effective_dt();
        let lin = config.linear.multiplier(grid);
        let half = lin.symbol().iter().map(|l| (l * (dt / 2.0)).exp()).collect();
        let full = lin.symbol().iter().map(|l| (l * dt).exp()).collect();
        let nyq = grid.nyquist_index();
        let zfactor = grid
            .wavenumbers()
            .iter()
            .enumerate()
            .map(|(i, &k)| Complex64::new(if i == nyq { 1.0 } else { 1.0 - k }, 0.0))
            .collect();
        let retained = (0..grid.num_points()).map(|i| grid.is_retained(i)).collect();
        Ok(Self { grid: grid.clone(), dt, nonlinear: config.nonlinear, half, full, zfactor, retained })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Spectral `−u∂ₓu` on truncated coefficients: two FFTs.
    fn nonlinear_term(&self, uh: &[Complex64], out: &mut [Complex64], buf: &mut [Complex64]) {
        if !self.nonlinear {
            out.fill(ZERO);
            return;
        }
        let n = uh.len();
        for ((b, u), z) in buf.iter_mut().zip(uh).zip(&self.zfactor) {
            *b = u * z;
        }
        self.grid.plan().inverse(buf);
        for (o, z) in out.iter_mut().zip(buf.iter()) {
            *o = Complex64::new(z.re * z.im, 0.0);
        }
        self.grid.plan().forward(out);
        let scale = -1.0 / n as f64;
        for (o, &keep) in out.iter_mut().zip(&self.retained) {
            *o = if keep { *o * scale } else { ZERO };
        }
        // u∂ₓu = ½∂ₓ(u²) has zero mean; dropping the rounding keeps ∫u exact
        out[0] = ZERO;
        // exact Hermitian symmetry of the transform of real data
        for i in 1..n / 2 {
            let avg = (out[i] + out[n - i].conj()) * 0.5;
            out[i] = avg;
            out[n - i] = avg.conj();
        }
    }

    /// Advances truncated coefficients by one step in place.
    pub fn advance(&self, uh: &mut [Complex64], work: &mut Workspace) {
        let Workspace { a, b, c, d, tmp, buf } = work;
        let dt = self.dt;
        let e = &self.half;
        self.nonlinear_term(uh, a, buf);
        for i in 0..uh.len() {
            tmp[i] = e[i] * (uh[i] + a[i] * (dt / 2.0));
        }
        self.nonlinear_term(tmp, b, buf);
        for i in 0..uh.len() {
            tmp[i] = e[i] * uh[i] + b[i] * (dt / 2.0);
        }
        self.nonlinear_term(tmp, c, buf);
        for i in 0..uh.len() {
            tmp[i] = self.full[i] * uh[i] + e[i] * c[i] * dt;
        }
        self.nonlinear_term(tmp, d, buf);
        for i in 0..uh.len() {
            uh[i] = self.full[i] * uh[i]
                + (self.full[i] * a[i] + e[i] * (b[i] + c[i]) * 2.0 + d[i]) * (dt / 6.0);
        }
    }

    pub fn workspace(&self) -> Workspace {
        Workspace::new(self.grid.num_points())
    }

    /// One step from a state; the field is truncated to the 2/3 band first.
    pub fn step(&self, state: &SimulationState) -> Result<SimulationState> {
        let mut uh = truncated_coeffs(&state.u)?;
        let mut work = self.workspace();
        self.advance(&mut uh, &mut work);
        let next = SimulationState {
            t: state.t + self.dt,
            u: Spectrum::new(self.grid.clone(), uh)?.inverse().into_real(),
            step_count: state.step_count + 1,
        };
        if next.u.samples().iter().any(|z| !z.re.is_finite()) {
            return Err(Error::NonFinite { t: next.t, step: next.step_count });
        }
        Ok(next)
    }
}

pub struct Workspace {
    a: Vec<Complex64>,
    b: Vec<Complex64>,
    c: Vec<Complex64>,
    d: Vec<Complex64>,
    tmp: Vec<Complex64>,
    buf: Vec<Complex64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        let z = vec![ZERO; n];
        Self { a: z.clone(), b: z.clone(), c: z.clone(), d: z.clone(), tmp: z.clone(), buf: z }
    }
}

fn truncated_coeffs(u: &Field) -> Result<Vec<Complex64>> {
    if !u.is_real() && u.imag_residue() > 1e-10 {
        return Err(Error::ParameterOutOfRange { name: "imag_residue", value: u.imag_residue() });
    }
    let mut s = u.clone().into_real().forward();
    s.truncate_dealias();
    Ok(s.into_coeffs())
}

/// Called at `t = 0`, every `observer_stride` steps and at the final time.
pub trait Observer {
    fn observe(&mut self, state: &SimulationState) -> Result<()>;
}

impl<F: FnMut(&SimulationState) -> Result<()>> Observer for F {
    fn observe(&mut self, state: &SimulationState) -> Result<()> {
        self(state)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogSample {
    pub t: f64,
    pub step: u64,
    pub mass: f64,
    pub l2: f64,
    pub sobolev: f64,
    pub max_abs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub config: SolverConfig,
    pub dt_used: f64,
    pub steps: u64,
    /// `2.8 / (max|u₀| k_cut)`; the step used should stay below it.
    pub stability_bound: f64,
    pub samples: Vec<LogSample>,
}

impl RunLog {
    pub fn dt_within_stability_bound(&self) -> bool {
        self.dt_used <= self.stability_bound
    }
}

fn log_sample(state: &SimulationState, s: f64) -> LogSample {
    LogSample {
        t: state.t,
        step: state.step_count,
        mass: state.u.integral().re,
        l2: state.u.l2_norm(),
        sobolev: state.u.sobolev_norm(s),
        max_abs: state.u.max_abs(),
    }
}

/// Advances `initial` to `config.t_end`.
///
/// The initial field is projected onto the 2/3 band before stepping.
pub fn run(
    initial: &Field,
    config: &SolverConfig,
    observers: &mut [&mut dyn Observer],
) -> Result<(SimulationState, RunLog)> {
    let grid = initial.grid().clone();
    let stepper = Stepper::new(&grid, config)?;
    let steps = config.num_steps();
    let k_cut = grid.dealias_mode() as f64 * grid.wavenumber_step();
    let amp = initial.max_abs();
    let stability_bound = if amp > 0.0 { RK4_IMAG_AXIS / (amp * k_cut) } else { f64::INFINITY };
    let mut log = RunLog {
        config: *config,
        dt_used: stepper.dt(),
        steps,
        stability_bound,
        samples: Vec::new(),
    };
    let mut state = SimulationState::new(initial.clone());
    if steps == 0 {
        log.samples.push(log_sample(&state, config.log_sobolev_index));
        for obs in observers.iter_mut() {
            obs.observe(&state)?;
        }
        return Ok((state, log));
    }
    let mut uh = truncated_coeffs(initial)?;
    let mut work = stepper.workspace();
    let materialize = |uh: &[Complex64], t: f64, step: u64| -> Result<SimulationState> {
        let u = Spectrum::new(grid.clone(), uh.to_vec())?.inverse().into_real();
        Ok(SimulationState { t, u, step_count: step })
    };
    state = materialize(&uh, 0.0, 0)?;
    for step in 0..=steps {
        if step > 0 {
            stepper.advance(&mut uh, &mut work);
            if uh.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
                return Err(Error::NonFinite { t: step as f64 * stepper.dt(), step });
            }
        }
        if step % config.observer_stride as u64 == 0 || step == steps {
            // t is recomputed from the step count to avoid accumulated rounding
            state = materialize(&uh, step as f64 * stepper.dt(), step)?;
            log.samples.push(log_sample(&state, config.log_sobolev_index));
            for obs in observers.iter_mut() {
                obs.observe(&state)?;
            }
        }
    }
    Ok((state, log))
}
