//! Fourier multipliers sampled on a grid.
//!
//! Symbols are evaluated once per wavenumber. Removable singularities are
//! resolved by substituting the analytic limit at the exact grid point only.
//! A bare `K₀⁻¹` is deliberately absent: it only appears in the bounded
//! combinations [`Multiplier::k0_inv_dx`], [`Multiplier::k0_inv_on_packets`]
//! and [`Multiplier::k0_inv_theta_high`].

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use num_complex::Complex64;

use crate::nls::CarrierParams;
use crate::spectral::{check_same, Field, Grid1D, Spectrum};
use crate::{Error, Result};

const HERMITIAN_TOL: f64 = 1e-14;
const NONRESONANCE_TOL: f64 = 1e-6;

/// A named symbol `m(k)` acting as `f̂(k) ↦ m(k) f̂(k)`.
#[derive(Debug, Clone)]
pub struct Multiplier {
    name: String,
    grid: Arc<Grid1D>,
    symbol: Vec<Complex64>,
    removable_singularities: Vec<f64>,
    preserves_real: bool,
}

impl Multiplier {
    /// Samples `symbol` at every grid wavenumber.
    ///
    /// If the samples satisfy `m(−k) = conj m(k)` the multiplier is marked
    /// real-preserving and the self-conjugate Nyquist entry keeps only its
    /// real part.
    pub fn from_symbol(
        grid: &Arc<Grid1D>,
        name: impl Into<String>,
        symbol: impl Fn(f64) -> Complex64,
    ) -> Result<Self> {
        let name = name.into();
        let mut values = Vec::with_capacity(grid.num_points());
        for &k in grid.wavenumbers() {
            let v = symbol(k);
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::NonFiniteSymbol { name, k });
            }
            values.push(v);
        }
        Ok(Self::from_values(grid, name, values, Vec::new()))
    }

    fn from_values(
        grid: &Arc<Grid1D>,
        name: String,
        mut symbol: Vec<Complex64>,
        removable_singularities: Vec<f64>,
    ) -> Self {
        let nyq = grid.nyquist_index();
        let scale = symbol.iter().fold(0.0f64, |m, c| m.max(c.norm())).max(f64::MIN_POSITIVE);
        let preserves_real = (0..symbol.len()).filter(|&i| i != nyq).all(|i| {
            (symbol[grid.mirror_index(i)] - symbol[i].conj()).norm() <= HERMITIAN_TOL * scale
        });
        if preserves_real {
            symbol[nyq].im = 0.0;
        }
        Self { name, grid: grid.clone(), symbol, removable_singularities, preserves_real }
    }

    fn with_removable(mut self, k: f64) -> Self {
        self.removable_singularities.push(k);
        self
    }

    pub fn identity(grid: &Arc<Grid1D>) -> Self {
        Self::real_symbol(grid, "identity", |_| 1.0)
    }

    fn real_symbol(grid: &Arc<Grid1D>, name: &str, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.wavenumbers().iter().map(|&k| Complex64::new(f(k), 0.0)).collect();
        Self::from_values(grid, name.into(), values, Vec::new())
    }

    fn imag_symbol(grid: &Arc<Grid1D>, name: &str, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.wavenumbers().iter().map(|&k| Complex64::new(0.0, f(k))).collect();
        Self::from_values(grid, name.into(), values, Vec::new())
    }

    /// `K₀`, symbol `−i tanh k`.
    pub fn k0(grid: &Arc<Grid1D>) -> Self {
        Self::imag_symbol(grid, "K0", |k| -k.tanh())
    }

    /// Hilbert-type linear part, symbol `−i sign k`.
    pub fn hilbert(grid: &Arc<Grid1D>) -> Self {
        Self::imag_symbol(grid, "hilbert", |k| -sign(k))
    }

    /// `K₀⁻¹∂ₓ`, symbol `ik/(−i tanh k) = −k/tanh k`, continued by `−1` at `k = 0`.
    pub fn k0_inv_dx(grid: &Arc<Grid1D>) -> Self {
        Self::real_symbol(grid, "K0^-1 dx", |k| -k_over_tanh(k)).with_removable(0.0)
    }

    /// `K₀⁻¹` restricted to the carrier bands `|k ∓ k₀| ≤ δ`, zero elsewhere.
    ///
    /// Callers must make sure the input has no mass outside the bands; see
    /// [`Multiplier::band_leakage`].
    pub fn k0_inv_on_packets(grid: &Arc<Grid1D>, k0: f64, delta: f64) -> Self {
        Self::imag_symbol(grid, "K0^-1 on packets", |k| {
            if (k.abs() - k0).abs() <= delta {
                1.0 / k.tanh()
            } else {
                0.0
            }
        })
    }

    /// `∂ₓ^order`, with the Nyquist entry zeroed for odd orders.
    pub fn derivative(grid: &Arc<Grid1D>, order: u32) -> Self {
        let i_pow = Complex64::i().powu(order);
        let values = grid.wavenumbers().iter().map(|&k| i_pow * k.powi(order as i32)).collect();
        Self::from_values(grid, format!("d^{order}"), values, Vec::new())
    }

    /// The weight `ϑ̂`: `ε + (1−ε)|k|/δ` for `|k| ≤ δ`, `1` beyond.
    pub fn theta(grid: &Arc<Grid1D>, eps: f64, delta: f64) -> Result<Self> {
        check_theta_params(eps, delta)?;
        Ok(Self::real_symbol(grid, "theta", |k| theta_symbol(k, eps, delta)))
    }

    pub fn theta_inv(grid: &Arc<Grid1D>, eps: f64, delta: f64) -> Result<Self> {
        check_theta_params(eps, delta)?;
        Ok(Self::real_symbol(grid, "theta^-1", |k| 1.0 / theta_symbol(k, eps, delta)))
    }

    /// `(P_{0,α}, P_{α,∞})`: sharp cutoffs `|k| ≤ α` and `|k| > α`.
    pub fn projections(grid: &Arc<Grid1D>, alpha: f64) -> Result<(Self, Self)> {
        if !(alpha > 0.0) {
            return Err(Error::ParameterOutOfRange { name: "alpha", value: alpha });
        }
        let low = Self::real_symbol(grid, "P_low", |k| if k.abs() <= alpha { 1.0 } else { 0.0 });
        let high = Self::real_symbol(grid, "P_high", |k| if k.abs() <= alpha { 0.0 } else { 1.0 });
        Ok((low, high))
    }

    /// `K₀⁻¹ϑP_{ε,∞}` as one bounded symbol `iϑ̂(k)/tanh k` on `|k| > ε`.
    pub fn k0_inv_theta_high(grid: &Arc<Grid1D>, eps: f64, delta: f64) -> Result<Self> {
        check_theta_params(eps, delta)?;
        Ok(Self::imag_symbol(grid, "K0^-1 theta P_high", |k| {
            if k.abs() <= eps {
                0.0
            } else {
                theta_symbol(k, eps, delta) / k.tanh()
            }
        }))
    }

    /// The normal-form kernel `t̂ⱼ`, `j = ±1`.
    ///
    /// `t̂ⱼ(k) = −k(k−jk₀) ϑ̂(k−2jk₀) χ_{|k|≤δ} / [ϑ̂(k) tanh k tanh(jk₀) tanh(k−jk₀)
    /// (tanh k − 2 tanh(jk₀) − tanh(k−2jk₀))]` with `k/tanh k → 1` at zero.
    /// Individual kernels are not conjugate-symmetric; `t̂₋₁(−k) = t̂₁(k)` so
    /// only the pair acting on conjugate packets returns a real field.
    pub fn kernel_t(grid: &Arc<Grid1D>, j: i32, params: &CarrierParams, eps: f64) -> Result<Self> {
        if j != 1 && j != -1 {
            return Err(Error::ParameterOutOfRange { name: "j", value: j as f64 });
        }
        let delta = params.delta();
        check_theta_params(eps, delta)?;
        nonresonance_margin(params)?;
        let k0 = params.k0();
        let jk0 = j as f64 * k0;
        let m = Self::real_symbol(grid, if j == 1 { "t_1" } else { "t_-1" }, |k| {
            if k.abs() > delta {
                return 0.0;
            }
            let denom = theta_symbol(k, eps, delta)
                * jk0.tanh()
                * (k - jk0).tanh()
                * (k.tanh() - 2.0 * jk0.tanh() - (k - 2.0 * jk0).tanh());
            -k_over_tanh(k) * (k - jk0) * theta_symbol(k - 2.0 * jk0, eps, delta) / denom
        });
        Ok(m.with_removable(0.0))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn grid(&self) -> &Arc<Grid1D> {
        &self.grid
    }

    pub fn symbol(&self) -> &[Complex64] {
        &self.symbol
    }

    pub fn removable_singularities(&self) -> &[f64] {
        &self.removable_singularities
    }

    pub fn preserves_real(&self) -> bool {
        self.preserves_real
    }

    pub fn sup_abs(&self) -> f64 {
        self.symbol.iter().fold(0.0f64, |m, c| m.max(c.norm()))
    }

    pub fn apply_spectrum(&self, s: &Spectrum) -> Result<Spectrum> {
        check_same(&self.grid, s.grid())?;
        let coeffs = s.coeffs().iter().zip(&self.symbol).map(|(c, m)| c * m).collect();
        Ok(Spectrum::from_parts(s.grid().clone(), coeffs, s.is_real() && self.preserves_real))
    }

    pub fn apply(&self, f: &Field) -> Result<Field> {
        check_same(&self.grid, f.grid())?;
        Ok(self.apply_spectrum(&f.forward())?.inverse())
    }

    /// Symbol product, i.e. the composition `self ∘ other`.
    pub fn compose(&self, other: &Multiplier) -> Result<Self> {
        check_same(&self.grid, &other.grid)?;
        let values = self.symbol.iter().zip(&other.symbol).map(|(a, b)| a * b).collect();
        let mut removable = self.removable_singularities.clone();
        removable.extend_from_slice(&other.removable_singularities);
        Ok(Self::from_values(&self.grid, format!("{}*{}", self.name, other.name), values, removable))
    }

    /// Relative spectral mass of `f` outside the carrier bands `|k ∓ k₀| ≤ δ`.
    pub fn band_leakage(f: &Spectrum, k0: f64, delta: f64) -> f64 {
        let total = f.energy_where(|_| true);
        if total == 0.0 {
            return 0.0;
        }
        f.energy_where(|k| (k.abs() - k0).abs() > delta) / total
    }
}

fn sign(k: f64) -> f64 {
    if k > 0.0 {
        1.0
    } else if k < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn k_over_tanh(k: f64) -> f64 {
    if k == 0.0 {
        1.0
    } else {
        k / k.tanh()
    }
}

pub fn theta_symbol(k: f64, eps: f64, delta: f64) -> f64 {
    if k.abs() > delta {
        1.0
    } else {
        eps + (1.0 - eps) * k.abs() / delta
    }
}

fn check_theta_params(eps: f64, delta: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::ParameterOutOfRange { name: "eps", value: eps });
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::ParameterOutOfRange { name: "delta", value: delta });
    }
    Ok(())
}

/// Both sides of `tanh k − tanh m − tanh(k−m) = −tanh k tanh m tanh(k−m)`.
pub fn verify_tanh_identity(k: f64, m: f64) -> (f64, f64) {
    let (tk, tm, tkm) = (k.tanh(), m.tanh(), (k - m).tanh());
    (tk - tm - tkm, -tk * tm * tkm)
}

/// `min_{j=±1, |k|≤δ} |tanh k − 2 tanh(jk₀) − tanh(k − 2jk₀)|` on a scan
/// with step `δ/10⁴`.
pub fn nonresonance_margin(params: &CarrierParams) -> Result<f64> {
    nonresonance_margin_scan(params.k0(), params.delta(), 20_000)
}

/// The same scan with `steps` intervals across `[−δ, δ]`.
pub fn nonresonance_margin_scan(k0: f64, delta: f64, steps: usize) -> Result<f64> {
    let steps = steps.max(1);
    let mut margin = f64::INFINITY;
    for j in [1.0, -1.0] {
        let jk0 = j * k0;
        for i in 0..=steps {
            let k = -delta + 2.0 * delta * i as f64 / steps as f64;
            let v = (k.tanh() - 2.0 * jk0.tanh() - (k - 2.0 * jk0).tanh()).abs();
            margin = margin.min(v);
        }
    }
    if margin.is_nan() || margin <= NONRESONANCE_TOL {
        return Err(Error::Resonant { margin, tolerance: NONRESONANCE_TOL });
    }
    Ok(margin)
}
