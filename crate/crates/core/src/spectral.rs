//! Periodic grid, fields, spectra and the spectral calculus on them.
//!
//! Conventions: a [`Spectrum`] stores Fourier-series coefficients
//! `c_m = N⁻¹ Σₙ u(xₙ) e^{-i kₘ xₙ}` so that `u(x) = Σₘ cₘ e^{i kₘ x}`.
//! Norms carry the continuum `dx` weight, so `‖u‖²_{L²} = L Σₘ |cₘ|²`.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::{Add, Mul, Sub};
use num_complex::Complex64;

use crate::fft::FftPlan;
use crate::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Uniform periodic grid on `[0, L)` with `N = 2^p` points.
#[derive(Debug)]
pub struct Grid1D {
    num_points: usize,
    length: f64,
    spacing: f64,
    wavenumbers: Vec<f64>,
    dealias_mode: usize,
    plan: FftPlan,
}

impl Grid1D {
    pub fn new(num_points: usize, length: f64) -> Result<Arc<Self>> {
        if num_points < 4 || !num_points.is_power_of_two() {
            return Err(Error::InvalidGridSize(num_points));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGridLength(length));
        }
        let dk = 2.0 * PI / length;
        let wavenumbers = (0..num_points)
            .map(|i| signed_mode(i, num_points) as f64 * dk)
            .collect();
        Ok(Arc::new(Self {
            num_points,
            length,
            spacing: length / num_points as f64,
            wavenumbers,
            dealias_mode: num_points / 3,
            plan: FftPlan::new(num_points)?,
        }))
    }

    pub fn num_points(&self) -> usize {
        self.num_points
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Wavenumbers in FFT order: `0, dk, …, (N/2−1)dk, −(N/2)dk, …, −dk`.
    ///
    /// The Nyquist entry is a single self-conjugate mode; multipliers that
    /// preserve realness keep only the real part of their symbol there.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    pub fn wavenumber_step(&self) -> f64 {
        2.0 * PI / self.length
    }

    pub fn nyquist_index(&self) -> usize {
        self.num_points / 2
    }

    /// Largest |mode| kept by the 2/3 rule.
    pub fn dealias_mode(&self) -> usize {
        self.dealias_mode
    }

    pub fn mode(&self, index: usize) -> i64 {
        signed_mode(index, self.num_points)
    }

    pub fn index_of_mode(&self, mode: i64) -> Result<usize> {
        let n = self.num_points as i64;
        if mode < -n / 2 || mode >= n / 2 {
            return Err(Error::ModeOutOfRange { mode, num_points: self.num_points });
        }
        Ok(mode.rem_euclid(n) as usize)
    }

    /// Index of the mirror mode `−m` (the Nyquist index maps to itself).
    pub fn mirror_index(&self, index: usize) -> usize {
        (self.num_points - index) % self.num_points
    }

    pub fn is_retained(&self, index: usize) -> bool {
        self.mode(index).unsigned_abs() as usize <= self.dealias_mode
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.num_points).map(move |i| i as f64 * self.spacing)
    }

    pub fn plan(&self) -> &FftPlan {
        &self.plan
    }

    pub fn same_as(&self, other: &Grid1D) -> bool {
        core::ptr::eq(self, other)
            || (self.num_points == other.num_points && self.length == other.length)
    }
}

fn signed_mode(index: usize, n: usize) -> i64 {
    if index < n / 2 {
        index as i64
    } else {
        index as i64 - n as i64
    }
}

pub(crate) fn check_same(a: &Grid1D, b: &Grid1D) -> Result<()> {
    if a.same_as(b) {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

/// Samples of a real or complex function on a [`Grid1D`].
#[derive(Debug, Clone)]
pub struct Field {
    grid: Arc<Grid1D>,
    samples: Vec<Complex64>,
    real: bool,
}

impl Field {
    pub fn zeros(grid: &Arc<Grid1D>) -> Self {
        Self { grid: grid.clone(), samples: vec![ZERO; grid.num_points()], real: true }
    }

    pub fn from_real(grid: &Arc<Grid1D>, values: Vec<f64>) -> Result<Self> {
        check_len(grid, values.len())?;
        Ok(Self {
            grid: grid.clone(),
            samples: values.into_iter().map(|v| Complex64::new(v, 0.0)).collect(),
            real: true,
        })
    }

    pub fn from_complex(grid: &Arc<Grid1D>, samples: Vec<Complex64>) -> Result<Self> {
        check_len(grid, samples.len())?;
        Ok(Self { grid: grid.clone(), samples, real: false })
    }

    pub fn from_fn(grid: &Arc<Grid1D>, f: impl Fn(f64) -> f64) -> Self {
        let samples = grid.points().map(|x| Complex64::new(f(x), 0.0)).collect();
        Self { grid: grid.clone(), samples, real: true }
    }

    pub fn from_fn_complex(grid: &Arc<Grid1D>, f: impl Fn(f64) -> Complex64) -> Self {
        let samples = grid.points().map(f).collect();
        Self { grid: grid.clone(), samples, real: false }
    }

    pub fn grid(&self) -> &Arc<Grid1D> {
        &self.grid
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn is_real(&self) -> bool {
        self.real
    }

    pub fn real_values(&self) -> Vec<f64> {
        self.samples.iter().map(|z| z.re).collect()
    }

    /// Largest |Im u| relative to the largest |u| (0 for the zero field).
    pub fn imag_residue(&self) -> f64 {
        let max = self.max_abs();
        if max == 0.0 {
            return 0.0;
        }
        self.samples.iter().fold(0.0f64, |m, z| m.max(z.im.abs())) / max
    }

    /// Drops the imaginary parts and marks the field real.
    pub fn into_real(mut self) -> Self {
        for z in &mut self.samples {
            z.im = 0.0;
        }
        self.real = true;
        self
    }

    pub fn conj(&self) -> Self {
        Self {
            grid: self.grid.clone(),
            samples: self.samples.iter().map(|z| z.conj()).collect(),
            real: self.real,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0f64, |m, z| m.max(z.norm()))
    }

    pub fn forward(&self) -> Spectrum {
        forward_transform(self)
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            samples: self.samples.iter().map(|z| z * alpha).collect(),
            real: self.real,
        }
    }

    pub fn scaled_complex(&self, alpha: Complex64) -> Self {
        Self {
            grid: self.grid.clone(),
            samples: self.samples.iter().map(|z| z * alpha).collect(),
            real: self.real && alpha.im == 0.0,
        }
    }

    /// `self + alpha · other`.
    pub fn axpy(&self, alpha: f64, other: &Field) -> Result<Self> {
        check_same(&self.grid, &other.grid)?;
        Ok(Self {
            grid: self.grid.clone(),
            samples: self.samples.iter().zip(&other.samples).map(|(a, b)| a + b * alpha).collect(),
            real: self.real && other.real,
        })
    }

    /// Pointwise product without dealiasing.
    pub fn pointwise(&self, other: &Field) -> Result<Self> {
        check_same(&self.grid, &other.grid)?;
        Ok(Self {
            grid: self.grid.clone(),
            samples: self.samples.iter().zip(&other.samples).map(|(a, b)| a * b).collect(),
            real: self.real && other.real,
        })
    }

    /// `∫ u dx` by the trapezoidal rule (spectrally exact for periodic data).
    pub fn integral(&self) -> Complex64 {
        self.samples.iter().sum::<Complex64>() * self.grid.spacing
    }

    /// `∫ f g dx` without conjugation.
    pub fn integral_of_product(&self, other: &Field) -> Result<Complex64> {
        check_same(&self.grid, &other.grid)?;
        Ok(self.samples.iter().zip(&other.samples).map(|(a, b)| a * b).sum::<Complex64>()
            * self.grid.spacing)
    }

    pub fn l2_norm(&self) -> f64 {
        (self.samples.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.spacing).sqrt()
    }

    pub fn sobolev_norm(&self, s: f64) -> f64 {
        sobolev_norm(self, s)
    }

    pub fn derivative(&self, order: u32) -> Self {
        derivative(self, order)
    }

    pub fn dealiased_product(&self, other: &Field) -> Result<Self> {
        dealiased_product(self, other)
    }

    /// Zeroes every mode above 2/3 of the Nyquist mode.
    pub fn dealiased(&self) -> Self {
        let mut s = self.forward();
        s.truncate_dealias();
        s.inverse()
    }
}

fn check_len(grid: &Grid1D, got: usize) -> Result<()> {
    if got == grid.num_points() {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected: grid.num_points(), got })
    }
}

/// Panics on a grid mismatch; use [`Field::axpy`] for a fallible version.
impl Add for &Field {
    type Output = Field;
    fn add(self, rhs: &Field) -> Field {
        self.axpy(1.0, rhs).expect("grid mismatch in Field addition")
    }
}

/// Panics on a grid mismatch; use [`Field::axpy`] for a fallible version.
impl Sub for &Field {
    type Output = Field;
    fn sub(self, rhs: &Field) -> Field {
        self.axpy(-1.0, rhs).expect("grid mismatch in Field subtraction")
    }
}

impl Mul<&Field> for f64 {
    type Output = Field;
    fn mul(self, rhs: &Field) -> Field {
        rhs.scaled(self)
    }
}

/// Fourier coefficients of a [`Field`], in FFT order.
#[derive(Debug, Clone)]
pub struct Spectrum {
    grid: Arc<Grid1D>,
    coeffs: Vec<Complex64>,
    real: bool,
}

impl Spectrum {
    /// Wraps coefficients; the realness flag is set when they are
    /// Hermitian-symmetric to within `1e-12` of the largest coefficient.
    pub fn new(grid: Arc<Grid1D>, coeffs: Vec<Complex64>) -> Result<Self> {
        check_len(&grid, coeffs.len())?;
        let mut s = Self { grid, coeffs, real: false };
        s.real = s.hermitian_defect() <= 1e-12;
        Ok(s)
    }

    pub fn zeros(grid: &Arc<Grid1D>) -> Self {
        Self { grid: grid.clone(), coeffs: vec![ZERO; grid.num_points()], real: true }
    }

    pub(crate) fn from_parts(grid: Arc<Grid1D>, coeffs: Vec<Complex64>, real: bool) -> Self {
        Self { grid, coeffs, real }
    }

    pub fn grid(&self) -> &Arc<Grid1D> {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn is_real(&self) -> bool {
        self.real
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    /// `max_m |c(−m) − conj c(m)| / max_m |c(m)|`.
    pub fn hermitian_defect(&self) -> f64 {
        let scale = self.coeffs.iter().fold(0.0f64, |m, c| m.max(c.norm()));
        if scale == 0.0 {
            return 0.0;
        }
        let defect = (0..self.coeffs.len())
            .map(|i| (self.coeffs[self.grid.mirror_index(i)] - self.coeffs[i].conj()).norm())
            .fold(0.0f64, f64::max);
        defect / scale
    }

    pub fn truncate_dealias(&mut self) {
        let grid = self.grid.clone();
        for (i, c) in self.coeffs.iter_mut().enumerate() {
            if !grid.is_retained(i) {
                *c = ZERO;
            }
        }
    }

    /// `Σ |c_m|²` over modes that satisfy `keep(k)`.
    pub fn energy_where(&self, keep: impl Fn(f64) -> bool) -> f64 {
        self.coeffs
            .iter()
            .zip(self.grid.wavenumbers())
            .filter(|(_, &k)| keep(k))
            .map(|(c, _)| c.norm_sqr())
            .sum()
    }

    pub fn inverse(&self) -> Field {
        inverse_transform(self)
    }
}

pub fn forward_transform(f: &Field) -> Spectrum {
    let n = f.grid.num_points();
    let mut buf = f.samples.clone();
    f.grid.plan().forward(&mut buf);
    let scale = 1.0 / n as f64;
    for c in &mut buf {
        *c *= scale;
    }
    if f.real {
        // exact Hermitian symmetry; the Nyquist mode of real data is real.
        buf[n / 2].im = 0.0;
        buf[0].im = 0.0;
        for i in 1..n / 2 {
            let avg = (buf[i] + buf[n - i].conj()) * 0.5;
            buf[i] = avg;
            buf[n - i] = avg.conj();
        }
    }
    Spectrum { grid: f.grid.clone(), coeffs: buf, real: f.real }
}

pub fn inverse_transform(s: &Spectrum) -> Field {
    let mut buf = s.coeffs.clone();
    s.grid.plan().inverse(&mut buf);
    if s.real {
        for z in &mut buf {
            z.im = 0.0;
        }
    }
    Field { grid: s.grid.clone(), samples: buf, real: s.real }
}

/// Product of the 2/3-truncated inputs, itself truncated to the 2/3 band.
///
/// Grid modes satisfy `|m| ≤ ⌊N/3⌋`, so `3⌊N/3⌋ < N` and no alias lands in
/// the retained band: the result is the exact product of the band-limited
/// inputs with every mode above 2/3 of Nyquist removed.
pub fn dealiased_product(f: &Field, g: &Field) -> Result<Field> {
    check_same(&f.grid, &g.grid)?;
    let fa = f.dealiased();
    let ga = g.dealiased();
    let prod = fa.pointwise(&ga)?;
    Ok(prod.dealiased())
}

pub fn derivative(f: &Field, order: u32) -> Field {
    if order == 0 {
        return f.clone();
    }
    let mut s = f.forward();
    let grid = s.grid.clone();
    let nyq = grid.nyquist_index();
    let i_pow = Complex64::i().powu(order);
    for (idx, (c, &k)) in s.coeffs.iter_mut().zip(grid.wavenumbers()).enumerate() {
        if idx == nyq && order % 2 == 1 {
            *c = ZERO;
        } else {
            *c *= i_pow * k.powi(order as i32);
        }
    }
    s.inverse()
}

/// `(L Σ |c_m|² (1 + k_m²)^s)^{1/2}`; equals the `dx`-weighted L² norm at `s = 0`.
pub fn sobolev_norm(f: &Field, s: f64) -> f64 {
    let spec = f.forward();
    sobolev_norm_of_spectrum(&spec, s)
}

pub fn sobolev_norm_of_spectrum(spec: &Spectrum, s: f64) -> f64 {
    let sum: f64 = spec
        .coeffs
        .iter()
        .zip(spec.grid.wavenumbers())
        .map(|(c, &k)| c.norm_sqr() * (1.0 + k * k).powf(s))
        .sum();
    (sum * spec.grid.length).sqrt()
}
