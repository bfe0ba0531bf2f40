//! Carrier parameters, the cubic Schrödinger envelope and the mode-packet ansatz.
//!
//! The ansatz is
//! `εψ = ε(ψ₁ + ψ₋₁) + ε²(ψ₀ + ψ₂ + ψ₋₂)` with
//! `ψⱼ = χ_{|k−jk₀|≤r} Ãⱼ(ε(x − c_g t), ε²t) e^{ij(k₀x − ω₀t)}`.
//!
//! Correctors are taken from the coefficient equations of the residual
//! `−∂ₜu + K₀u − u∂ₓu`:
//!
//! * `E²`: `i(tanh 2k₀ − 2ω₀)Ã₂ = −ik₀Ã₁²`
//! * `E⁰`: `(1 − c_g)∂_X Ã₀ = −∂_X|Ã₁|²`
//!
//! which give `∂_T Ã₁ = iν₁∂²_X Ã₁ − ik₀(Ã₀Ã₁ + conj(Ã₁)Ã₂) = iν₁∂²_X Ã₁ + iν₂|Ã₁|²Ã₁`.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::multiplier::{nonresonance_margin, Multiplier};
use crate::spectral::{Field, Grid1D, Spectrum};
use crate::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Packet cutoff radius, as a fraction of `k₀`, used when the envelope
/// spectrum must be kept essentially untruncated.
pub const WIDE_PACKET_RADIUS: f64 = 0.49;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarrierParams {
    k0: f64,
    omega0: f64,
    cg: f64,
    nu1: f64,
    nu2: f64,
    delta: f64,
}

impl CarrierParams {
    /// Requires `0 < δ < k₀/20` and a positive non-resonance margin.
    pub fn new(k0: f64, delta: f64) -> Result<Self> {
        let (nu1, nu2) = nls_coefficients(k0)?;
        if !(delta > 0.0 && delta < k0 / 20.0) {
            return Err(Error::ParameterOutOfRange { name: "delta", value: delta });
        }
        let sech2 = sech2(k0);
        let params = Self { k0, omega0: k0.tanh(), cg: sech2, nu1, nu2, delta };
        nonresonance_margin(&params)?;
        Ok(params)
    }

    /// `δ = 0.9·k₀/20`.
    pub fn with_default_delta(k0: f64) -> Result<Self> {
        Self::new(k0, 0.9 * k0 / 20.0)
    }

    pub fn k0(&self) -> f64 {
        self.k0
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    pub fn cg(&self) -> f64 {
        self.cg
    }

    pub fn nu1(&self) -> f64 {
        self.nu1
    }

    pub fn nu2(&self) -> f64 {
        self.nu2
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// `Ã₂ = c₂Ã₁²`.
    pub fn a2_coefficient(&self) -> f64 {
        -self.k0 / ((2.0 * self.k0).tanh() - 2.0 * self.omega0)
    }

    /// `Ã₀ = c₀|Ã₁|²`.
    pub fn a0_coefficient(&self) -> f64 {
        -1.0 / (1.0 - self.cg)
    }
}

fn sech2(k: f64) -> f64 {
    let c = k.cosh();
    1.0 / (c * c)
}

/// `ν₁ = ½ tanh″(k₀)` and `ν₂ = k₀(k₀/(tanh 2k₀ − 2 tanh k₀) + 1/tanh² k₀)`.
pub fn nls_coefficients(k0: f64) -> Result<(f64, f64)> {
    if !(k0 > 0.0 && k0.is_finite()) {
        return Err(Error::ParameterOutOfRange { name: "k0", value: k0 });
    }
    let t = k0.tanh();
    let nu1 = -t * sech2(k0);
    let nu2 = k0 * (k0 / ((2.0 * k0).tanh() - 2.0 * t) + 1.0 / (t * t));
    Ok((nu1, nu2))
}

pub fn corrector_a2(a1: &[Complex64], params: &CarrierParams) -> Vec<Complex64> {
    let c = params.a2_coefficient();
    a1.iter().map(|a| a * a * c).collect()
}

pub fn corrector_a0(a1: &[Complex64], params: &CarrierParams) -> Vec<f64> {
    let c = params.a0_coefficient();
    a1.iter().map(|a| c * a.norm_sqr()).collect()
}

/// Envelope `A(X, T)` on the slow periodic grid.
#[derive(Debug, Clone)]
pub struct Envelope {
    a: Field,
    t: f64,
}

impl Envelope {
    pub fn new(a: Field, t: f64) -> Self {
        Self { a, t }
    }

    /// `A(X, 0) = e^{−(X − L/2)²}`.
    pub fn gaussian(grid: &Arc<Grid1D>) -> Self {
        let c = grid.length() / 2.0;
        let a = Field::from_fn_complex(grid, |x| Complex64::new((-(x - c) * (x - c)).exp(), 0.0));
        Self { a, t: 0.0 }
    }

    pub fn grid(&self) -> &Arc<Grid1D> {
        self.a.grid()
    }

    pub fn field(&self) -> &Field {
        &self.a
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    /// Split-step evolution to slow time `t_target` with steps no larger than `max_dt`.
    pub fn evolve_to(&self, t_target: f64, max_dt: f64, params: &CarrierParams) -> Self {
        let span = t_target - self.t;
        if span == 0.0 {
            return self.clone();
        }
        let steps = (span.abs() / max_dt).ceil().max(1.0) as usize;
        let dt = span / steps as f64;
        let mut env = self.clone();
        for _ in 0..steps {
            env = nls_step(&env, dt, params);
        }
        env.t = t_target;
        env
    }
}

fn nonlinear_phase(a: &Field, dt: f64, nu2: f64) -> Field {
    let samples = a
        .samples()
        .iter()
        .map(|z| z * Complex64::new(0.0, nu2 * z.norm_sqr() * dt).exp())
        .collect();
    Field::from_complex(a.grid(), samples).expect("same grid")
}

/// One Strang step of `∂_T A = iν₁∂²_X A + iν₂|A|²A`.
pub fn nls_step(env: &Envelope, dt: f64, params: &CarrierParams) -> Envelope {
    let half = nonlinear_phase(&env.a, dt / 2.0, params.nu2);
    let mut s = half.forward();
    let grid = s.grid().clone();
    for (c, &k) in s.coeffs_mut().iter_mut().zip(grid.wavenumbers()) {
        *c *= Complex64::new(0.0, -params.nu1 * k * k * dt).exp();
    }
    let lin = s.inverse();
    Envelope { a: nonlinear_phase(&lin, dt / 2.0, params.nu2), t: env.t + dt }
}

/// `∂_T A` from the envelope equation, evaluated spectrally.
pub fn nls_rhs(env: &Envelope, params: &CarrierParams) -> Field {
    let a = &env.a;
    let axx = a.derivative(2);
    let samples = a
        .samples()
        .iter()
        .zip(axx.samples())
        .map(|(z, zxx)| Complex64::i() * (params.nu1 * zxx + params.nu2 * z.norm_sqr() * z))
        .collect();
    Field::from_complex(a.grid(), samples).expect("same grid")
}

/// Fast and slow periodic grids related by `X = εx`.
///
/// The fast length is a multiple of the carrier wavelength, `L = 2πM/k₀`,
/// so `jk₀` is grid bin `jM` and slow mode `m` of packet `j` lands on fast
/// bin `jM + m`.
#[derive(Debug, Clone)]
pub struct AnsatzGrids {
    params: CarrierParams,
    eps: f64,
    fast: Arc<Grid1D>,
    slow: Arc<Grid1D>,
    carrier_bin: usize,
}

/// Grid sizing rule for [`AnsatzGrids`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Target slow-domain length; rounded so the fast domain holds whole carrier periods.
    pub slow_length: f64,
    pub slow_points: usize,
    /// Minimum Nyquist wavenumber of the fast grid.
    pub fast_nyquist: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { slow_length: 10.0 * PI, slow_points: 256, fast_nyquist: 16.0 }
    }
}

impl AnsatzGrids {
    pub fn new(params: &CarrierParams, eps: f64, spec: &GridSpec) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::ParameterOutOfRange { name: "eps", value: eps });
        }
        let k0 = params.k0();
        let m = (spec.slow_length * k0 / (2.0 * PI * eps)).ceil().max(1.0) as usize;
        let length = 2.0 * PI * m as f64 / k0;
        let n = ((length * spec.fast_nyquist / PI).ceil() as usize).next_power_of_two().max(4);
        let fast = Grid1D::new(n, length)?;
        let slow = Grid1D::new(spec.slow_points, eps * length)?;
        Ok(Self { params: *params, eps, fast, slow, carrier_bin: m })
    }

    pub fn params(&self) -> &CarrierParams {
        &self.params
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn fast(&self) -> &Arc<Grid1D> {
        &self.fast
    }

    pub fn slow(&self) -> &Arc<Grid1D> {
        &self.slow
    }

    pub fn carrier_bin(&self) -> usize {
        self.carrier_bin
    }

    /// Builds packet `j` (with `j ≥ 0`) on the fast grid.
    ///
    /// `weight(s, K, a)` returns the fast coefficient for slow index `s`,
    /// slow wavenumber `K` and slow coefficient `a`. Returns the spectrum and the slow-mode
    /// energy dropped by the cutoff.
    fn place(
        &self,
        j: i64,
        slow: &Spectrum,
        radius: f64,
        weight: impl Fn(usize, f64, Complex64) -> Complex64,
    ) -> (Vec<Complex64>, f64) {
        let mut out = vec![ZERO; self.fast.num_points()];
        let mut dropped = 0.0;
        let nyq = self.slow.nyquist_index();
        for (s, (&a, &big_k)) in slow.coeffs().iter().zip(self.slow.wavenumbers()).enumerate() {
            let fast_mode = j * self.carrier_bin as i64 + self.slow.mode(s);
            let idx = self.fast.index_of_mode(fast_mode).ok().filter(|_| s != nyq);
            match idx {
                Some(idx) if (self.eps * big_k).abs() <= radius => out[idx] = weight(s, big_k, a),
                _ => dropped += a.norm_sqr(),
            }
        }
        (out, dropped)
    }

    fn mirror(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        (0..coeffs.len()).map(|i| coeffs[self.fast.mirror_index(i)].conj()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnsatzOrder {
    /// Carrier packets `j = ±1` only.
    Basic,
    /// Adds the `j ∈ {0, ±2}` correctors at weight `ε²`.
    Corrected2,
}

/// Slow-grid corrector fields `Ã₀`, `Ã₁`, `Ã₂` and their `∂_T`.
struct SlowModes {
    a1: Field,
    a2: Field,
    a0: Field,
}

impl SlowModes {
    fn new(a1: &Field, params: &CarrierParams) -> Self {
        let a2 = Field::from_complex(a1.grid(), corrector_a2(a1.samples(), params)).unwrap();
        let a0 = Field::from_real(a1.grid(), corrector_a0(a1.samples(), params)).unwrap();
        Self { a1: a1.clone(), a2, a0 }
    }

    /// `∂_T Ã₂ = 2c₂Ã₁∂_TÃ₁`, `∂_T Ã₀ = 2c₀ Re(conj Ã₁ ∂_T Ã₁)`.
    fn time_derivative(&self, da1: &Field, params: &CarrierParams) -> Self {
        let (c2, c0) = (params.a2_coefficient(), params.a0_coefficient());
        let grid = self.a1.grid();
        let pairs = || self.a1.samples().iter().zip(da1.samples());
        let da2 = pairs().map(|(a, d)| 2.0 * c2 * a * d).collect();
        let da0 = pairs().map(|(a, d)| 2.0 * c0 * (a.conj() * d).re).collect();
        Self {
            a1: da1.clone(),
            a2: Field::from_complex(grid, da2).unwrap(),
            a0: Field::from_real(grid, da0).unwrap(),
        }
    }
}

/// The assembled ansatz at fast time `t`.
#[derive(Debug, Clone)]
pub struct AnsatzBundle {
    grids: AnsatzGrids,
    envelope: Envelope,
    t: f64,
    order: AnsatzOrder,
    radius: f64,
    packets: Vec<(i32, Spectrum)>,
    psi_c: Field,
    psi_s: Field,
    truncated_fraction: f64,
}

/// Assembles `ψ_c` and `ψ_s` with packet cutoff radius `radius` around each `jk₀`.
///
/// The envelope must already be at slow time `ε²t`.
pub fn assemble_psi(
    grids: &AnsatzGrids,
    env: &Envelope,
    t: f64,
    order: AnsatzOrder,
    radius: f64,
) -> Result<AnsatzBundle> {
    let eps = grids.eps;
    let expected = eps * eps * t;
    if (env.time() - expected).abs() > 1e-12 * expected.abs().max(1.0) {
        return Err(Error::EnvelopeTime { envelope: env.time(), expected });
    }
    if !env.grid().same_as(&grids.slow) {
        return Err(Error::GridMismatch);
    }
    if !(radius > 0.0 && radius < grids.params.k0() / 2.0) {
        return Err(Error::ParameterOutOfRange { name: "radius", value: radius });
    }
    let modes = SlowModes::new(env.field(), &grids.params);
    let (packets, truncated_fraction) =
        build_packets(grids, &modes, t, order, radius, |_, _, _, a, phase| a * phase);
    let (psi_c, psi_s) = split(grids, &packets);
    Ok(AnsatzBundle {
        grids: grids.clone(),
        envelope: env.clone(),
        t,
        order,
        radius,
        packets,
        psi_c,
        psi_s,
        truncated_fraction,
    })
}

type PacketWeight<'a> = dyn Fn(i64, f64, usize, Complex64, Complex64) -> Complex64 + 'a;

fn build_packets(
    grids: &AnsatzGrids,
    modes: &SlowModes,
    t: f64,
    order: AnsatzOrder,
    radius: f64,
    weight: impl Fn(i64, f64, usize, Complex64, Complex64) -> Complex64,
) -> (Vec<(i32, Spectrum)>, f64) {
    let weight: &PacketWeight = &weight;
    let p = &grids.params;
    let eps = grids.eps;
    let mut packets = Vec::new();
    let mut truncated = 0.0;
    let mut js: Vec<(i64, &Field)> = vec![(1, &modes.a1)];
    if order == AnsatzOrder::Corrected2 {
        js.push((2, &modes.a2));
        js.push((0, &modes.a0));
    }
    for (j, slow_field) in js {
        let slow_spec = slow_field.forward();
        let (coeffs, dropped) = grids.place(j, &slow_spec, radius, |s, big_k, a| {
            let phase = Complex64::new(0.0, -(eps * big_k * p.cg() + j as f64 * p.omega0()) * t).exp();
            weight(j, big_k, s, a, phase)
        });
        if j == 1 {
            let total = slow_spec.energy_where(|_| true);
            truncated = if total > 0.0 { dropped / total } else { 0.0 };
        }
        if j == 0 {
            let mirrored = grids.mirror(&coeffs);
            let sym = coeffs.iter().zip(&mirrored).map(|(a, b)| (a + b) * 0.5).collect();
            packets.push((0, Spectrum::from_parts(grids.fast.clone(), sym, true)));
        } else {
            let mirrored = grids.mirror(&coeffs);
            packets.push((j as i32, Spectrum::from_parts(grids.fast.clone(), coeffs, false)));
            packets.push((-j as i32, Spectrum::from_parts(grids.fast.clone(), mirrored, false)));
        }
    }
    (packets, truncated)
}

fn split(grids: &AnsatzGrids, packets: &[(i32, Spectrum)]) -> (Field, Field) {
    let n = grids.fast.num_points();
    let mut c = vec![ZERO; n];
    let mut s = vec![ZERO; n];
    for (j, spec) in packets {
        let target = if j.abs() == 1 { &mut c } else { &mut s };
        for (t, v) in target.iter_mut().zip(spec.coeffs()) {
            *t += v;
        }
    }
    (
        Spectrum::from_parts(grids.fast.clone(), c, true).inverse(),
        Spectrum::from_parts(grids.fast.clone(), s, true).inverse(),
    )
}

impl AnsatzBundle {
    pub fn grids(&self) -> &AnsatzGrids {
        &self.grids
    }

    pub fn params(&self) -> &CarrierParams {
        &self.grids.params
    }

    pub fn eps(&self) -> f64 {
        self.grids.eps
    }

    pub fn envelope(&self) -> &Envelope {
        &self.envelope
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn order(&self) -> AnsatzOrder {
        self.order
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn packet(&self, j: i32) -> Option<&Spectrum> {
        self.packets.iter().find(|(i, _)| *i == j).map(|(_, s)| s)
    }

    pub fn packet_field(&self, j: i32) -> Option<Field> {
        self.packet(j).map(Spectrum::inverse)
    }

    pub fn psi_c(&self) -> &Field {
        &self.psi_c
    }

    pub fn psi_s(&self) -> &Field {
        &self.psi_s
    }

    /// Fraction of the `Ã₁` slow-mode energy removed by the packet cutoff.
    pub fn truncated_fraction(&self) -> f64 {
        self.truncated_fraction
    }

    /// `ψ = ψ_c + εψ_s`.
    pub fn psi(&self) -> Field {
        self.psi_c.axpy(self.eps(), &self.psi_s).expect("same grid")
    }

    /// `εψ = εψ_c + ε²ψ_s`, the approximation of `u`.
    pub fn scaled_psi(&self) -> Field {
        self.psi().scaled(self.eps())
    }
}

/// Exact `∂ₜψ` of the assembled ansatz, packet by packet:
/// `[ε²∂_T Ãⱼ + (−iεK c_g − ijω₀)Ãⱼ]` times the packet phase.
pub fn psi_time_derivative(bundle: &AnsatzBundle) -> Field {
    let grids = &bundle.grids;
    let p = grids.params;
    let eps = grids.eps;
    let modes = SlowModes::new(bundle.envelope.field(), &p);
    let da1 = nls_rhs(&bundle.envelope, &p);
    let dmodes = modes.time_derivative(&da1, &p);
    let dspecs = [dmodes.a1.forward(), dmodes.a2.forward(), dmodes.a0.forward()];
    let (packets, _) = build_packets(grids, &modes, bundle.t, bundle.order, bundle.radius, |j, big_k, s, a, phase| {
        let da = dspecs[match j {
            1 => 0,
            2 => 1,
            _ => 2,
        }]
        .coeffs()[s];
        let rate = Complex64::new(0.0, -(eps * big_k * p.cg() + j as f64 * p.omega0()));
        (da * (eps * eps) + rate * a) * phase
    });
    let (dc, ds) = split(grids, &packets);
    dc.axpy(eps, &ds).expect("same grid")
}

/// `Res(εψ) = −∂ₜ(εψ) + K₀(εψ) − εψ ∂ₓ(εψ)` with a dealiased product.
pub fn residual(bundle: &AnsatzBundle) -> Field {
    let grid = bundle.grids.fast.clone();
    let u = bundle.scaled_psi();
    let dt = psi_time_derivative(bundle).scaled(bundle.eps());
    let k0u = Multiplier::k0(&grid).apply(&u).expect("same grid");
    let adv = u.dealiased_product(&u.derivative(1)).expect("same grid");
    &(&k0u - &dt) - &adv
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{grid, rng};
    use rand::Rng;

    const NU1: f64 = -0.319_850_004_224_612_250_1;
    const NU2: f64 = -0.064_332_879_396_030_583_10;
    const CG: f64 = 0.419_974_341_614_026_069_4;

    fn params() -> CarrierParams {
        CarrierParams::new(1.0, 0.045).unwrap()
    }

    #[test]
    fn carrier_invariants() {
        for k0 in [0.3f64, 1.0, 2.5, 7.0] {
            let p = CarrierParams::with_default_delta(k0).unwrap();
            let t = k0.tanh();
            assert!((p.omega0() - t).abs() < 1e-14);
            assert!((p.cg() - (1.0 - t * t)).abs() < 1e-14);
            assert!((p.nu1() + t * (1.0 - t * t)).abs() < 1e-14);
            let nu2 = k0 * (k0 / ((2.0 * k0).tanh() - 2.0 * t) + 1.0 / (t * t));
            assert!((p.nu2() - nu2).abs() < 1e-14 * nu2.abs().max(1.0));
        }
        assert!(CarrierParams::new(1.0, 0.06).is_err());
        assert!(CarrierParams::new(-1.0, 0.01).is_err());
    }

    #[test]
    fn coefficients_at_unit_carrier() {
        let (nu1, nu2) = nls_coefficients(1.0).unwrap();
        assert!((nu1 - NU1).abs() < 1e-12);
        assert!((nu2 - NU2).abs() < 1e-12);
        assert!((params().cg() - CG).abs() < 1e-15);
        assert!(nls_coefficients(0.0).is_err());
    }

    #[test]
    fn nu1_vanishes_for_short_carriers() {
        let (nu1, _) = nls_coefficients(20.0).unwrap();
        assert!(nu1.abs() < 1e-15);
    }

    #[test]
    fn nu1_is_half_second_derivative() {
        for k0 in [0.5f64, 1.0, 1.7] {
            let h = 1e-4;
            let fd = ((k0 + h).tanh() - 2.0 * k0.tanh() + (k0 - h).tanh()) / (h * h);
            let (nu1, _) = nls_coefficients(k0).unwrap();
            assert!((nu1 - 0.5 * fd).abs() < 1e-8);
        }
    }

    #[test]
    fn correctors_satisfy_their_equations() {
        let p = params();
        assert_eq!(corrector_a2(&[ZERO], &p), vec![ZERO]);
        assert_eq!(corrector_a0(&[ZERO], &p), vec![0.0]);
        let a2 = corrector_a2(&[Complex64::new(1.0, 0.0)], &p)[0];
        assert!((a2.re - 1.788_394_540_362_341_05).abs() < 1e-13);
        let a0 = corrector_a0(&[Complex64::new(0.6, 0.8)], &p)[0];
        assert!((a0 + 1.724_061_660_966_310_466).abs() < 1e-13);
        let mut r = rng(31);
        let d = (2.0f64).tanh() - 2.0 * p.omega0();
        for _ in 0..100 {
            let a1 = Complex64::new(r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0));
            let a2 = corrector_a2(&[a1], &p)[0];
            let lhs = Complex64::i() * d * a2 + Complex64::i() * a1 * a1;
            assert!(lhs.norm() < 1e-14 * (1.0 + a1.norm_sqr()));
        }
    }

    #[test]
    fn a0_satisfies_differentiated_equation() {
        let p = params();
        let g = grid(128, 10.0 * PI);
        let env = Envelope::gaussian(&g);
        let a0 = Field::from_real(&g, corrector_a0(env.field().samples(), &p)).unwrap();
        let mod2 = Field::from_fn(&g, |x| (-2.0 * (x - 5.0 * PI).powi(2)).exp());
        let lhs = a0.derivative(1).scaled(1.0 - p.cg());
        let rhs = mod2.derivative(1).scaled(-1.0);
        assert!((&lhs - &rhs).max_abs() < 1e-12);
    }

    #[test]
    fn linear_step_is_exact_on_a_mode() {
        let p = params();
        let zero_nu2 = CarrierParams { nu2: 0.0, ..p };
        let g = grid(64, 2.0 * PI);
        let a = Field::from_fn_complex(&g, |x| Complex64::new(0.0, 3.0 * x).exp());
        let env = nls_step(&Envelope::new(a.clone(), 0.0), 0.1, &zero_nu2);
        let expected = a.scaled_complex(Complex64::new(0.0, -zero_nu2.nu1() * 9.0 * 0.1).exp());
        assert!((&env.a - &expected).max_abs() < 1e-14);
    }

    #[test]
    fn split_step_conserves_mass() {
        let p = params();
        let g = grid(256, 10.0 * PI);
        let env = Envelope::gaussian(&g);
        let m0 = env.field().l2_norm();
        let mut e = env;
        for _ in 0..1000 {
            e = nls_step(&e, 1e-3, &p);
        }
        assert!((e.field().l2_norm() - m0).abs() < 1e-12 * m0);
    }

    #[test]
    fn plane_wave_solution() {
        let p = params();
        let g = grid(64, 10.0);
        let alpha = Complex64::new(0.8, -0.3);
        let env = Envelope::new(Field::from_fn_complex(&g, |_| alpha), 0.0).evolve_to(1.0, 1e-2, &p);
        let exact = alpha * Complex64::new(0.0, p.nu2() * alpha.norm_sqr()).exp();
        for z in env.field().samples() {
            assert!((z - exact).norm() < 1e-8);
        }
    }

    #[test]
    fn split_step_is_second_order() {
        let p = params();
        let g = grid(256, 10.0 * PI);
        let env = Envelope::new(Envelope::gaussian(&g).field().scaled(3.0), 0.0);
        let reference = env.evolve_to(1.0, 1e-4, &p);
        let err = |dt: f64| (&env.evolve_to(1.0, dt, &p).a - &reference.a).max_abs();
        let ratio = err(0.02) / err(0.01);
        assert!((ratio - 4.0).abs() < 0.3, "{ratio}");
    }

    fn setup(eps: f64) -> (AnsatzGrids, Envelope) {
        let grids = AnsatzGrids::new(&params(), eps, &GridSpec::default()).unwrap();
        let env = Envelope::gaussian(grids.slow());
        (grids, env)
    }

    #[test]
    fn grid_construction() {
        let (grids, env) = setup(0.1);
        assert!((grids.slow().length() - 0.1 * grids.fast().length()).abs() < 1e-12);
        assert!((grids.fast().wavenumbers()[grids.carrier_bin()] - 1.0).abs() < 1e-14);
        assert!(env.grid().same_as(grids.slow()));
    }

    #[test]
    fn zero_envelope_gives_zero_ansatz() {
        let (grids, env) = setup(0.1);
        let zero = Envelope::new(Field::zeros(env.grid()), 0.0);
        let b = assemble_psi(&grids, &zero, 0.0, AnsatzOrder::Corrected2, 0.045).unwrap();
        assert_eq!(b.scaled_psi().max_abs(), 0.0);
        assert_eq!(psi_time_derivative(&b).max_abs(), 0.0);
        assert_eq!(residual(&b).max_abs(), 0.0);
    }

    #[test]
    fn assembled_psi_is_real_and_supported() {
        let (grids, env) = setup(0.1);
        let b = assemble_psi(&grids, &env, 0.0, AnsatzOrder::Corrected2, 0.045).unwrap();
        assert!(b.psi_c().is_real() && b.psi_s().is_real());
        assert!(b.psi().imag_residue() < 1e-12);
        for j in -2..=2 {
            let s = b.packet(j).unwrap();
            for (c, &k) in s.coeffs().iter().zip(grids.fast().wavenumbers()) {
                if (k - j as f64).abs() > 0.045 + 1e-12 {
                    assert_eq!(*c, ZERO, "packet {j} at k = {k}");
                }
            }
        }
        assert!(b.truncated_fraction() > 0.0);
        let wide = assemble_psi(&grids, &env, 0.0, AnsatzOrder::Basic, 0.49).unwrap();
        assert!(wide.truncated_fraction() < 1e-4);
        assert!(wide.packet(2).is_none());
    }

    #[test]
    fn assembly_matches_direct_evaluation() {
        // With a radius covering the whole envelope band the packets are exact.
        let eps = 0.05;
        let (grids, env) = setup(eps);
        let t = 3.0;
        let p = params();
        let env = env.evolve_to(eps * eps * t, 1e-3, &p);
        let b = assemble_psi(&grids, &env, t, AnsatzOrder::Basic, 0.49).unwrap();
        let slow = env.field().forward();
        let direct = Field::from_fn(grids.fast(), |x| {
            let big_x = eps * (x - p.cg() * t);
            let mut a = ZERO;
            for (c, &k) in slow.coeffs().iter().zip(grids.slow().wavenumbers()) {
                a += c * Complex64::new(0.0, k * big_x).exp();
            }
            2.0 * (a * Complex64::new(0.0, x - p.omega0() * t).exp()).re
        });
        let err = (b.psi_c() - &direct).max_abs();
        assert!(err < 1e-4 * direct.max_abs(), "{err}");
    }

    #[test]
    fn envelope_time_mismatch_is_refused() {
        let (grids, env) = setup(0.1);
        assert!(matches!(
            assemble_psi(&grids, &env, 1.0, AnsatzOrder::Basic, 0.045),
            Err(Error::EnvelopeTime { .. })
        ));
    }

    #[test]
    fn time_derivative_matches_central_difference() {
        let eps = 0.1;
        let p = params();
        let (grids, env) = setup(eps);
        let t = 2.0;
        let h = 1e-4;
        let at = |tt: f64| {
            let e = env.evolve_to(eps * eps * tt, 1e-4, &p);
            assemble_psi(&grids, &e, tt, AnsatzOrder::Corrected2, 0.49).unwrap()
        };
        let exact = psi_time_derivative(&at(t));
        let fd = (&at(t + h).psi() - &at(t - h).psi()).scaled(0.5 / h);
        let err = (&exact - &fd).max_abs();
        assert!(err < 1e-6 * exact.max_abs(), "{err}");
    }

    #[test]
    fn plane_wave_time_derivative() {
        // constant envelope α: ∂ₜψ₁ = (−iω₀ + iε²ν₂|α|²)ψ₁
        let eps = 0.1;
        let p = params();
        let (grids, env) = setup(eps);
        let alpha = Complex64::new(0.5, 0.2);
        let env = Envelope::new(Field::from_fn_complex(env.grid(), |_| alpha), 0.0);
        let b = assemble_psi(&grids, &env, 0.0, AnsatzOrder::Basic, 0.045).unwrap();
        let rate = Complex64::new(0.0, -p.omega0() + eps * eps * p.nu2() * alpha.norm_sqr());
        let expected = Field::from_fn(grids.fast(), |x| 2.0 * (rate * alpha * Complex64::new(0.0, x).exp()).re);
        assert!((&psi_time_derivative(&b) - &expected).max_abs() < 1e-12);
    }

    #[test]
    fn packet_supports_are_disjoint() {
        let (grids, env) = setup(0.05);
        let b = assemble_psi(&grids, &env, 0.0, AnsatzOrder::Corrected2, 0.045).unwrap();
        for j in -2..=2 {
            for i in -2..=2 {
                if i == j {
                    continue;
                }
                let (a, c) = (b.packet(j).unwrap(), b.packet(i).unwrap());
                assert!(a.coeffs().iter().zip(c.coeffs()).all(|(x, y)| x.norm() == 0.0 || y.norm() == 0.0));
            }
        }
    }
}
