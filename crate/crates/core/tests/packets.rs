use std::f64::consts::PI;

use num_complex::Complex64;
use packetlab_core::multiplier::Multiplier;
use packetlab_core::nls::{assemble_psi, AnsatzGrids, AnsatzOrder, CarrierParams, Envelope, GridSpec};
use packetlab_core::solver::{run, SolverConfig};
use packetlab_core::spectral::Field;

fn basic_packet(eps: f64) -> (CarrierParams, Field) {
    let p = CarrierParams::new(1.0, 0.045).unwrap();
    let grids = AnsatzGrids::new(&p, eps, &GridSpec::default()).unwrap();
    let env = Envelope::gaussian(grids.slow());
    let b = assemble_psi(&grids, &env, 0.0, AnsatzOrder::Basic, 0.49).unwrap();
    (p, b.scaled_psi())
}

fn linear_config(t_end: f64) -> SolverConfig {
    let mut cfg = SolverConfig::new(0.05, t_end);
    cfg.nonlinear = false;
    cfg
}

#[test]
fn linear_packet_follows_dispersion_relation() {
    let (_, u0) = basic_packet(0.1);
    let t = 37.3;
    let (end, _) = run(&u0, &linear_config(t), &mut []).unwrap();
    let exact = Multiplier::from_symbol(u0.grid(), "propagator", |k| Complex64::new(0.0, -k.tanh() * t).exp())
        .unwrap()
        .apply(&u0)
        .unwrap();
    assert!((&end.u - &exact).max_abs() < 1e-12 * u0.max_abs());
}

/// Center of `|u|²` on the circle, unwrapped against a reference position.
fn center(u: &Field, near: f64) -> f64 {
    let len = u.grid().length();
    let mut z = Complex64::new(0.0, 0.0);
    for (x, v) in u.grid().points().zip(u.samples()) {
        z += v.norm_sqr() * Complex64::new(0.0, 2.0 * PI * x / len).exp();
    }
    let c = z.arg().rem_euclid(2.0 * PI) * len / (2.0 * PI);
    c + len * ((near - c) / len).round()
}

#[test]
fn envelope_moves_at_group_velocity() {
    let eps = 0.1;
    let (p, u0) = basic_packet(eps);
    let t = 10.0 / eps;
    let (end, _) = run(&u0, &linear_config(t), &mut []).unwrap();
    let c0 = center(&u0, u0.grid().length() / 2.0);
    let c1 = center(&end.u, c0 + p.cg() * t);
    let speed = (c1 - c0) / t;
    assert!((speed / p.cg() - 1.0).abs() < 0.02, "{speed} vs {}", p.cg());
}

#[test]
fn nonlinear_packet_conserves_mass_and_l2() {
    let (_, u0) = basic_packet(0.1);
    let mut cfg = SolverConfig::new(0.05, 200.0);
    cfg.observer_stride = 200;
    let (_, log) = run(&u0, &cfg, &mut []).unwrap();
    let (m0, l0) = (log.samples[0].mass, log.samples[0].l2);
    for s in &log.samples {
        assert!((s.mass - m0).abs() <= 1e-10 * l0 * (u0.grid().length()).sqrt());
        assert!((s.l2 / l0 - 1.0).abs() < 1e-8);
    }
    assert!(log.dt_within_stability_bound());
}
