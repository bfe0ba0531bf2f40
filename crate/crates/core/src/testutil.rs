//! Seeded random fields shared by the unit tests.

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::f64::consts::PI;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::spectral::{Field, Grid1D, Spectrum};
use crate::Complex64;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn grid(n: usize, length: f64) -> Arc<Grid1D> {
    Grid1D::new(n, length).unwrap()
}

pub fn periodic_grid(n: usize) -> Arc<Grid1D> {
    grid(n, 2.0 * PI)
}

/// Real field with random coefficients on modes `|m| <= max_mode`.
pub fn random_real_field(grid: &Arc<Grid1D>, max_mode: usize, rng: &mut ChaCha8Rng) -> Field {
    let n = grid.num_points();
    let mut coeffs = alloc::vec![Complex64::new(0.0, 0.0); n];
    coeffs[0] = Complex64::new(rng.gen_range(-1.0..1.0), 0.0);
    for m in 1..=max_mode.min(n / 2 - 1) {
        let c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        coeffs[m] = c;
        coeffs[n - m] = c.conj();
    }
    Spectrum::new(grid.clone(), coeffs).unwrap().inverse()
}

pub fn random_samples(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}
