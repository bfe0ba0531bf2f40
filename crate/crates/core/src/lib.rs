//! Pseudospectral building blocks for the quasilinear dispersive equation
//!
//! ```text
//! ∂ₜu = K₀u − u∂ₓu,     K̂₀(k) = −i tanh(k)
//! ```
//!
//! on a periodic grid, together with the NLS modulation ansatz for slowly
//! modulated wave packets and the energy functionals used to control them.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, experiment
//! drivers and the command line live in the `packetlab` crate.
//!
//! Module map:
//!
//! - [`spectral`]: grid, fields, spectra, transforms, dealiased products, norms
//! - [`multiplier`]: Fourier symbols (K₀, K₀⁻¹∂ₓ, ϑ, projections, t̂ⱼ, Hilbert)
//! - [`solver`]: integrating-factor RK4 time stepping of the full equation
//! - [`nls`]: carrier parameters, NLS envelope, correctors, ansatz and residual
//! - [`energy`]: energies Eℓ, normal-form operators N and 𝒯, modified energies
//! - [`fit`]: log-log slope and growth-rate fits used by scaling studies
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod energy;
mod error;
pub mod fft;
pub mod fit;
pub mod multiplier;
pub mod nls;
pub mod solver;
pub mod spectral;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
pub use num_complex::Complex64;
