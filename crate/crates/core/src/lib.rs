//! Simulator for the dissipative one-dimensional Lieb-Liniger model of
//! stationary-light dark-state polaritons.
//!
//! The crate is organised bottom-up:
//!
//! - [`params`] maps four-level EIT parameters onto the effective model and
//!   audits the regime of validity.
//! - [`model`] builds number-sector Fock bases, the discretized Hamiltonian
//!   and all loss (jump) operators.
//! - [`dynamics`] evolves states: conditional no-jump evolution, quantum
//!   trajectories, the block-diagonal master equation and detuning ramps.
//! - [`observables`] extracts densities, pair correlations, one-body density
//!   matrices and momentum distributions.
//! - [`fermioracle`] is the closed-form free-fermion reference used to check
//!   the Tonks-Girardeau limit.
//!
//! Internally ħ = 1: energies are angular frequencies.

pub mod dynamics;
pub mod error;
pub mod fermioracle;
pub mod linalg;
pub mod model;
pub mod observables;
pub mod params;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Reduced Planck constant in J·s.
pub const HBAR: f64 = 1.054_571_817e-34;

/// Speed of light in vacuum in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
