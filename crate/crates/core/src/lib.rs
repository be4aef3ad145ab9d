//! Transverse-momentum-resolved spectra ("tuning curves") of type-0
//! spontaneous parametric down-conversion in periodically poled crystals.
//!
//! The crate is organised bottom-up:
//!
//! - [`dispersion`]: refractive index `n(λ, T)` and thermal expansion.
//! - [`phasematch`]: phase mismatch and the point kernel `|Λ|²`.
//! - [`quadrature`]: Gauss–Legendre rules.
//! - [`spectrum`]: the spectral density integral, tuning-curve grids,
//!   marginals and instrument smoothing.
//! - [`calibrate`]: sweeps, poling-period fitting, temperature equivalence
//!   and photon-budget helpers.
//! - [`config`] and [`output`]: run configuration and file writers used by
//!   the `spdc-tuner` binary.

pub mod calibrate;
pub mod config;
pub mod dispersion;
pub mod error;
pub mod output;
pub mod phasematch;
pub mod quadrature;
pub mod spectrum;

pub use error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Planck constant, J·s.
pub const PLANCK: f64 = 6.626_070_15e-34;
