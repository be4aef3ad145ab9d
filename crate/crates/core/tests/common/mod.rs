//! Helpers shared by the integration tests and the acceptance runner.
#![allow(dead_code)]

use std::f64::consts::PI;

use spdc_tuner::calibrate::collinear_degenerate_root;
use spdc_tuner::dispersion::{CrystalSpec, DispersionModel};
use spdc_tuner::phasematch::PumpSpec;
use spdc_tuner::spectrum::{GridSpec, QuadratureSpec, Scenario};
use spdc_tuner::SPEED_OF_LIGHT;

pub const LAMBDA_P: f64 = 532e-9;
pub const W0_NARROW: f64 = 23.27e-6;
pub const W0_WIDE: f64 = 46.53e-6;
pub const L0_SHORT: f64 = 7.5e-3;
pub const L0_LONG: f64 = 12e-3;

/// Pump 532 nm, w0 = 23.27 µm, 7.5 mm crystal at 25 °C on an `n`×`n` grid,
/// poled at `g0`.
pub fn scenario(n: usize, g0: f64) -> Scenario {
    Scenario {
        pump: PumpSpec::from_wavelength(LAMBDA_P, W0_NARROW).unwrap(),
        crystal: CrystalSpec::ktp(L0_SHORT, g0).unwrap(),
        temperature_c: 25.0,
        grid: GridSpec {
            lambda_points: n,
            q_points: n,
            ..GridSpec::default()
        },
        quad: QuadratureSpec::default(),
        instrument: None,
    }
}

/// Collinear degenerate period of the reference configuration.
pub fn g_star() -> f64 {
    collinear_degenerate_root(&scenario(16, 9.0e-6), 8.5e-6, 9.5e-6).unwrap()
}

/// Brute-force spectral density: midpoint Riemann sum of the textbook
/// `|Λ|²` over `q_i`, on a square box centred at `-q_s`.
///
/// Written from the formulas alone. It only borrows the refractive index
/// from the library.
pub fn riemann_density(
    q_s: f64,
    lambda_s: f64,
    lambda_p: f64,
    w0: f64,
    crystal: &CrystalSpec,
    temp_c: f64,
    half_width: f64,
    points: usize,
) -> f64 {
    let model: &DispersionModel = &crystal.dispersion;
    let omega_p = 2.0 * PI * SPEED_OF_LIGHT / lambda_p;
    let omega_s = 2.0 * PI * SPEED_OF_LIGHT / lambda_s;
    let omega_i = omega_p - omega_s;
    let lambda_i = 2.0 * PI * SPEED_OF_LIGHT / omega_i;
    let n_s = model.refractive_index(lambda_s, temp_c).unwrap();
    let n_i = model.refractive_index(lambda_i, temp_c).unwrap();
    let n_p = model.refractive_index(lambda_p, temp_c).unwrap();
    let k_s = n_s * omega_s / SPEED_OF_LIGHT;
    let k_i = n_i * omega_i / SPEED_OF_LIGHT;
    let k_p = n_p * omega_p / SPEED_OF_LIGHT;

    let dt = temp_c - 25.0;
    let stretch = 1.0 + crystal.alpha * dt + crystal.beta * dt * dt;
    let period = crystal.poling_g0 * stretch;
    let length = crystal.length_l0 * stretch;
    let weight = omega_i * omega_s / (n_i * n_s).powi(2);

    let h = 2.0 * half_width / points as f64;
    let mut sum = 0.0;
    for a in 0..points {
        let qix = -q_s - half_width + (a as f64 + 0.5) * h;
        for b in 0..points {
            let qiy = -half_width + (b as f64 + 0.5) * h;
            let (px, py) = (qix + q_s, qiy);
            let ri = k_i * k_i - qix * qix - qiy * qiy;
            let rs = k_s * k_s - q_s * q_s;
            let rp = k_p * k_p - px * px - py * py;
            if ri < 0.0 || rs < 0.0 || rp < 0.0 {
                continue;
            }
            let dkz = ri.sqrt() + rs.sqrt() - rp.sqrt();
            let arg = (dkz + 2.0 * PI / period) * length / 2.0;
            let sinc = if arg == 0.0 { 1.0 } else { arg.sin() / arg };
            let pump = (-w0 * w0 * (px * px + py * py) / 4.0).exp();
            sum += weight * pump * pump * sinc * sinc;
        }
    }
    sum * h * h
}

/// Indices of `k` evenly spread samples out of `n`.
pub fn spread(n: usize, k: usize) -> Vec<usize> {
    (0..k).map(|i| i * (n - 1) / (k - 1)).collect()
}

/// Relative agreement for bright values, absolute (scaled by `max`) for
/// dark ones. Returns the worst normalised error.
pub fn worst_error(pairs: &[(f64, f64)], rel: f64, bright_fraction: f64) -> f64 {
    let max = pairs.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
    pairs
        .iter()
        .map(|(got, want)| {
            if want.abs() >= bright_fraction * max {
                (got - want).abs() / want.abs() / rel
            } else {
                (got - want).abs() / (rel * bright_fraction * max)
            }
        })
        .fold(0.0, f64::max)
}
