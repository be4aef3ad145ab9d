//! Spectral density `S(|q_s|, ω_s)`, tuning-curve grids, collimated
//! marginals and the instrument response of a fiber-scanning spectrometer.
//!
//! `S` integrates `|Λ|²` over the idler transverse momentum. Substituting
//! `u = q_i + q_s` (the pump momentum) makes the integration box independent
//! of the pixel: the pump Gaussian confines `u` to a few `1/w0`, so every
//! pixel shares the same tensor Gauss–Legendre nodes and pump weights. The
//! integrand is even in `u_y` when `q_s` lies on the x-axis, so only the
//! positive half of the y-nodes is visited.

use std::f64::consts::PI;

use crate::dispersion::{wavelength_to_omega, CrystalSpec};
use crate::error::{Error, Result};
use crate::phasematch::{check_signal, check_wavelengths, PhaseMatchKernel, PumpSpec};
use crate::quadrature::RuleLadder;
use crate::SPEED_OF_LIGHT;

/// Integration-domain and resolution policy for the `q_i` integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub points_per_axis: usize,
    /// Half-width of the box in units of `1/w0`.
    pub halfwidth_factor: f64,
    pub refine_tol: f64,
    pub max_points: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            points_per_axis: 64,
            halfwidth_factor: 5.0,
            refine_tol: 1e-3,
            max_points: 512,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.points_per_axis < 8 {
            return Err(Error::invalid("quad.points", "must be at least 8"));
        }
        if !(self.halfwidth_factor >= 3.0) {
            return Err(Error::invalid("quad.halfwidth_factor", "must be at least 3"));
        }
        if !(self.refine_tol > 0.0 && self.refine_tol < 1.0) {
            return Err(Error::invalid("quad.tolerance", "must lie in (0, 1)"));
        }
        if self.max_points < self.points_per_axis {
            return Err(Error::invalid("quad.max_points", "must be >= quad.points"));
        }
        Ok(())
    }
}

/// Wavelength × transverse-momentum raster. The q axis is always symmetric
/// about zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    /// m.
    pub lambda_min: f64,
    /// m.
    pub lambda_max: f64,
    pub lambda_points: usize,
    /// rad/m.
    pub q_max: f64,
    pub q_points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            lambda_min: 1000e-9,
            lambda_max: 1140e-9,
            lambda_points: 256,
            q_max: 0.25e6,
            q_points: 256,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_min > 0.0 && self.lambda_min < self.lambda_max) {
            return Err(Error::invalid("grid.lambda", "need 0 < lambda_min < lambda_max"));
        }
        if self.lambda_points < 2 || self.q_points < 2 {
            return Err(Error::invalid("grid.points", "need at least 2 points per axis"));
        }
        if !(self.q_max > 0.0 && self.q_max.is_finite()) {
            return Err(Error::invalid("grid.q_max", "must be positive"));
        }
        Ok(())
    }

    pub fn lambda_axis(&self) -> Vec<f64> {
        let n = self.lambda_points;
        let step = (self.lambda_max - self.lambda_min) / (n - 1) as f64;
        (0..n)
            .map(|i| {
                if i == n - 1 {
                    self.lambda_max
                } else {
                    self.lambda_min + step * i as f64
                }
            })
            .collect()
    }

    /// Signed axis with `q[n-1-j] == -q[j]` bit for bit.
    pub fn q_axis(&self) -> Vec<f64> {
        let n = self.q_points;
        let step = 2.0 * self.q_max / (n - 1) as f64;
        let mut q = vec![0.0; n];
        for j in 0..n / 2 {
            let v = if j == 0 {
                -self.q_max
            } else {
                -self.q_max + step * j as f64
            };
            q[j] = v;
            q[n - 1 - j] = -v;
        }
        q
    }
}

/// Fiber-scanning spectrometer response.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstrumentSpec {
    /// m.
    pub fiber_core_diameter: f64,
    /// Focal length of the 2f imaging lens, m.
    pub f2: f64,
    /// Spectrometer resolution (FWHM), m of wavelength.
    pub osa_fwhm: f64,
}

impl InstrumentSpec {
    /// 200 µm core, 50 mm lens, 2 nm resolution.
    pub fn reference_setup() -> Self {
        InstrumentSpec {
            fiber_core_diameter: 200e-6,
            f2: 50e-3,
            osa_fwhm: 2e-9,
        }
    }

    /// Zero widths are accepted and switch that smoothing axis off.
    pub fn validate(&self) -> Result<()> {
        if !(self.fiber_core_diameter >= 0.0 && self.osa_fwhm >= 0.0) {
            return Err(Error::invalid("instrument", "widths must be non-negative"));
        }
        if !(self.f2 > 0.0) {
            return Err(Error::invalid("instrument.f2", "must be positive"));
        }
        Ok(())
    }

    /// Top-hat width in q of the fiber core at `lambda`.
    pub fn q_width(&self, lambda: f64) -> f64 {
        2.0 * PI / lambda * (self.fiber_core_diameter / self.f2)
    }
}

/// Complete simulation input.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub pump: PumpSpec,
    pub crystal: CrystalSpec,
    pub temperature_c: f64,
    pub grid: GridSpec,
    pub quad: QuadratureSpec,
    pub instrument: Option<InstrumentSpec>,
}

impl Scenario {
    pub fn tuning_curve(&self) -> Result<TuningCurve> {
        tuning_curve(&self.grid, &self.pump, &self.crystal, self.temperature_c, &self.quad)
    }

    /// Poling period at 25 °C that phase matches collinear degenerate
    /// emission at the scenario temperature.
    pub fn collinear_degenerate_period(&self) -> Result<f64> {
        crate::phasematch::collinear_period(
            self.pump.degenerate_omega(),
            &self.pump,
            self.temperature_c,
            &self.crystal,
        )
    }
}

/// One `S` evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Density {
    pub value: f64,
    /// Points per axis of the accepted estimate.
    pub points: usize,
    pub converged: bool,
}

impl Density {
    /// `Err(QuadratureNoConverge)` when the refinement cap was hit.
    pub fn into_result(self, max_points: usize) -> Result<f64> {
        if self.converged {
            Ok(self.value)
        } else {
            Err(Error::QuadratureNoConverge {
                value: self.value,
                max_points,
            })
        }
    }
}

struct Level {
    points: usize,
    ux: Vec<f64>,
    ux_sq: Vec<f64>,
    /// Gauss weight × pump² along x.
    wx: Vec<f64>,
    /// Non-negative y nodes, squared.
    uy_sq: Vec<f64>,
    /// Gauss weight × pump² along y, doubled for mirrored nodes.
    wy: Vec<f64>,
}

/// Shared nodes and pump weights for every pixel of one pump/quadrature
/// configuration.
pub(crate) struct DensityIntegrator {
    levels: Vec<Level>,
    refine_tol: f64,
    max_points: usize,
    /// `∫ |E_p|² d²u = 2π / w0²`, used to scale the dark-pixel floor.
    pump_norm: f64,
}

const DARK_FLOOR: f64 = 1e-9;

impl DensityIntegrator {
    pub(crate) fn new(pump: &PumpSpec, quad: &QuadratureSpec) -> Self {
        let ladder = RuleLadder::new(quad.points_per_axis, quad.max_points);
        let half = quad.halfwidth_factor / pump.waist_w0;
        let w2 = pump.waist_w0 * pump.waist_w0;
        let pump_sq = |u: f64| (-0.5 * w2 * u * u).exp();
        let levels = ladder
            .rules()
            .iter()
            .map(|rule| {
                let (ux, w) = rule.mapped(-half, half);
                let wx: Vec<f64> = ux.iter().zip(&w).map(|(u, w)| w * pump_sq(*u)).collect();
                let mut uy_sq = Vec::new();
                let mut wy = Vec::new();
                for (u, w) in ux.iter().zip(&w) {
                    if *u > 0.0 {
                        uy_sq.push(u * u);
                        wy.push(2.0 * w * pump_sq(*u));
                    } else if *u == 0.0 {
                        uy_sq.push(0.0);
                        wy.push(*w);
                    }
                }
                Level {
                    points: rule.len(),
                    ux_sq: ux.iter().map(|u| u * u).collect(),
                    ux,
                    wx,
                    uy_sq,
                    wy,
                }
            })
            .collect();
        DensityIntegrator {
            levels,
            refine_tol: quad.refine_tol,
            max_points: quad.max_points,
            pump_norm: 2.0 * PI / w2,
        }
    }

    fn level_sum(level: &Level, kernel: &PhaseMatchKernel, q_s: f64, rs_root: f64) -> f64 {
        let ki2 = kernel.k_i * kernel.k_i;
        let kp2 = kernel.k_p * kernel.k_p;
        let offset = rs_root + kernel.grating;
        let hl = kernel.half_length;
        let mut total = 0.0;
        for i in 0..level.ux.len() {
            let dx = level.ux[i] - q_s;
            let ri_x = ki2 - dx * dx;
            let rp_x = kp2 - level.ux_sq[i];
            let mut row = 0.0;
            for (uy2, wy) in level.uy_sq.iter().zip(&level.wy) {
                let ri = ri_x - uy2;
                let rp = rp_x - uy2;
                if ri < 0.0 || rp < 0.0 {
                    continue;
                }
                let x = (ri.sqrt() - rp.sqrt() + offset) * hl;
                let s = if x.abs() < 1e-6 {
                    1.0 - x * x / 6.0
                } else {
                    x.sin() / x
                };
                row += wy * s * s;
            }
            total += level.wx[i] * row;
        }
        total * kernel.weight
    }

    /// `S` at `q_s = (q_s, 0)` with doubling refinement.
    pub(crate) fn density(&self, kernel: &PhaseMatchKernel, q_s: f64) -> Density {
        let rs = kernel.k_s * kernel.k_s - q_s * q_s;
        if rs < 0.0 {
            return Density {
                value: 0.0,
                points: 0,
                converged: true,
            };
        }
        let rs_root = rs.sqrt();
        let floor = DARK_FLOOR * kernel.weight * self.pump_norm;
        let mut prev = Self::level_sum(&self.levels[0], kernel, q_s, rs_root);
        if prev.abs() < floor {
            return Density {
                value: prev,
                points: self.levels[0].points,
                converged: true,
            };
        }
        for level in &self.levels[1..] {
            let cur = Self::level_sum(level, kernel, q_s, rs_root);
            if (cur - prev).abs() <= self.refine_tol * cur.abs() || cur.abs() < floor {
                return Density {
                    value: cur,
                    points: level.points,
                    converged: true,
                };
            }
            prev = cur;
        }
        Density {
            value: prev,
            points: self.levels.last().map_or(0, |l| l.points),
            converged: false,
        }
    }

    pub(crate) fn max_points(&self) -> usize {
        self.max_points
    }
}

/// Spectral density at `|q_s|`, `ω_s`, up to the global constant of `|Λ|²`.
///
/// The value is computed with `q_s` on the x-axis; rotational symmetry makes
/// any other direction equivalent.
pub fn spectral_density(
    q_s_mag: f64,
    omega_s: f64,
    pump: &PumpSpec,
    crystal: &CrystalSpec,
    temp_c: f64,
    quad: &QuadratureSpec,
) -> Result<Density> {
    quad.validate()?;
    let kernel = PhaseMatchKernel::new(omega_s, pump, temp_c, crystal)?;
    Ok(DensityIntegrator::new(pump, quad).density(&kernel, q_s_mag.abs()))
}

/// Relative spectral density on a (λ, q) raster.
#[derive(Debug, Clone, PartialEq)]
pub struct TuningCurve {
    /// Signed transverse momentum, rad/m, symmetric about zero.
    pub q_axis: Vec<f64>,
    /// Signal wavelength, m, ascending. Rows of `values`.
    pub lambda_axis: Vec<f64>,
    /// `2πc/λ` for each row.
    pub omega_axis: Vec<f64>,
    /// Row-major, `lambda_axis.len()` rows of `q_axis.len()` values, max 1.
    pub values: Vec<f64>,
    /// Maximum before normalisation; multiply to recover relative units
    /// comparable across curves.
    pub raw_max: f64,
    pub params_digest: String,
    /// Pixels whose quadrature hit the refinement cap.
    pub unconverged: usize,
}

impl TuningCurve {
    pub fn rows(&self) -> usize {
        self.lambda_axis.len()
    }

    pub fn cols(&self) -> usize {
        self.q_axis.len()
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols() + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let c = self.cols();
        &self.values[row * c..(row + 1) * c]
    }

    /// `(row, col)` of the first maximum in row-major order.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        (best / self.cols(), best % self.cols())
    }

    pub fn nearest_row(&self, omega: f64) -> usize {
        nearest(&self.omega_axis, omega)
    }

    /// Builds a curve from raw values, normalising to max 1.
    pub fn from_raw(
        q_axis: Vec<f64>,
        lambda_axis: Vec<f64>,
        raw: Vec<f64>,
        params_digest: String,
        unconverged: usize,
    ) -> Result<Self> {
        assert_eq!(raw.len(), q_axis.len() * lambda_axis.len());
        let raw_max = raw.iter().cloned().fold(0.0, f64::max);
        if !(raw_max > 0.0) {
            return Err(Error::AllZeroGrid);
        }
        let values = raw.iter().map(|v| v / raw_max).collect();
        Ok(TuningCurve {
            omega_axis: lambda_axis.iter().map(|l| wavelength_to_omega(*l)).collect(),
            q_axis,
            lambda_axis,
            values,
            raw_max,
            params_digest,
            unconverged,
        })
    }
}

fn nearest(axis: &[f64], x: f64) -> usize {
    let mut best = 0;
    for (i, a) in axis.iter().enumerate() {
        if (a - x).abs() < (axis[best] - x).abs() {
            best = i;
        }
    }
    best
}

/// Text fingerprint of every input that shapes a tuning curve.
pub fn params_digest(
    grid: &GridSpec,
    pump: &PumpSpec,
    crystal: &CrystalSpec,
    temp_c: f64,
    quad: &QuadratureSpec,
) -> String {
    format!(
        "lambda_p={};w0={};L0={};G0={};alpha={};beta={};T={};\
         lambda={}..{}x{};q_max={}x{};quad={}/{}/{}/{};dispersion={}",
        pump.wavelength(),
        pump.waist_w0,
        crystal.length_l0,
        crystal.poling_g0,
        crystal.alpha,
        crystal.beta,
        temp_c,
        grid.lambda_min,
        grid.lambda_max,
        grid.lambda_points,
        grid.q_max,
        grid.q_points,
        quad.points_per_axis,
        quad.halfwidth_factor,
        quad.refine_tol,
        quad.max_points,
        &crystal.dispersion.digest()[..16],
    )
}

#[cfg(feature = "parallel")]
fn map_indexed<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_indexed<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    (0..n).map(f).collect()
}

/// Fills the (λ, q) raster with `S` and normalises to max 1.
///
/// Only `|q|` columns are integrated; the negative half is a bitwise mirror.
/// Each pixel is an independent computation written to its own slot, so the
/// result does not depend on the worker count.
pub fn tuning_curve(
    grid: &GridSpec,
    pump: &PumpSpec,
    crystal: &CrystalSpec,
    temp_c: f64,
    quad: &QuadratureSpec,
) -> Result<TuningCurve> {
    grid.validate()?;
    quad.validate()?;
    let lambda_axis = grid.lambda_axis();
    let q_axis = grid.q_axis();
    let kernels = lambda_axis
        .iter()
        .map(|&lambda| {
            let omega_s = wavelength_to_omega(lambda);
            check_signal(omega_s, pump)?;
            check_wavelengths(omega_s, pump, crystal)?;
            Ok(PhaseMatchKernel::new_unchecked(omega_s, pump, temp_c, crystal))
        })
        .collect::<Result<Vec<_>>>()?;
    crystal.dispersion.warn_temperature(temp_c);

    let integrator = DensityIntegrator::new(pump, quad);
    let nq = q_axis.len();
    let half = nq.div_ceil(2);
    let densities = map_indexed(kernels.len() * half, |idx| {
        let (row, col) = (idx / half, idx % half);
        integrator.density(&kernels[row], q_axis[col].abs())
    });

    let mut raw = vec![0.0; kernels.len() * nq];
    let mut unconverged = 0;
    for (idx, d) in densities.iter().enumerate() {
        let (row, col) = (idx / half, idx % half);
        raw[row * nq + col] = d.value;
        raw[row * nq + nq - 1 - col] = d.value;
        if !d.converged {
            unconverged += 1;
        }
    }
    if unconverged > 0 {
        log::warn!(
            "{unconverged} pixels did not reach quadrature tolerance {} within {} points",
            quad.refine_tol,
            integrator.max_points()
        );
    }
    TuningCurve::from_raw(
        q_axis,
        lambda_axis,
        raw,
        params_digest(grid, pump, crystal, temp_c, quad),
        unconverged,
    )
}

/// Tuning curve integrated over transverse momentum.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalSpectrum {
    pub lambda_axis: Vec<f64>,
    pub omega_axis: Vec<f64>,
    /// Max-normalised.
    pub values: Vec<f64>,
}

impl MarginalSpectrum {
    pub fn nearest(&self, omega: f64) -> usize {
        nearest(&self.omega_axis, omega)
    }
}

/// Trapezoidal integral of each row over q, renormalised to max 1.
pub fn marginal_spectrum(curve: &TuningCurve) -> MarginalSpectrum {
    let q = &curve.q_axis;
    let mut values: Vec<f64> = (0..curve.rows())
        .map(|r| {
            let row = curve.row(r);
            let mut acc = 0.0;
            for j in 1..q.len() {
                acc += 0.5 * (row[j] + row[j - 1]) * (q[j] - q[j - 1]);
            }
            acc
        })
        .collect();
    let max = values.iter().cloned().fold(0.0, f64::max);
    if max > 0.0 {
        for v in &mut values {
            *v /= max;
        }
    }
    MarginalSpectrum {
        lambda_axis: curve.lambda_axis.clone(),
        omega_axis: curve.omega_axis.clone(),
        values,
    }
}

/// Instrument-smoothed grid before renormalisation. The sum over all pixels
/// equals the input sum up to rounding.
pub fn instrument_convolve_raw(curve: &TuningCurve, inst: &InstrumentSpec) -> Result<Vec<f64>> {
    inst.validate()?;
    let rows = curve.rows();
    let cols = curve.cols();
    let mut grid = curve.values.clone();

    if inst.osa_fwhm > 0.0 {
        let step = (curve.lambda_axis[rows - 1] - curve.lambda_axis[0]) / (rows - 1) as f64;
        let steps = inst.osa_fwhm / step;
        if steps < 3.0 {
            return Err(Error::KernelUnderresolved {
                axis: "wavelength",
                steps,
            });
        }
        let sigma = inst.osa_fwhm / (2.0 * (2.0 * 2f64.ln()).sqrt());
        let reach = (4.0 * sigma / step).ceil() as usize;
        let lam = &curve.lambda_axis;
        let mut out = vec![0.0; grid.len()];
        for src in 0..rows {
            let lo = src.saturating_sub(reach);
            let hi = (src + reach).min(rows - 1);
            let w: Vec<f64> = (lo..=hi)
                .map(|t| {
                    let d = (lam[t] - lam[src]) / sigma;
                    (-0.5 * d * d).exp()
                })
                .collect();
            let norm: f64 = w.iter().sum();
            for (t, wt) in (lo..=hi).zip(&w) {
                let f = wt / norm;
                for c in 0..cols {
                    out[t * cols + c] += f * grid[src * cols + c];
                }
            }
        }
        grid = out;
    }

    if inst.fiber_core_diameter > 0.0 {
        let q = &curve.q_axis;
        let step = (q[cols - 1] - q[0]) / (cols - 1) as f64;
        let widest_lambda = curve.lambda_axis.iter().cloned().fold(0.0, f64::max);
        let steps = inst.q_width(widest_lambda) / step;
        if steps < 3.0 {
            return Err(Error::KernelUnderresolved {
                axis: "transverse momentum",
                steps,
            });
        }
        let mut out = vec![0.0; grid.len()];
        for r in 0..rows {
            let half_width = 0.5 * inst.q_width(curve.lambda_axis[r]);
            let src_row = &grid[r * cols..(r + 1) * cols];
            let dst_row = &mut out[r * cols..(r + 1) * cols];
            for (s, v) in src_row.iter().enumerate() {
                let targets: Vec<usize> = (0..cols)
                    .filter(|&t| (q[t] - q[s]).abs() <= half_width)
                    .collect();
                let f = v / targets.len() as f64;
                for t in targets {
                    dst_row[t] += f;
                }
            }
            // Restore the exact q -> -q mirror lost to summation order.
            for c in 0..cols / 2 {
                let m = 0.5 * (dst_row[c] + dst_row[cols - 1 - c]);
                dst_row[c] = m;
                dst_row[cols - 1 - c] = m;
            }
        }
        grid = out;
    }
    Ok(grid)
}

/// Fiber-core top-hat along q and spectrometer Gaussian along λ, then
/// renormalised to max 1.
pub fn instrument_convolve(curve: &TuningCurve, inst: &InstrumentSpec) -> Result<TuningCurve> {
    let raw = instrument_convolve_raw(curve, inst)?;
    let mut out = TuningCurve::from_raw(
        curve.q_axis.clone(),
        curve.lambda_axis.clone(),
        raw,
        format!(
            "{};instrument={}/{}/{}",
            curve.params_digest, inst.fiber_core_diameter, inst.f2, inst.osa_fwhm
        ),
        curve.unconverged,
    )?;
    out.raw_max *= curve.raw_max;
    Ok(out)
}

/// Fiber position in the Fourier plane of a 2f system to transverse
/// momentum, `q = ω x / (f2 c)`.
pub fn fiber_position_to_q(x: f64, omega_s: f64, f2: f64) -> Result<f64> {
    if !(f2 > 0.0) {
        return Err(Error::invalid("f2", "must be positive"));
    }
    Ok(omega_s * x / (f2 * SPEED_OF_LIGHT))
}

/// Emission regime read off a tuning curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    CollinearDegenerate,
    NoncollinearDegenerate,
    CollinearNondegenerate,
    Unclassified,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::CollinearDegenerate => "collinear-degenerate",
            Regime::NoncollinearDegenerate => "noncollinear-degenerate",
            Regime::CollinearNondegenerate => "collinear-nondegenerate",
            Regime::Unclassified => "unclassified",
        })
    }
}

/// Ring radius at the degenerate row beyond which emission counts as
/// non-collinear, rad/m.
pub const RING_Q_THRESHOLD: f64 = 0.03e6;
/// Collinear peak must sit within this |q|, rad/m.
pub const COLLINEAR_Q_TOLERANCE: f64 = 0.02e6;
/// Marginal value at ω_p/2 relative to its maximum below which the spectrum
/// has a gap.
pub const GAP_DIP_RATIO: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeReport {
    pub regime: Regime,
    /// |q| of the global maximum, rad/m.
    pub peak_q: f64,
    /// Wavelength of the global maximum, m.
    pub peak_lambda: f64,
    /// |q| of the maximum along the row nearest ω_p/2, rad/m.
    pub degenerate_row_peak_q: f64,
    /// Marginal at ω_p/2 over marginal maximum.
    pub marginal_dip_ratio: f64,
}

/// Classifies a curve by where its intensity sits relative to `ω_p/2`:
///
/// - a marginal dip at `ω_p/2` below [`GAP_DIP_RATIO`] with a collinear
///   global maximum is collinear non-degenerate;
/// - otherwise a degenerate-row maximum beyond [`RING_Q_THRESHOLD`] is a
///   non-collinear degenerate ring;
/// - otherwise a collinear global maximum inside the central band of the
///   marginal (contiguous rows around `ω_p/2` above [`GAP_DIP_RATIO`]) is
///   collinear degenerate.
pub fn classify_regime(curve: &TuningCurve, pump: &PumpSpec) -> RegimeReport {
    let omega_d = pump.degenerate_omega();
    let row = curve.nearest_row(omega_d);
    let values = curve.row(row);
    let mut best = 0;
    for (j, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = j;
        }
    }
    let degenerate_row_peak_q = curve.q_axis[best].abs();
    let marginal = marginal_spectrum(curve);
    let marginal_dip_ratio = marginal.values[marginal.nearest(omega_d)];
    let (pr, pc) = curve.argmax();
    let peak_q = curve.q_axis[pc].abs();
    let peak_lambda = curve.lambda_axis[pr];

    let central = central_band(&marginal.values, marginal.nearest(omega_d), GAP_DIP_RATIO);
    let regime = if marginal_dip_ratio < GAP_DIP_RATIO {
        if peak_q < COLLINEAR_Q_TOLERANCE {
            Regime::CollinearNondegenerate
        } else {
            Regime::Unclassified
        }
    } else if degenerate_row_peak_q > RING_Q_THRESHOLD {
        Regime::NoncollinearDegenerate
    } else if peak_q < COLLINEAR_Q_TOLERANCE && central.contains(&pr) {
        Regime::CollinearDegenerate
    } else {
        Regime::Unclassified
    };
    RegimeReport {
        regime,
        peak_q,
        peak_lambda,
        degenerate_row_peak_q,
        marginal_dip_ratio,
    }
}

fn central_band(values: &[f64], center: usize, level: f64) -> std::ops::RangeInclusive<usize> {
    if values[center] < level {
        return center..=center;
    }
    let mut lo = center;
    while lo > 0 && values[lo - 1] >= level {
        lo -= 1;
    }
    let mut hi = center;
    while hi + 1 < values.len() && values[hi + 1] >= level {
        hi += 1;
    }
    lo..=hi
}

/// Full width at half maximum of the peak containing `peak`, with linear
/// interpolation of the crossings. `None` if a crossing is off the axis.
pub fn peak_fwhm(axis: &[f64], values: &[f64], peak: usize) -> Option<f64> {
    let half = 0.5 * values[peak];
    let mut left = None;
    for j in (0..peak).rev() {
        if values[j] < half {
            let t = (half - values[j]) / (values[j + 1] - values[j]);
            left = Some(axis[j] + t * (axis[j + 1] - axis[j]));
            break;
        }
    }
    let mut right = None;
    for j in peak + 1..values.len() {
        if values[j] < half {
            let t = (values[j - 1] - half) / (values[j - 1] - values[j]);
            right = Some(axis[j - 1] + t * (axis[j] - axis[j - 1]));
            break;
        }
    }
    Some((right? - left?).abs())
}

/// Indices of strict interior local maxima.
pub fn local_maxima(values: &[f64]) -> Vec<usize> {
    (1..values.len().saturating_sub(1))
        .filter(|&i| values[i] > values[i - 1] && values[i] >= values[i + 1])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phasematch::{amplitude_sq, TransverseMomentum};

    fn setup() -> (PumpSpec, CrystalSpec) {
        (
            PumpSpec::from_wavelength(532e-9, 23.27e-6).unwrap(),
            CrystalSpec::ktp(7.5e-3, 9.018e-6).unwrap(),
        )
    }

    fn small_grid() -> GridSpec {
        GridSpec {
            lambda_points: 24,
            q_points: 21,
            ..GridSpec::default()
        }
    }

    #[test]
    fn quadrature_spec_validation() {
        assert!(QuadratureSpec::default().validate().is_ok());
        let bad = QuadratureSpec {
            points_per_axis: 4,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = QuadratureSpec {
            halfwidth_factor: 2.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = QuadratureSpec {
            refine_tol: 1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn q_axis_is_exact_mirror() {
        for n in [2, 3, 21, 256] {
            let g = GridSpec {
                q_points: n,
                ..GridSpec::default()
            };
            let q = g.q_axis();
            for j in 0..n {
                assert_eq!(q[j], -q[n - 1 - j]);
            }
            assert_eq!(q[0], -0.25e6);
        }
    }

    #[test]
    fn evanescent_signal_has_zero_density() {
        let (pump, crystal) = setup();
        let omega = wavelength_to_omega(1064e-9);
        let k = crystal.dispersion.wavevector_magnitude(omega, 25.0).unwrap();
        let d = spectral_density(1.1 * k, omega, &pump, &crystal, 25.0, &QuadratureSpec::default())
            .unwrap();
        assert_eq!(d.value, 0.0);
    }

    #[test]
    fn density_is_direction_independent() {
        // Integrate the raw kernel directly with q_s along y and compare.
        let (pump, crystal) = setup();
        let omega = wavelength_to_omega(1050e-9);
        let quad = QuadratureSpec::default();
        let q = 0.08e6;
        let along_x = spectral_density(q, omega, &pump, &crystal, 25.0, &quad).unwrap();
        let rule = crate::quadrature::GaussLegendre::new(along_x.points);
        let h = quad.halfwidth_factor / pump.waist_w0;
        let q_s = TransverseMomentum::new(0.0, q);
        let along_y = rule.integrate_2d((-h, h), (-h, h), |ux, uy| {
            let q_i = TransverseMomentum::new(ux, uy) + (-q_s);
            amplitude_sq(q_i, q_s, omega, &pump, 25.0, &crystal).unwrap()
        });
        assert!(
            ((along_x.value - along_y) / along_y).abs() < 1e-9,
            "{} vs {along_y}",
            along_x.value
        );
    }

    #[test]
    fn curve_invariants() {
        let (pump, crystal) = setup();
        let c = tuning_curve(&small_grid(), &pump, &crystal, 25.0, &QuadratureSpec::default())
            .unwrap();
        assert_eq!(c.values.len(), 24 * 21);
        assert!(c.values.iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(c.values.iter().any(|v| *v == 1.0));
        for r in 0..c.rows() {
            for j in 0..c.cols() {
                assert_eq!(c.value(r, j), c.value(r, c.cols() - 1 - j));
            }
        }
        assert_eq!(c.unconverged, 0);
        assert!(c.params_digest.contains("G0=0.000009018"));
    }

    #[test]
    fn all_zero_grid_is_an_error() {
        let (pump, crystal) = setup();
        // Every pixel evanescent.
        let grid = GridSpec {
            q_max: 3e7,
            q_points: 2,
            lambda_points: 2,
            ..GridSpec::default()
        };
        let r = tuning_curve(&grid, &pump, &crystal, 25.0, &QuadratureSpec::default());
        assert!(matches!(r, Err(Error::AllZeroGrid)));
    }

    #[test]
    fn grid_outside_pump_band_is_rejected() {
        let (pump, crystal) = setup();
        let grid = GridSpec {
            lambda_min: 500e-9,
            ..small_grid()
        };
        assert!(tuning_curve(&grid, &pump, &crystal, 25.0, &QuadratureSpec::default()).is_err());
    }

    fn flat_curve(rows: usize, cols: usize) -> TuningCurve {
        let grid = GridSpec {
            lambda_points: rows,
            q_points: cols,
            ..GridSpec::default()
        };
        TuningCurve::from_raw(
            grid.q_axis(),
            grid.lambda_axis(),
            vec![1.0; rows * cols],
            String::new(),
            0,
        )
        .unwrap()
    }

    #[test]
    fn marginal_of_constant_curve_is_constant() {
        let m = marginal_spectrum(&flat_curve(10, 11));
        assert!(m.values.iter().all(|v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn zero_width_instrument_is_identity() {
        let (pump, crystal) = setup();
        let c = tuning_curve(&small_grid(), &pump, &crystal, 25.0, &QuadratureSpec::default())
            .unwrap();
        let inst = InstrumentSpec {
            fiber_core_diameter: 0.0,
            f2: 0.05,
            osa_fwhm: 0.0,
        };
        let out = instrument_convolve(&c, &inst).unwrap();
        assert_eq!(out.values, c.values);
    }

    #[test]
    fn underresolved_kernel_is_an_error() {
        let c = flat_curve(24, 21);
        let r = instrument_convolve(&c, &InstrumentSpec::reference_setup());
        assert!(matches!(r, Err(Error::KernelUnderresolved { .. })));
    }

    #[test]
    fn convolution_preserves_mass() {
        let grid = GridSpec::default();
        let (rows, cols) = (grid.lambda_points, grid.q_points);
        // Off-centre blobs touching the edges.
        let q = grid.q_axis();
        let l = grid.lambda_axis();
        let mut raw = vec![0.0; rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                let a = ((l[r] - 1001e-9) / 5e-9).powi(2) + ((q[c] - 0.24e6) / 0.02e6).powi(2);
                let b = ((l[r] - 1070e-9) / 20e-9).powi(2) + (q[c] / 0.1e6).powi(2);
                raw[r * cols + c] = (-a).exp() + 0.5 * (-b).exp();
            }
        }
        let c = TuningCurve::from_raw(q, l, raw, String::new(), 0).unwrap();
        let out = instrument_convolve_raw(&c, &InstrumentSpec::reference_setup()).unwrap();
        let before: f64 = c.values.iter().sum();
        let after: f64 = out.iter().sum();
        assert!(((after - before) / before).abs() < 1e-6);
        for r in 0..rows {
            for j in 0..cols {
                assert_eq!(out[r * cols + j], out[r * cols + cols - 1 - j]);
            }
        }
    }

    #[test]
    fn fiber_position_mapping() {
        let omega = wavelength_to_omega(1064e-9);
        assert_eq!(fiber_position_to_q(0.0, omega, 0.05).unwrap(), 0.0);
        let q = fiber_position_to_q(1e-3, omega, 0.05).unwrap();
        let hand = 2.0 * PI * 1e-3 / (1064e-9 * 0.05);
        assert!(((q - hand) / hand).abs() < 1e-14);
        assert!((q * 1e-6 - 0.1181).abs() < 1e-4);
        assert_eq!(fiber_position_to_q(2e-3, omega, 0.05).unwrap(), 2.0 * q);
        assert!(fiber_position_to_q(1e-3, omega, 0.0).is_err());
    }

    #[test]
    fn fwhm_of_triangle() {
        let axis: Vec<f64> = (0..11).map(|i| i as f64).collect();
        let v = [0.0, 0.0, 0.0, 0.25, 0.5, 1.0, 0.5, 0.25, 0.0, 0.0, 0.0];
        assert_eq!(peak_fwhm(&axis, &v, 5), Some(2.0));
        assert_eq!(local_maxima(&v), vec![5]);
    }
}
