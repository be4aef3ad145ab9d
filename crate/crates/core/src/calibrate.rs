//! Parameter sweeps, poling-period fitting against reference spectra, the
//! temperature/poling-period equivalence and photon-budget helpers.

use std::f64::consts::PI;
use std::path::Path;

use crate::dispersion::wavelength_to_omega;
use crate::error::{Error, Result};
use crate::phasematch::{longitudinal_mismatch, qpm_residual, TransverseMomentum};
use crate::spectrum::{
    fiber_position_to_q, instrument_convolve, InstrumentSpec, Scenario, TuningCurve,
};
use crate::{PLANCK, SPEED_OF_LIGHT};

/// Parameter varied by [`sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    /// Poling period at 25 °C, m.
    G0,
    /// Pump waist, m.
    W0,
    /// Crystal temperature, °C.
    T,
    /// Crystal length at 25 °C, m.
    L0,
}

impl std::str::FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "G0" | "g0" => Ok(SweepParam::G0),
            "w0" | "W0" => Ok(SweepParam::W0),
            "T" | "t" => Ok(SweepParam::T),
            "L0" | "l0" => Ok(SweepParam::L0),
            other => Err(Error::invalid("param", format!("unknown sweep parameter `{other}`"))),
        }
    }
}

impl std::fmt::Display for SweepParam {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SweepParam::G0 => "G0",
            SweepParam::W0 => "w0",
            SweepParam::T => "T",
            SweepParam::L0 => "L0",
        })
    }
}

/// Copy of `base` with one parameter replaced.
pub fn with_param(base: &Scenario, param: SweepParam, value: f64) -> Result<Scenario> {
    let mut s = base.clone();
    match param {
        SweepParam::G0 => {
            s.crystal = crate::dispersion::CrystalSpec::new(
                s.crystal.length_l0,
                value,
                s.crystal.alpha,
                s.crystal.beta,
                s.crystal.dispersion.clone(),
            )?
        }
        SweepParam::L0 => {
            s.crystal = crate::dispersion::CrystalSpec::new(
                value,
                s.crystal.poling_g0,
                s.crystal.alpha,
                s.crystal.beta,
                s.crystal.dispersion.clone(),
            )?
        }
        SweepParam::W0 => {
            let power = s.pump.power;
            s.pump = crate::phasematch::PumpSpec::new(s.pump.omega_p, value)?;
            s.pump.power = power;
        }
        SweepParam::T => {
            if !value.is_finite() {
                return Err(Error::invalid("T", "must be finite"));
            }
            s.temperature_c = value;
        }
    }
    Ok(s)
}

#[cfg(feature = "parallel")]
fn map_values<T: Send>(values: &[f64], f: impl Fn(f64) -> T + Sync + Send) -> Vec<T> {
    use rayon::prelude::*;
    values.par_iter().map(|v| f(*v)).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_values<T: Send>(values: &[f64], f: impl Fn(f64) -> T + Sync + Send) -> Vec<T> {
    values.iter().map(|v| f(*v)).collect()
}

/// One tuning curve per value, all on the base grid. A failing element does
/// not stop the sweep.
pub fn sweep(param: SweepParam, values: &[f64], base: &Scenario) -> Result<Vec<Result<TuningCurve>>> {
    if values.is_empty() {
        return Err(Error::invalid("values", "sweep needs at least one value"));
    }
    Ok(map_values(values, |v| with_param(base, param, v)?.tuning_curve()))
}

/// Transverse coordinate of a measured record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Position {
    /// Fiber position in the Fourier plane, m.
    FiberX(f64),
    /// Transverse momentum, rad/m.
    Q(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasuredRecord {
    pub position: Position,
    /// Vacuum wavelength, m.
    pub wavelength: f64,
    pub counts: f64,
}

/// Raster-scanned spectrometer data.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasuredSpectrum {
    pub records: Vec<MeasuredRecord>,
    pub instrument: InstrumentSpec,
}

impl MeasuredSpectrum {
    /// Reads `x_mm,lambda_nm,counts` or `q_per_um,lambda_nm,counts` CSV.
    /// A curve written by this crate (`q_per_um,lambda_nm,density`) is
    /// accepted too, with density standing in for counts.
    /// Lines starting with `#` are ignored; row order is irrelevant.
    pub fn parse_csv(text: &str, instrument: InstrumentSpec) -> Result<Self> {
        let parse_err = |line: usize, message: String| Error::Parse {
            path: "measured spectrum".into(),
            line,
            message,
        };
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header = reader
            .headers()
            .map_err(|e| parse_err(0, e.to_string()))?
            .clone();
        let fields: Vec<&str> = header.iter().collect();
        let by_position = match fields.as_slice() {
            ["x_mm", "lambda_nm", "counts"] => true,
            ["q_per_um", "lambda_nm", "counts"] | ["q_per_um", "lambda_nm", "density"] => false,
            _ => {
                return Err(parse_err(
                    1,
                    format!(
                        "header must be `x_mm,lambda_nm,counts` or `q_per_um,lambda_nm,counts`, got `{}`",
                        fields.join(",")
                    ),
                ))
            }
        };
        let mut records = Vec::new();
        for row in reader.records() {
            let row = row.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line() as usize);
                parse_err(line, e.to_string())
            })?;
            let line = row.position().map_or(0, |p| p.line() as usize);
            if row.len() != 3 {
                return Err(parse_err(line, format!("expected 3 fields, got {}", row.len())));
            }
            let mut nums = [0.0; 3];
            for (slot, field) in nums.iter_mut().zip(row.iter()) {
                *slot = field
                    .parse()
                    .ok()
                    .filter(|v: &f64| v.is_finite())
                    .ok_or_else(|| parse_err(line, format!("not a finite number: `{field}`")))?;
            }
            let position = if by_position {
                Position::FiberX(nums[0] * 1e-3)
            } else {
                Position::Q(nums[0] * 1e6)
            };
            records.push(MeasuredRecord {
                position,
                wavelength: nums[1] * 1e-9,
                counts: nums[2],
            });
        }
        let spectrum = MeasuredSpectrum {
            records,
            instrument,
        };
        spectrum.validate(None)?;
        Ok(spectrum)
    }

    pub fn from_csv_file(path: impl AsRef<Path>, instrument: InstrumentSpec) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text, instrument)
    }

    /// Checks counts and, when the pump wavelength is known, the physical
    /// wavelength range `(0, 10 λ_p)`.
    pub fn validate(&self, pump_wavelength: Option<f64>) -> Result<()> {
        self.instrument.validate()?;
        if !self.records.iter().any(|r| r.counts > 0.0) {
            return Err(Error::invalid("counts", "need at least one positive record"));
        }
        for r in &self.records {
            if r.counts < 0.0 {
                return Err(Error::invalid("counts", "must be non-negative"));
            }
            let upper = pump_wavelength.map_or(f64::INFINITY, |l| 10.0 * l);
            if !(r.wavelength > 0.0 && r.wavelength < upper) {
                return Err(Error::invalid(
                    "lambda_nm",
                    format!("{} nm outside the physical range", r.wavelength * 1e9),
                ));
            }
        }
        Ok(())
    }

    /// `(q, λ, counts)` triples with positions converted to momentum.
    pub fn samples(&self) -> Result<Vec<(f64, f64, f64)>> {
        self.records
            .iter()
            .map(|r| {
                let q = match r.position {
                    Position::Q(q) => q,
                    Position::FiberX(x) => {
                        fiber_position_to_q(x, wavelength_to_omega(r.wavelength), self.instrument.f2)?
                    }
                };
                Ok((q, r.wavelength, r.counts))
            })
            .collect()
    }
}

/// Reference data for [`fit_poling_period`].
#[derive(Debug, Clone, Copy)]
pub enum FitTarget<'a> {
    /// Forward-smoothed with the spectrum's own instrument.
    Measured(&'a MeasuredSpectrum),
    /// Compared with the scenario's instrument, if any.
    Curve(&'a TuningCurve),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    /// m.
    pub best_g0: f64,
    /// °C, only when temperature was fitted.
    pub best_t: Option<f64>,
    /// `Σ (sim - target)² / Σ target²`, both max-normalised.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Largest bracket the single-regime assumption tolerates.
pub const MAX_FIT_SPAN: f64 = 200e-9;
pub const MIN_FIT_TOL: f64 = 0.1e-9;
const SCAN_POINTS: usize = 13;
const MAX_GOLDEN_ITERATIONS: usize = 200;

/// Golden-section minimisation of a unimodal `f` on `[lo, hi]`. Returns
/// `(x, f(x), iterations, converged)`.
pub fn golden_section(
    mut f: impl FnMut(f64) -> Result<f64>,
    lo: f64,
    hi: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(f64, f64, usize, bool)> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    let mut iters = 0;
    while (b - a).abs() > tol && iters < max_iter {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
        iters += 1;
    }
    let converged = (b - a).abs() <= tol;
    Ok(if fc <= fd {
        (c, fc, iters, converged)
    } else {
        (d, fd, iters, converged)
    })
}

struct Objective<'a> {
    base: &'a Scenario,
    instrument: Option<InstrumentSpec>,
    /// `(q, λ, normalised target)`.
    samples: Vec<(f64, f64, f64)>,
    target_norm: f64,
}

impl<'a> Objective<'a> {
    fn new(target: FitTarget<'_>, base: &'a Scenario) -> Result<Self> {
        let (raw, instrument) = match target {
            FitTarget::Measured(m) => {
                m.validate(Some(base.pump.wavelength()))?;
                (m.samples()?, Some(m.instrument))
            }
            FitTarget::Curve(c) => {
                let mut s = Vec::with_capacity(c.values.len());
                for (r, lambda) in c.lambda_axis.iter().enumerate() {
                    for (j, q) in c.q_axis.iter().enumerate() {
                        s.push((*q, *lambda, c.value(r, j)));
                    }
                }
                (s, base.instrument)
            }
        };
        let lambda_axis = base.grid.lambda_axis();
        let (lmin, lmax) = (lambda_axis[0], lambda_axis[lambda_axis.len() - 1]);
        let inside: Vec<_> = raw
            .into_iter()
            .filter(|(q, l, _)| q.abs() <= base.grid.q_max && *l >= lmin && *l <= lmax)
            .collect();
        let max = inside.iter().map(|s| s.2).fold(0.0, f64::max);
        if !(max > 0.0) {
            return Err(Error::invalid(
                "target",
                "no positive samples inside the simulation grid",
            ));
        }
        let samples: Vec<_> = inside.into_iter().map(|(q, l, v)| (q, l, v / max)).collect();
        let target_norm = samples.iter().map(|s| s.2 * s.2).sum();
        Ok(Objective {
            base,
            instrument,
            samples,
            target_norm,
        })
    }

    fn eval(&self, g0: f64) -> Result<f64> {
        let scenario = with_param(self.base, SweepParam::G0, g0)?;
        let mut curve = scenario.tuning_curve()?;
        if let Some(inst) = &self.instrument {
            curve = instrument_convolve(&curve, inst)?;
        }
        let mut acc = 0.0;
        for &(q, lambda, t) in &self.samples {
            let s = bilinear(&curve, q, lambda);
            acc += (s - t) * (s - t);
        }
        Ok(acc / self.target_norm)
    }
}

/// Bilinear interpolation of a curve at `(q, λ)`, clamped to the grid.
pub fn bilinear(curve: &TuningCurve, q: f64, lambda: f64) -> f64 {
    let (r0, tr) = locate(&curve.lambda_axis, lambda);
    let (c0, tc) = locate(&curve.q_axis, q);
    let v = |r: usize, c: usize| curve.value(r, c);
    let r1 = (r0 + 1).min(curve.rows() - 1);
    let c1 = (c0 + 1).min(curve.cols() - 1);
    (1.0 - tr) * ((1.0 - tc) * v(r0, c0) + tc * v(r0, c1)) + tr * ((1.0 - tc) * v(r1, c0) + tc * v(r1, c1))
}

fn locate(axis: &[f64], x: f64) -> (usize, f64) {
    let n = axis.len();
    if x <= axis[0] {
        return (0, 0.0);
    }
    if x >= axis[n - 1] {
        return (n - 1, 0.0);
    }
    let i = axis.partition_point(|a| *a <= x) - 1;
    let i = i.min(n - 2);
    (i, (x - axis[i]) / (axis[i + 1] - axis[i]))
}

/// Poling period at 25 °C that best reproduces `target`.
///
/// A coarse scan over the bounds picks the basin, then golden-section search
/// narrows it to `tol`.
pub fn fit_poling_period(
    target: FitTarget<'_>,
    base: &Scenario,
    bounds: (f64, f64),
    tol: f64,
) -> Result<FitResult> {
    let (lo, hi) = bounds;
    if !(lo > 0.0 && lo < hi) {
        return Err(Error::invalid("bounds", "need 0 < lo < hi"));
    }
    if hi - lo > MAX_FIT_SPAN * (1.0 + 1e-9) {
        return Err(Error::invalid("bounds", "span must not exceed 200 nm"));
    }
    if !(tol >= MIN_FIT_TOL * (1.0 - 1e-9)) {
        return Err(Error::invalid("tol", "must be at least 0.1 nm"));
    }
    let objective = Objective::new(target, base)?;

    let step = (hi - lo) / (SCAN_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..SCAN_POINTS).map(|i| lo + step * i as f64).collect();
    let scan = grid
        .iter()
        .map(|g| objective.eval(*g))
        .collect::<Result<Vec<_>>>()?;
    let (fmin, fmax) = scan
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    if fmax - fmin <= 1e-12 * fmax.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::NoDescent { lo, hi });
    }
    let best = scan
        .iter()
        .enumerate()
        .fold(0, |b, (i, v)| if *v < scan[b] { i } else { b });
    let a = grid[best.saturating_sub(1)];
    let b = grid[(best + 1).min(SCAN_POINTS - 1)];
    let (x, fx, iterations, converged) =
        golden_section(|g| objective.eval(g), a, b, tol, MAX_GOLDEN_ITERATIONS)?;
    let (best_g0, residual) = if scan[best] < fx {
        (grid[best], scan[best])
    } else {
        (x, fx)
    };
    Ok(FitResult {
        best_g0,
        best_t: None,
        residual,
        iterations,
        converged,
    })
}

/// Result of [`temperature_poling_equivalence`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equivalence {
    pub delta_t: f64,
    /// Poling-period change at the base temperature that mimics `delta_t`, m.
    pub delta_g0: f64,
    /// Thermal elongation of the poling period over `delta_t`, m.
    pub expansion_share: f64,
    /// `expansion_share / delta_g0`.
    pub expansion_fraction: f64,
    pub fit: FitResult,
}

/// Simulates the curve at `T + ΔT` and fits `G0` at `T` to it.
pub fn temperature_poling_equivalence(delta_t: f64, base: &Scenario) -> Result<Equivalence> {
    if !(delta_t.abs() <= 30.0) {
        return Err(Error::invalid("delta_t", "|ΔT| must not exceed 30 °C"));
    }
    let shifted = with_param(base, SweepParam::T, base.temperature_c + delta_t)?;
    let mut target = shifted.tuning_curve()?;
    if let Some(inst) = &base.instrument {
        target = instrument_convolve(&target, inst)?;
    }
    let g0 = base.crystal.poling_g0;
    let half = (3e-9 * delta_t.abs()).clamp(20e-9, 0.5 * MAX_FIT_SPAN);
    let fit = fit_poling_period(FitTarget::Curve(&target), base, (g0 - half, g0 + half), MIN_FIT_TOL)?;
    let delta_g0 = fit.best_g0 - g0;
    let expansion_share = base.crystal.poling_period_at(base.temperature_c + delta_t)
        - base.crystal.poling_period_at(base.temperature_c);
    Ok(Equivalence {
        delta_t,
        delta_g0,
        expansion_share,
        expansion_fraction: expansion_share / delta_g0,
        fit,
    })
}

/// Photons per second carried by `power` at `center_wavelength`.
pub fn photon_flux(power: f64, center_wavelength: f64) -> Result<f64> {
    if !(power >= 0.0) {
        return Err(Error::invalid("power", "must be non-negative"));
    }
    if !(center_wavelength > 0.0) {
        return Err(Error::invalid("center_wavelength", "must be positive"));
    }
    Ok(power * center_wavelength / (PLANCK * SPEED_OF_LIGHT))
}

/// Photons per mode: flux over the down-converted bandwidth in Hz.
pub fn mode_density(flux: f64, bandwidth_wl: f64, center_wavelength: f64) -> Result<f64> {
    if !(bandwidth_wl > 0.0) {
        return Err(Error::invalid("bandwidth_wl", "must be positive"));
    }
    if !(center_wavelength > 0.0) {
        return Err(Error::invalid("center_wavelength", "must be positive"));
    }
    let bandwidth_hz = SPEED_OF_LIGHT * bandwidth_wl / (center_wavelength * center_wavelength);
    Ok(flux / bandwidth_hz)
}

/// Poling period at 25 °C zeroing the collinear QPM residual at `ω_p/2`,
/// located by scanning `[lo, hi]` for a sign change and bisecting.
pub fn collinear_degenerate_root(base: &Scenario, lo: f64, hi: f64) -> Result<f64> {
    let omega = base.pump.degenerate_omega();
    let temp = base.temperature_c;
    let dk = longitudinal_mismatch(
        TransverseMomentum::ZERO,
        TransverseMomentum::ZERO,
        omega,
        &base.pump,
        temp,
        &base.crystal,
    )?
    .value()
    .expect("collinear fields always propagate");
    let residual = |g0: f64| {
        let mut c = base.crystal.clone();
        c.poling_g0 = g0;
        qpm_residual(dk, temp, &c)
    };
    const STEPS: usize = 400;
    let step = (hi - lo) / STEPS as f64;
    let mut a = lo;
    let mut fa = residual(a);
    for i in 1..=STEPS {
        let b = lo + step * i as f64;
        let fb = residual(b);
        if fa == 0.0 {
            return Ok(a);
        }
        if fa.signum() != fb.signum() {
            let (mut x0, mut x1, mut f0) = (a, b, fa);
            for _ in 0..200 {
                let mid = 0.5 * (x0 + x1);
                let fm = residual(mid);
                if fm == 0.0 || (x1 - x0) < 1e-16 {
                    return Ok(mid);
                }
                if fm.signum() == f0.signum() {
                    x0 = mid;
                    f0 = fm;
                } else {
                    x1 = mid;
                }
            }
            return Ok(0.5 * (x0 + x1));
        }
        a = b;
        fa = fb;
    }
    Err(Error::invalid(
        "bounds",
        format!(
            "no collinear degenerate QPM root in [{lo:.4e}, {hi:.4e}] m (grating 2π/G spans {:.1}..{:.1} rad/m)",
            2.0 * PI / hi,
            2.0 * PI / lo
        ),
    ))
}
