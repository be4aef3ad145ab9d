//! Longitudinal phase mismatch, quasi-phase-matching residual and the
//! per-point down-conversion probability `|Λ|²`.

use std::f64::consts::PI;
use std::ops::{Add, Neg};

use crate::dispersion::{omega_to_wavelength, wavelength_to_omega, CrystalSpec};
use crate::error::{Error, Result};

/// Monochromatic Gaussian pump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PumpSpec {
    /// Angular frequency, rad/s.
    pub omega_p: f64,
    /// Beam waist radius, m.
    pub waist_w0: f64,
    /// Optical power, W. Only used by photon-budget helpers.
    pub power: Option<f64>,
}

impl PumpSpec {
    pub fn new(omega_p: f64, waist_w0: f64) -> Result<Self> {
        if !(omega_p > 0.0 && omega_p.is_finite()) {
            return Err(Error::invalid("omega_p", "must be positive"));
        }
        if !(waist_w0 > 0.0 && waist_w0.is_finite()) {
            return Err(Error::invalid("waist_w0", "must be positive"));
        }
        Ok(PumpSpec {
            omega_p,
            waist_w0,
            power: None,
        })
    }

    pub fn from_wavelength(lambda_p: f64, waist_w0: f64) -> Result<Self> {
        if !(lambda_p > 0.0) {
            return Err(Error::invalid("lambda_p", "must be positive"));
        }
        Self::new(wavelength_to_omega(lambda_p), waist_w0)
    }

    pub fn with_power(mut self, power: f64) -> Result<Self> {
        if !(power >= 0.0 && power.is_finite()) {
            return Err(Error::invalid("power", "must be non-negative"));
        }
        self.power = Some(power);
        Ok(self)
    }

    pub fn wavelength(&self) -> f64 {
        omega_to_wavelength(self.omega_p)
    }

    pub fn degenerate_omega(&self) -> f64 {
        0.5 * self.omega_p
    }
}

/// Transverse wave-vector component `(q_x, q_y)` in rad/m.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TransverseMomentum {
    pub qx: f64,
    pub qy: f64,
}

impl TransverseMomentum {
    pub const ZERO: Self = TransverseMomentum { qx: 0.0, qy: 0.0 };

    pub fn new(qx: f64, qy: f64) -> Self {
        TransverseMomentum { qx, qy }
    }

    pub fn norm_sq(self) -> f64 {
        self.qx * self.qx + self.qy * self.qy
    }

    pub fn norm(self) -> f64 {
        self.qx.hypot(self.qy)
    }

    /// Rotation about the optical axis.
    pub fn rotated(self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        TransverseMomentum {
            qx: c * self.qx - s * self.qy,
            qy: s * self.qx + c * self.qy,
        }
    }
}

impl Add for TransverseMomentum {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        TransverseMomentum::new(self.qx + rhs.qx, self.qy + rhs.qy)
    }
}

impl Neg for TransverseMomentum {
    type Output = Self;
    fn neg(self) -> Self {
        TransverseMomentum::new(-self.qx, -self.qy)
    }
}

/// Outcome of the longitudinal mismatch evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mismatch {
    /// `Δk_z` in rad/m.
    Propagating(f64),
    /// At least one of the three fields has `|q| > |k|`.
    Evanescent,
}

impl Mismatch {
    pub fn value(self) -> Option<f64> {
        match self {
            Mismatch::Propagating(dk) => Some(dk),
            Mismatch::Evanescent => None,
        }
    }
}

/// `sin(x)/x`, exact 1 at the origin.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-6 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// `Δk_z + 2π/G(T)`.
pub fn qpm_residual(delta_kz: f64, temp_c: f64, crystal: &CrystalSpec) -> f64 {
    delta_kz + 2.0 * PI / crystal.poling_period_at(temp_c)
}

/// Normalised Gaussian pump angular spectrum, `exp(-w0² |q|² / 4)`.
pub fn pump_amplitude(q_sum: TransverseMomentum, pump: &PumpSpec) -> f64 {
    (-pump.waist_w0 * pump.waist_w0 * q_sum.norm_sq() / 4.0).exp()
}

/// Everything in `|Λ|²` that depends only on the signal frequency and the
/// crystal state, evaluated once and reused across transverse momenta.
#[derive(Debug, Clone, Copy)]
pub struct PhaseMatchKernel {
    pub omega_s: f64,
    pub omega_i: f64,
    pub k_s: f64,
    pub k_i: f64,
    pub k_p: f64,
    /// `ω_i ω_s / (n_i n_s)²`.
    pub weight: f64,
    /// `2π / G(T)`.
    pub grating: f64,
    /// `L(T) / 2`.
    pub half_length: f64,
    pub waist_sq: f64,
}

impl PhaseMatchKernel {
    /// Validates frequencies and wavelengths and logs out-of-range
    /// temperatures.
    pub fn new(omega_s: f64, pump: &PumpSpec, temp_c: f64, crystal: &CrystalSpec) -> Result<Self> {
        check_signal(omega_s, pump)?;
        check_wavelengths(omega_s, pump, crystal)?;
        crystal.dispersion.warn_temperature(temp_c);
        Ok(Self::new_unchecked(omega_s, pump, temp_c, crystal))
    }

    /// Caller guarantees `0 < ω_s < ω_p` and all wavelengths within range.
    pub(crate) fn new_unchecked(
        omega_s: f64,
        pump: &PumpSpec,
        temp_c: f64,
        crystal: &CrystalSpec,
    ) -> Self {
        let model = &crystal.dispersion;
        let omega_i = pump.omega_p - omega_s;
        let n_s = model.index_unchecked(omega_to_wavelength(omega_s), temp_c);
        let n_i = model.index_unchecked(omega_to_wavelength(omega_i), temp_c);
        let nn = n_s * n_i;
        PhaseMatchKernel {
            omega_s,
            omega_i,
            k_s: model.wavevector_unchecked(omega_s, temp_c),
            k_i: model.wavevector_unchecked(omega_i, temp_c),
            k_p: model.wavevector_unchecked(pump.omega_p, temp_c),
            weight: omega_i * omega_s / (nn * nn),
            grating: 2.0 * PI / crystal.poling_period_at(temp_c),
            half_length: 0.5 * crystal.length_at(temp_c),
            waist_sq: pump.waist_w0 * pump.waist_w0,
        }
    }

    pub fn mismatch(&self, q_i: TransverseMomentum, q_s: TransverseMomentum) -> Mismatch {
        let ri = self.k_i * self.k_i - q_i.norm_sq();
        let rs = self.k_s * self.k_s - q_s.norm_sq();
        let rp = self.k_p * self.k_p - (q_i + q_s).norm_sq();
        if ri < 0.0 || rs < 0.0 || rp < 0.0 {
            return Mismatch::Evanescent;
        }
        Mismatch::Propagating(ri.sqrt() + rs.sqrt() - rp.sqrt())
    }

    pub fn amplitude_sq(&self, q_i: TransverseMomentum, q_s: TransverseMomentum) -> f64 {
        let Mismatch::Propagating(dk) = self.mismatch(q_i, q_s) else {
            return 0.0;
        };
        let pump = (-self.waist_sq * (q_i + q_s).norm_sq() / 4.0).exp();
        let s = sinc((dk + self.grating) * self.half_length);
        self.weight * pump * pump * s * s
    }
}

pub(crate) fn check_signal(omega_s: f64, pump: &PumpSpec) -> Result<()> {
    if !(omega_s > 0.0 && omega_s < pump.omega_p) {
        return Err(Error::invalid(
            "omega_s",
            format!("must lie in (0, ω_p = {:.6e}), got {omega_s:.6e}", pump.omega_p),
        ));
    }
    Ok(())
}

pub(crate) fn check_wavelengths(omega_s: f64, pump: &PumpSpec, crystal: &CrystalSpec) -> Result<()> {
    for omega in [omega_s, pump.omega_p - omega_s, pump.omega_p] {
        crystal.dispersion.check_wavelength(omega_to_wavelength(omega))?;
    }
    Ok(())
}

/// Longitudinal mismatch `Δk_z` between pump and the signal/idler pair.
pub fn longitudinal_mismatch(
    q_i: TransverseMomentum,
    q_s: TransverseMomentum,
    omega_s: f64,
    pump: &PumpSpec,
    temp_c: f64,
    crystal: &CrystalSpec,
) -> Result<Mismatch> {
    Ok(PhaseMatchKernel::new(omega_s, pump, temp_c, crystal)?.mismatch(q_i, q_s))
}

/// `|Λ|²` up to a global constant.
pub fn amplitude_sq(
    q_i: TransverseMomentum,
    q_s: TransverseMomentum,
    omega_s: f64,
    pump: &PumpSpec,
    temp_c: f64,
    crystal: &CrystalSpec,
) -> Result<f64> {
    Ok(PhaseMatchKernel::new(omega_s, pump, temp_c, crystal)?.amplitude_sq(q_i, q_s))
}

/// Internal emission angle `arcsin(|q| / |k_s|)`.
pub fn emission_angle(q_mag: f64, omega_s: f64, temp_c: f64, crystal: &CrystalSpec) -> Result<f64> {
    let k = crystal.dispersion.wavevector_magnitude(omega_s, temp_c)?;
    let q = q_mag.abs();
    if q > k {
        return Err(Error::BeyondCone { q, k });
    }
    Ok((q / k).asin())
}

/// Poling period at 25 °C that zeroes the collinear QPM residual at
/// `omega_s`, from the closed form `G(T) = -2π / Δk_z(q = 0)`.
pub fn collinear_period(
    omega_s: f64,
    pump: &PumpSpec,
    temp_c: f64,
    crystal: &CrystalSpec,
) -> Result<f64> {
    let dk = longitudinal_mismatch(
        TransverseMomentum::ZERO,
        TransverseMomentum::ZERO,
        omega_s,
        pump,
        temp_c,
        crystal,
    )?
    .value()
    .expect("collinear fields always propagate");
    if dk >= 0.0 {
        return Err(Error::invalid("crystal", "collinear mismatch is not negative, QPM impossible"));
    }
    Ok(-2.0 * PI / dk / crystal.expansion_factor(temp_c))
}
