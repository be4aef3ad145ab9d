//! Temperature-dependent refractive index of the crystal axis seen by the
//! three interacting fields, and thermal expansion of the poled structure.
//!
//! The index follows a rational Sellmeier law
//!
//! ```text
//! n0^2(l) = A + sum_k B_k l^2 / (l^2 - C_k) - D l^2        (l in um)
//! n(l, T) = n0(l) + a1(1/l) (T - 25) + a2(1/l) (T - 25)^2
//! ```
//!
//! where `a1`, `a2` are cubic polynomials in `1/l`. Coefficients are loaded
//! from a fixture file rather than compiled in, see [`DispersionModel::parse`].

use std::path::Path;
use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::SPEED_OF_LIGHT;

/// Reference temperature of the thermo-optic and expansion laws, in °C.
pub const T_REF_C: f64 = 25.0;

const BUILTIN_KTP_Z: &str = include_str!("../data/ktp_z.disp");

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SellmeierTerm {
    pub b: f64,
    /// Resonance position in um².
    pub c: f64,
}

/// Sellmeier + thermo-optic coefficient set for one crystal axis.
#[derive(Debug, Clone, PartialEq)]
pub struct DispersionModel {
    pub label: String,
    pub a: f64,
    pub terms: Vec<SellmeierTerm>,
    /// um⁻².
    pub d: f64,
    /// Coefficients of `a1(1/l)`, constant term first.
    pub thermo_linear: [f64; 4],
    /// Coefficients of `a2(1/l)`, constant term first.
    pub thermo_quadratic: [f64; 4],
    pub lambda_range_nm: (f64, f64),
    pub temp_range_c: (f64, f64),
    digest: String,
}

impl DispersionModel {
    /// KTP z-axis set shipped with the crate.
    pub fn ktp_z() -> Self {
        Self::parse(BUILTIN_KTP_Z, "builtin:ktp_z").expect("builtin fixture is valid")
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Parses the line-oriented `key = value` fixture format.
    ///
    /// Recognised keys: `format`, `label`, `A`, `B1..Bn`, `C1..Cn`, `D`,
    /// `T1_0..T1_3`, `T2_0..T2_3`, `lambda_min_nm`, `lambda_max_nm`,
    /// `temp_min_c`, `temp_max_c`. Anything after `#` is a comment.
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let parse_err = |line: usize, message: String| Error::Parse {
            path: source.to_string(),
            line,
            message,
        };

        let mut label = None;
        let mut a = None;
        let mut d = None;
        let mut b_terms: Vec<Option<f64>> = Vec::new();
        let mut c_terms: Vec<Option<f64>> = Vec::new();
        let mut t1 = [None; 4];
        let mut t2 = [None; 4];
        let mut lam = (None, None);
        let mut temp = (None, None);

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| parse_err(line_no, format!("expected `key = value`, got `{line}`")))?;
            let key = key.trim();
            let value = value.trim();

            if key == "label" {
                label = Some(value.to_string());
                continue;
            }
            let num: f64 = value
                .parse()
                .map_err(|_| parse_err(line_no, format!("`{key}`: not a number: `{value}`")))?;
            if !num.is_finite() {
                return Err(parse_err(line_no, format!("`{key}` must be finite")));
            }

            let slot: &mut Option<f64> = match key {
                "format" => {
                    if num != 1.0 {
                        return Err(parse_err(line_no, format!("unsupported format version {num}")));
                    }
                    continue;
                }
                "A" => &mut a,
                "D" => &mut d,
                "lambda_min_nm" => &mut lam.0,
                "lambda_max_nm" => &mut lam.1,
                "temp_min_c" => &mut temp.0,
                "temp_max_c" => &mut temp.1,
                _ => {
                    if let Some(i) = indexed(key, "T1_").filter(|&i| i < 4) {
                        &mut t1[i]
                    } else if let Some(i) = indexed(key, "T2_").filter(|&i| i < 4) {
                        &mut t2[i]
                    } else if let Some(i) = indexed(key, "B").filter(|&i| i >= 1) {
                        grow(&mut b_terms, i)
                    } else if let Some(i) = indexed(key, "C").filter(|&i| i >= 1) {
                        grow(&mut c_terms, i)
                    } else {
                        return Err(parse_err(line_no, format!("unknown key `{key}`")));
                    }
                }
            };
            if slot.replace(num).is_some() {
                return Err(parse_err(line_no, format!("duplicate key `{key}`")));
            }
        }

        let missing = |k: &str| parse_err(0, format!("missing key `{k}`"));
        if b_terms.len() != c_terms.len() {
            return Err(missing(if b_terms.len() < c_terms.len() { "B" } else { "C" }));
        }
        let mut terms = Vec::with_capacity(b_terms.len());
        for (i, (b, c)) in b_terms.iter().zip(&c_terms).enumerate() {
            let b = b.ok_or_else(|| missing(&format!("B{}", i + 1)))?;
            let c = c.ok_or_else(|| missing(&format!("C{}", i + 1)))?;
            terms.push(SellmeierTerm { b, c });
        }
        let poly = |p: [Option<f64>; 4], prefix: &str| -> Result<[f64; 4]> {
            let mut out = [0.0; 4];
            for (i, v) in p.iter().enumerate() {
                out[i] = v.ok_or_else(|| missing(&format!("{prefix}{i}")))?;
            }
            Ok(out)
        };

        let model = DispersionModel {
            label: label.ok_or_else(|| missing("label"))?,
            a: a.ok_or_else(|| missing("A"))?,
            terms,
            d: d.ok_or_else(|| missing("D"))?,
            thermo_linear: poly(t1, "T1_")?,
            thermo_quadratic: poly(t2, "T2_")?,
            lambda_range_nm: (
                lam.0.ok_or_else(|| missing("lambda_min_nm"))?,
                lam.1.ok_or_else(|| missing("lambda_max_nm"))?,
            ),
            temp_range_c: (
                temp.0.ok_or_else(|| missing("temp_min_c"))?,
                temp.1.ok_or_else(|| missing("temp_max_c"))?,
            ),
            digest: hex_digest(text.as_bytes()),
        };
        if !(model.lambda_range_nm.0 > 0.0 && model.lambda_range_nm.0 < model.lambda_range_nm.1) {
            return Err(parse_err(0, "lambda_min_nm must be positive and below lambda_max_nm".into()));
        }
        if model.temp_range_c.0 > model.temp_range_c.1 {
            return Err(parse_err(0, "temp_min_c must not exceed temp_max_c".into()));
        }
        Ok(model)
    }

    /// SHA-256 of the fixture text this model was parsed from.
    pub fn digest(&self) -> &str {
        &self.digest
    }

    pub fn check_wavelength(&self, lambda: f64) -> Result<()> {
        let nm = lambda * 1e9;
        let (lo, hi) = self.lambda_range_nm;
        if nm.is_nan() || nm < lo || nm > hi {
            return Err(Error::WavelengthOutOfRange {
                lambda_nm: nm,
                min_nm: lo,
                max_nm: hi,
            });
        }
        Ok(())
    }

    pub fn temperature_in_range(&self, temp_c: f64) -> bool {
        temp_c >= self.temp_range_c.0 && temp_c <= self.temp_range_c.1
    }

    /// Logs a warning when `temp_c` lies outside the fitted range. Returns
    /// whether it was inside.
    pub fn warn_temperature(&self, temp_c: f64) -> bool {
        let ok = self.temperature_in_range(temp_c);
        if !ok {
            log::warn!(
                "{}: temperature {temp_c} °C outside fitted range [{}, {}] °C, extrapolating",
                self.label,
                self.temp_range_c.0,
                self.temp_range_c.1
            );
        }
        ok
    }

    /// Refractive index at vacuum wavelength `lambda` (m) and `temp_c`.
    pub fn refractive_index(&self, lambda: f64, temp_c: f64) -> Result<f64> {
        self.check_wavelength(lambda)?;
        self.warn_temperature(temp_c);
        Ok(self.index_unchecked(lambda, temp_c))
    }

    /// Temperature-independent Sellmeier part.
    pub fn sellmeier_index(&self, lambda: f64) -> f64 {
        let um = lambda * 1e6;
        let l2 = um * um;
        let mut n2 = self.a - self.d * l2;
        for t in &self.terms {
            n2 += t.b * l2 / (l2 - t.c);
        }
        n2.sqrt()
    }

    /// Thermo-optic correction relative to 25 °C.
    pub fn thermo_optic_shift(&self, lambda: f64, temp_c: f64) -> f64 {
        let dt = temp_c - T_REF_C;
        if dt == 0.0 {
            return 0.0;
        }
        let inv = 1.0 / (lambda * 1e6);
        let a1 = horner(&self.thermo_linear, inv);
        let a2 = horner(&self.thermo_quadratic, inv);
        a1 * dt + a2 * dt * dt
    }

    /// Index with no range checks or logging; callers validate once up front.
    pub(crate) fn index_unchecked(&self, lambda: f64, temp_c: f64) -> f64 {
        self.sellmeier_index(lambda) + self.thermo_optic_shift(lambda, temp_c)
    }

    /// `|k| = ω n(2πc/ω, T) / c` in rad/m.
    pub fn wavevector_magnitude(&self, omega: f64, temp_c: f64) -> Result<f64> {
        if !(omega > 0.0) {
            return Err(Error::invalid("omega", format!("must be positive, got {omega}")));
        }
        let n = self.refractive_index(omega_to_wavelength(omega), temp_c)?;
        Ok(omega * n / SPEED_OF_LIGHT)
    }

    pub(crate) fn wavevector_unchecked(&self, omega: f64, temp_c: f64) -> f64 {
        omega * self.index_unchecked(omega_to_wavelength(omega), temp_c) / SPEED_OF_LIGHT
    }
}

fn horner(coeffs: &[f64; 4], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

fn indexed(key: &str, prefix: &str) -> Option<usize> {
    let rest = key.strip_prefix(prefix)?;
    if rest.is_empty() || !rest.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    rest.parse().ok()
}

fn grow(v: &mut Vec<Option<f64>>, one_based: usize) -> &mut Option<f64> {
    if v.len() < one_based {
        v.resize(one_based, None);
    }
    &mut v[one_based - 1]
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn omega_to_wavelength(omega: f64) -> f64 {
    2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / omega
}

pub fn wavelength_to_omega(lambda: f64) -> f64 {
    2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / lambda
}

/// Physical description of the poled crystal.
#[derive(Debug, Clone)]
pub struct CrystalSpec {
    /// Length at 25 °C, m.
    pub length_l0: f64,
    /// Poling period at 25 °C, m.
    pub poling_g0: f64,
    /// Linear expansion coefficient, °C⁻¹.
    pub alpha: f64,
    /// Quadratic expansion coefficient, °C⁻².
    pub beta: f64,
    pub dispersion: Arc<DispersionModel>,
}

impl CrystalSpec {
    /// Linear and quadratic expansion coefficients of KTP along z.
    pub const KTP_ALPHA: f64 = 6.7e-6;
    pub const KTP_BETA: f64 = 11e-9;

    pub fn new(
        length_l0: f64,
        poling_g0: f64,
        alpha: f64,
        beta: f64,
        dispersion: Arc<DispersionModel>,
    ) -> Result<Self> {
        if !(length_l0 > 0.0 && length_l0.is_finite()) {
            return Err(Error::invalid("length_l0", "must be positive"));
        }
        if !(poling_g0 > 0.0 && poling_g0.is_finite()) {
            return Err(Error::invalid("poling_g0", "must be positive"));
        }
        if !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::invalid("alpha/beta", "must be finite"));
        }
        Ok(CrystalSpec {
            length_l0,
            poling_g0,
            alpha,
            beta,
            dispersion,
        })
    }

    /// KTP crystal with the bundled dispersion set and KTP expansion law.
    pub fn ktp(length_l0: f64, poling_g0: f64) -> Result<Self> {
        Self::new(
            length_l0,
            poling_g0,
            Self::KTP_ALPHA,
            Self::KTP_BETA,
            Arc::new(DispersionModel::ktp_z()),
        )
    }

    /// `1 + α ΔT + β ΔT²` with `ΔT = T - 25 °C`.
    pub fn expansion_factor(&self, temp_c: f64) -> f64 {
        let dt = temp_c - T_REF_C;
        1.0 + self.alpha * dt + self.beta * dt * dt
    }

    pub fn poling_period_at(&self, temp_c: f64) -> f64 {
        self.poling_g0 * self.expansion_factor(temp_c)
    }

    pub fn length_at(&self, temp_c: f64) -> f64 {
        self.length_l0 * self.expansion_factor(temp_c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ktp() -> DispersionModel {
        DispersionModel::ktp_z()
    }

    // Fixture coefficients re-typed from data/ktp_z.disp.
    fn hand_index_1064_25c() -> f64 {
        let l2: f64 = 1.064 * 1.064;
        let n2 = 2.0046403280656104
            + 1.3029603191266008 * l2 / (l2 - 0.04763)
            + 1.2866293528077881 * l2 / (l2 - 86.12171)
            - 0.0 * l2;
        n2.sqrt()
    }

    #[test]
    fn index_matches_hand_evaluation() {
        let n = ktp().refractive_index(1064e-9, 25.0).unwrap();
        let hand = hand_index_1064_25c();
        assert!(((n - hand) / hand).abs() < 1e-12, "{n} vs {hand}");
    }

    #[test]
    fn rewritten_sellmeier_equals_original_form() {
        let l2: f64 = 1.064 * 1.064;
        let original = (4.59423 + 0.06206 / (l2 - 0.04763) + 110.80672 / (l2 - 86.12171)).sqrt();
        let n = ktp().sellmeier_index(1064e-9);
        assert!((n - original).abs() < 1e-12);
    }

    #[test]
    fn thermo_optic_shift_hand_evaluation() {
        let inv: f64 = 1.0 / 1.064;
        let a1 = -0.1897e-5 + 3.6677e-5 * inv - 2.9220e-5 * inv * inv + 0.9221e-5 * inv.powi(3);
        let shift = ktp().thermo_optic_shift(1064e-9, 35.0);
        assert!(((shift - 10.0 * a1) / shift).abs() < 1e-12);
    }

    #[test]
    fn thermo_optic_zero_at_reference() {
        let m = ktp();
        for nm in [430.0, 532.0, 800.0, 1064.0, 1550.0, 3000.0] {
            assert_eq!(m.thermo_optic_shift(nm * 1e-9, 25.0), 0.0);
            assert_eq!(
                m.refractive_index(nm * 1e-9, 25.0).unwrap(),
                m.sellmeier_index(nm * 1e-9)
            );
        }
    }

    #[test]
    fn normal_dispersion_in_near_ir() {
        let m = ktp();
        let mut prev = f64::INFINITY;
        for i in 0..=3000 {
            let lambda = (900.0 + 0.1 * i as f64) * 1e-9;
            let n = m.refractive_index(lambda, 25.0).unwrap();
            assert!(n < prev, "not decreasing at {lambda}");
            assert!(n > 1.0);
            prev = n;
        }
        assert!(
            m.refractive_index(1000e-9, 25.0).unwrap() > m.refractive_index(1100e-9, 25.0).unwrap()
        );
    }

    #[test]
    fn out_of_range_wavelength_is_an_error() {
        let m = ktp();
        assert!(matches!(
            m.refractive_index(200e-9, 25.0),
            Err(Error::WavelengthOutOfRange { .. })
        ));
        // A very small ω maps to a huge wavelength.
        assert!(matches!(
            m.wavevector_magnitude(1e9, 25.0),
            Err(Error::WavelengthOutOfRange { .. })
        ));
        assert!(m.wavevector_magnitude(0.0, 25.0).is_err());
    }

    #[test]
    fn out_of_range_temperature_extrapolates() {
        let m = ktp();
        assert!(!m.temperature_in_range(5.0));
        let n = m.refractive_index(1064e-9, 5.0).unwrap();
        assert!(n < m.refractive_index(1064e-9, 25.0).unwrap());
    }

    #[test]
    fn wavevector_at_1064() {
        let m = ktp();
        let omega = wavelength_to_omega(1064e-9);
        let k = m.wavevector_magnitude(omega, 25.0).unwrap();
        let hand = 2.0 * std::f64::consts::PI * hand_index_1064_25c() / 1064e-9;
        assert!(((k - hand) / hand).abs() < 1e-12);
    }

    #[test]
    fn expansion_law() {
        let c = CrystalSpec::ktp(7.5e-3, 9.018e-6).unwrap();
        assert_eq!(c.poling_period_at(25.0), 9.018e-6);
        assert_eq!(c.length_at(25.0), 7.5e-3);
        let dg = c.poling_period_at(35.0) - c.poling_period_at(25.0);
        assert!((dg - 0.6e-9).abs() <= 0.2 * 0.6e-9, "dG = {dg}");
        let rel_g = c.poling_period_at(35.0) / c.poling_g0;
        let rel_l = c.length_at(35.0) / c.length_l0;
        assert_eq!(rel_g, rel_l);
        assert!(rel_g - 1.0 < 1e-4);

        let lin = CrystalSpec::new(1e-3, 9e-6, 1e-5, 0.0, Arc::new(ktp())).unwrap();
        assert!((lin.poling_period_at(125.0) - 9.009e-6).abs() < 1e-18);
    }

    #[test]
    fn fixture_parse_errors() {
        let base = "label = x\nA = 1\nB1 = 1\nC1 = 0.01\nD = 0\nT1_0=0\nT1_1=0\nT1_2=0\nT1_3=0\n\
                    T2_0=0\nT2_1=0\nT2_2=0\nT2_3=0\nlambda_min_nm=400\nlambda_max_nm=2000\n\
                    temp_min_c=0\ntemp_max_c=100\n";
        let m = DispersionModel::parse(base, "t").unwrap();
        assert_eq!(m.terms.len(), 1);

        let bad = format!("{base}bogus = 1\n");
        match DispersionModel::parse(&bad, "t") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 18),
            other => panic!("{other:?}"),
        }
        let missing_c = base.replace("C1 = 0.01\n", "");
        assert!(DispersionModel::parse(&missing_c, "t").is_err());
        let dup = format!("{base}A = 2\n");
        assert!(DispersionModel::parse(&dup, "t").is_err());
    }

    #[test]
    fn digest_tracks_fixture_text() {
        let a = ktp();
        assert_eq!(a.digest().len(), 64);
        assert_eq!(a.digest(), ktp().digest());
    }
}
