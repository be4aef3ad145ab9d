//! Browser bindings: tuning-curve heatmap, collimated marginal and the
//! collinear calibration point for the interactive page in `www/`.

use spdc_tuner::calibrate::photon_flux;
use spdc_tuner::dispersion::CrystalSpec;
use spdc_tuner::phasematch::PumpSpec;
use spdc_tuner::spectrum::{marginal_spectrum, GridSpec, QuadratureSpec, Scenario};
use wasm_bindgen::prelude::*;

const PUMP_NM: f64 = 532.0;

/// Slider state shared by every export.
#[derive(Debug, Clone, Copy)]
pub struct Knobs {
    pub poling_um: f64,
    pub waist_um: f64,
    pub length_mm: f64,
    pub temperature_c: f64,
    pub lambda_points: usize,
    pub q_points: usize,
}

impl Knobs {
    pub fn scenario(&self) -> Result<Scenario, String> {
        let err = |e: spdc_tuner::Error| e.to_string();
        if !(2..=512).contains(&self.lambda_points) || !(2..=512).contains(&self.q_points) {
            return Err("grid must have 2..=512 points per axis".into());
        }
        Ok(Scenario {
            pump: PumpSpec::from_wavelength(PUMP_NM / 1e9, self.waist_um / 1e6).map_err(err)?,
            crystal: CrystalSpec::ktp(self.length_mm / 1e3, self.poling_um / 1e6).map_err(err)?,
            temperature_c: self.temperature_c,
            grid: GridSpec {
                lambda_points: self.lambda_points,
                q_points: self.q_points,
                ..GridSpec::default()
            },
            // Coarser start than the CLI default keeps slider drags responsive;
            // refinement still enforces the tolerance.
            quad: QuadratureSpec {
                points_per_axis: 32,
                ..QuadratureSpec::default()
            },
            instrument: None,
        })
    }

    /// Normalised heatmap, rows ordered from the longest wavelength down
    /// so row 0 is the top of the canvas.
    pub fn heatmap(&self) -> Result<Vec<f32>, String> {
        let curve = self.scenario()?.tuning_curve().map_err(|e| e.to_string())?;
        let mut out = Vec::with_capacity(curve.values.len());
        for r in (0..curve.rows()).rev() {
            out.extend(curve.row(r).iter().map(|v| *v as f32));
        }
        Ok(out)
    }

    /// Collimated spectrum, longest wavelength first to match the heatmap.
    pub fn marginal(&self) -> Result<Vec<f32>, String> {
        let curve = self.scenario()?.tuning_curve().map_err(|e| e.to_string())?;
        let m = marginal_spectrum(&curve);
        Ok(m.values.iter().rev().map(|v| *v as f32).collect())
    }
}

fn js(e: String) -> JsError {
    JsError::new(&e)
}

fn knobs(poling_um: f64, waist_um: f64, length_mm: f64, temperature_c: f64, lambda_points: usize, q_points: usize) -> Knobs {
    Knobs {
        poling_um,
        waist_um,
        length_mm,
        temperature_c,
        lambda_points,
        q_points,
    }
}

/// Heatmap of `S(|q|, λ)` over 1000–1140 nm × ±0.25 rad/µm.
#[wasm_bindgen]
pub fn tuning_curve(
    poling_um: f64,
    waist_um: f64,
    length_mm: f64,
    temperature_c: f64,
    lambda_points: usize,
    q_points: usize,
) -> Result<Vec<f32>, JsError> {
    knobs(poling_um, waist_um, length_mm, temperature_c, lambda_points, q_points)
        .heatmap()
        .map_err(js)
}

#[wasm_bindgen]
pub fn marginal(
    poling_um: f64,
    waist_um: f64,
    length_mm: f64,
    temperature_c: f64,
    lambda_points: usize,
    q_points: usize,
) -> Result<Vec<f32>, JsError> {
    knobs(poling_um, waist_um, length_mm, temperature_c, lambda_points, q_points)
        .marginal()
        .map_err(js)
}

/// Poling period (µm at 25 °C) that phase matches collinear degenerate
/// emission at `temperature_c`.
#[wasm_bindgen]
pub fn collinear_period_um(length_mm: f64, temperature_c: f64) -> Result<f64, JsError> {
    collinear_period(length_mm, temperature_c).map_err(js)
}

pub fn collinear_period(length_mm: f64, temperature_c: f64) -> Result<f64, String> {
    let s = knobs(9.0, 23.27, length_mm, temperature_c, 2, 2).scenario()?;
    s.collinear_degenerate_period()
        .map(|g| g * 1e6)
        .map_err(|e| e.to_string())
}

/// Photons per second for `power_nw` at `lambda_nm`.
#[wasm_bindgen]
pub fn flux(power_nw: f64, lambda_nm: f64) -> Result<f64, JsError> {
    photon_flux(power_nw / 1e9, lambda_nm / 1e9).map_err(|e| js(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heatmap_is_top_down_and_normalised() {
        let k = knobs(9.03, 23.27, 7.5, 25.0, 12, 10);
        let h = k.heatmap().unwrap();
        assert_eq!(h.len(), 120);
        assert_eq!(h.iter().cloned().fold(0.0f32, f32::max), 1.0);
        let curve = k.scenario().unwrap().tuning_curve().unwrap();
        assert_eq!(h[0], curve.value(11, 0) as f32);
        assert_eq!(k.marginal().unwrap().len(), 12);
    }

    #[test]
    fn calibration_point_and_bad_input() {
        let g = collinear_period(7.5, 25.0).unwrap();
        assert!((g - 9.018).abs() < 0.05, "{g}");
        assert!(knobs(9.0, -1.0, 7.5, 25.0, 8, 8).heatmap().is_err());
        assert!(knobs(9.0, 23.0, 7.5, 25.0, 1, 8).heatmap().is_err());
    }
}
