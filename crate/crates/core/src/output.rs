//! Byte-stable writers for tuning curves, marginals and run metadata.
//!
//! Nothing here depends on timing or thread count, so identical inputs
//! always produce identical files.

use std::io::{self, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::spectrum::{MarginalSpectrum, TuningCurve};

/// Ordered `key=value` pairs echoed into every output.
pub type Metadata = Vec<(String, String)>;

pub const CURVE_HEADER: &str = "q_per_um,lambda_nm,density";
pub const MARGINAL_HEADER: &str = "lambda_nm,density";

/// Adds the per-curve fields to a copy of the run metadata.
pub fn curve_metadata(run: &[(String, String)], curve: &TuningCurve) -> Metadata {
    let mut meta = run.to_vec();
    meta.push(("raw_max".into(), format!("{:.8e}", curve.raw_max)));
    meta.push(("unconverged_pixels".into(), curve.unconverged.to_string()));
    meta.push(("params_digest".into(), curve.params_digest.clone()));
    meta
}

fn write_comments<W: Write>(w: &mut W, meta: &[(String, String)]) -> io::Result<()> {
    for (k, v) in meta {
        writeln!(w, "# {k}={v}")?;
    }
    Ok(())
}

/// Long-format grid: one row per pixel, wavelength rows outermost,
/// densities with nine significant digits.
pub fn write_curve_csv<W: Write>(w: &mut W, curve: &TuningCurve, meta: &[(String, String)]) -> io::Result<()> {
    write_comments(w, meta)?;
    writeln!(w, "{CURVE_HEADER}")?;
    for (i, lambda) in curve.lambda_axis.iter().enumerate() {
        let lambda_nm = lambda * 1e9;
        for (q, v) in curve.q_axis.iter().zip(curve.row(i)) {
            writeln!(w, "{:.6},{:.6},{:.8e}", q * 1e-6, lambda_nm, v)?;
        }
    }
    Ok(())
}

/// 16-bit binary graymap, largest wavelength on the top row.
pub fn write_curve_pgm<W: Write>(w: &mut W, curve: &TuningCurve) -> io::Result<()> {
    write!(w, "P5\n{} {}\n65535\n", curve.cols(), curve.rows())?;
    let mut buf = Vec::with_capacity(2 * curve.cols());
    for i in (0..curve.rows()).rev() {
        buf.clear();
        for v in curve.row(i) {
            let level = (v.clamp(0.0, 1.0) * 65535.0).round() as u16;
            buf.extend_from_slice(&level.to_be_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

pub fn write_marginal_csv<W: Write>(
    w: &mut W,
    marginal: &MarginalSpectrum,
    meta: &[(String, String)],
) -> io::Result<()> {
    write_comments(w, meta)?;
    writeln!(w, "{MARGINAL_HEADER}")?;
    for (lambda, v) in marginal.lambda_axis.iter().zip(&marginal.values) {
        writeln!(w, "{:.6},{:.8e}", lambda * 1e9, v)?;
    }
    Ok(())
}

/// Plain `key=value` lines.
pub fn write_metadata<W: Write>(w: &mut W, meta: &[(String, String)]) -> io::Result<()> {
    for (k, v) in meta {
        writeln!(w, "{k}={v}")?;
    }
    Ok(())
}

/// Renders with `f` into memory, then writes the file in one go.
pub fn save(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> io::Result<()>) -> Result<()> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| Error::io(path, e))?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> TuningCurve {
        TuningCurve::from_raw(
            vec![-1e5, 0.0, 1e5],
            vec![1000e-9, 1100e-9],
            vec![0.5, 1.0, 0.5, 0.0, 0.25, 0.0],
            "digest".into(),
            0,
        )
        .unwrap()
    }

    #[test]
    fn csv_layout() {
        let mut out = Vec::new();
        let meta = vec![("a".to_string(), "1".to_string())];
        write_curve_csv(&mut out, &tiny(), &meta).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# a=1");
        assert_eq!(lines[1], CURVE_HEADER);
        assert_eq!(lines[2], "-0.100000,1000.000000,5.00000000e-1");
        assert_eq!(lines[3], "0.000000,1000.000000,1.00000000e0");
        assert_eq!(lines[5], "-0.100000,1100.000000,0.00000000e0");
        assert_eq!(lines.len(), 8);
    }

    #[test]
    fn pgm_layout() {
        let mut out = Vec::new();
        write_curve_pgm(&mut out, &tiny()).unwrap();
        let header = b"P5\n3 2\n65535\n";
        assert_eq!(&out[..header.len()], header);
        let px = &out[header.len()..];
        assert_eq!(px.len(), 12);
        // top row is the 1100 nm row
        assert_eq!(&px[..6], &[0, 0, 0x40, 0, 0, 0]);
        assert_eq!(&px[6..], &[0x80, 0, 0xff, 0xff, 0x80, 0]);
    }
}
