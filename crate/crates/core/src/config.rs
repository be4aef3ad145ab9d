//! Run configuration: a line-oriented `section.key = value` file with a
//! strict schema.
//!
//! Every key has a fixed unit (encoded in its name). Missing optional keys
//! take their documented defaults and the resolved values are kept in
//! [`RunConfig::entries`] so outputs can echo the full effective input.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::dispersion::{CrystalSpec, DispersionModel};
use crate::error::{Error, Result};
use crate::phasematch::PumpSpec;
use crate::spectrum::{GridSpec, InstrumentSpec, QuadratureSpec, Scenario};

/// Output file kinds selectable with `output.formats`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Pgm,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "csv" => Ok(OutputFormat::Csv),
            "pgm" => Ok(OutputFormat::Pgm),
            other => Err(Error::invalid("format", format!("unknown output format `{other}`"))),
        }
    }
}

/// Parses a comma-separated format list such as `csv,pgm`.
pub fn parse_formats(list: &str) -> Result<Vec<OutputFormat>> {
    let mut out = Vec::new();
    for item in list.split(',').filter(|s| !s.trim().is_empty()) {
        let f: OutputFormat = item.parse()?;
        if !out.contains(&f) {
            out.push(f);
        }
    }
    if out.is_empty() {
        return Err(Error::invalid("format", "empty format list"));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Real,
    Count,
    Text,
}

struct Key {
    name: &'static str,
    kind: Kind,
    default: Option<&'static str>,
}

const fn key(name: &'static str, kind: Kind, default: Option<&'static str>) -> Key {
    Key {
        name,
        kind,
        default,
    }
}

// Order here is the order of the metadata echo.
const SCHEMA: &[Key] = &[
    key("pump.wavelength_nm", Kind::Real, None),
    key("pump.waist_um", Kind::Real, None),
    key("pump.power_w", Kind::Real, None),
    key("crystal.length_mm", Kind::Real, None),
    key("crystal.poling_um", Kind::Real, None),
    key("crystal.temperature_c", Kind::Real, Some("25")),
    key("crystal.alpha", Kind::Real, Some("6.7e-6")),
    key("crystal.beta", Kind::Real, Some("11e-9")),
    key("crystal.dispersion", Kind::Text, Some("builtin")),
    key("grid.lambda_min_nm", Kind::Real, Some("1000")),
    key("grid.lambda_max_nm", Kind::Real, Some("1140")),
    key("grid.lambda_points", Kind::Count, Some("256")),
    key("grid.q_min_per_um", Kind::Real, None),
    key("grid.q_max_per_um", Kind::Real, Some("0.25")),
    key("grid.q_points", Kind::Count, Some("256")),
    key("quad.points", Kind::Count, Some("64")),
    key("quad.halfwidth_factor", Kind::Real, Some("5")),
    key("quad.tolerance", Kind::Real, Some("1e-3")),
    key("quad.max_points", Kind::Count, Some("512")),
    key("instrument.core_um", Kind::Real, None),
    key("instrument.f2_mm", Kind::Real, None),
    key("instrument.osa_fwhm_nm", Kind::Real, None),
    key("output.directory", Kind::Text, Some(".")),
    key("output.formats", Kind::Text, Some("csv,pgm")),
];

const REQUIRED: &[&str] = &[
    "pump.wavelength_nm",
    "pump.waist_um",
    "crystal.length_mm",
    "crystal.poling_um",
];

/// Fully validated run input.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub output_directory: PathBuf,
    pub formats: Vec<OutputFormat>,
    entries: Vec<(String, String)>,
}

impl RunConfig {
    /// Effective `key=value` pairs, defaults included, in schema order.
    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    /// Looks up one effective value as written in the echo.
    pub fn entry(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

/// Reads and validates a config file. Relative paths inside it resolve
/// against the file's directory.
pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config(&text, &path.display().to_string(), base)
}

/// Parses config text; `source` names it in errors and `base_dir` anchors
/// relative paths.
pub fn parse_config(text: &str, source: &str, base_dir: &Path) -> Result<RunConfig> {
    let raw = read_pairs(text, source)?;
    let invalid = |key: &str, reason: String| Error::Validation {
        key: key.to_string(),
        reason,
    };

    for req in REQUIRED {
        if !raw.contains_key(*req) {
            return Err(invalid(req, "required key is missing".into()));
        }
    }

    // Resolve every value (explicit or default) to text first, then type it.
    let mut text_of: BTreeMap<&'static str, String> = BTreeMap::new();
    for k in SCHEMA {
        if let Some(v) = raw.get(k.name).map(|(_, v)| v.clone()).or(k.default.map(String::from)) {
            text_of.insert(k.name, v);
        }
    }
    let instrument_given = SCHEMA
        .iter()
        .any(|k| k.name.starts_with("instrument.") && raw.contains_key(k.name));
    if instrument_given {
        text_of.entry("instrument.core_um").or_insert_with(|| "200".into());
        text_of.entry("instrument.f2_mm").or_insert_with(|| "50".into());
        text_of.entry("instrument.osa_fwhm_nm").or_insert_with(|| "2".into());
    }
    let q_max_text = text_of["grid.q_max_per_um"].clone();
    text_of
        .entry("grid.q_min_per_um")
        .or_insert_with(|| format!("-{}", q_max_text.trim_start_matches('+')));

    let mut reals: BTreeMap<&'static str, f64> = BTreeMap::new();
    let mut counts: BTreeMap<&'static str, usize> = BTreeMap::new();
    for k in SCHEMA {
        let Some(v) = text_of.get(k.name) else { continue };
        let line = raw.get(k.name).map_or(0, |(l, _)| *l);
        match k.kind {
            Kind::Real => {
                let x: f64 = v
                    .parse()
                    .ok()
                    .filter(|x: &f64| x.is_finite())
                    .ok_or_else(|| parse_error(source, line, format!("`{}`: not a finite number: `{v}`", k.name)))?;
                reals.insert(k.name, x);
            }
            Kind::Count => {
                let n: usize = v
                    .parse()
                    .map_err(|_| parse_error(source, line, format!("`{}`: not a non-negative integer: `{v}`", k.name)))?;
                counts.insert(k.name, n);
            }
            Kind::Text => {}
        }
    }

    let positive = |k: &'static str| -> Result<f64> {
        let v = reals[k];
        if v > 0.0 {
            Ok(v)
        } else {
            Err(invalid(k, format!("must be positive, got {v}")))
        }
    };
    let non_negative = |k: &'static str| -> Result<f64> {
        let v = reals[k];
        if v >= 0.0 {
            Ok(v)
        } else {
            Err(invalid(k, format!("must be non-negative, got {v}")))
        }
    };

    let mut pump = PumpSpec::from_wavelength(positive("pump.wavelength_nm")? / 1e9, positive("pump.waist_um")? / 1e6)
        .map_err(|e| invalid("pump", e.to_string()))?;
    if reals.contains_key("pump.power_w") {
        pump = pump
            .with_power(non_negative("pump.power_w")?)
            .map_err(|e| invalid("pump.power_w", e.to_string()))?;
    }

    let dispersion_text = &text_of["crystal.dispersion"];
    let dispersion = if dispersion_text == "builtin" {
        DispersionModel::ktp_z()
    } else {
        let p = Path::new(dispersion_text);
        let p = if p.is_absolute() { p.to_path_buf() } else { base_dir.join(p) };
        DispersionModel::from_file(&p).map_err(|e| invalid("crystal.dispersion", e.to_string()))?
    };
    let alpha = reals["crystal.alpha"];
    let beta = reals["crystal.beta"];
    let crystal = CrystalSpec::new(
        positive("crystal.length_mm")? / 1e3,
        positive("crystal.poling_um")? / 1e6,
        alpha,
        beta,
        Arc::new(dispersion),
    )
    .map_err(|e| invalid("crystal", e.to_string()))?;
    let temperature_c = reals["crystal.temperature_c"];
    if !(temperature_c > -273.15) {
        return Err(invalid("crystal.temperature_c", "must be above absolute zero".into()));
    }
    if crystal.expansion_factor(temperature_c) <= 0.0 {
        return Err(invalid("crystal.temperature_c", "expansion law gives a non-positive length".into()));
    }

    let q_max = positive("grid.q_max_per_um")?;
    let q_min = reals["grid.q_min_per_um"];
    if q_min != -q_max {
        return Err(invalid(
            "grid.q_min_per_um",
            format!("q axis must be symmetric, expected {} got {q_min}", -q_max),
        ));
    }
    let grid = GridSpec {
        lambda_min: positive("grid.lambda_min_nm")? / 1e9,
        lambda_max: positive("grid.lambda_max_nm")? / 1e9,
        lambda_points: counts["grid.lambda_points"],
        q_max: q_max * 1e6,
        q_points: counts["grid.q_points"],
    };
    if grid.lambda_min >= grid.lambda_max {
        return Err(invalid("grid.lambda_max_nm", "must exceed grid.lambda_min_nm".into()));
    }
    for k in ["grid.lambda_points", "grid.q_points"] {
        if counts[k] < 2 {
            return Err(invalid(k, "need at least 2 points".into()));
        }
    }
    for (k, lambda) in [("grid.lambda_min_nm", grid.lambda_min), ("grid.lambda_max_nm", grid.lambda_max)] {
        let omega = crate::dispersion::wavelength_to_omega(lambda);
        crate::phasematch::check_signal(omega, &pump)
            .and_then(|_| crate::phasematch::check_wavelengths(omega, &pump, &crystal))
            .map_err(|e| invalid(k, e.to_string()))?;
    }
    grid.validate().map_err(|e| invalid("grid", e.to_string()))?;

    let quad = QuadratureSpec {
        points_per_axis: counts["quad.points"],
        halfwidth_factor: reals["quad.halfwidth_factor"],
        refine_tol: reals["quad.tolerance"],
        max_points: counts["quad.max_points"],
    };
    if let Err(Error::InvalidParameter { name, reason }) = quad.validate() {
        return Err(invalid(&name, reason));
    }

    let instrument = if instrument_given {
        let inst = InstrumentSpec {
            fiber_core_diameter: non_negative("instrument.core_um")? / 1e6,
            f2: positive("instrument.f2_mm")? / 1e3,
            osa_fwhm: non_negative("instrument.osa_fwhm_nm")? / 1e9,
        };
        Some(inst)
    } else {
        None
    };

    let formats = parse_formats(&text_of["output.formats"])
        .map_err(|e| invalid("output.formats", e.to_string()))?;
    let out_text = &text_of["output.directory"];
    let out = Path::new(out_text);
    let output_directory = if out.is_absolute() { out.to_path_buf() } else { base_dir.join(out) };

    let mut entries: Vec<(String, String)> = SCHEMA
        .iter()
        .filter_map(|k| text_of.get(k.name).map(|v| (k.name.to_string(), v.clone())))
        .collect();
    entries.push((
        "crystal.dispersion_label".into(),
        crystal.dispersion.label.clone(),
    ));
    entries.push((
        "crystal.dispersion_sha256".into(),
        crystal.dispersion.digest().to_string(),
    ));

    Ok(RunConfig {
        scenario: Scenario {
            pump,
            crystal,
            temperature_c,
            grid,
            quad,
            instrument,
        },
        output_directory,
        formats,
        entries,
    })
}

fn parse_error(source: &str, line: usize, message: String) -> Error {
    Error::Parse {
        path: source.to_string(),
        line,
        message,
    }
}

/// Splits the text into `key -> (line, value)`, rejecting malformed lines,
/// duplicates and keys outside the schema.
fn read_pairs(text: &str, source: &str) -> Result<BTreeMap<String, (usize, String)>> {
    let mut out = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            parse_error(source, line_no, format!("expected `section.key = value`, got `{line}`"))
        })?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            return Err(parse_error(source, line_no, format!("empty key or value in `{line}`")));
        }
        if !SCHEMA.iter().any(|s| s.name == k) {
            return Err(Error::Validation {
                key: k.to_string(),
                reason: format!("unknown key (line {line_no})"),
            });
        }
        if out.insert(k.to_string(), (line_no, v.to_string())).is_some() {
            return Err(parse_error(source, line_no, format!("duplicate key `{k}`")));
        }
    }
    Ok(out)
}
