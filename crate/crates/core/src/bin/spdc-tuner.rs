use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use spdc_tuner::calibrate::{
    fit_poling_period, mode_density, photon_flux, sweep, temperature_poling_equivalence,
    FitTarget, MeasuredSpectrum, SweepParam,
};
use spdc_tuner::config::{load_config, parse_formats, OutputFormat, RunConfig};
use spdc_tuner::output::{
    curve_metadata, save, write_curve_csv, write_curve_pgm, write_marginal_csv, write_metadata,
    Metadata,
};
use spdc_tuner::spectrum::{
    classify_regime, instrument_convolve, local_maxima, marginal_spectrum, InstrumentSpec,
    TuningCurve,
};
use spdc_tuner::{Error, Result};

/// Transverse-momentum resolved SPDC spectra of periodically poled crystals.
#[derive(Parser)]
#[command(name = "spdc-tuner", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Run configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overrides `output.directory`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Comma-separated output formats (csv, pgm), overrides `output.formats`.
    #[arg(long, global = true)]
    format: Option<String>,
    /// Worker threads. Output bytes do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Tuning curve S(|q|, λ) as CSV and/or PGM.
    Curve,
    /// Collimated spectrum integrated over transverse momentum.
    Marginal,
    /// One tuning curve per value of a parameter.
    Sweep {
        /// G0, w0, T or L0 (SI units, °C for T).
        #[arg(long)]
        param: SweepParam,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Fit the poling period to a measured or simulated spectrum.
    Fit {
        #[arg(long)]
        target: PathBuf,
        /// Lower and upper poling period, m.
        #[arg(long, value_delimiter = ',', required = true)]
        bounds: Vec<f64>,
        /// Search tolerance, m.
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Poling-period change equivalent to a temperature step.
    Equiv {
        #[arg(long, allow_hyphen_values = true)]
        delta_t: f64,
    },
    /// Photon flux of the pump and optional mode density.
    Flux {
        #[arg(long)]
        power_nw: f64,
        #[arg(long)]
        lambda_nm: f64,
        #[arg(long)]
        bandwidth_nm: Option<f64>,
    },
}

struct Ctx {
    cfg: RunConfig,
    out: PathBuf,
    formats: Vec<OutputFormat>,
}

impl Ctx {
    fn new(common: &Common) -> Result<Self> {
        let path = common
            .config
            .as_ref()
            .ok_or_else(|| Error::Validation {
                key: "--config".into(),
                reason: "this command needs a configuration file".into(),
            })?;
        let cfg = load_config(path)?;
        let out = common.out.clone().unwrap_or_else(|| cfg.output_directory.clone());
        let formats = match &common.format {
            Some(f) => parse_formats(f)?,
            None => cfg.formats.clone(),
        };
        std::fs::create_dir_all(&out).map_err(|e| Error::Io {
            path: out.clone(),
            source: e,
        })?;
        Ok(Ctx { cfg, out, formats })
    }

    fn meta(&self, command: &str) -> Metadata {
        let mut m = vec![("command".to_string(), command.to_string())];
        m.extend(self.cfg.entries().iter().cloned());
        m
    }

    fn curve(&self, scenario: &spdc_tuner::spectrum::Scenario) -> Result<TuningCurve> {
        let raw = scenario.tuning_curve()?;
        match &scenario.instrument {
            Some(inst) => instrument_convolve(&raw, inst),
            None => Ok(raw),
        }
    }

    fn write_curve(&self, stem: &str, curve: &TuningCurve, meta: &Metadata) -> Result<()> {
        let meta = curve_metadata(meta, curve);
        for f in &self.formats {
            match f {
                OutputFormat::Csv => save(&self.out.join(format!("{stem}.csv")), |w| {
                    write_curve_csv(w, curve, &meta)
                })?,
                OutputFormat::Pgm => {
                    save(&self.out.join(format!("{stem}.pgm")), |w| write_curve_pgm(w, curve))?
                }
            }
        }
        save(&self.out.join(format!("{stem}.meta")), |w| write_metadata(w, &meta))
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Flux {
            power_nw,
            lambda_nm,
            bandwidth_nm,
        } => {
            let flux = photon_flux(power_nw * 1e-9, lambda_nm * 1e-9)?;
            println!("{flux:.2e}");
            if let Some(bw) = bandwidth_nm {
                let n = mode_density(flux, bw * 1e-9, lambda_nm * 1e-9)?;
                println!("mode_density={n:.3}");
            }
        }
        Command::Curve => {
            let ctx = Ctx::new(&cli.common)?;
            let s = &ctx.cfg.scenario;
            let curve = ctx.curve(s)?;
            ctx.write_curve("curve", &curve, &ctx.meta("curve"))?;
            let report = classify_regime(&curve, &s.pump);
            println!(
                "regime={} peak_q_per_um={:.4} peak_lambda_nm={:.2} unconverged={}",
                report.regime,
                report.peak_q * 1e-6,
                report.peak_lambda * 1e9,
                curve.unconverged
            );
        }
        Command::Marginal => {
            let ctx = Ctx::new(&cli.common)?;
            let curve = ctx.curve(&ctx.cfg.scenario)?;
            let m = marginal_spectrum(&curve);
            let mut meta = curve_metadata(&ctx.meta("marginal"), &curve);
            meta.retain(|(k, _)| k != "unconverged_pixels");
            save(&ctx.out.join("marginal.csv"), |w| write_marginal_csv(w, &m, &meta))?;
            save(&ctx.out.join("marginal.meta"), |w| write_metadata(w, &meta))?;
            let maxima: Vec<String> = local_maxima(&m.values)
                .into_iter()
                .map(|i| format!("{:.2}", m.lambda_axis[i] * 1e9))
                .collect();
            println!("local_maxima_nm={}", maxima.join(","));
        }
        Command::Sweep { param, values } => {
            let ctx = Ctx::new(&cli.common)?;
            let results = sweep(param, &values, &ctx.cfg.scenario)?;
            let mut failed = 0;
            for (i, (value, result)) in values.iter().zip(results).enumerate() {
                let stem = format!("sweep_{param}_{i:03}");
                match result.and_then(|c| match &ctx.cfg.scenario.instrument {
                    Some(inst) => instrument_convolve(&c, inst),
                    None => Ok(c),
                }) {
                    Ok(curve) => {
                        let mut meta = ctx.meta("sweep");
                        meta.push(("sweep.param".into(), param.to_string()));
                        meta.push(("sweep.value".into(), format!("{value:e}")));
                        ctx.write_curve(&stem, &curve, &meta)?;
                        println!("{stem} {param}={value:e} ok");
                    }
                    Err(e) => {
                        failed += 1;
                        eprintln!("{stem} {param}={value:e} failed: {e}");
                    }
                }
            }
            if failed > 0 {
                return Err(Error::InvalidParameter {
                    name: "sweep".into(),
                    reason: format!("{failed} of {} values failed", values.len()),
                });
            }
        }
        Command::Fit {
            target,
            bounds,
            tol,
        } => {
            if bounds.len() != 2 {
                return Err(Error::Validation {
                    key: "--bounds".into(),
                    reason: "expected `lo,hi`".into(),
                });
            }
            let ctx = Ctx::new(&cli.common)?;
            let s = &ctx.cfg.scenario;
            let instrument = fit_instrument(&target, s.instrument)?;
            let measured = MeasuredSpectrum::from_csv_file(&target, instrument)?;
            let fit = fit_poling_period(FitTarget::Measured(&measured), s, (bounds[0], bounds[1]), tol)?;
            let mut meta = ctx.meta("fit");
            meta.push(("fit.target".into(), target.display().to_string()));
            meta.push(("fit.bounds".into(), format!("{:e},{:e}", bounds[0], bounds[1])));
            meta.push(("fit.tol".into(), format!("{tol:e}")));
            meta.push(("fit.best_g0".into(), format!("{:.6e}", fit.best_g0)));
            meta.push(("fit.residual".into(), format!("{:.6e}", fit.residual)));
            meta.push(("fit.iterations".into(), fit.iterations.to_string()));
            meta.push(("fit.converged".into(), fit.converged.to_string()));
            save(&ctx.out.join("fit.meta"), |w| write_metadata(w, &meta))?;
            println!(
                "best_g0_um={:.5} residual={:.3e} converged={}",
                fit.best_g0 * 1e6,
                fit.residual,
                fit.converged
            );
        }
        Command::Equiv { delta_t } => {
            let ctx = Ctx::new(&cli.common)?;
            let e = temperature_poling_equivalence(delta_t, &ctx.cfg.scenario)?;
            let mut meta = ctx.meta("equiv");
            meta.push(("equiv.delta_t".into(), format!("{delta_t}")));
            meta.push(("equiv.delta_g0".into(), format!("{:.6e}", e.delta_g0)));
            meta.push(("equiv.expansion_share".into(), format!("{:.6e}", e.expansion_share)));
            meta.push(("equiv.expansion_fraction".into(), format!("{:.6}", e.expansion_fraction)));
            save(&ctx.out.join("equiv.meta"), |w| write_metadata(w, &meta))?;
            println!(
                "delta_g0_nm={:.3} expansion_share_nm={:.3} expansion_fraction={:.4}",
                e.delta_g0 * 1e9,
                e.expansion_share * 1e9,
                e.expansion_fraction
            );
        }
    }
    Ok(())
}

/// Measured data goes through the configured instrument, or the reference
/// setup if none is configured. A simulated curve is compared unsmoothed.
fn fit_instrument(target: &Path, configured: Option<InstrumentSpec>) -> Result<InstrumentSpec> {
    if let Some(inst) = configured {
        return Ok(inst);
    }
    let text = std::fs::read_to_string(target).map_err(|e| Error::Io {
        path: target.to_path_buf(),
        source: e,
    })?;
    let header = text.lines().find(|l| !l.trim_start().starts_with('#')).unwrap_or("");
    Ok(if header.trim().ends_with("density") {
        InstrumentSpec {
            fiber_core_diameter: 0.0,
            osa_fwhm: 0.0,
            ..InstrumentSpec::reference_setup()
        }
    } else {
        InstrumentSpec::reference_setup()
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.common.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build() {
            Ok(pool) => pool.install(|| run(cli)),
            Err(e) => {
                eprintln!("error: cannot start {n} worker threads: {e}");
                return ExitCode::FAILURE;
            }
        },
        None => run(cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
