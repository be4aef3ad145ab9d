#![cfg(feature = "cli")]

mod common;

use std::path::Path;
use std::process::{Command, Output};

fn tuner(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spdc-tuner"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.display().to_string()
}

const SMALL: &str = "\
pump.wavelength_nm = 532
pump.waist_um = 23.27
crystal.length_mm = 7.5
crystal.poling_um = 9.03
grid.lambda_points = 20
grid.q_points = 18
quad.points = 32
";

#[test]
fn flux_prints_the_photon_rate() {
    let out = tuner(&["flux", "--power-nw", "400", "--lambda-nm", "1064"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), "2.14e12");
    let out = tuner(&["flux", "--power-nw", "400", "--lambda-nm", "1064", "--bandwidth-nm", "50"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("mode_density=0.16"), "{text}");
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.cfg", SMALL);
    let mut files = Vec::new();
    for threads in ["1", "8"] {
        let out_dir = dir.path().join(format!("t{threads}"));
        let out = tuner(&[
            "curve",
            "--config",
            &cfg,
            "--out",
            out_dir.to_str().unwrap(),
            "--threads",
            threads,
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        files.push(["curve.csv", "curve.pgm", "curve.meta"].map(|f| std::fs::read(out_dir.join(f)).unwrap()));
    }
    assert_eq!(files[0], files[1]);
    let meta = String::from_utf8(files[0][2].clone()).unwrap();
    for key in ["grid.q_min_per_um=-0.25", "quad.max_points=512", "crystal.dispersion_sha256=", "raw_max="] {
        assert!(meta.contains(key), "{key}");
    }
}

#[test]
fn collinear_degenerate_config_peaks_on_axis() {
    let dir = tempfile::tempdir().unwrap();
    let g = common::g_star();
    let cfg = write_config(
        dir.path(),
        "fig.cfg",
        &format!(
            "pump.wavelength_nm = 532\npump.waist_um = 23.27\ncrystal.length_mm = 7.5\n\
             crystal.poling_um = {}\ngrid.lambda_points = 141\ngrid.q_points = 51\noutput.formats = csv\n",
            g * 1e6
        ),
    );
    let out = tuner(&["curve", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    assert!(!dir.path().join("curve.pgm").exists());
    let text = std::fs::read_to_string(dir.path().join("curve.csv")).unwrap();
    let rows: Vec<[f64; 3]> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| {
            let v: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            [v[0], v[1], v[2]]
        })
        .collect();
    let top = rows.iter().fold(rows[0], |b, r| if r[2] > b[2] { *r } else { b });
    assert!(top[0].abs() < 0.02, "{top:?}");
    // The collinear spectrum is flat-topped, so the degenerate on-axis
    // pixel sits within a few percent of the global maximum.
    let centre = rows
        .iter()
        .find(|r| r[0] == 0.0 && (r[1] - 1064.0).abs() < 0.5)
        .unwrap();
    assert!(centre[2] > 0.9, "{centre:?}");
}

#[test]
fn config_errors_exit_nonzero_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let typo = write_config(dir.path(), "typo.cfg", &format!("{SMALL}crystal.polling = 9\n"));
    let out = tuner(&["curve", "--config", &typo]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("crystal.polling"));

    let broken = write_config(dir.path(), "broken.cfg", "pump.wavelength_nm 532\n");
    let out = tuner(&["curve", "--config", &broken]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains(":1:"));

    let out = tuner(&["curve"]);
    assert!(!out.status.success());
    let out = tuner(&["flux", "--power-nw", "-1", "--lambda-nm", "1064"]);
    assert!(!out.status.success());
}

#[test]
fn sweep_writes_each_value_and_reports_failures() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.cfg", &format!("{SMALL}output.formats = csv\n"));
    let out_dir = dir.path().join("sweep");
    let out = tuner(&[
        "sweep",
        "--config",
        &cfg,
        "--out",
        out_dir.to_str().unwrap(),
        "--param",
        "w0",
        "--values",
        "23.27e-6,-1,46.53e-6",
    ]);
    assert!(!out.status.success());
    assert!(out_dir.join("sweep_w0_000.csv").exists());
    assert!(!out_dir.join("sweep_w0_001.csv").exists());
    assert!(out_dir.join("sweep_w0_002.csv").exists());
    let meta = std::fs::read_to_string(out_dir.join("sweep_w0_002.meta")).unwrap();
    assert!(meta.contains("sweep.value=4.653e-5"));
}

#[test]
fn fit_recovers_the_period_of_its_own_curve() {
    let dir = tempfile::tempdir().unwrap();
    let gen = write_config(dir.path(), "gen.cfg", &format!("{SMALL}output.formats = csv\n"));
    let out = tuner(&["curve", "--config", &gen, "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let start = write_config(dir.path(), "start.cfg", &SMALL.replace("9.03", "9.0"));
    let target = dir.path().join("curve.csv");
    let out = tuner(&[
        "fit",
        "--config",
        &start,
        "--out",
        dir.path().to_str().unwrap(),
        "--target",
        target.to_str().unwrap(),
        "--bounds",
        "8.97e-6,9.07e-6",
        "--tol",
        "1e-10",
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let best: f64 = text
        .split_whitespace()
        .find_map(|w| w.strip_prefix("best_g0_um="))
        .unwrap()
        .parse()
        .unwrap();
    assert!((best - 9.03).abs() < 0.5e-3, "{text}");
    assert!(dir.path().join("fit.meta").exists());
}
