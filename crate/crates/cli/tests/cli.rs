use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::Command;

use num_complex::Complex64;
use qcloak::radial::RadialSystem;
use qcloak_cli::commands::{compute_convergence, sample_field, segment_grid, slice_grid};
use qcloak_cli::config::ExperimentConfig;

fn qcloak(out: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_qcloak"))
        .args(args)
        .env("QCLOAK_OUTPUT_DIR", out)
        .env_remove("RUST_BACKTRACE")
        .output()
        .expect("binary runs")
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn synthesize_is_deterministic_and_replayable() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    let args = ["synthesize", "--radius", "1.01", "--layers", "40", "--c-inn", "-98.5"];
    assert!(qcloak(&a, &args).status.success());
    assert!(qcloak(&b, &args).status.success());
    for name in ["manifest.toml", "medium.txt", "potential.txt", "potential_profile.csv"] {
        assert_eq!(read(&a, name), read(&b, name), "{name}");
    }
    let manifest = a.join("manifest.toml");
    let out = qcloak(&c, &["synthesize", "--config", manifest.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(read(&a, "medium.txt"), read(&c, "medium.txt"));

    let medium = qcloak::io::read_layered(&read(&a, "medium.txt")).unwrap();
    assert_eq!(medium.shells().len(), 42);
    assert!(read(&a, "potential_profile.csv").contains("# truncation_radius = 1.01"));
}

#[test]
fn full_truncation_leaves_free_space() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(qcloak(tmp.path(), &["synthesize", "--radius", "2"]).status.success());
    let medium = qcloak::io::read_layered(&read(tmp.path(), "medium.txt")).unwrap();
    assert!(medium.shells().iter().all(|s| s.sigma == 1.0 && s.a == 1.0));
}

#[test]
fn free_dirichlet_energy_is_refused_unless_forced() {
    let tmp = tempfile::tempdir().unwrap();
    let e = format!("{}", (PI / 3.0).powi(2));
    let out = qcloak(tmp.path(), &["convergence", "--energy", &e]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("free-ball Dirichlet") && err.contains("1.0966"), "{err}");
    let forced = qcloak(tmp.path(), &["phase-shifts", "--energy", &e, "--force", "--radius", "2"]);
    assert!(forced.status.success());
}

#[test]
fn invalid_config_names_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let out = qcloak(tmp.path(), &["synthesize", "--step-radius", "1.5"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("step_radius"));
}

#[test]
fn free_pipeline_hits_the_regression_floor() {
    let cfg = ExperimentConfig { radii: vec![2.0, 2.0], ..Default::default() };
    for row in compute_convergence(&cfg).unwrap() {
        assert!(row.dn_deviation < 1e-10 && row.sigma_tot < 1e-20, "{row:?}");
    }
}

#[test]
fn free_field_is_the_plane_wave() {
    let k = 0.5f64.sqrt();
    for points in [segment_grid(61), slice_grid(21)] {
        let field = sample_field(&RadialSystem::free(), 0.5, &points, None).unwrap();
        for (p, v) in points.iter().zip(&field) {
            if v.re.is_nan() {
                continue;
            }
            let err = (v - Complex64::from_polar(1.0, k * p[2])).norm();
            assert!(err < 1e-8, "{p:?}: {err:e}");
        }
    }
}

#[test]
fn scenarios_and_toy_scan() {
    let tmp = tempfile::tempdir().unwrap();
    let out = qcloak(tmp.path(), &["scenario", "neumann-trap", "--segment-points", "50", "--slice-points", "10"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(text.contains("verdict: trapped"), "{text}");
    let manifest = read(tmp.path(), "manifest.toml");
    assert!(manifest.contains("c_inn = -71.45") && manifest.contains("incident = +z"), "{manifest}");

    let toy = tmp.path().join("toy");
    let out = qcloak(&toy, &["resonance-scan", "--toy", "--scan-window", "0.2,0.35", "--l-max", "0"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("fitted amplification exponent -1.0"), "{text}");
}
