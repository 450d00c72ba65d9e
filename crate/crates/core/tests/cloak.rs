use std::f64::consts::PI;

use qcloak::radial::RadialSystem;
use qcloak::scattering::{dn_spectrum, free_dn_spectrum, phase_shifts, total_cross_section};
use qcloak::spectral::{dirichlet_eigenvalues, resonance_scan, ModeKind, ResonanceOptions, ScanOptions};
use qcloak::synthesis::{
    gauge_potential, layered_cloak, mollified_medium, CorePotential, CorePreset, GaugeMode, Grading, HomogenizationSpec, Layer,
    LayeredMedium,
};

const SWEEP: [f64; 4] = [1.1, 1.05, 1.01, 1.005];

fn proportional(r: f64) -> HomogenizationSpec {
    let n = (5.0 / (r - 1.0)).round() as usize;
    HomogenizationSpec::uniform(n + n % 2)
}

fn cloak(r: f64, spec: &HomogenizationSpec, c_inn: f64) -> RadialSystem {
    layered_cloak(r, CorePreset::Doubled, spec, CorePotential::step(c_inn, 0.9).unwrap())
        .unwrap()
        .into()
}

fn reference_cloak(c_inn: f64) -> RadialSystem {
    let spec = HomogenizationSpec { n_layers: 50, grading: Grading::Uniform, core_layers: 20 };
    cloak(1.005, &spec, c_inn)
}

#[test]
fn dn_and_cross_section_converge() {
    let free = free_dn_spectrum(0.5, 14).unwrap();
    let rows: Vec<(f64, f64)> = SWEEP
        .iter()
        .map(|&r| {
            let system = cloak(r, &proportional(r), -98.5);
            let dn = dn_spectrum(&system, 0.5, None).unwrap();
            let sigma = total_cross_section(&phase_shifts(&system, 0.5, None).unwrap());
            (dn.max_deviation(&free), sigma)
        })
        .collect();
    for pair in rows.windows(2) {
        assert!(pair[1].0 < pair[0].0 && pair[1].1 < pair[0].1, "{rows:?}");
    }
    assert!(rows[0].1 / rows[3].1 >= 10.0, "{rows:?}");
}

#[test]
fn high_channels_are_screened() {
    let shifts = phase_shifts(&reference_cloak(-98.5), 0.5, None).unwrap();
    let half = shifts.l_max() / 2;
    for (l, d) in shifts.delta.iter().enumerate().skip(half) {
        assert!(d.abs() < 1e-8, "l = {l}: {d:e}");
    }
}

#[test]
fn interior_eigenvalue_converges_and_concentrates() {
    let points: Vec<_> = SWEEP
        .iter()
        .map(|&r| {
            let found = dirichlet_eigenvalues(&cloak(r, &proportional(r), -71.45), 0, (0.3, 0.6), &ScanOptions::default())
                .unwrap();
            assert_eq!(found.len(), 1, "R = {r}: {found:?}");
            found[0]
        })
        .collect();
    let last = points[3].energy;
    let gaps: Vec<f64> = points[..3].iter().map(|p| (p.energy - last).abs()).collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    for p in &points[2..] {
        assert_eq!(p.kind, ModeKind::Interior);
        assert!(p.concentration > 0.9 && !p.borderline);
    }
}

#[test]
fn finer_scan_finds_no_extra_roots() {
    let system = reference_cloak(1.858);
    let coarse = dirichlet_eigenvalues(&system, 0, (0.25, 0.75), &ScanOptions::default()).unwrap();
    let fine = ScanOptions { step: Some(0.5 / 20_000.0), ..ScanOptions::default() };
    let dense = dirichlet_eigenvalues(&system, 0, (0.25, 0.75), &fine).unwrap();
    assert_eq!(coarse.len(), dense.len());
    for (a, b) in coarse.iter().zip(&dense) {
        assert!((a.energy - b.energy).abs() < 1e-10);
    }
}

#[test]
fn two_shell_toy_pole_exponent() {
    let toy = LayeredMedium::new(
        vec![
            Layer { r_in: 0.0, r_out: 1.5, sigma: 1.0, a: 4.0 },
            Layer { r_in: 1.5, r_out: 3.0, sigma: 1.0, a: 4.0 },
        ],
        CorePotential::zero(),
    )
    .unwrap();
    let report = resonance_scan(&toy.into(), &[0], (0.2, 0.35), &ResonanceOptions::default()).unwrap();
    let pole = report.fitted_pole.expect("toy pole");
    assert!((pole.energy - PI * PI / 36.0).abs() < 1e-10);
    let exponent = report.scaling_exponent.unwrap();
    assert!((exponent + 1.0).abs() < 0.1, "{exponent}");
}

#[test]
fn neumann_trap_and_pass_through() {
    let channels: Vec<usize> = (0..=14).collect();
    let opts = ResonanceOptions::default();
    let trap = resonance_scan(&reference_cloak(-71.45), &channels, (0.4, 0.6), &opts).unwrap();
    assert!(trap.amplification >= 1e3, "{}", trap.amplification);
    let pole = trap.fitted_pole.unwrap();
    assert!(pole.concentration > 0.9);
    assert!((trap.scaling_exponent.unwrap() + 1.0).abs() < 0.1);

    let pass = resonance_scan(&reference_cloak(-98.5), &channels, (0.4, 0.6), &opts).unwrap();
    assert!(pass.amplification < 10.0, "{}", pass.amplification);
    assert!(pass.fitted_pole.is_none());
}

fn max_phase_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let t = (x - y) / PI;
            (t - t.round()).abs() * PI
        })
        .fold(0.0, f64::max)
}

#[test]
fn gauge_transform_preserves_phase_shifts() {
    let layers = layered_cloak(1.01, CorePreset::Doubled, &HomogenizationSpec::uniform(50), CorePotential::step(-98.5, 0.9).unwrap()).unwrap();
    let acoustic = phase_shifts(&layers.clone().into(), 0.5, None).unwrap();
    let matched = gauge_potential(&layers, 0.5, GaugeMode::InterfaceMatched).unwrap();
    let quantum = phase_shifts(&matched.into(), 0.5, None).unwrap();
    assert!(max_phase_gap(&acoustic.delta, &quantum.delta) < 1e-8);

    // the mollified potential is the gauge image of the mollified medium
    let smooth = mollified_medium(&layers, None, None).unwrap();
    let acoustic = phase_shifts(&smooth.into(), 0.5, None).unwrap();
    let mollified = gauge_potential(&layers, 0.5, GaugeMode::Mollified { eta: None, grid_step: None }).unwrap();
    let quantum = phase_shifts(&mollified.into(), 0.5, None).unwrap();
    assert!(max_phase_gap(&acoustic.delta, &quantum.delta) < 1e-4);
}
