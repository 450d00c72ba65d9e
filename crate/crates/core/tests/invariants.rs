use std::f64::consts::PI;

use proptest::prelude::*;
use qcloak::io::{read_layered, read_potential, write_layered, write_potential};
use qcloak::radial::{modified_spherical_bessel, spherical_bessel, transport, RadialState, RadialSystem, Segment};
use qcloak::scattering::{amplitude, phase_shifts, total_cross_section, PhaseShifts};
use qcloak::synthesis::{
    gauge_potential, homogenize, truncate, two_phase_values, CorePotential, GaugeMode, HomogenizationSpec, Layer,
    LayeredMedium, CLOAK_RADIUS,
};

const SWEEP: [f64; 4] = [1.1, 1.05, 1.01, 1.005];

fn layered_strategy() -> impl Strategy<Value = LayeredMedium> {
    (
        prop::collection::vec((0.05f64..1.0, 0.2f64..5.0, 0.2f64..8.0), 1..8),
        prop::option::of((0.1f64..0.95, -50.0f64..50.0)),
    )
        .prop_map(|(cells, core)| {
            let total: f64 = cells.iter().map(|c| c.0).sum();
            let inner = 2.5;
            let mut r = 0.0;
            let mut shells: Vec<Layer> = cells
                .iter()
                .map(|&(w, sigma, a)| {
                    let r_in = r;
                    r += inner * w / total;
                    Layer { r_in, r_out: r, sigma, a }
                })
                .collect();
            let last = shells.len() - 1;
            shells[last].r_out = inner;
            shells.push(Layer { r_in: inner, r_out: 3.0, sigma: 1.0, a: 1.0 });
            let core = match core {
                Some((radius, value)) => CorePotential::step(value, radius).unwrap(),
                None => CorePotential::zero(),
            };
            LayeredMedium::new(shells, core).unwrap()
        })
}

fn shift_strategy() -> impl Strategy<Value = PhaseShifts> {
    (0.05f64..3.0, prop::collection::vec(-PI / 2.0..PI / 2.0, 1..30)).prop_map(|(k, delta)| PhaseShifts {
        energy: k * k,
        k,
        delta,
    })
}

fn optical_gap(shifts: &PhaseShifts) -> f64 {
    let sigma = total_cross_section(shifts);
    let forward = 4.0 * PI / shifts.k * amplitude(shifts, 0.0).im;
    (sigma - forward).abs() / sigma.abs().max(f64::MIN_POSITIVE)
}

proptest! {
    #[test]
    fn optical_theorem_on_random_shifts(shifts in shift_strategy()) {
        prop_assert!(amplitude(&shifts, 0.0).im >= 0.0);
        if shifts.delta.iter().any(|d| d.abs() > 1e-6) {
            prop_assert!(optical_gap(&shifts) < 1e-8);
        }
    }

    #[test]
    fn optical_theorem_and_unitarity_on_media(medium in layered_strategy(), energy in 0.05f64..3.0) {
        let shifts = phase_shifts(&RadialSystem::from(medium), energy, None).unwrap();
        for s in shifts.s_matrix() {
            prop_assert!((s.norm() - 1.0).abs() < 1e-10);
        }
        prop_assert!(amplitude(&shifts, 0.0).im >= 0.0);
        if total_cross_section(&shifts) > 1e-20 {
            prop_assert!(optical_gap(&shifts) < 1e-8);
        }
    }

    #[test]
    fn bessel_wronskian(l in 0usize..=60, x in 0.01f64..80.0) {
        let b = spherical_bessel(l, x).unwrap();
        if b.j.is_finite() && b.y.is_finite() && b.j != 0.0 {
            prop_assert!((b.wronskian() * x * x - 1.0).abs() < 1e-10, "l = {}, x = {}", l, x);
        }
        let m = modified_spherical_bessel(l, x).unwrap();
        if m.i_scaled.is_finite() && m.k_scaled.is_finite() && m.i_scaled != 0.0 {
            prop_assert!((m.wronskian() * x * x + 1.0).abs() < 1e-10, "l = {}, x = {}", l, x);
        }
    }

    #[test]
    fn two_phase_means(radial in 1e-6f64..10.0, ratio in 1.0f64..1e5) {
        let tangential = radial * ratio;
        let (high, low) = two_phase_values(tangential, radial).unwrap();
        prop_assert!(((high + low) / 2.0 / tangential - 1.0).abs() < 1e-12);
        prop_assert!((2.0 * high * low / (high + low) / radial - 1.0).abs() < 1e-12);
    }

    #[test]
    fn determinant_consistency(r in 1.0001f64..1.99, t in 0.0f64..1.0) {
        let medium = truncate(r, 1.0, 1.0).unwrap();
        let rho = r + t * (CLOAK_RADIUS - r);
        let c = medium.at(rho);
        prop_assert!(c.sigma_tan >= c.sigma_rad && c.sigma_rad > 0.0);
        prop_assert!((c.sigma_rad * c.sigma_tan.powi(2) / c.mass_a - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shell_wronskian_is_constant(
        l in 0usize..12,
        kappa2 in -30.0f64..30.0,
        r_in in 0.05f64..2.5,
        width in 0.001f64..0.4,
    ) {
        let seg = Segment::plain(r_in, r_in + width, kappa2);
        let start = |v: f64, d: f64| RadialState { value: v, derivative: d, log_scale: 0.0 };
        let a = transport(&seg, l, start(1.0, 0.0));
        let b = transport(&seg, l, start(0.0, 1.0));
        let w_in = r_in * r_in;
        let w_out = seg.r_out.powi(2)
            * (a.value * b.derivative - a.derivative * b.value)
            * (a.log_scale + b.log_scale).exp();
        // conditioning of the difference limits this to moderate growth
        if (a.log_scale + b.log_scale).abs() < 1.0 {
            prop_assert!((w_out / w_in - 1.0).abs() < 1e-10, "{} vs {}", w_out, w_in);
        }
    }

    #[test]
    fn interface_gauge_matches_acoustic(medium in layered_strategy(), energy in 0.05f64..3.0) {
        let potential = gauge_potential(&medium, energy, GaugeMode::InterfaceMatched).unwrap();
        let acoustic = phase_shifts(&RadialSystem::from(medium), energy, Some(6)).unwrap();
        let quantum = phase_shifts(&RadialSystem::from(potential), energy, Some(6)).unwrap();
        for (a, q) in acoustic.delta.iter().zip(&quantum.delta) {
            let gap = (a - q) / PI;
            prop_assert!((gap - gap.round()).abs() < 1e-8 / PI, "{} vs {}", a, q);
        }
    }

    #[test]
    fn text_roundtrip(medium in layered_strategy(), energy in 0.05f64..3.0) {
        prop_assert_eq!(read_layered(&write_layered(&medium)).unwrap(), medium.clone());
        let potential = gauge_potential(&medium, energy, GaugeMode::InterfaceMatched).unwrap();
        prop_assert_eq!(read_potential(&write_potential(&potential)).unwrap(), potential);
    }
}

#[test]
fn homogenized_cells_reproduce_midpoint_means() {
    for &r in &SWEEP {
        for n in [10, 50, 200] {
            let medium = truncate(r, 1.0, 1.0).unwrap();
            let layers = homogenize(&medium, &HomogenizationSpec::uniform(n)).unwrap();
            let shells = layers.shells();
            assert_eq!(shells.len(), n + 2);
            for pair in shells[1..=n].chunks(2) {
                let (low, high) = (pair[0], pair[1]);
                assert!(low.sigma <= high.sigma);
                assert!(((low.r_out - low.r_in) - (high.r_out - high.r_in)).abs() < 1e-14);
                let mid = 0.5 * (low.r_in + high.r_out);
                let arithmetic = 0.5 * (low.sigma + high.sigma);
                let harmonic = 2.0 * low.sigma * high.sigma / (low.sigma + high.sigma);
                assert!((arithmetic / medium.sigma_tan(mid) - 1.0).abs() < 1e-12);
                assert!((harmonic / medium.sigma_rad(mid) - 1.0).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn anisotropy_ratio_and_degeneration() {
    let mut previous = f64::INFINITY;
    for &r in &SWEEP {
        let medium = truncate(r, 1.0, 1.0).unwrap();
        let ratio = medium.anisotropy_at_surface();
        assert!((ratio / (r / (r - 1.0)).powi(2) - 1.0).abs() < 1e-10);
        let s = medium.sigma_rad(r);
        assert!(s < previous);
        previous = s;
    }
}

#[test]
fn free_medium_has_zero_gauge() {
    for energy in [0.1, 0.5, 2.0] {
        let p = gauge_potential(&LayeredMedium::free(), energy, GaugeMode::InterfaceMatched).unwrap();
        assert!(p.shells().iter().all(|s| s.v == 0.0));
    }
}
