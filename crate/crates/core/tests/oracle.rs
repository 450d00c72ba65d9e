mod common;

use common::{oracle_log_derivative, random_media, SmoothMedium};
use qcloak::radial::{propagate_acoustic, RadialSystem};
use qcloak::synthesis::{homogenize, truncate, CorePotential, CorePreset, HomogenizationSpec, Layer, LayeredMedium};

#[test]
fn layered_solver_matches_adaptive_integrator_on_smooth_media() {
    for (i, medium) in random_media(7, 10).iter().enumerate() {
        let layered = medium.layered(10_000);
        for &(l, energy) in &[(0, 0.5), (1, 1.3), (3, 0.8)] {
            let got = propagate_acoustic(&layered, l, energy).unwrap().log_derivative();
            let want = oracle_log_derivative(medium, l, energy);
            let rel = ((got - want) / want).abs();
            assert!(rel < 1e-6, "medium {i}, l = {l}, E = {energy}: {got} vs {want} (rel {rel:e})");
        }
    }
}

#[test]
fn quadrupled_mass_doubles_the_wavenumber() {
    let layered = LayeredMedium::new(
        vec![Layer { r_in: 0.0, r_out: 3.0, sigma: 1.0, a: 4.0 }],
        CorePotential::zero(),
    )
    .unwrap();
    let flat = SmoothMedium { sigma_modes: [0.0; 3], a_modes: [0.0; 3] };
    for &energy in &[0.3, 0.5, 1.7] {
        let k2 = 2.0 * f64::sqrt(energy);
        // sin(k2 r)/r
        let closed = k2 / (3.0 * k2).tan() - 1.0 / 3.0;
        let got = propagate_acoustic(&layered, 0, energy).unwrap().log_derivative();
        assert!(((got - closed) / closed).abs() < 1e-12, "E = {energy}: {got} vs {closed}");
        let free = oracle_log_derivative(&flat, 0, energy * 4.0);
        assert!(((free - closed) / closed).abs() < 1e-8);
    }
}

#[test]
fn truncated_cloak_shields_its_core() {
    let (sigma, a) = CorePreset::Unit.values();
    let medium = truncate(1.005, sigma, a).unwrap();
    let layers = homogenize(&medium, &HomogenizationSpec::uniform(50)).unwrap();
    let solution = RadialSystem::from(layers).solve(0, 0.5).unwrap();
    assert!(solution.concentration() < 1e-2, "core fraction {}", solution.concentration());
}
