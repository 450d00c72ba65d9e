//! Partial-wave observables: phase shifts, scattering amplitude, total cross
//! section, Dirichlet-to-Neumann channel values and the plane-wave field.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{CloakError, Result};
use crate::radial::{default_l_max, spherical_bessel, ChannelSolution, RadialSystem};
use crate::synthesis::OUTER_RADIUS;

/// Normalized boundary values below this are treated as Dirichlet zeros.
pub const DIRICHLET_ZERO: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseShifts {
    pub energy: f64,
    pub k: f64,
    /// `delta[l]`, each in `(-pi/2, pi/2]` unless unwrapped.
    pub delta: Vec<f64>,
}

impl PhaseShifts {
    pub fn l_max(&self) -> usize {
        self.delta.len().saturating_sub(1)
    }

    pub fn s_matrix(&self) -> Vec<Complex64> {
        self.delta.iter().map(|&d| Complex64::from_polar(1.0, 2.0 * d)).collect()
    }
}

/// `lambda[l]`: boundary flux per unit boundary value, channel by channel.
#[derive(Debug, Clone, PartialEq)]
pub struct DNSpectrum {
    pub energy: f64,
    pub lambda: Vec<f64>,
}

impl DNSpectrum {
    /// `max_l |lambda_l - other_l|` over the common channels.
    pub fn max_deviation(&self, other: &DNSpectrum) -> f64 {
        self.lambda
            .iter()
            .zip(&other.lambda)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

fn check_match(system: &RadialSystem, r_match: f64) -> Result<()> {
    let support = system.support_radius();
    if (support > 0.0 && support >= r_match) || r_match > OUTER_RADIUS {
        return Err(CloakError::Geometry(format!(
            "matching radius {r_match} must lie in the free region ({support}, {OUTER_RADIUS}]"
        )));
    }
    Ok(())
}

/// Phase shift of one solved channel, matched at `r_match` in the free exterior.
pub fn channel_phase_shift(solution: &ChannelSolution, r_match: f64) -> Result<f64> {
    let e = solution.energy;
    if !(e > 0.0) {
        return Err(CloakError::Domain(format!("phase shifts need E > 0, got {e}")));
    }
    let k = e.sqrt();
    let (y, yp) = solution.value_at(r_match);
    let b = spherical_bessel(solution.l, k * r_match)?;
    let num = k * b.jp * y - yp * b.j;
    let den = k * b.yp * y - yp * b.y;
    Ok(fold_to_principal(num.atan2(den)))
}

/// Maps an angle to its representative modulo `pi` in `(-pi/2, pi/2]`.
fn fold_to_principal(angle: f64) -> f64 {
    let mut d = angle;
    while d > 0.5 * PI {
        d -= PI;
    }
    while d <= -0.5 * PI {
        d += PI;
    }
    d
}

/// Phase shifts for `l = 0..=l_max` (default cut-off when `None`), matched at the outer radius.
pub fn phase_shifts(system: &RadialSystem, energy: f64, l_max: Option<usize>) -> Result<PhaseShifts> {
    phase_shifts_at(system, energy, l_max, OUTER_RADIUS)
}

pub fn phase_shifts_at(system: &RadialSystem, energy: f64, l_max: Option<usize>, r_match: f64) -> Result<PhaseShifts> {
    if !(energy > 0.0) {
        return Err(CloakError::Domain(format!("phase shifts need E > 0, got {energy}")));
    }
    check_match(system, r_match)?;
    let l_max = l_max.unwrap_or_else(|| default_l_max(energy));
    let delta = (0..=l_max)
        .into_par_iter()
        .map(|l| channel_phase_shift(&system.solve(l, energy)?, r_match))
        .collect::<Result<Vec<_>>>()?;
    Ok(PhaseShifts {
        energy,
        k: energy.sqrt(),
        delta,
    })
}

/// Removes jumps of `pi` between consecutive entries of an energy scan.
pub fn unwrap_branches(scan: &mut [PhaseShifts]) {
    for i in 1..scan.len() {
        let (prev, rest) = scan.split_at_mut(i);
        let prev = &prev[i - 1];
        for (d, p) in rest[0].delta.iter_mut().zip(&prev.delta) {
            *d += PI * ((p - *d) / PI).round();
        }
    }
}

/// Legendre polynomials `P_0..=P_n` at `x`.
pub fn legendre(n: usize, x: f64) -> Vec<f64> {
    let mut p = Vec::with_capacity(n + 1);
    p.push(1.0);
    if n >= 1 {
        p.push(x);
    }
    for l in 2..=n {
        let lf = l as f64;
        let next = ((2.0 * lf - 1.0) * x * p[l - 1] - (lf - 1.0) * p[l - 2]) / lf;
        p.push(next);
    }
    p
}

/// `f(theta) = (1/k) sum (2l+1) e^{i delta} sin(delta) P_l(cos theta)`.
pub fn amplitude(shifts: &PhaseShifts, theta: f64) -> Complex64 {
    let p = legendre(shifts.l_max(), theta.cos());
    let sum: Complex64 = shifts
        .delta
        .iter()
        .zip(&p)
        .enumerate()
        .map(|(l, (&d, &pl))| Complex64::from_polar(d.sin(), d) * ((2 * l + 1) as f64 * pl))
        .sum();
    sum / shifts.k
}

pub fn total_cross_section(shifts: &PhaseShifts) -> f64 {
    let sum: f64 = shifts
        .delta
        .iter()
        .enumerate()
        .map(|(l, d)| (2 * l + 1) as f64 * d.sin().powi(2))
        .sum();
    4.0 * PI / (shifts.k * shifts.k) * sum
}

/// `lambda_l = sigma u'/u` at the outer radius for each channel.
pub fn dn_spectrum(system: &RadialSystem, energy: f64, l_max: Option<usize>) -> Result<DNSpectrum> {
    let l_max = l_max.unwrap_or_else(|| default_l_max(energy));
    let lambda = (0..=l_max)
        .into_par_iter()
        .map(|l| channel_dn(&system.solve(l, energy)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(DNSpectrum { energy, lambda })
}

pub fn channel_dn(solution: &ChannelSolution) -> Result<f64> {
    let (y, _) = solution.boundary_pair();
    if y.abs() < DIRICHLET_ZERO {
        return Err(CloakError::NearEigenvalue {
            l: solution.l,
            energy: solution.energy,
            residual: y,
        });
    }
    Ok(solution.flux_ratio())
}

/// Free-space channel values `k j_l'(3k) / j_l(3k)`, with the static
/// limit `l / 3` at zero energy.
pub fn free_dn(l: usize, energy: f64) -> Result<f64> {
    if energy == 0.0 {
        return Ok(l as f64 / OUTER_RADIUS);
    }
    if energy < 0.0 {
        return Err(CloakError::Domain(format!("free channel values need E >= 0, got {energy}")));
    }
    let k = energy.sqrt();
    let b = spherical_bessel(l, k * OUTER_RADIUS)?;
    Ok(k * b.jp / b.j)
}

pub fn free_dn_spectrum(energy: f64, l_max: usize) -> Result<DNSpectrum> {
    let lambda = (0..=l_max).map(|l| free_dn(l, energy)).collect::<Result<Vec<_>>>()?;
    Ok(DNSpectrum { energy, lambda })
}

/// Total wave for a unit plane wave `e^{ikz}` incident along `+z`, sampled at
/// Cartesian `points` inside the ball. Points on an interface take the
/// inner-side value.
pub fn plane_wave_field(
    system: &RadialSystem,
    energy: f64,
    points: &[[f64; 3]],
    l_max: Option<usize>,
) -> Result<Vec<Complex64>> {
    if !(energy > 0.0) {
        return Err(CloakError::Domain(format!("plane waves need E > 0, got {energy}")));
    }
    check_match(system, OUTER_RADIUS)?;
    if let Some(p) = points.iter().find(|p| norm(p) > OUTER_RADIUS * (1.0 + 1e-12)) {
        return Err(CloakError::Geometry(format!("grid point {p:?} lies outside the ball")));
    }
    let l_max = l_max.unwrap_or_else(|| default_l_max(energy));
    let k = energy.sqrt();
    let channels = (0..=l_max)
        .into_par_iter()
        .map(|l| {
            let solution = system.solve(l, energy)?;
            let delta = channel_phase_shift(&solution, OUTER_RADIUS)?;
            // exterior R_l = e^{i delta} (cos delta j_l - sin delta y_l)
            let b = spherical_bessel(l, k * OUTER_RADIUS)?;
            let value = delta.cos() * b.j - delta.sin() * b.y;
            let slope = k * (delta.cos() * b.jp - delta.sin() * b.yp);
            let (y, yp) = solution.boundary_pair();
            let scale = if y.abs() >= (OUTER_RADIUS * yp).abs() { value / y } else { slope / yp };
            let weight = Complex64::i().powu(l as u32) * (2 * l + 1) as f64 * Complex64::from_polar(scale, delta);
            Ok((solution, weight))
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(points
        .par_iter()
        .map(|p| {
            let r = norm(p);
            let cos_theta = if r > 0.0 { p[2] / r } else { 1.0 };
            let legendre = legendre(l_max, cos_theta);
            channels
                .iter()
                .zip(&legendre)
                .map(|((solution, weight), &pl)| weight * (solution.value_at(r).0 * pl))
                .sum()
        })
        .collect())
}

fn norm(p: &[f64; 3]) -> f64 {
    (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()
}
