//! Refusal of energies too close to the excluded spectra: Dirichlet
//! eigenvalues of the free ball and Neumann eigenvalues of the core operator.

use std::fmt;

use qcloak::radial::{default_l_max, RadialSystem};
use qcloak::spectral::{dirichlet_eigenvalues, neumann_core_eigenvalues, ScanOptions};
use qcloak::synthesis::{CorePotential, CorePreset};

/// Half-width of the window searched around the run energy.
pub const SEARCH_RADIUS: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Excluded {
    FreeDirichlet,
    CoreNeumann,
}

impl fmt::Display for Excluded {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Excluded::FreeDirichlet => "free-ball Dirichlet",
            Excluded::CoreNeumann => "core Neumann",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NearestEigenvalue {
    pub spectrum: Excluded,
    pub l: usize,
    pub energy: f64,
    pub distance: f64,
}

#[derive(Debug, thiserror::Error)]
#[error(
    "energy {energy} lies within {tolerance} of the {} eigenvalue E = {} (l = {}); pass --force to run anyway",
    nearest.spectrum, nearest.energy, nearest.l
)]
pub struct Refusal {
    pub energy: f64,
    pub tolerance: f64,
    pub nearest: NearestEigenvalue,
}

/// Closest excluded eigenvalue to `energy` in each spectrum, channels `0..=l_max`.
///
/// The core operator is `-Δ + W` at the preset's scaled energy `(a/sigma) E`.
pub fn nearest_excluded(
    energy: f64,
    core: &CorePotential,
    preset: CorePreset,
    l_max: Option<usize>,
) -> qcloak::Result<Vec<NearestEigenvalue>> {
    let l_max = l_max.unwrap_or_else(|| default_l_max(energy));
    let window = ((energy - SEARCH_RADIUS).max(0.0), energy + SEARCH_RADIUS);
    let opts = ScanOptions::default();
    let (sigma, a) = preset.values();
    let scale = a / sigma;
    let free = RadialSystem::free();

    let mut found = Vec::new();
    for l in 0..=l_max {
        for p in dirichlet_eigenvalues(&free, l, window, &opts)? {
            found.push((Excluded::FreeDirichlet, l, p.energy));
        }
        for p in neumann_core_eigenvalues(core, l, (window.0 * scale, window.1 * scale), &opts)? {
            found.push((Excluded::CoreNeumann, l, p.energy / scale));
        }
    }
    let mut nearest: Vec<NearestEigenvalue> = Vec::new();
    for spectrum in [Excluded::FreeDirichlet, Excluded::CoreNeumann] {
        let best = found
            .iter()
            .filter(|f| f.0 == spectrum)
            .map(|&(spectrum, l, e)| NearestEigenvalue { spectrum, l, energy: e, distance: (e - energy).abs() })
            .min_by(|a, b| a.distance.total_cmp(&b.distance));
        nearest.extend(best);
    }
    Ok(nearest)
}

/// `Err` when an excluded eigenvalue lies within `tolerance` of `energy`.
pub fn check(nearest: &[NearestEigenvalue], energy: f64, tolerance: f64) -> Result<(), Refusal> {
    match nearest.iter().filter(|n| n.distance <= tolerance).min_by(|a, b| a.distance.total_cmp(&b.distance)) {
        Some(&nearest) => Err(Refusal { energy, tolerance, nearest }),
        None => Ok(()),
    }
}
