//! Dirichlet eigenvalues of the layered problem on the ball, Neumann
//! eigenvalues of `-Δ + W` on the cloaked region, concentration classes and
//! driven resonance scans.

use rayon::prelude::*;

use crate::error::{CloakError, Result};
use crate::radial::{propagate, RadialSystem, Segment};
use crate::synthesis::{CorePotential, LayeredMedium, CORE_RADIUS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeKind {
    /// Concentrated in the cloaked region.
    Interior,
    /// Concentrated in the shell and exterior.
    Exterior,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryCondition {
    /// `u = 0` on the outer sphere.
    DirichletOuter,
    /// `∂_r psi = 0` on the unit sphere.
    NeumannCore,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralPoint {
    pub energy: f64,
    pub l: usize,
    pub kind: ModeKind,
    pub concentration: f64,
    /// Concentration inside the hysteresis band.
    pub borderline: bool,
    pub boundary_condition: BoundaryCondition,
}

/// Interior/exterior split of modes by their core concentration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classifier {
    pub threshold: f64,
    pub band: (f64, f64),
}

impl Default for Classifier {
    fn default() -> Self {
        Classifier {
            threshold: 0.5,
            band: (0.4, 0.6),
        }
    }
}

impl Classifier {
    pub fn kind(&self, concentration: f64) -> ModeKind {
        if concentration > self.threshold {
            ModeKind::Interior
        } else {
            ModeKind::Exterior
        }
    }

    pub fn borderline(&self, concentration: f64) -> bool {
        concentration >= self.band.0 && concentration <= self.band.1
    }
}

/// Root-scan controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanOptions {
    /// Coarse step; `window / 2000` when `None`.
    pub step: Option<f64>,
    /// Sub-steps used to split a coarse interval around a local minimum of
    /// the boundary value.
    pub refinement: usize,
    /// Nesting depth of the minimum refinement.
    pub depth: usize,
    pub classifier: Classifier,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            step: None,
            refinement: 16,
            depth: 3,
            classifier: Classifier::default(),
        }
    }
}

pub const DEFAULT_SCAN_DIVISIONS: usize = 2000;

fn check_window(window: (f64, f64)) -> Result<()> {
    if !(window.0.is_finite() && window.1.is_finite() && window.0 < window.1) {
        return Err(CloakError::Domain(format!(
            "scan window [{}, {}] is not a finite interval",
            window.0, window.1
        )));
    }
    Ok(())
}

/// Roots of a function whose sign is continuous in `E`, by sign scan with
/// refinement around minima of `|f|`, then bisection to machine precision.
fn scan_roots<F>(f: F, window: (f64, f64), options: &ScanOptions) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    check_window(window)?;
    let (lo, hi) = window;
    let step = options.step.unwrap_or((hi - lo) / DEFAULT_SCAN_DIVISIONS as f64);
    if !(step > 0.0) {
        return Err(CloakError::Domain(format!("scan step {step} must be positive")));
    }
    let n = ((hi - lo) / step).ceil().max(1.0) as usize;
    let grid: Vec<f64> = (0..=n)
        .map(|i| if i == n { hi } else { lo + (hi - lo) * i as f64 / n as f64 })
        .collect();
    let values = grid.par_iter().map(|&e| f(e)).collect::<Result<Vec<_>>>()?;

    let mut roots = Vec::new();
    for (e, v) in [(grid[0], values[0]), (grid[n], values[n])] {
        if v == 0.0 {
            log::warn!("root at scan endpoint E = {e}; extend the window to resolve it");
            roots.push(e);
        }
    }
    collect_roots(&f, &grid, &values, options, options.depth, &mut roots)?;
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| (*a - *b).abs() <= 4.0 * f64::EPSILON * a.abs().max(1.0));
    Ok(roots)
}

fn collect_roots<F>(
    f: &F,
    grid: &[f64],
    values: &[f64],
    options: &ScanOptions,
    depth: usize,
    roots: &mut Vec<f64>,
) -> Result<()>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    let n = grid.len() - 1;
    for i in 0..n {
        let (a, b) = (values[i], values[i + 1]);
        if a != 0.0 && b != 0.0 && a.signum() != b.signum() {
            roots.push(bisect(f, grid[i], grid[i + 1], a)?);
        }
    }
    if depth == 0 || options.refinement < 2 {
        return Ok(());
    }
    // an even number of roots between samples leaves a dip in |f|
    for i in 1..n {
        let (prev, here, next) = (values[i - 1].abs(), values[i].abs(), values[i + 1].abs());
        if here < prev && here < next && values[i - 1].signum() == values[i + 1].signum() && here != 0.0 {
            let (lo, hi) = (grid[i - 1], grid[i + 1]);
            let m = 2 * options.refinement;
            let sub: Vec<f64> = (0..=m)
                .map(|k| if k == m { hi } else { lo + (hi - lo) * k as f64 / m as f64 })
                .collect();
            let sub_values = sub.par_iter().map(|&e| f(e)).collect::<Result<Vec<_>>>()?;
            let mut found = Vec::new();
            collect_roots(f, &sub, &sub_values, options, depth - 1, &mut found)?;
            roots.extend(found.into_iter().filter(|r| *r > lo && *r < hi));
        }
    }
    Ok(())
}

fn bisect<F>(f: &F, mut lo: f64, mut hi: f64, mut f_lo: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let v = f(mid)?;
        if v == 0.0 {
            return Ok(mid);
        }
        if v.signum() == f_lo.signum() {
            lo = mid;
            f_lo = v;
        } else {
            hi = mid;
        }
    }
}

/// Normalized boundary value `u(3; E)` of the regular solution; its sign is
/// continuous in `E`.
pub fn dirichlet_function(system: &RadialSystem, l: usize, energy: f64) -> Result<f64> {
    Ok(system.solve(l, energy)?.boundary_pair().0)
}

/// Dirichlet eigenvalues on the ball in channel `l` within `window`.
pub fn dirichlet_eigenvalues(
    system: &RadialSystem,
    l: usize,
    window: (f64, f64),
    options: &ScanOptions,
) -> Result<Vec<SpectralPoint>> {
    let roots = scan_roots(|e| dirichlet_function(system, l, e), window, options)?;
    roots
        .into_par_iter()
        .map(|energy| {
            let concentration = system.solve(l, energy)?.concentration();
            Ok(SpectralPoint {
                energy,
                l,
                kind: options.classifier.kind(concentration),
                concentration,
                borderline: options.classifier.borderline(concentration),
                boundary_condition: BoundaryCondition::DirichletOuter,
            })
        })
        .collect()
}

fn core_segments(core: &CorePotential, energy: f64) -> Vec<Segment> {
    let mut out = Vec::new();
    let mut lo = 0.0;
    for &(r, v) in core.steps() {
        out.push(Segment::plain(lo, r, energy - v));
        lo = r;
    }
    if lo < CORE_RADIUS {
        out.push(Segment::plain(lo, CORE_RADIUS, energy));
    }
    out
}

/// Normalized `psi'(1; E)` of the regular solution of `-Δ + W` on the unit ball.
pub fn neumann_function(core: &CorePotential, l: usize, energy: f64) -> Result<f64> {
    let solution = propagate(&core_segments(core, energy), l, energy, CORE_RADIUS)?;
    Ok(solution.boundary_pair().1)
}

/// Neumann eigenvalues of `-Δ + W` on the unit ball in channel `l`.
pub fn neumann_core_eigenvalues(
    core: &CorePotential,
    l: usize,
    window: (f64, f64),
    options: &ScanOptions,
) -> Result<Vec<SpectralPoint>> {
    let roots = scan_roots(|e| neumann_function(core, l, e), window, options)?;
    Ok(roots
        .into_iter()
        .map(|energy| SpectralPoint {
            energy,
            l,
            kind: ModeKind::Interior,
            concentration: 1.0,
            borderline: false,
            boundary_condition: BoundaryCondition::NeumannCore,
        })
        .collect())
}

/// One evaluation of the driven boundary problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonanceSample {
    pub energy: f64,
    pub l: usize,
    /// Core L^2 norm of the solution with unit Dirichlet data, relative to free space.
    pub amplification: f64,
    pub concentration: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResonanceReport {
    pub peak: ResonanceSample,
    /// Largest amplification over the scan, refinements included.
    pub amplification: f64,
    /// The pole responsible for the peak, when the peak clears the threshold.
    pub fitted_pole: Option<SpectralPoint>,
    /// Slope of `ln amplification` against `ln |E - E_j|` next to the pole.
    pub scaling_exponent: Option<f64>,
    /// Coarse grid samples followed by refinement samples, in scan order.
    pub samples: Vec<ResonanceSample>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonanceOptions {
    /// Coarse grid points across the window.
    pub samples: usize,
    /// Amplification above which a peak counts as an almost trapped state.
    pub threshold: f64,
    /// Decades below the grid step probed on each side of a located pole.
    pub fit_decades: (i32, i32),
    pub scan: ScanOptions,
}

impl Default for ResonanceOptions {
    fn default() -> Self {
        ResonanceOptions {
            samples: 401,
            threshold: 1e3,
            fit_decades: (2, 5),
            scan: ScanOptions::default(),
        }
    }
}

/// Amplification of the interior response to unit Dirichlet data at `energy`.
pub fn amplification(system: &RadialSystem, free: &RadialSystem, l: usize, energy: f64) -> Result<ResonanceSample> {
    let solution = system.solve(l, energy)?;
    let reference = free.solve(l, energy)?;
    let driven = |y: f64, ln_core: f64| 0.5 * ln_core - y.abs().ln();
    let ln_amp = driven(solution.boundary_pair().0, solution.ln_norm_core())
        - driven(reference.boundary_pair().0, reference.ln_norm_core());
    Ok(ResonanceSample {
        energy,
        l,
        amplification: ln_amp.exp(),
        concentration: solution.concentration(),
    })
}

/// Scans the driven response over `window` in the given channels, locates the
/// Dirichlet poles inside it and fits the amplification exponent at the
/// dominant one.
pub fn resonance_scan(
    system: &RadialSystem,
    channels: &[usize],
    window: (f64, f64),
    options: &ResonanceOptions,
) -> Result<ResonanceReport> {
    check_window(window)?;
    if channels.is_empty() || options.samples < 2 {
        return Err(CloakError::Domain("resonance scan needs channels and at least two samples".into()));
    }
    let free = RadialSystem::Acoustic(LayeredMedium::free());
    let h = (window.1 - window.0) / (options.samples - 1) as f64;
    let grid: Vec<(usize, f64)> = channels
        .iter()
        .flat_map(|&l| {
            (0..options.samples).map(move |i| {
                let e = if i + 1 == options.samples { window.1 } else { window.0 + h * i as f64 };
                (l, e)
            })
        })
        .collect();
    let mut samples = grid
        .par_iter()
        .map(|&(l, e)| amplification(system, &free, l, e))
        .collect::<Result<Vec<_>>>()?;

    let scan = ScanOptions {
        step: Some(options.scan.step.unwrap_or(h)),
        ..options.scan
    };
    let mut poles = Vec::new();
    for &l in channels {
        poles.extend(dirichlet_eigenvalues(system, l, window, &scan)?);
    }

    let (first, last) = options.fit_decades;
    let mut best: Option<(f64, SpectralPoint, Vec<ResonanceSample>)> = None;
    for pole in &poles {
        let probes: Vec<f64> = (first..=last)
            .flat_map(|m| {
                let d = h * 10f64.powi(-m);
                [pole.energy - d, pole.energy + d]
            })
            .collect();
        let near = probes
            .par_iter()
            .map(|&e| amplification(system, &free, pole.l, e))
            .collect::<Result<Vec<_>>>()?;
        let top = near.iter().map(|s| s.amplification).fold(0.0, f64::max);
        if best.as_ref().map_or(true, |(b, _, _)| top > *b) {
            best = Some((top, *pole, near.clone()));
        }
        samples.extend(near);
    }

    let peak = *samples
        .iter()
        .max_by(|a, b| a.amplification.total_cmp(&b.amplification))
        .expect("non-empty scan");
    let (fitted_pole, scaling_exponent) = match best {
        Some((top, pole, near)) if top >= options.threshold => (Some(pole), fit_exponent(pole.energy, &near)),
        _ => (None, None),
    };
    Ok(ResonanceReport {
        peak,
        amplification: peak.amplification,
        fitted_pole,
        scaling_exponent,
        samples,
    })
}

/// Least-squares slope of `ln A` against `ln |E - pole|`.
pub fn fit_exponent(pole: f64, samples: &[ResonanceSample]) -> Option<f64> {
    let points: Vec<(f64, f64)> = samples
        .iter()
        .filter(|s| s.energy != pole && s.amplification > 0.0 && s.amplification.is_finite())
        .map(|s| ((s.energy - pole).abs().ln(), s.amplification.ln()))
        .collect();
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn classifier_band() {
        let c = Classifier::default();
        assert_eq!(c.kind(0.95), ModeKind::Interior);
        assert_eq!(c.kind(0.5), ModeKind::Exterior);
        assert!(c.borderline(0.45));
        assert!(!c.borderline(0.05));
    }

    #[test]
    fn fit_recovers_power_law() {
        let pole = 0.3;
        let samples: Vec<ResonanceSample> = [1e-3, 1e-4, 1e-5, -1e-3, -1e-4]
            .iter()
            .map(|&d: &f64| ResonanceSample {
                energy: pole + d,
                l: 0,
                amplification: 2.0 / d.abs(),
                concentration: 1.0,
            })
            .collect();
        assert_relative_eq!(fit_exponent(pole, &samples).unwrap(), -1.0, max_relative = 1e-12);
    }

    #[test]
    fn bisection_reaches_machine_precision() {
        let f = |e: f64| Ok(e * e - 2.0);
        let roots = scan_roots(f, (0.0, 3.0), &ScanOptions::default()).unwrap();
        assert_eq!(roots.len(), 1);
        assert!((roots[0] - 2f64.sqrt()).abs() < 4e-16);
    }

    #[test]
    fn refinement_finds_close_pairs() {
        // two roots 1e-4 apart inside one coarse interval
        let f = |e: f64| Ok((e - 1.0033) * (e - 1.0034));
        let options = ScanOptions {
            step: Some(0.01),
            ..ScanOptions::default()
        };
        let roots = scan_roots(f, (0.5, 1.5), &options).unwrap();
        assert_eq!(roots.len(), 2);
    }
}
