//! Cloak media: the singular radial map, the push-forward conductivity and
//! mass density, their truncation at `rho = R`, isotropic layering of the
//! truncated shell, and the Schrödinger potential obtained by the
//! `psi = sqrt(sigma) u` gauge transformation.

use crate::error::{CloakError, Result};

/// Radius of the ball on which all problems are posed.
pub const OUTER_RADIUS: f64 = 3.0;
/// Outer radius of the cloaking shell; the media are free beyond it.
pub const CLOAK_RADIUS: f64 = 2.0;
/// Radius of the cloaked region.
pub const CORE_RADIUS: f64 = 1.0;

/// The radial profile of the blow-up map: `r -> 1 + r/2` on `(0, 2]`,
/// identity beyond.
pub fn forward_map(r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(CloakError::Domain(format!("map is defined for r > 0, got {r}")));
    }
    Ok(if r > CLOAK_RADIUS { r } else { 1.0 + 0.5 * r })
}

/// Inverse of [`forward_map`] on `(1, 3]`.
pub fn inverse_map(rho: f64) -> Result<f64> {
    if !(rho > CORE_RADIUS) {
        return Err(CloakError::SingularRegion(rho));
    }
    Ok(if rho > CLOAK_RADIUS { rho } else { 2.0 * (rho - 1.0) })
}

/// Eigenvalues of a radially symmetric conductivity tensor plus the mass term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CloakTensor {
    pub sigma_rad: f64,
    pub sigma_tan: f64,
    pub mass_a: f64,
}

impl CloakTensor {
    pub const FREE: CloakTensor = CloakTensor {
        sigma_rad: 1.0,
        sigma_tan: 1.0,
        mass_a: 1.0,
    };

    pub fn anisotropy(&self) -> f64 {
        self.sigma_tan / self.sigma_rad
    }
}

/// Push-forward of the identity tensor and unit density under the blow-up map.
///
/// The mass term is the determinant of the contravariant tensor, which keeps
/// the untruncated cloak transparent at every energy.
pub fn ideal_cloak_at(rho: f64) -> Result<CloakTensor> {
    if !(rho > CORE_RADIUS) {
        return Err(CloakError::SingularRegion(rho));
    }
    if rho > CLOAK_RADIUS {
        return Ok(CloakTensor::FREE);
    }
    let q = ((rho - 1.0) / rho).powi(2);
    Ok(CloakTensor {
        sigma_rad: 2.0 * q,
        sigma_tan: 2.0,
        mass_a: 8.0 * q,
    })
}

/// Constant material filling the region inside the truncation radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CorePreset {
    /// `sigma = a = 1`: the core operator is `-Δ + W` at energy `E`.
    Unit,
    /// `sigma = 2`, `a = det sigma = 8`: the core operator is `-Δ + W` at energy `4E`.
    Doubled,
}

impl CorePreset {
    pub fn values(self) -> (f64, f64) {
        match self {
            CorePreset::Unit => (1.0, 1.0),
            CorePreset::Doubled => (2.0, 8.0),
        }
    }
}

/// The cloak truncated at `rho = R`, with a constant core inside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnisotropicRadialMedium {
    pub truncation_radius: f64,
    pub core_sigma: f64,
    pub core_a: f64,
}

impl AnisotropicRadialMedium {
    /// Tensor at radius `rho`; the core constants apply on `[0, R)`.
    pub fn at(&self, rho: f64) -> CloakTensor {
        if rho < self.truncation_radius {
            CloakTensor {
                sigma_rad: self.core_sigma,
                sigma_tan: self.core_sigma,
                mass_a: self.core_a,
            }
        } else if rho > CLOAK_RADIUS {
            CloakTensor::FREE
        } else {
            ideal_cloak_at(rho).expect("rho >= R > 1")
        }
    }

    pub fn sigma_rad(&self, rho: f64) -> f64 {
        self.at(rho).sigma_rad
    }

    pub fn sigma_tan(&self, rho: f64) -> f64 {
        self.at(rho).sigma_tan
    }

    pub fn mass_a(&self, rho: f64) -> f64 {
        self.at(rho).mass_a
    }

    /// `sigma_tan / sigma_rad` on the outer side of the truncation surface.
    pub fn anisotropy_at_surface(&self) -> f64 {
        self.at(self.truncation_radius).anisotropy()
    }

    pub fn has_shell(&self) -> bool {
        self.truncation_radius < CLOAK_RADIUS
    }
}

pub fn truncate(truncation_radius: f64, core_sigma: f64, core_a: f64) -> Result<AnisotropicRadialMedium> {
    if !(truncation_radius > CORE_RADIUS && truncation_radius <= CLOAK_RADIUS) {
        return Err(CloakError::SingularTruncation(truncation_radius));
    }
    if !(core_sigma > 0.0 && core_a > 0.0) || !core_sigma.is_finite() || !core_a.is_finite() {
        return Err(CloakError::Domain(format!(
            "core constants must be positive and finite, got sigma = {core_sigma}, a = {core_a}"
        )));
    }
    Ok(AnisotropicRadialMedium {
        truncation_radius,
        core_sigma,
        core_a,
    })
}

/// Piecewise-constant potential inside the cloaked region:
/// `value_i` on `[radius_{i-1}, radius_i)` with `radius_0 = 0`, zero beyond.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorePotential {
    steps: Vec<(f64, f64)>,
}

impl CorePotential {
    pub fn new(steps: Vec<(f64, f64)>) -> Result<Self> {
        let mut prev = 0.0;
        for &(r, v) in &steps {
            if !(r > prev) || r > CORE_RADIUS {
                return Err(CloakError::Domain(format!(
                    "core potential radii must increase within (0, 1], got {r} after {prev}"
                )));
            }
            if !v.is_finite() {
                return Err(CloakError::Domain(format!("core potential value {v} is not finite")));
            }
            prev = r;
        }
        Ok(CorePotential { steps })
    }

    /// `c * chi_[0, radius]`.
    pub fn step(value: f64, radius: f64) -> Result<Self> {
        Self::new(vec![(radius, value)])
    }

    pub fn zero() -> Self {
        CorePotential::default()
    }

    pub fn steps(&self) -> &[(f64, f64)] {
        &self.steps
    }

    pub fn is_zero(&self) -> bool {
        self.steps.iter().all(|&(_, v)| v == 0.0)
    }

    pub fn value_at(&self, r: f64) -> f64 {
        self.steps
            .iter()
            .find(|&&(radius, _)| r < radius)
            .map(|&(_, v)| v)
            .unwrap_or(0.0)
    }

    pub fn radii(&self) -> impl Iterator<Item = f64> + '_ {
        self.steps.iter().map(|&(r, _)| r)
    }
}

/// One isotropic shell of a layered medium.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Layer {
    pub r_in: f64,
    pub r_out: f64,
    pub sigma: f64,
    pub a: f64,
}

fn check_cover(bounds: impl Iterator<Item = (f64, f64)>) -> Result<()> {
    let mut expected = 0.0;
    let mut any = false;
    for (i, (r_in, r_out)) in bounds.enumerate() {
        any = true;
        if r_in != expected {
            return Err(CloakError::Geometry(format!(
                "shell {i} starts at {r_in}, expected {expected}"
            )));
        }
        if !(r_out > r_in) {
            return Err(CloakError::Geometry(format!(
                "shell {i} [{r_in}, {r_out}] has no thickness"
            )));
        }
        expected = r_out;
    }
    if !any || expected != OUTER_RADIUS {
        return Err(CloakError::Geometry(format!(
            "shells must cover [0, {OUTER_RADIUS}], they end at {expected}"
        )));
    }
    Ok(())
}

/// Concentric isotropic shells covering `[0, 3]`, plus the cloaked potential `W`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayeredMedium {
    shells: Vec<Layer>,
    core: CorePotential,
}

impl LayeredMedium {
    pub fn new(shells: Vec<Layer>, core: CorePotential) -> Result<Self> {
        check_cover(shells.iter().map(|s| (s.r_in, s.r_out)))?;
        for (i, s) in shells.iter().enumerate() {
            if !(s.sigma > 0.0 && s.a > 0.0) || !s.sigma.is_finite() || !s.a.is_finite() {
                return Err(CloakError::Domain(format!(
                    "shell {i} has non-positive material values sigma = {}, a = {}",
                    s.sigma, s.a
                )));
            }
        }
        Ok(LayeredMedium { shells, core })
    }

    /// Homogeneous free space on `[0, 3]`.
    pub fn free() -> Self {
        LayeredMedium {
            shells: vec![Layer {
                r_in: 0.0,
                r_out: OUTER_RADIUS,
                sigma: 1.0,
                a: 1.0,
            }],
            core: CorePotential::zero(),
        }
    }

    pub fn shells(&self) -> &[Layer] {
        &self.shells
    }

    pub fn core(&self) -> &CorePotential {
        &self.core
    }

    pub fn with_core_potential(mut self, core: CorePotential) -> Self {
        self.core = core;
        self
    }

    pub fn sigma_at(&self, r: f64) -> f64 {
        self.shell_at(r).sigma
    }

    fn shell_at(&self, r: f64) -> &Layer {
        self.shells
            .iter()
            .find(|s| r <= s.r_out)
            .unwrap_or_else(|| self.shells.last().expect("non-empty"))
    }

    pub fn thinnest(&self) -> f64 {
        self.shells
            .iter()
            .map(|s| s.r_out - s.r_in)
            .fold(f64::INFINITY, f64::min)
    }

    /// Smallest radius beyond which the medium is free space.
    pub fn support_radius(&self) -> f64 {
        let mut support = 0.0;
        for s in &self.shells {
            if s.sigma != 1.0 || s.a != 1.0 {
                support = s.r_out;
            }
        }
        support.max(self.core.radii().fold(0.0, f64::max))
    }
}

/// Cell placement over the cloaking shell `[R, 2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Grading {
    Uniform,
    /// Cell widths grow by `ratio` per cell moving outward from `R`.
    Geometric { ratio: f64 },
}

impl Grading {
    pub fn edges(&self, start: f64, end: f64, cells: usize) -> Result<Vec<f64>> {
        let span = end - start;
        match *self {
            Grading::Uniform => Ok((0..=cells)
                .map(|i| if i == cells { end } else { start + span * i as f64 / cells as f64 })
                .collect()),
            Grading::Geometric { ratio } => {
                if !(ratio > 0.0) || !ratio.is_finite() {
                    return Err(CloakError::Domain(format!("grading ratio must be positive, got {ratio}")));
                }
                if ratio == 1.0 {
                    return Grading::Uniform.edges(start, end, cells);
                }
                let first = span * (ratio - 1.0) / (ratio.powi(cells as i32) - 1.0);
                let mut edges = Vec::with_capacity(cells + 1);
                let mut x = start;
                let mut w = first;
                edges.push(start);
                for i in 0..cells {
                    x = if i + 1 == cells { end } else { x + w };
                    edges.push(x);
                    w *= ratio;
                }
                Ok(edges)
            }
        }
    }
}

/// How the truncated shell is replaced by isotropic layers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomogenizationSpec {
    /// Total number of isotropic layers.
    pub n_layers: usize,
    pub grading: Grading,
    /// Layers spent subdividing the core `[0, R)` instead of the shell.
    pub core_layers: usize,
}

impl HomogenizationSpec {
    pub fn uniform(n_layers: usize) -> Self {
        HomogenizationSpec {
            n_layers,
            grading: Grading::Uniform,
            core_layers: 0,
        }
    }
}

/// Two isotropic phases of equal thickness whose arithmetic mean is
/// `tangential` and whose harmonic mean is `radial`.
pub fn two_phase_values(tangential: f64, radial: f64) -> Result<(f64, f64)> {
    if !(tangential > 0.0 && radial > 0.0) {
        return Err(CloakError::Domain(format!(
            "cell means must be positive, got tangential = {tangential}, radial = {radial}"
        )));
    }
    if tangential < radial {
        return Err(CloakError::AnisotropyOrientation { tangential, radial });
    }
    let high = tangential + (tangential * (tangential - radial)).sqrt();
    // product of the phases is tangential * radial
    let low = tangential * radial / high;
    Ok((high, low))
}

/// Replaces the anisotropic shell of `medium` with alternating isotropic layers:
/// each cell holds the low phase then the high phase, both with the cell's
/// midpoint mass density.
pub fn homogenize(medium: &AnisotropicRadialMedium, spec: &HomogenizationSpec) -> Result<LayeredMedium> {
    let r = medium.truncation_radius;
    if spec.n_layers < 2 || spec.n_layers % 2 != 0 {
        return Err(CloakError::Domain(format!(
            "layer count must be even and at least 2, got {}",
            spec.n_layers
        )));
    }
    let shell_layers = spec.n_layers.checked_sub(spec.core_layers).unwrap_or(0);
    if shell_layers < 2 || shell_layers % 2 != 0 {
        return Err(CloakError::Domain(format!(
            "{} core layers leave {} shell layers; need an even count of at least 2",
            spec.core_layers, shell_layers
        )));
    }

    let mut shells = Vec::with_capacity(spec.n_layers + 2);
    let core_pieces = spec.core_layers.max(1);
    for i in 0..core_pieces {
        let r_in = r * i as f64 / core_pieces as f64;
        let r_out = if i + 1 == core_pieces { r } else { r * (i + 1) as f64 / core_pieces as f64 };
        shells.push(Layer {
            r_in,
            r_out,
            sigma: medium.core_sigma,
            a: medium.core_a,
        });
    }

    if medium.has_shell() {
        let cells = shell_layers / 2;
        let edges = spec.grading.edges(r, CLOAK_RADIUS, cells)?;
        for pair in edges.windows(2) {
            let (lo, hi) = (pair[0], pair[1]);
            let mid = 0.5 * (lo + hi);
            let t = ideal_cloak_at(mid)?;
            let (high, low) = two_phase_values(t.sigma_tan, t.sigma_rad)?;
            // low phase inward, so the layer touching the core blocks radial flux
            shells.push(Layer {
                r_in: lo,
                r_out: mid,
                sigma: low,
                a: t.mass_a,
            });
            shells.push(Layer {
                r_in: mid,
                r_out: hi,
                sigma: high,
                a: t.mass_a,
            });
        }
    }

    shells.push(Layer {
        r_in: CLOAK_RADIUS,
        r_out: OUTER_RADIUS,
        sigma: 1.0,
        a: 1.0,
    });
    LayeredMedium::new(shells, CorePotential::zero())
}

/// Truncated cloak with `preset` core constants, homogenized per `spec`, carrying `core`.
pub fn layered_cloak(
    truncation_radius: f64,
    preset: CorePreset,
    spec: &HomogenizationSpec,
    core: CorePotential,
) -> Result<LayeredMedium> {
    let (sigma, a) = preset.values();
    let medium = truncate(truncation_radius, sigma, a)?;
    Ok(homogenize(&medium, spec)?.with_core_potential(core))
}

/// Piecewise-constant potential shell. `gauge_sigma` is the conductivity the
/// shell was derived from; interface conditions carry the gauge jumps through
/// it (it is 1 for plain potentials).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialShell {
    pub r_in: f64,
    pub r_out: f64,
    pub v: f64,
    pub gauge_sigma: f64,
}

/// Radial potential shells covering `[0, 3]` plus the cloaked `W`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialPotential {
    shells: Vec<PotentialShell>,
    core: CorePotential,
}

impl RadialPotential {
    pub fn new(shells: Vec<PotentialShell>, core: CorePotential) -> Result<Self> {
        check_cover(shells.iter().map(|s| (s.r_in, s.r_out)))?;
        for (i, s) in shells.iter().enumerate() {
            if !s.v.is_finite() || !(s.gauge_sigma > 0.0) {
                return Err(CloakError::Domain(format!(
                    "potential shell {i} has invalid data v = {}, sigma = {}",
                    s.v, s.gauge_sigma
                )));
            }
        }
        Ok(RadialPotential { shells, core })
    }

    pub fn zero() -> Self {
        RadialPotential {
            shells: vec![PotentialShell {
                r_in: 0.0,
                r_out: OUTER_RADIUS,
                v: 0.0,
                gauge_sigma: 1.0,
            }],
            core: CorePotential::zero(),
        }
    }

    /// Plain step potential `v` on `[0, radius)` with no gauge jumps.
    pub fn square_well(v: f64, radius: f64) -> Result<Self> {
        RadialPotential::new(
            vec![
                PotentialShell {
                    r_in: 0.0,
                    r_out: radius,
                    v,
                    gauge_sigma: 1.0,
                },
                PotentialShell {
                    r_in: radius,
                    r_out: OUTER_RADIUS,
                    v: 0.0,
                    gauge_sigma: 1.0,
                },
            ],
            CorePotential::zero(),
        )
    }

    pub fn shells(&self) -> &[PotentialShell] {
        &self.shells
    }

    pub fn core(&self) -> &CorePotential {
        &self.core
    }

    pub fn with_core_potential(mut self, core: CorePotential) -> Self {
        self.core = core;
        self
    }

    /// Total potential (shell value plus `W`) at radius `r`.
    pub fn value_at(&self, r: f64) -> f64 {
        let shell = self
            .shells
            .iter()
            .find(|s| r < s.r_out)
            .unwrap_or_else(|| self.shells.last().expect("non-empty"));
        shell.v + self.core.value_at(r)
    }

    pub fn is_gauge_matched(&self) -> bool {
        self.shells.iter().any(|s| s.gauge_sigma != 1.0)
    }

    pub fn support_radius(&self) -> f64 {
        let mut support = 0.0;
        for s in &self.shells {
            if s.v != 0.0 || s.gauge_sigma != 1.0 {
                support = s.r_out;
            }
        }
        support.max(self.core.radii().fold(0.0, f64::max))
    }
}

/// How the gauge transformation treats the conductivity jumps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GaugeMode {
    /// Per-shell constants `E (1 - a/sigma)`; the jumps of `sqrt(sigma)` are
    /// applied as interface conditions by the solver.
    InterfaceMatched,
    /// Smooth `sigma` with a compact C^2 kernel of half-width `eta` and sample
    /// the full potential on cells no wider than `grid_step`.
    Mollified { eta: Option<f64>, grid_step: Option<f64> },
}

/// Fine cells per mollifier half-width when no grid step is given.
pub const DEFAULT_CELLS_PER_WIDTH: usize = 200;

pub fn gauge_potential(layers: &LayeredMedium, energy: f64, mode: GaugeMode) -> Result<RadialPotential> {
    if !energy.is_finite() {
        return Err(CloakError::Domain(format!("energy {energy} is not finite")));
    }
    match mode {
        GaugeMode::InterfaceMatched => {
            let shells = layers
                .shells()
                .iter()
                .map(|s| PotentialShell {
                    r_in: s.r_in,
                    r_out: s.r_out,
                    v: energy * (1.0 - s.a / s.sigma),
                    gauge_sigma: s.sigma,
                })
                .collect();
            RadialPotential::new(shells, layers.core().clone())
        }
        GaugeMode::Mollified { eta, grid_step } => {
            let grid = MollifiedGrid::build(layers, eta, grid_step)?;
            let shells = grid
                .cells
                .iter()
                .map(|c| PotentialShell {
                    r_in: c.r_in,
                    r_out: c.r_out,
                    v: c.potential(energy),
                    gauge_sigma: 1.0,
                })
                .collect();
            RadialPotential::new(shells, layers.core().clone())
        }
    }
}

/// The acoustic medium whose conductivity is the mollified one, sampled on
/// the same cells as the mollified potential.
pub fn mollified_medium(layers: &LayeredMedium, eta: Option<f64>, grid_step: Option<f64>) -> Result<LayeredMedium> {
    let grid = MollifiedGrid::build(layers, eta, grid_step)?;
    let shells = grid
        .cells
        .iter()
        .map(|c| Layer {
            r_in: c.r_in,
            r_out: c.r_out,
            sigma: c.sigma,
            a: c.a,
        })
        .collect();
    LayeredMedium::new(shells, layers.core().clone())
}

/// Default mollifier half-width: a tenth of the thinnest shell.
pub fn default_mollifier_width(layers: &LayeredMedium) -> f64 {
    0.1 * layers.thinnest()
}

#[derive(Debug, Clone, Copy)]
struct MollifiedCell {
    r_in: f64,
    r_out: f64,
    sigma: f64,
    /// Cell average of `Δ sqrt(sigma) / sqrt(sigma)`.
    gauge: f64,
    /// Cell average of `1 / sigma`.
    inv_sigma: f64,
    a: f64,
}

impl MollifiedCell {
    /// Two half-cells whose constant potentials are the commutator-free
    /// fourth-order Magnus combination of the Gauss-point values.
    fn split(r_in: f64, r_out: f64, a: f64, profile: impl Fn(f64) -> (f64, f64, f64)) -> [Self; 2] {
        let h = r_out - r_in;
        let mid = 0.5 * (r_in + r_out);
        let offset = h * 3f64.sqrt() / 6.0;
        let sample = |r: f64| {
            let (sigma, d1, d2) = profile(r);
            let gauge = d2 / (2.0 * sigma) - d1 * d1 / (4.0 * sigma * sigma) + d1 / (r * sigma);
            (gauge, 1.0 / sigma)
        };
        let (g1, i1) = sample(mid - offset);
        let (g2, i2) = sample(mid + offset);
        let w = 0.5 + 3f64.sqrt() / 3.0;
        let v = 1.0 - w;
        let mk = |lo: f64, hi: f64, wa: f64, wb: f64| MollifiedCell {
            r_in: lo,
            r_out: hi,
            sigma: profile(0.5 * (lo + hi)).0,
            gauge: wa * g1 + wb * g2,
            inv_sigma: wa * i1 + wb * i2,
            a,
        };
        [mk(r_in, mid, w, v), mk(mid, r_out, v, w)]
    }

    fn potential(&self, energy: f64) -> f64 {
        self.gauge + energy * (1.0 - self.a * self.inv_sigma)
    }
}
struct MollifiedGrid {
    cells: Vec<MollifiedCell>,
}

/// Normalized kernel `35/32 (1 - t^2)^3` on `[-1, 1]`, its CDF and derivative.
fn kernel(t: f64) -> (f64, f64, f64) {
    if t <= -1.0 {
        return (0.0, 0.0, 0.0);
    }
    if t >= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    let u = 1.0 - t * t;
    let cdf = 0.5 + 35.0 / 32.0 * (t - t.powi(3) + 0.6 * t.powi(5) - t.powi(7) / 7.0);
    let pdf = 35.0 / 32.0 * u.powi(3);
    let dpdf = -105.0 / 16.0 * t * u * u;
    (cdf, pdf, dpdf)
}

/// Samples per cell used to integrate the node-placement density.
const MONITOR_SAMPLES: usize = 32;

/// `n + 1` nodes on `[lo, hi]` with equal shares of `∫ density`.
fn equidistribute(lo: f64, hi: f64, n: usize, density: impl Fn(f64) -> f64) -> Vec<f64> {
    let m = MONITOR_SAMPLES * n;
    let h = (hi - lo) / m as f64;
    let mut cumulative = Vec::with_capacity(m + 1);
    cumulative.push(0.0);
    let mut prev = density(lo);
    for i in 1..=m {
        let next = density(lo + h * i as f64);
        let last = *cumulative.last().expect("seeded");
        cumulative.push(last + 0.5 * h * (prev + next));
        prev = next;
    }
    let total = cumulative[m];
    let mut nodes = Vec::with_capacity(n + 1);
    nodes.push(lo);
    let mut j = 0;
    for k in 1..n {
        let target = total * k as f64 / n as f64;
        while cumulative[j + 1] < target {
            j += 1;
        }
        let t = (target - cumulative[j]) / (cumulative[j + 1] - cumulative[j]);
        nodes.push(lo + h * (j as f64 + t));
    }
    nodes.push(hi);
    nodes
}

impl MollifiedGrid {
    fn build(layers: &LayeredMedium, eta: Option<f64>, grid_step: Option<f64>) -> Result<Self> {
        let shells = layers.shells();
        if let Some(bad) = shells.iter().find(|s| !(s.sigma > 0.0)) {
            return Err(CloakError::Domain(format!("conductivity {} is not positive", bad.sigma)));
        }
        let eta = eta.unwrap_or_else(|| default_mollifier_width(layers));
        let step = grid_step.unwrap_or(eta / DEFAULT_CELLS_PER_WIDTH as f64);
        if !(eta > 0.0 && step > 0.0) {
            return Err(CloakError::Domain(format!(
                "mollifier width {eta} and grid step {step} must be positive"
            )));
        }
        if eta < step {
            return Err(CloakError::Resolution { eta, step });
        }
        if 2.0 * eta >= layers.thinnest() {
            return Err(CloakError::Geometry(format!(
                "mollifier half-width {eta} overlaps neighbouring interfaces (thinnest shell {})",
                layers.thinnest()
            )));
        }
        let per_side = (eta / step).ceil() as usize;

        let mut cells = Vec::new();
        for (i, s) in shells.iter().enumerate() {
            let left = (i > 0 && shells[i - 1].sigma != s.sigma).then(|| (shells[i - 1].sigma, s.r_in));
            let right = (i + 1 < shells.len() && shells[i + 1].sigma != s.sigma).then(|| (shells[i + 1].sigma, s.r_out));
            let profile = |r: f64| -> (f64, f64, f64) {
                let mut sigma = s.sigma;
                let (mut d1, mut d2) = (0.0, 0.0);
                if let Some((other, at)) = left {
                    let (cdf, pdf, dpdf) = kernel((r - at) / eta);
                    let jump = s.sigma - other;
                    sigma += jump * (cdf - 1.0);
                    d1 += jump * pdf / eta;
                    d2 += jump * dpdf / (eta * eta);
                }
                if let Some((other, at)) = right {
                    let (cdf, pdf, dpdf) = kernel((r - at) / eta);
                    let jump = other - s.sigma;
                    sigma += jump * cdf;
                    d1 += jump * pdf / eta;
                    d2 += jump * dpdf / (eta * eta);
                }
                (sigma, d1, d2)
            };
            let flat = |r_in: f64, r_out: f64| MollifiedCell {
                r_in,
                r_out,
                sigma: s.sigma,
                gauge: 0.0,
                inv_sigma: 1.0 / s.sigma,
                a: s.a,
            };
            let lo = if left.is_some() { s.r_in + eta } else { s.r_in };
            let hi = if right.is_some() { s.r_out - eta } else { s.r_out };
            // resolves both the window and the local wavelength of the gauge term
            let density = |r: f64| {
                let (sigma, d1, d2) = profile(r);
                1.0 / eta + (d2 / (2.0 * sigma) - d1 * d1 / (4.0 * sigma * sigma)).abs().sqrt()
            };
            if left.is_some() {
                let nodes = equidistribute(s.r_in, lo, per_side, density);
                for pair in nodes.windows(2) {
                    cells.extend(MollifiedCell::split(pair[0], pair[1], s.a, profile));
                }
            }
            cells.push(flat(lo, hi));
            if right.is_some() {
                let nodes = equidistribute(hi, s.r_out, per_side, density);
                for pair in nodes.windows(2) {
                    cells.extend(MollifiedCell::split(pair[0], pair[1], s.a, profile));
                }
            }
        }
        if let Some(c) = cells.iter().find(|c| !(c.sigma > 0.0)) {
            return Err(CloakError::Domain(format!(
                "mollified conductivity {} at r = {} is not positive",
                c.sigma, c.r_in
            )));
        }
        Ok(MollifiedGrid { cells })
    }
}
