//! Per-channel radial solvers for layered acoustic media and piecewise-constant
//! Schrödinger potentials.

mod bessel;
mod propagate;
pub(crate) mod quadrature;

pub use bessel::{modified_spherical_bessel, spherical_bessel, ModifiedBesselValue, SpecialFunctionValue, MAX_ORDER};
pub use propagate::{propagate, split_at, transport, ChannelSolution, RadialState, Segment};

use crate::error::{CloakError, Result};
use crate::synthesis::{AnisotropicRadialMedium, CorePotential, LayeredMedium, RadialPotential, CLOAK_RADIUS, CORE_RADIUS, OUTER_RADIUS};

/// Default channel cut-off: the smallest `l` whose centrifugal barrier at the
/// outer radius exceeds `4E`, plus ten.
pub fn default_l_max(energy: f64) -> usize {
    let target = 4.0 * energy.max(0.0) * OUTER_RADIUS * OUTER_RADIUS;
    let mut l = 0usize;
    while ((l * (l + 1)) as f64) <= target {
        l += 1;
    }
    (l + 10).min(MAX_ORDER)
}

/// Appends `piece` to `out`, split at the core-potential steps, with `W`
/// subtracted from `kappa2`.
fn push_with_core(out: &mut Vec<Segment>, piece: Segment, core: &CorePotential) {
    let mut cuts: Vec<f64> = core
        .radii()
        .filter(|&r| piece.r_in < r && r < piece.r_out)
        .collect();
    cuts.push(piece.r_out);
    let mut lo = piece.r_in;
    for hi in cuts {
        let w = core.value_at(0.5 * (lo + hi));
        out.push(Segment {
            r_in: lo,
            r_out: hi,
            kappa2: piece.kappa2 - w,
            ..piece
        });
        lo = hi;
    }
}

/// Segments of `div(sigma grad u) + (E a - sigma W) u = 0` for a layered medium.
pub fn acoustic_segments(layers: &LayeredMedium, energy: f64) -> Vec<Segment> {
    let mut out = Vec::with_capacity(layers.shells().len() + 2);
    for s in layers.shells() {
        let piece = Segment {
            r_in: s.r_in,
            r_out: s.r_out,
            kappa2: energy * s.a / s.sigma,
            value_weight: 1.0,
            flux_weight: s.sigma,
        };
        push_with_core(&mut out, piece, layers.core());
    }
    out
}

/// Segments of `-Δψ + (V + W) ψ = E ψ`; gauge-matched shells carry the jumps
/// of `sqrt(sigma)` in their weights.
pub fn schrodinger_segments(potential: &RadialPotential, energy: f64) -> Vec<Segment> {
    let mut out = Vec::with_capacity(potential.shells().len() + 2);
    for s in potential.shells() {
        let root = s.gauge_sigma.sqrt();
        let piece = Segment {
            r_in: s.r_in,
            r_out: s.r_out,
            kappa2: energy - s.v,
            value_weight: 1.0 / root,
            flux_weight: root,
        };
        push_with_core(&mut out, piece, potential.core());
    }
    out
}

pub fn propagate_acoustic(layers: &LayeredMedium, l: usize, energy: f64) -> Result<ChannelSolution> {
    check_energy(energy)?;
    propagate(&acoustic_segments(layers, energy), l, energy, CORE_RADIUS)
}

pub fn propagate_schrodinger(potential: &RadialPotential, l: usize, energy: f64) -> Result<ChannelSolution> {
    check_energy(energy)?;
    propagate(&schrodinger_segments(potential, energy), l, energy, CORE_RADIUS)
}

fn check_energy(energy: f64) -> Result<()> {
    if energy.is_finite() {
        Ok(())
    } else {
        Err(CloakError::Domain(format!("energy {energy} is not finite")))
    }
}

/// Unit-normalized `(u, u')` at the outer radius for the truncated anisotropic
/// cloak itself, without layering.
///
/// The shell `[R, 2]` is the image of `[2(R-1), 2]` under the blow-up map and
/// carries the free solution there, so only the core needs shell propagation.
pub fn propagate_anisotropic(
    medium: &AnisotropicRadialMedium,
    core: &CorePotential,
    l: usize,
    energy: f64,
) -> Result<RadialState> {
    check_energy(energy)?;
    let r = medium.truncation_radius;
    let mut segments = Vec::new();
    push_with_core(
        &mut segments,
        Segment {
            r_in: 0.0,
            r_out: r,
            kappa2: energy * medium.core_a / medium.core_sigma,
            value_weight: 1.0,
            flux_weight: medium.core_sigma,
        },
        core,
    );
    let core_solution = propagate(&segments, l, energy, CORE_RADIUS)?;
    let inner = core_solution.boundary_state();
    if !medium.has_shell() {
        let exterior = Segment {
            r_in: CLOAK_RADIUS,
            r_out: OUTER_RADIUS,
            kappa2: energy,
            value_weight: 1.0,
            flux_weight: 1.0,
        };
        let start = RadialState::normalized(
            inner.value,
            inner.derivative * medium.core_sigma,
            CLOAK_RADIUS,
            inner.log_scale,
        );
        return Ok(transport(&exterior, l, start));
    }
    // virtual coordinate s = 2(rho - 1) for rho <= 2, s = rho beyond
    let virtual_start = 2.0 * (r - 1.0);
    let sigma_rad = medium.sigma_rad(r);
    let start = RadialState::normalized(
        inner.value,
        inner.derivative * medium.core_sigma / (2.0 * sigma_rad),
        virtual_start,
        inner.log_scale,
    );
    let free = Segment {
        r_in: virtual_start,
        r_out: OUTER_RADIUS,
        kappa2: energy,
        value_weight: 1.0,
        flux_weight: 1.0,
    };
    Ok(transport(&free, l, start))
}

/// Either form of the radial problem.
#[derive(Debug, Clone, PartialEq)]
pub enum RadialSystem {
    Acoustic(LayeredMedium),
    Schrodinger(RadialPotential),
}

impl RadialSystem {
    pub fn free() -> Self {
        RadialSystem::Acoustic(LayeredMedium::free())
    }

    pub fn segments(&self, energy: f64) -> Vec<Segment> {
        match self {
            RadialSystem::Acoustic(m) => acoustic_segments(m, energy),
            RadialSystem::Schrodinger(p) => schrodinger_segments(p, energy),
        }
    }

    pub fn solve(&self, l: usize, energy: f64) -> Result<ChannelSolution> {
        match self {
            RadialSystem::Acoustic(m) => propagate_acoustic(m, l, energy),
            RadialSystem::Schrodinger(p) => propagate_schrodinger(p, l, energy),
        }
    }

    /// Radius beyond which the system is free space.
    pub fn support_radius(&self) -> f64 {
        match self {
            RadialSystem::Acoustic(m) => m.support_radius(),
            RadialSystem::Schrodinger(p) => p.support_radius(),
        }
    }

    pub fn core(&self) -> &CorePotential {
        match self {
            RadialSystem::Acoustic(m) => m.core(),
            RadialSystem::Schrodinger(p) => p.core(),
        }
    }
}

impl From<LayeredMedium> for RadialSystem {
    fn from(m: LayeredMedium) -> Self {
        RadialSystem::Acoustic(m)
    }
}

impl From<RadialPotential> for RadialSystem {
    fn from(p: RadialPotential) -> Self {
        RadialSystem::Schrodinger(p)
    }
}
