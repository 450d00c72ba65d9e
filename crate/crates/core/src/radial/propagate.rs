//! Shell-by-shell propagation of the regular radial solution.
//!
//! Each [`Segment`] carries a constant `kappa2`, so the radial equation
//! `y'' + (2/r) y' + (kappa2 - l(l+1)/r^2) y = 0` is solved exactly by a pair
//! of spherical Bessel functions. The state `(y, y')` is carried as a unit
//! projective vector plus a log-amplitude: the log-derivative `y'/y` is read
//! off from it, poles of `y'/y` (zeros of `y`) pass through as `y = 0` without
//! any special casing, and no product of per-shell matrices is ever formed.

use super::bessel::{evanescent_pair, oscillatory_pair, ScaledPair};
use super::quadrature::gauss_legendre;
use crate::error::{CloakError, Result};

/// Below this `kappa2 r^2` a shell is treated as exactly static (power laws).
const STATIC_THRESHOLD: f64 = 1e-20;
/// Accepted loss of digits in the closed-form norm integral before
/// falling back to quadrature.
const CANCELLATION_LIMIT: f64 = 1e6;

/// One homogeneous radial piece.
///
/// Across an interface `value_weight * y` and `flux_weight * y'` are
/// continuous. Acoustic shells use `(1, sigma)`; gauge-matched Schrödinger
/// shells use `(1/sqrt(sigma), sqrt(sigma))`; plain potentials use `(1, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub r_in: f64,
    pub r_out: f64,
    pub kappa2: f64,
    pub value_weight: f64,
    pub flux_weight: f64,
}

impl Segment {
    pub fn plain(r_in: f64, r_out: f64, kappa2: f64) -> Self {
        Segment {
            r_in,
            r_out,
            kappa2,
            value_weight: 1.0,
            flux_weight: 1.0,
        }
    }
}

/// `(y, y')` with a unit-scale representation; the true pair is
/// `(value, derivative) * exp(log_scale)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialState {
    pub value: f64,
    pub derivative: f64,
    pub log_scale: f64,
}

impl RadialState {
    pub fn log_derivative(&self) -> f64 {
        self.derivative / self.value
    }

    pub(crate) fn normalized(value: f64, derivative: f64, radius: f64, log_scale: f64) -> Self {
        let n = value.hypot(radius * derivative);
        RadialState {
            value: value / n,
            derivative: derivative / n,
            log_scale: log_scale + n.ln(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Basis {
    Oscillatory(f64),
    Evanescent(f64),
    Static,
}

impl Basis {
    fn new(kappa2: f64, r_out: f64) -> Self {
        if kappa2.abs() * r_out * r_out < STATIC_THRESHOLD {
            Basis::Static
        } else if kappa2 > 0.0 {
            Basis::Oscillatory(kappa2.sqrt())
        } else {
            Basis::Evanescent((-kappa2).sqrt())
        }
    }

    /// Scaled pair at radius `r`, the argument `x`, the rate `dx/dr`, and the
    /// Wronskian constant `w` with `f g' - f' g = w / x^2`.
    fn at(&self, l: usize, r: f64) -> (ScaledPair, f64, f64, f64) {
        match *self {
            Basis::Oscillatory(k) => (oscillatory_pair(l, k * r), k * r, k, 1.0),
            Basis::Evanescent(m) => (evanescent_pair(l, m * r), m * r, m, -1.0),
            Basis::Static => {
                let lf = l as f64;
                let pair = ScaledPair {
                    f: 1.0,
                    fp: lf / r,
                    g: 1.0 / r,
                    gp: -(lf + 1.0) / (r * r),
                    log_scale: lf * r.ln(),
                };
                (pair, r, 1.0, -(2.0 * lf + 1.0))
            }
        }
    }

    /// Transfer matrix taking `(y, y')` at `a` to `exp(growth) * M (y, y')` at `b`.
    fn transfer(&self, l: usize, a: f64, b: f64) -> ([f64; 4], f64) {
        let (p1, x1, rate, w) = self.at(l, a);
        let (p2, _, _, _) = self.at(l, b);
        let d = p2.log_scale - p1.log_scale;
        let growth = d.abs();
        let p = (d - growth).exp();
        let q = (-d - growth).exp();
        let c = x1 * x1 / w;
        let m11 = c * (p1.gp * p2.f * p - p1.fp * p2.g * q);
        let m12 = c / rate * (p1.f * p2.g * q - p1.g * p2.f * p);
        let m21 = c * rate * (p1.gp * p2.fp * p - p1.fp * p2.gp * q);
        let m22 = c * (p1.f * p2.gp * q - p1.g * p2.fp * p);
        ([m11, m12, m21, m22], growth)
    }

    /// Regular solution at `r`: `(y, y')` up to `exp(log)`.
    fn regular(&self, l: usize, r: f64) -> (f64, f64, f64) {
        let (p, _, rate, _) = self.at(l, r);
        (p.f, rate * p.fp, p.log_scale)
    }
}

fn apply(m: &[f64; 4], y: f64, yp: f64) -> (f64, f64) {
    (m[0] * y + m[1] * yp, m[2] * y + m[3] * yp)
}

/// `F = r w'^2 - w w' + r (kappa2 - L/r^2) w^2` with `w = r y`; its derivative is
/// `2 kappa2 w^2`. Returns `(F, largest term magnitude)`.
fn norm_potential(l: usize, kappa2: f64, r: f64, y: f64, yp: f64) -> (f64, f64) {
    let big_l = (l * (l + 1)) as f64;
    let w = r * y;
    let wp = y + r * yp;
    let t1 = r * wp * wp;
    let t2 = w * wp;
    let t3 = r * (kappa2 - big_l / (r * r)) * w * w;
    (t1 - t2 + t3, t1.abs().max(t2.abs()).max(t3.abs()))
}

/// Running L^2 masses kept in units of `exp(2 log_ref)`.
#[derive(Debug, Clone, Copy)]
struct Mass {
    core: f64,
    total: f64,
    log_ref: f64,
}

impl Mass {
    fn add(&mut self, amount: f64, log_unit: f64, in_core: bool) {
        if amount == 0.0 {
            return;
        }
        if log_unit > self.log_ref {
            let shrink = (2.0 * (self.log_ref - log_unit)).exp();
            self.core *= shrink;
            self.total *= shrink;
            self.log_ref = log_unit;
        }
        let scaled = amount * (2.0 * (log_unit - self.log_ref)).exp();
        self.total += scaled;
        if in_core {
            self.core += scaled;
        }
    }
}

/// Radial solution of one angular-momentum channel.
#[derive(Debug, Clone)]
pub struct ChannelSolution {
    pub l: usize,
    pub energy: f64,
    pub regular: bool,
    segments: Vec<Segment>,
    starts: Vec<RadialState>,
    ends: Vec<RadialState>,
    core_radius: f64,
    ln_norm_core: f64,
    ln_norm_total: f64,
}

impl ChannelSolution {
    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn outer_radius(&self) -> f64 {
        self.segments.last().map(|s| s.r_out).unwrap_or(0.0)
    }

    /// State at the outer radius, inside the last segment.
    pub fn boundary_state(&self) -> RadialState {
        *self.ends.last().expect("solution has at least one segment")
    }

    /// Unit-normalized `(y, y')` at the outer radius.
    pub fn boundary_pair(&self) -> (f64, f64) {
        let s = self.boundary_state();
        (s.value, s.derivative)
    }

    pub fn log_derivative(&self) -> f64 {
        self.boundary_state().log_derivative()
    }

    /// `(r, y'/y)` on the inner side of every segment end.
    pub fn log_derivative_at_boundaries(&self) -> Vec<(f64, f64)> {
        self.segments
            .iter()
            .zip(&self.ends)
            .map(|(seg, st)| (seg.r_out, st.log_derivative()))
            .collect()
    }

    /// Boundary flux per unit boundary value of the physical (un-gauged) field,
    /// `sigma u'/u` in acoustic variables.
    pub fn flux_ratio(&self) -> f64 {
        let seg = self.segments.last().expect("non-empty");
        let (y, yp) = self.boundary_pair();
        seg.flux_weight / seg.value_weight * yp / y
    }

    /// L^2 mass `∫ r^2 y^2 dr` over `[0, core_radius]`, in units where the
    /// outer state has unit norm.
    pub fn norm_core(&self) -> f64 {
        self.ln_norm_core.exp()
    }

    pub fn norm_total(&self) -> f64 {
        self.ln_norm_total.exp()
    }

    pub fn ln_norm_core(&self) -> f64 {
        self.ln_norm_core
    }

    pub fn ln_norm_total(&self) -> f64 {
        self.ln_norm_total
    }

    pub fn core_radius(&self) -> f64 {
        self.core_radius
    }

    /// Fraction of the L^2 mass inside the core radius.
    pub fn concentration(&self) -> f64 {
        (self.ln_norm_core - self.ln_norm_total).exp().min(1.0)
    }

    /// `(y, y')` at radius `r`, scaled consistently with [`Self::boundary_pair`].
    /// A radius on an interface is evaluated from the inner side.
    pub fn value_at(&self, r: f64) -> (f64, f64) {
        let final_log = self.boundary_state().log_scale;
        let r = r.clamp(0.0, self.outer_radius());
        let idx = self
            .segments
            .iter()
            .position(|s| r <= s.r_out)
            .unwrap_or(self.segments.len() - 1);
        let seg = &self.segments[idx];
        let basis = Basis::new(seg.kappa2, seg.r_out);
        if idx == 0 {
            if r == 0.0 {
                let (v, d, log) = basis.regular(self.l, f64::MIN_POSITIVE.sqrt());
                let factor = (log - final_log).exp();
                return if self.l == 0 { (v * factor, 0.0) } else { (0.0, d * factor) };
            }
            let (v, d, log) = basis.regular(self.l, r);
            let factor = (log - final_log).exp();
            return (v * factor, d * factor);
        }
        let start = &self.starts[idx];
        if r <= seg.r_in {
            let factor = (start.log_scale - final_log).exp();
            return (start.value * factor, start.derivative * factor);
        }
        let (m, growth) = basis.transfer(self.l, seg.r_in, r);
        let (v, d) = apply(&m, start.value, start.derivative);
        let factor = (start.log_scale + growth - final_log).exp();
        (v * factor, d * factor)
    }
}

fn validate(segments: &[Segment]) -> Result<()> {
    let first = segments
        .first()
        .ok_or_else(|| CloakError::Geometry("no segments to propagate through".into()))?;
    if first.r_in != 0.0 {
        return Err(CloakError::Geometry(format!(
            "first segment starts at {} instead of the origin",
            first.r_in
        )));
    }
    for (i, s) in segments.iter().enumerate() {
        if !(s.r_out > s.r_in) {
            return Err(CloakError::Geometry(format!(
                "segment {i} [{}, {}] has no thickness",
                s.r_in, s.r_out
            )));
        }
        if !s.kappa2.is_finite() {
            return Err(CloakError::Domain(format!("segment {i} has non-finite wavenumber")));
        }
        if !(s.value_weight > 0.0 && s.flux_weight > 0.0) {
            return Err(CloakError::Domain(format!(
                "segment {i} has non-positive matching weights"
            )));
        }
        if i > 0 && segments[i - 1].r_out != s.r_in {
            return Err(CloakError::Geometry(format!(
                "segment {i} starts at {} but the previous one ends at {}",
                s.r_in,
                segments[i - 1].r_out
            )));
        }
    }
    Ok(())
}

/// Splits any segment straddling `radius` so that `radius` is a boundary.
pub fn split_at(segments: &[Segment], radius: f64) -> Vec<Segment> {
    let mut out = Vec::with_capacity(segments.len() + 1);
    for s in segments {
        if s.r_in < radius && radius < s.r_out {
            out.push(Segment { r_out: radius, ..*s });
            out.push(Segment { r_in: radius, ..*s });
        } else {
            out.push(*s);
        }
    }
    out
}

/// Propagates the solution regular at the origin through `segments` for
/// angular momentum `l`. Masses are split at `core_radius`.
pub fn propagate(segments: &[Segment], l: usize, energy: f64, core_radius: f64) -> Result<ChannelSolution> {
    validate(segments)?;
    if l > super::bessel::MAX_ORDER {
        return Err(CloakError::Configuration {
            l,
            max: super::bessel::MAX_ORDER,
        });
    }
    let segments = split_at(segments, core_radius);
    let n = segments.len();
    let mut starts = Vec::with_capacity(n);
    let mut ends = Vec::with_capacity(n);
    let mut mass = Mass {
        core: 0.0,
        total: 0.0,
        log_ref: f64::NEG_INFINITY,
    };

    let first = segments[0];
    let basis = Basis::new(first.kappa2, first.r_out);
    let (v, d, log) = basis.regular(l, first.r_out);
    let end = RadialState::normalized(v, d, first.r_out, log);
    let integral = regular_integral(basis, l, first, &end);
    mass.add(integral, end.log_scale, first.r_out <= core_radius);
    starts.push(RadialState {
        value: if l == 0 { 1.0 } else { 0.0 },
        derivative: 0.0,
        log_scale: f64::NEG_INFINITY,
    });
    ends.push(end);

    for i in 1..n {
        let prev = &segments[i - 1];
        let seg = segments[i];
        let last = ends[i - 1];
        let value = last.value * prev.value_weight / seg.value_weight;
        let deriv = last.derivative * prev.flux_weight / seg.flux_weight;
        let start = RadialState::normalized(value, deriv, seg.r_in, last.log_scale);

        let (end, integral) = match thin_step(&seg, l, &start) {
            Some(done) => done,
            None => {
                let basis = Basis::new(seg.kappa2, seg.r_out);
                let (m, growth) = basis.transfer(l, seg.r_in, seg.r_out);
                let (v, d) = apply(&m, start.value, start.derivative);
                let end = RadialState::normalized(v, d, seg.r_out, start.log_scale + growth);
                (end, shell_integral(basis, l, &seg, &start, &end))
            }
        };
        mass.add(integral, end.log_scale, seg.r_out <= core_radius);
        starts.push(start);
        ends.push(end);
    }

    let final_log = ends[n - 1].log_scale;
    let to_final = 2.0 * (mass.log_ref - final_log);
    Ok(ChannelSolution {
        l,
        energy,
        regular: true,
        segments,
        starts,
        ends,
        core_radius,
        ln_norm_core: mass.core.ln() + to_final,
        ln_norm_total: mass.total.ln() + to_final,
    })
}

/// Thin shells are stepped without special functions when `h / r` and
/// `h sqrt(max(|kappa2|, l(l+1)/r^2))` stay below these bounds.
const THIN_RELATIVE_WIDTH: f64 = 1e-3;
const THIN_PHASE: f64 = 0.1;

/// `(cos-like, sin-like)` propagator of `w'' = -q w` over `h`, as a matrix on `(w, w')`.
fn constant_step(q: f64, h: f64) -> [f64; 4] {
    if q > 0.0 {
        let k = q.sqrt();
        let (s, c) = (k * h).sin_cos();
        [c, s / k, -k * s, c]
    } else if q < 0.0 {
        let m = (-q).sqrt();
        let (s, c) = ((m * h).sinh(), (m * h).cosh());
        [c, s / m, m * s, c]
    } else {
        [1.0, h, 0.0, 1.0]
    }
}

/// Fourth-order commutator-free Magnus step of `w = r y` across a thin
/// shell, with Simpson's rule for `∫ w^2`. Returns the end state and the
/// integral in units of the end state.
fn thin_step(seg: &Segment, l: usize, start: &RadialState) -> Option<(RadialState, f64)> {
    let (a, b) = (seg.r_in, seg.r_out);
    let h = b - a;
    let big_l = (l * (l + 1)) as f64;
    let stiffness = seg.kappa2.abs().max(big_l / (a * a));
    if h > THIN_RELATIVE_WIDTH * a || h * stiffness.sqrt() > THIN_PHASE {
        return None;
    }
    let mid = 0.5 * (a + b);
    let offset = h * 3f64.sqrt() / 6.0;
    let q = |r: f64| seg.kappa2 - big_l / (r * r);
    let (q1, q2) = (q(mid - offset), q(mid + offset));
    let heavy = 0.5 + 3f64.sqrt() / 3.0;
    let light = 1.0 - heavy;
    let first = constant_step(heavy * q1 + light * q2, 0.5 * h);
    let second = constant_step(light * q1 + heavy * q2, 0.5 * h);

    let w0 = a * start.value;
    let wp0 = start.value + a * start.derivative;
    let (w1, wp1) = apply(&first, w0, wp0);
    let (w2, wp2) = apply(&second, w1, wp1);
    let end = RadialState::normalized(w2 / b, (wp2 - w2 / b) / b, b, start.log_scale);
    let simpson = h / 6.0 * (w0 * w0 + 4.0 * w1 * w1 + w2 * w2);
    Some((end, simpson * (2.0 * (start.log_scale - end.log_scale)).exp()))
}

/// Carries `state` (given at `segment.r_in`) to `segment.r_out`.
pub fn transport(segment: &Segment, l: usize, state: RadialState) -> RadialState {
    let basis = Basis::new(segment.kappa2, segment.r_out);
    let (m, growth) = basis.transfer(l, segment.r_in, segment.r_out);
    let (v, d) = apply(&m, state.value, state.derivative);
    RadialState::normalized(v, d, segment.r_out, state.log_scale + growth)
}

/// `∫_0^b r^2 y^2` of the regular solution, in units of `end`.
fn regular_integral(basis: Basis, l: usize, seg: Segment, end: &RadialState) -> f64 {
    if !matches!(basis, Basis::Static) {
        let (fb, big) = norm_potential(l, seg.kappa2, seg.r_out, end.value, end.derivative);
        let integral = fb / (2.0 * seg.kappa2);
        if integral > 0.0 && big <= CANCELLATION_LIMIT * fb.abs() {
            return integral;
        }
    }
    let b = seg.r_out;
    let panels = panel_count(basis, l, 0.0, b);
    quadrature(0.0, b, panels, |r| {
        let (v, _, log) = basis.regular(l, r);
        v * (log - end.log_scale).exp()
    })
}

/// `∫_a^b r^2 y^2` across one interior shell, in units of `end`.
fn shell_integral(basis: Basis, l: usize, seg: &Segment, start: &RadialState, end: &RadialState) -> f64 {
    let (a, b) = (seg.r_in, seg.r_out);
    if !matches!(basis, Basis::Static) {
        let rescale = (start.log_scale - end.log_scale).exp();
        let (fb, big_b) = norm_potential(l, seg.kappa2, b, end.value, end.derivative);
        let (fa, big_a) = norm_potential(l, seg.kappa2, a, start.value * rescale, start.derivative * rescale);
        let diff = fb - fa;
        let integral = diff / (2.0 * seg.kappa2);
        if integral > 0.0 && big_a.max(big_b) <= CANCELLATION_LIMIT * diff.abs() {
            return integral;
        }
    }
    let panels = panel_count(basis, l, a, b);
    quadrature(a, b, panels, |r| {
        let (m, growth) = basis.transfer(l, a, r);
        let (v, _) = apply(&m, start.value, start.derivative);
        v * (start.log_scale + growth - end.log_scale).exp()
    })
}

fn panel_count(basis: Basis, l: usize, a: f64, b: f64) -> usize {
    let rate = match basis {
        Basis::Oscillatory(k) => k,
        Basis::Evanescent(m) => m,
        Basis::Static => 0.0,
    };
    let wiggle = 2.0 * rate * (b - a);
    let power = if a > 0.0 { (l as f64 + 1.0) * (b / a).ln() } else { 0.0 };
    (1.0 + wiggle + power).ceil().min(400.0) as usize
}

fn quadrature(a: f64, b: f64, panels: usize, value: impl Fn(f64) -> f64) -> f64 {
    let rule = gauss_legendre();
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let mid = lo + 0.5 * h;
        for &(x, w) in rule.iter() {
            let r = mid + 0.5 * h * x;
            let y = value(r);
            total += 0.5 * h * w * r * r * y * y;
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn det(m: &[f64; 4]) -> f64 {
        m[0] * m[3] - m[1] * m[2]
    }

    const CASES: [(f64, f64, f64); 7] = [
        (0.5, 0.3, 0.31),
        (0.5, 1.0, 3.0),
        (64.0, 0.9, 1.0),
        (-1.5, 0.2, 0.9),
        (-4e8, 1.5, 1.500_01),
        (0.0, 0.5, 2.0),
        (2.5e-5, 1.01, 1.05),
    ];

    #[test]
    fn transfer_preserves_the_scaled_wronskian() {
        // the determinant is only well conditioned while the growth is moderate
        for &(kappa2, a, b) in &CASES {
            for l in [0usize, 1, 4, 12] {
                let basis = Basis::new(kappa2, b);
                let (m, growth) = basis.transfer(l, a, b);
                if growth > 3.0 {
                    continue;
                }
                let scaled = det(&m) * (2.0 * growth).exp() * b * b / (a * a);
                assert!((scaled - 1.0).abs() < 1e-10, "kappa2 {kappa2} [{a}, {b}] l {l}: {scaled}");
            }
        }
    }

    #[test]
    fn transfer_maps_the_regular_solution() {
        for &(kappa2, a, b) in &CASES {
            for l in [0usize, 1, 4, 12] {
                let basis = Basis::new(kappa2, b);
                let (m, growth) = basis.transfer(l, a, b);
                let (ya, da, la) = basis.regular(l, a);
                let (yb, db, lb) = basis.regular(l, b);
                let (y, d) = apply(&m, ya, da);
                let shift = (la + growth - lb).exp();
                assert!((y * shift / yb - 1.0).abs() < 1e-10, "kappa2 {kappa2} [{a}, {b}] l {l}");
                let scale = db.abs() + yb.abs() / b;
                assert!((d * shift - db).abs() < 1e-10 * scale, "kappa2 {kappa2} [{a}, {b}] l {l}");
            }
        }
    }

    #[test]
    fn free_regular_solution_matches_bessel() {
        let k: f64 = 0.7;
        let segs = vec![Segment::plain(0.0, 1.0, k * k), Segment::plain(1.0, 3.0, k * k)];
        for l in 0..6 {
            let sol = propagate(&segs, l, k * k, 1.0).unwrap();
            let v = super::super::bessel::spherical_bessel(l, 3.0 * k).unwrap();
            assert_relative_eq!(sol.log_derivative(), k * v.jp / v.j, max_relative = 1e-12);
        }
    }

    #[test]
    fn uniform_ball_norm_matches_closed_form() {
        // ∫_0^R r^2 j_0(kr)^2 dr = (R - sin(2kR)/(2k)) / (2 k^2)
        let k: f64 = 2.0;
        let segs = vec![Segment::plain(0.0, 3.0, k * k)];
        let sol = propagate(&segs, 0, k * k, 1.0).unwrap();
        let (y3, _) = sol.value_at(3.0);
        let j = |r: f64| (k * r).sin() / (k * r);
        let integral = |r: f64| (r - (2.0 * k * r).sin() / (2.0 * k)) / (2.0 * k * k);
        let scale = y3 / j(3.0);
        assert_relative_eq!(sol.norm_core(), integral(1.0) * scale * scale, max_relative = 1e-10);
        assert_relative_eq!(sol.norm_total(), integral(3.0) * scale * scale, max_relative = 1e-10);
    }

    #[test]
    fn rejects_gaps_and_empty_shells() {
        let gap = vec![Segment::plain(0.0, 1.0, 1.0), Segment::plain(1.1, 3.0, 1.0)];
        assert!(matches!(propagate(&gap, 0, 1.0, 1.0), Err(CloakError::Geometry(_))));
        let flat = vec![Segment::plain(0.0, 1.0, 1.0), Segment::plain(1.0, 1.0, 1.0)];
        assert!(matches!(propagate(&flat, 0, 1.0, 1.0), Err(CloakError::Geometry(_))));
    }

    #[test]
    fn thick_barrier_stays_finite() {
        let segs = vec![
            Segment::plain(0.0, 1.0, 0.5),
            Segment::plain(1.0, 2.0, -1e6),
            Segment::plain(2.0, 3.0, 0.5),
        ];
        let sol = propagate(&segs, 3, 0.5, 1.0).unwrap();
        let st = sol.boundary_state();
        assert!(st.value.is_finite() && st.derivative.is_finite());
        assert!(st.log_scale > 900.0);
        assert!(sol.concentration() < 1e-100);
    }
}
