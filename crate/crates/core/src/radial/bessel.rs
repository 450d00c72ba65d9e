//! Spherical Bessel functions of real argument.
//!
//! Propagating shells use the regular/irregular pair `j_l`, `y_l`; evanescent
//! shells use the modified pair `i_l`, `k_l` (normalized so that
//! `i_0 = sinh x / x` and `k_0 = e^{-x} / x`). The solver never touches the raw
//! values directly: every pair is handed out as a [`ScaledPair`] whose
//! exponent is split off, so high orders at tiny arguments and thick barriers
//! stay finite.

use crate::error::{CloakError, Result};

/// Largest angular momentum accepted by the special-function layer.
pub const MAX_ORDER: usize = 200;

const RESCALE_ABOVE: f64 = 1e200;
const RESCALE_BY: f64 = 1e-200;
const LN_RESCALE: f64 = 460.517_018_598_809_1; // 200 ln 10

/// `j_l`, `y_l` and their derivatives at one argument.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpecialFunctionValue {
    pub l: usize,
    pub x: f64,
    pub j: f64,
    pub y: f64,
    pub jp: f64,
    pub yp: f64,
}

impl SpecialFunctionValue {
    /// `j y' - j' y`, which equals `1 / x^2` exactly.
    pub fn wronskian(&self) -> f64 {
        self.j * self.yp - self.jp * self.y
    }
}

/// Modified spherical Bessel functions with the exponential behaviour removed:
/// `i_scaled = e^{-x} i_l(x)` and `k_scaled = e^{x} k_l(x)` (derivatives alike).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModifiedBesselValue {
    pub l: usize,
    pub x: f64,
    pub i_scaled: f64,
    pub ip_scaled: f64,
    pub k_scaled: f64,
    pub kp_scaled: f64,
}

impl ModifiedBesselValue {
    /// `i k' - i' k`, which equals `-1 / x^2` exactly.
    pub fn wronskian(&self) -> f64 {
        self.i_scaled * self.kp_scaled - self.ip_scaled * self.k_scaled
    }
}

/// A pair of independent radial solutions in log-scaled form.
///
/// The true functions are `f = f * e^{s}`, `g = g * e^{-s}` with `s = log_scale`;
/// `fp`, `gp` are the argument-derivatives carrying the same factors.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ScaledPair {
    pub f: f64,
    pub fp: f64,
    pub g: f64,
    pub gp: f64,
    pub log_scale: f64,
}

fn check_args(l: usize, x: f64) -> Result<()> {
    if l > MAX_ORDER {
        return Err(CloakError::Configuration { l, max: MAX_ORDER });
    }
    if !(x > 0.0) || !x.is_finite() {
        return Err(CloakError::Domain(format!(
            "spherical Bessel argument must be positive and finite, got {x}"
        )));
    }
    Ok(())
}

/// Evaluates `j_l(x)`, `y_l(x)` and derivatives.
///
/// Values that leave the `f64` range (very high order at tiny argument)
/// saturate to zero or infinity; the solver itself works with scaled pairs.
pub fn spherical_bessel(l: usize, x: f64) -> Result<SpecialFunctionValue> {
    check_args(l, x)?;
    let p = oscillatory_pair(l, x);
    let up = p.log_scale.exp();
    let down = (-p.log_scale).exp();
    Ok(SpecialFunctionValue {
        l,
        x,
        j: p.f * up,
        y: p.g * down,
        jp: p.fp * up,
        yp: p.gp * down,
    })
}

/// Evaluates the exponentially scaled modified functions `e^{-x} i_l`, `e^{x} k_l`.
pub fn modified_spherical_bessel(l: usize, x: f64) -> Result<ModifiedBesselValue> {
    check_args(l, x)?;
    let p = evanescent_pair(l, x);
    let up = (p.log_scale - x).exp();
    let down = (x - p.log_scale).exp();
    Ok(ModifiedBesselValue {
        l,
        x,
        i_scaled: p.f * up,
        ip_scaled: p.fp * up,
        k_scaled: p.g * down,
        kp_scaled: p.gp * down,
    })
}

fn j0(x: f64) -> f64 {
    x.sin() / x
}

fn j1(x: f64) -> f64 {
    x.sin() / (x * x) - x.cos() / x
}

/// Miller backward recurrence for the minimal solution of
/// `t_{n-1} = (2n+1)/x t_n - sign * t_{n+1}`.
///
/// Returns `(t_l, t_{l+1}, t_0, t_1, shift)` where `shift` is the log of the
/// rescaling applied after `t_l` was recorded, so that `t_l e^{shift}` is
/// expressed in the same units as `t_0`.
fn miller(l: usize, x: f64, start: usize, sign: f64) -> (f64, f64, f64, f64, f64) {
    let mut upper = 0.0_f64;
    let mut cur = 1e-30_f64;
    let mut saved: Option<(f64, f64)> = None;
    let mut shift = 0.0;
    for n in (1..=start).rev() {
        if n == l {
            saved = Some((cur, upper));
            shift = 0.0;
        }
        let lower = (2 * n + 1) as f64 / x * cur - sign * upper;
        upper = cur;
        cur = lower;
        if cur.abs() > RESCALE_ABOVE {
            cur *= RESCALE_BY;
            upper *= RESCALE_BY;
            shift -= LN_RESCALE;
        }
    }
    let (tl, tl1) = saved.unwrap_or((cur, upper));
    if l == 0 {
        shift = 0.0;
    }
    (tl, tl1, cur, upper, shift)
}

/// Upward recurrence `u_{n+1} = (2n+1)/x u_n + sign * u_{n-1}` with rescaling.
/// Returns `(u_l, u_{l+1}, log_scale)`.
fn upward(l: usize, x: f64, u0: f64, u1: f64, sign: f64) -> (f64, f64, f64) {
    let (mut a, mut b) = (u0, u1);
    let mut log_scale = 0.0;
    for n in 1..=l {
        let c = (2 * n + 1) as f64 / x * b + sign * a;
        a = b;
        b = c;
        if b.abs() > RESCALE_ABOVE {
            a *= RESCALE_BY;
            b *= RESCALE_BY;
            log_scale += LN_RESCALE;
        }
    }
    (a, b, log_scale)
}

/// `j_l`, `y_l` in scaled form.
pub(crate) fn oscillatory_pair(l: usize, x: f64) -> ScaledPair {
    let lf = l as f64;
    let (y_l, y_l1, log_y) = upward(l, x, -x.cos() / x, -x.cos() / (x * x) - x.sin() / x, -1.0);

    if x >= lf.max(2.0) {
        let (j_l, j_l1, _) = upward(l, x, j0(x), j1(x), -1.0);
        let scale = log_y.exp();
        return ScaledPair {
            f: j_l,
            fp: lf / x * j_l - j_l1,
            g: y_l * scale,
            gp: (lf / x * y_l - y_l1) * scale,
            log_scale: 0.0,
        };
    }

    // Below the turning point j_l is positive and recurrence upward loses it.
    let start = l + 50 + (3.0 * x.sqrt()).ceil() as usize;
    let (tl, tl1, t0, t1, shift) = miller(l, x, start, 1.0);
    let (true0, true1) = (j0(x), j1(x));
    let norm = if true0.abs() >= true1.abs() {
        true0 / t0
    } else {
        true1 / t1
    };
    let sign = (tl * norm).signum();
    let log_j = tl.abs().ln() + shift + norm.abs().ln();
    let ratio = tl1 / tl;
    let scale = (log_y + log_j).exp();
    ScaledPair {
        f: sign,
        fp: sign * (lf / x - ratio),
        g: y_l * scale,
        gp: (lf / x * y_l - y_l1) * scale,
        log_scale: log_j,
    }
}

/// `i_l`, `k_l` in scaled form.
pub(crate) fn evanescent_pair(l: usize, x: f64) -> ScaledPair {
    let lf = l as f64;
    let (ln_i, ratio) = scaled_i_log(l, x);
    let (k_l, k_l1, log_k) = upward(l, x, 1.0 / x, (1.0 + 1.0 / x) / x, 1.0);
    // k_l e^{x}; true k_l = k_l e^{log_k - x}; s = x + ln_i.
    let scale = (log_k + ln_i).exp();
    ScaledPair {
        f: 1.0,
        fp: ratio + lf / x,
        g: k_l * scale,
        gp: (lf / x * k_l - k_l1) * scale,
        log_scale: x + ln_i,
    }
}

/// Returns `(ln(e^{-x} i_l(x)), i_{l+1}/i_l)`.
fn scaled_i_log(l: usize, x: f64) -> (f64, f64) {
    let lf = l as f64;
    if x >= 25.0 && 2.0 * x >= (lf + 1.0) * (lf + 2.0) {
        let a = closed_form_scaled_i(l, x);
        let b = closed_form_scaled_i(l + 1, x);
        return (a.ln(), b / a);
    }
    let start = ((lf * lf + 80.0 * x).sqrt()).ceil() as usize + 40;
    let (tl, tl1, t0, _t1, shift) = miller(l, x, start, -1.0);
    let i0 = -(-2.0 * x).exp_m1() / (2.0 * x);
    let ln_i = tl.abs().ln() + shift - t0.abs().ln() + i0.ln();
    (ln_i, tl1 / tl)
}

/// Finite closed form of `e^{-x} i_n(x)`, accurate once `2x` exceeds `n(n+1)`.
fn closed_form_scaled_i(n: usize, x: f64) -> f64 {
    let mut term = 1.0;
    let mut alternating = 1.0;
    let mut positive = 1.0;
    for k in 0..n {
        term *= ((n + k + 1) * (n - k)) as f64 / ((k + 1) as f64 * 2.0 * x);
        positive += term;
        alternating += if k % 2 == 0 { -term } else { term };
    }
    let parity = if n % 2 == 0 { 1.0 } else { -1.0 };
    (alternating - parity * (-2.0 * x).exp() * positive) / (2.0 * x)
}
