//! Independent oracles shared by the integration tests and the acceptance suite.
#![allow(dead_code)]

use std::f64::consts::PI;

use ode_solvers::{Dopri5, OutputType, System, Vector2};
use qcloak::synthesis::{CorePotential, Layer, LayeredMedium, OUTER_RADIUS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `sigma = 1 + sum s_j sin^2(j pi r / 3)`, `a = 1 + sum m_j sin^2(j pi r / 3)`:
/// flat at the origin and free to first order at the outer radius.
#[derive(Debug, Clone)]
pub struct SmoothMedium {
    pub sigma_modes: [f64; 3],
    pub a_modes: [f64; 3],
}

impl SmoothMedium {
    fn series(modes: &[f64; 3], r: f64) -> (f64, f64) {
        let mut v = 1.0;
        let mut d = 0.0;
        for (j, &c) in modes.iter().enumerate() {
            let w = (j + 1) as f64 * PI / OUTER_RADIUS;
            v += c * (w * r).sin().powi(2);
            d += c * w * (2.0 * w * r).sin();
        }
        (v, d)
    }

    pub fn sigma(&self, r: f64) -> f64 {
        Self::series(&self.sigma_modes, r).0
    }

    pub fn a(&self, r: f64) -> f64 {
        Self::series(&self.a_modes, r).0
    }

    /// Uniform shells with midpoint coefficients.
    pub fn layered(&self, shells: usize) -> LayeredMedium {
        let h = OUTER_RADIUS / shells as f64;
        let layers = (0..shells)
            .map(|i| {
                let r_in = h * i as f64;
                let r_out = if i + 1 == shells { OUTER_RADIUS } else { h * (i + 1) as f64 };
                let mid = 0.5 * (r_in + r_out);
                Layer { r_in, r_out, sigma: self.sigma(mid), a: self.a(mid) }
            })
            .collect();
        LayeredMedium::new(layers, CorePotential::zero()).expect("valid smooth medium")
    }
}

pub fn random_media(seed: u64, count: usize) -> Vec<SmoothMedium> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| SmoothMedium {
            sigma_modes: [rng.gen_range(-0.3..0.8), rng.gen_range(-0.2..0.4), rng.gen_range(-0.1..0.2)],
            a_modes: [rng.gen_range(-0.3..1.5), rng.gen_range(-0.2..0.6), rng.gen_range(-0.1..0.3)],
        })
        .collect()
}

/// `y = (u, r^2 sigma u')`.
struct RadialOde<'a> {
    medium: &'a SmoothMedium,
    l: f64,
    energy: f64,
}

impl System<f64, Vector2<f64>> for RadialOde<'_> {
    fn system(&self, r: f64, y: &Vector2<f64>, dy: &mut Vector2<f64>) {
        let s = self.medium.sigma(r);
        dy[0] = y[1] / (r * r * s);
        dy[1] = (s * self.l * (self.l + 1.0) - self.energy * self.medium.a(r) * r * r) * y[0];
    }
}

/// `u'/u` at the outer radius from adaptive Dormand-Prince integration of the
/// smooth equation, started from the small-radius series.
pub fn oracle_log_derivative(medium: &SmoothMedium, l: usize, energy: f64) -> f64 {
    let r0: f64 = 1e-4;
    let kappa2 = energy * medium.a(0.0) / medium.sigma(0.0);
    let lf = l as f64;
    let c = -kappa2 / (2.0 * (2.0 * lf + 3.0));
    let u = r0.powi(l as i32) * (1.0 + c * r0 * r0);
    let du = lf * r0.powi(l as i32 - 1) + (lf + 2.0) * c * r0.powi(l as i32 + 1);
    let du = if l == 0 { 2.0 * c * r0 } else { du };
    let y0 = Vector2::new(u, r0 * r0 * medium.sigma(r0) * du);
    let ode = RadialOde { medium, l: lf, energy };
    let mut stepper = Dopri5::new(ode, r0, OUTER_RADIUS, OUTER_RADIUS, y0, 1e-12, 1e-14 * u.abs().max(1e-300));
    stepper.set_output(OutputType::Sparse);
    stepper.integrate().expect("oracle integration");
    let y = stepper.y_out().last().expect("final state");
    let s = medium.sigma(OUTER_RADIUS);
    y[1] / (OUTER_RADIUS * OUTER_RADIUS * s) / y[0]
}

/// Pushes the identity tensor forward through `r -> 1 + r/2` by a numeric
/// Jacobian: returns `(sigma_rad, sigma_tan, det)` at `rho` in `(1, 2)`.
pub fn jacobian_push_forward(rho: f64) -> (f64, f64, f64) {
    let inverse = |p: f64| 2.0 * (p - 1.0);
    let h = 1e-6;
    let r = inverse(rho);
    // dF/dr along the radius, |F|/|x| tangentially
    let radial = h / (inverse(rho + 0.5 * h) - inverse(rho - 0.5 * h));
    let tangential = rho / r;
    let det = radial * tangential * tangential;
    (radial * radial / det, tangential * tangential / det, 1.0 / det)
}

/// Positive roots of `tan k = k`, by bisection on `sin k - k cos k`.
pub fn tan_k_equals_k(n: usize) -> f64 {
    let f = |k: f64| k.sin() - k * k.cos();
    let (mut lo, mut hi) = (n as f64 * PI + 1e-9, (n as f64 + 0.5) * PI - 1e-9);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(lo) * f(mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}
