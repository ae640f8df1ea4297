#![allow(dead_code)]

use poisson_disorder::model::{ModelParams, Statistic3};
use rand::Rng;

/// Classical fourth-order Runge–Kutta with `n` equal steps.
pub fn rk4<const N: usize>(f: impl Fn(&[f64; N]) -> [f64; N], y0: [f64; N], t: f64, n: usize) -> [f64; N] {
    let h = t / n as f64;
    let mut y = y0;
    let add = |y: &[f64; N], k: &[f64; N], s: f64| {
        let mut o = *y;
        for i in 0..N {
            o[i] += s * k[i];
        }
        o
    };
    for _ in 0..n {
        let k1 = f(&y);
        let k2 = f(&add(&y, &k1, h / 2.0));
        let k3 = f(&add(&y, &k2, h / 2.0));
        let k4 = f(&add(&y, &k3, h));
        for i in 0..N {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    y
}

/// Right-hand side of the inter-arrival ODE for `(φ×, φ⁺, φ¹)`, written out
/// independently of the library.
pub fn ode(p: &ModelParams) -> impl Fn(&[f64; 3]) -> [f64; 3] {
    let (l, a) = (p.lambda(), p.lambda() - p.alpha() + p.beta());
    move |s| [l * s[1] + 2.0 * a * s[0], 2.0 * l + a * s[1], l + a * s[2]]
}

pub fn rk4_flow(t: f64, s: &Statistic3, p: &ModelParams) -> [f64; 3] {
    let steps = ((t / 1e-3).ceil() as usize).max(1);
    rk4(ode(p), s.as_array(), t, steps)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

pub fn case_i() -> ModelParams {
    ModelParams::with_rates(2.0, 1.0, 2.0, 2.0).unwrap()
}

pub fn case_iibi2() -> ModelParams {
    ModelParams::with_rates(3.0, 1.0, 0.5, 2.0).unwrap()
}

pub fn case_iii() -> ModelParams {
    ModelParams::with_rates(1.0, 2.0, 1.0, 1.0).unwrap()
}

pub fn case_iibi1() -> ModelParams {
    ModelParams::with_rates(4.0, 1.0, 1.0, 5.0).unwrap()
}

pub fn case_iibii1() -> ModelParams {
    ModelParams::with_rates(2.5, 1.0, 1.0, 2.0).unwrap()
}

pub fn case_iibii2() -> ModelParams {
    ModelParams::with_rates(2.5, 1.0, 1.0, 0.5).unwrap()
}

pub fn case_iia() -> ModelParams {
    ModelParams::with_rates(3.0, 1.0, 0.5, 1.0).unwrap()
}

/// Random rates covering `a > 0`, `a < 0` and `α < β`.
pub fn random_params<R: Rng>(rng: &mut R) -> ModelParams {
    let alpha = rng.random_range(0.2..4.0);
    let beta = rng.random_range(0.2..3.0);
    let lambda = rng.random_range(0.1..2.0);
    let c = rng.random_range(0.2..5.0);
    ModelParams::with_rates(alpha, beta, lambda, c).unwrap()
}

/// On-manifold state built from two channel odds.
pub fn random_manifold_state<R: Rng>(rng: &mut R, scale: f64) -> Statistic3 {
    Statistic3::from_channel_odds(rng.random_range(0.0..scale), rng.random_range(0.0..scale))
}

/// Generic feasible state: `φ¹ ≤ φ⁺` and `φ× ≤ (φ⁺)²/4`.
pub fn random_feasible_state<R: Rng>(rng: &mut R, scale: f64) -> Statistic3 {
    let y: f64 = rng.random_range(0.0..scale);
    let z = rng.random_range(0.0..=1.0) * y;
    let x = rng.random_range(0.0..=1.0) * y * y / 4.0;
    Statistic3 { phi_x: x, phi_p: y, phi_1: z }
}
