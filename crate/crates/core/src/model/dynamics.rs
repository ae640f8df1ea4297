//! Deterministic flow between observations, jump maps at observations, the
//! running cost and the infinitesimal generator of the statistic.
//!
//! Between jumps every channel odds solves `dz/dt = λ + a z`, so with
//! `g = e^{at}` and `T = (e^{at} − 1)/a` (`T = t` when `a = 0`):
//!
//! ```text
//! z(t) = g φ¹ + λT
//! y(t) = g φ⁺ + 2λT
//! x(t) = g² φ× + λ g T φ⁺ + λ² T²
//! ```
//!
//! These are the usual exponential closed forms rearranged so that they stay
//! well conditioned for small `|a|`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::params::ModelParams;
use crate::model::statistic::Statistic3;

/// Observation channel that produced a jump.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Channel {
    One,
    Two,
}

impl Channel {
    pub const BOTH: [Channel; 2] = [Channel::One, Channel::Two];

    pub fn index(self) -> usize {
        match self {
            Channel::One => 0,
            Channel::Two => 1,
        }
    }
}

/// Time-dependent coefficients `(g, T)` of the flow at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowCoefficients {
    pub growth: f64,
    pub drift: f64,
}

impl FlowCoefficients {
    #[inline]
    pub fn at(t: f64, p: &ModelParams) -> Self {
        flow_coefficients(t, p.a(), p.a_cutoff())
    }

    #[inline]
    pub fn apply(&self, s: &Statistic3, lambda: f64) -> Statistic3 {
        let g = self.growth;
        let tt = self.drift;
        Statistic3 {
            phi_x: g * g * s.phi_x + lambda * g * tt * s.phi_p + lambda * lambda * tt * tt,
            phi_p: g * s.phi_p + 2.0 * lambda * tt,
            phi_1: g * s.phi_1 + lambda * tt,
        }
    }
}

#[inline]
pub(crate) fn flow_coefficients(t: f64, a: f64, cutoff: f64) -> FlowCoefficients {
    if a.abs() < cutoff {
        FlowCoefficients {
            growth: 1.0,
            drift: t,
        }
    } else {
        let at = a * t;
        FlowCoefficients {
            growth: at.exp(),
            drift: at.exp_m1() / a,
        }
    }
}

/// Flow for any real `t` (negative values run the path backward). No checks.
#[inline]
pub fn flow_signed(t: f64, s: &Statistic3, p: &ModelParams) -> Statistic3 {
    FlowCoefficients::at(t, p).apply(s, p.lambda())
}

/// Deterministic evolution of the statistic for a duration `t ≥ 0`.
pub fn flow(t: f64, s: &Statistic3, p: &ModelParams) -> Result<Statistic3> {
    if !(t >= 0.0) {
        return Err(Error::NegativeTime(t));
    }
    s.ensure_feasible()?;
    Ok(flow_signed(t, s, p))
}

fn close_rel(x: f64, y: f64, tol: f64) -> bool {
    (x - y).abs() <= tol * x.abs().max(y.abs())
}

/// Whether `flow(t+u, s)` and `flow(u, flow(t, s))` agree to `1e-10` relative.
pub fn flow_semigroup_check(t: f64, u: f64, s: &Statistic3, p: &ModelParams) -> Result<bool> {
    let direct = flow(t + u, s, p)?;
    let composed = flow(u, &flow(t, s, p)?, p)?;
    Ok(close_rel(direct.phi_x, composed.phi_x, 1e-10)
        && close_rel(direct.phi_p, composed.phi_p, 1e-10)
        && close_rel(direct.phi_1, composed.phi_1, 1e-10))
}

/// Jump map without domain checks.
#[inline]
pub fn jump_unchecked(s: &Statistic3, channel: Channel, ratio: f64) -> Statistic3 {
    let k = ratio - 1.0;
    match channel {
        Channel::One => Statistic3 {
            phi_x: ratio * s.phi_x,
            phi_p: s.phi_p + k * s.phi_1,
            phi_1: ratio * s.phi_1,
        },
        Channel::Two => Statistic3 {
            phi_x: ratio * s.phi_x,
            phi_p: ratio * s.phi_p - k * s.phi_1,
            phi_1: s.phi_1,
        },
    }
}

/// Update of the statistic when `channel` registers an arrival.
pub fn jump(s: &Statistic3, channel: Channel, p: &ModelParams) -> Result<Statistic3> {
    s.ensure_feasible()?;
    Ok(jump_unchecked(s, channel, p.ratio()))
}

/// Running cost `h = φ× + φ⁺ − κ`.
#[inline]
pub fn running_cost(s: &Statistic3, p: &ModelParams) -> f64 {
    s.phi_x + s.phi_p - p.kappa()
}

/// Velocity of the deterministic flow at `s`.
#[inline]
pub fn drift(s: &Statistic3, p: &ModelParams) -> [f64; 3] {
    let lambda = p.lambda();
    let a = p.a();
    [
        lambda * s.phi_p + 2.0 * a * s.phi_x,
        2.0 * lambda + a * s.phi_p,
        lambda + a * s.phi_1,
    ]
}

/// Generator of the statistic under the reference measure applied to a smooth
/// test function `f` with gradient `grad`.
pub fn generator<F, G>(f: F, grad: G, s: &Statistic3, p: &ModelParams) -> f64
where
    F: Fn(&Statistic3) -> f64,
    G: Fn(&Statistic3) -> [f64; 3],
{
    let v = drift(s, p);
    let d = grad(s);
    let transport: f64 = v.iter().zip(d.iter()).map(|(vi, di)| vi * di).sum();
    let here = f(s);
    let jumps: f64 = Channel::BOTH
        .iter()
        .map(|&ch| f(&jump_unchecked(s, ch, p.ratio())) - here)
        .sum();
    transport + p.beta() * jumps
}

/// Generator applied to `f(x, y, z) = x + y`; identically `2λ(x + y + 1)`.
pub fn generator_linear(s: &Statistic3, p: &ModelParams) -> f64 {
    generator(|q| q.phi_x + q.phi_p, |_| [1.0, 1.0, 0.0], s, p)
}
