use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::params::check_prior;

/// Absolute slack used when testing membership of the feasible set, scaled up
/// with the magnitude of the sum coordinate.
pub const FEASIBILITY_SLACK: f64 = 1e-12;

/// A point `(φ×, φ⁺, φ¹)` of the state space: product of the two channel odds,
/// their sum, and the channel-one odds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Statistic3 {
    pub phi_x: f64,
    pub phi_p: f64,
    pub phi_1: f64,
}

impl Statistic3 {
    pub const ORIGIN: Statistic3 = Statistic3 {
        phi_x: 0.0,
        phi_p: 0.0,
        phi_1: 0.0,
    };

    /// Builds a state and checks that it lies in the feasible set.
    pub fn new(phi_x: f64, phi_p: f64, phi_1: f64) -> Result<Self> {
        let s = Statistic3 { phi_x, phi_p, phi_1 };
        s.ensure_feasible()?;
        Ok(s)
    }

    /// State generated by per-channel odds `(φ¹, φ²)`.
    pub fn from_channel_odds(phi_1: f64, phi_2: f64) -> Self {
        Statistic3 {
            phi_x: phi_1 * phi_2,
            phi_p: phi_1 + phi_2,
            phi_1,
        }
    }

    pub fn phi_2(&self) -> f64 {
        self.phi_p - self.phi_1
    }

    /// `φ× + φ⁺`, the odds that the first disorder has already happened.
    pub fn sum(&self) -> f64 {
        self.phi_x + self.phi_p
    }

    fn slack(&self) -> f64 {
        FEASIBILITY_SLACK * self.phi_p.abs().max(1.0)
    }

    /// Membership of `φ⁺ ≥ 2√φ×`, `φ⁺ ≥ φ¹ ≥ 0`, `φ× ≥ 0`.
    pub fn is_feasible(&self) -> bool {
        let tol = self.slack();
        self.phi_x.is_finite()
            && self.phi_p.is_finite()
            && self.phi_1.is_finite()
            && self.phi_x >= -tol
            && self.phi_1 >= -tol
            && self.phi_p + tol >= self.phi_1
            && self.phi_p + tol >= 2.0 * self.phi_x.max(0.0).sqrt()
    }

    pub fn ensure_feasible(&self) -> Result<()> {
        if self.is_feasible() {
            Ok(())
        } else {
            Err(Error::InfeasibleState {
                phi_x: self.phi_x,
                phi_p: self.phi_p,
                phi_1: self.phi_1,
            })
        }
    }

    /// Nearest feasible point obtained by raising `φ⁺` (and clamping signs).
    pub fn projected(&self) -> Self {
        let phi_x = self.phi_x.max(0.0);
        let phi_1 = self.phi_1.max(0.0);
        let floor = (2.0 * phi_x.sqrt()).max(phi_1);
        Statistic3 {
            phi_x,
            phi_p: self.phi_p.max(floor),
            phi_1,
        }
    }

    /// Nearest point of the ordered cone `{φ× ≥ 0, 0 ≤ φ¹ ≤ φ⁺}`, which contains
    /// the feasible set and is closed under both flow and jumps.
    pub fn ordered(&self) -> Self {
        let phi_1 = self.phi_1.max(0.0);
        Statistic3 {
            phi_x: self.phi_x.max(0.0),
            phi_p: self.phi_p.max(phi_1),
            phi_1,
        }
    }

    /// `|φ× − φ¹(φ⁺ − φ¹)|`; zero for states generated by two channel odds.
    pub fn manifold_residual(&self) -> f64 {
        (self.phi_x - self.phi_1 * (self.phi_p - self.phi_1)).abs()
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.phi_x, self.phi_p, self.phi_1]
    }
}

/// `Π = Φ / (1 + Φ)`.
pub fn odds_to_probability(phi: f64) -> Result<f64> {
    if !(phi >= 0.0) || phi.is_nan() {
        return Err(Error::InvalidOdds(phi));
    }
    if phi.is_infinite() {
        return Ok(1.0);
    }
    Ok(phi / (1.0 + phi))
}

/// `Φ = Π / (1 − Π)`; `Π = 1` has no finite odds.
pub fn probability_to_odds(prob: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&prob) {
        return Err(Error::InvalidProbability(prob));
    }
    Ok(prob / (1.0 - prob))
}

/// Initial state implied by the prior masses at zero of the two disorder times.
pub fn init_statistic(pi1: f64, pi2: f64) -> Result<Statistic3> {
    check_prior("pi1", pi1)?;
    check_prior("pi2", pi2)?;
    let o1 = pi1 / (1.0 - pi1);
    let o2 = pi2 / (1.0 - pi2);
    Ok(Statistic3 {
        phi_x: pi1 * pi2 / ((1.0 - pi1) * (1.0 - pi2)),
        phi_p: o1 + o2,
        phi_1: o1,
    })
}

/// Total odds `Φ = φ⁺ + φ×`, equal to `Φ¹ + Φ² + Φ¹Φ²` on the manifold.
pub fn total_odds(s: &Statistic3) -> f64 {
    s.sum()
}
