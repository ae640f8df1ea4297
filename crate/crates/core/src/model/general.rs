//! Dynamics for two sources with their own rates.
//!
//! The state is `(φ×, φ¹, φ²)`. With `a_i = λ_i − α_i + β_i` each channel odds
//! follows `dz_i/dt = λ_i + a_i z_i` and the product follows
//! `dx/dt = λ₁ z₂ + λ₂ z₁ + (a₁ + a₂) x`, so `x − z₁z₂` decays at rate
//! `a₁ + a₂`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::dynamics::{flow_coefficients, Channel};
use crate::model::params::{check_prior, ModelParams};

/// Rates of one observation source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceRates {
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
    pub pi: f64,
}

impl SourceRates {
    pub fn a(&self) -> f64 {
        self.lambda - self.alpha + self.beta
    }

    pub fn ratio(&self) -> f64 {
        self.alpha / self.beta
    }

    fn cutoff(&self) -> f64 {
        1e-10 * (self.lambda + self.alpha + self.beta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneralParams {
    sources: [SourceRates; 2],
}

fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be a finite positive number, got {v}"),
        })
    }
}

impl GeneralParams {
    pub fn new(one: SourceRates, two: SourceRates) -> Result<Self> {
        for s in [&one, &two] {
            check_positive("alpha", s.alpha)?;
            check_positive("beta", s.beta)?;
            check_positive("lambda", s.lambda)?;
            check_prior("pi", s.pi)?;
        }
        Ok(GeneralParams {
            sources: [one, two],
        })
    }

    /// Both sources carrying the rates of an identical-channel model.
    pub fn identical(p: &ModelParams) -> Self {
        let src = |pi| SourceRates {
            alpha: p.alpha(),
            beta: p.beta(),
            lambda: p.lambda(),
            pi,
        };
        GeneralParams {
            sources: [src(p.pi1()), src(p.pi2())],
        }
    }

    pub fn source(&self, channel: Channel) -> &SourceRates {
        &self.sources[channel.index()]
    }

    pub fn a(&self, channel: Channel) -> f64 {
        self.source(channel).a()
    }
}

/// `(φ×, φ¹, φ²)` for the non-identical model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneralState {
    pub phi_x: f64,
    pub phi_1: f64,
    pub phi_2: f64,
}

impl GeneralState {
    pub fn from_channel_odds(phi_1: f64, phi_2: f64) -> Self {
        GeneralState {
            phi_x: phi_1 * phi_2,
            phi_1,
            phi_2,
        }
    }

    pub fn initial(gp: &GeneralParams) -> Self {
        let odds = |s: &SourceRates| s.pi / (1.0 - s.pi);
        Self::from_channel_odds(odds(&gp.sources[0]), odds(&gp.sources[1]))
    }

    fn ensure_nonnegative(&self) -> Result<()> {
        let ok = [self.phi_x, self.phi_1, self.phi_2]
            .iter()
            .all(|v| v.is_finite() && *v >= 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::InfeasibleState {
                phi_x: self.phi_x,
                phi_p: self.phi_1 + self.phi_2,
                phi_1: self.phi_1,
            })
        }
    }
}

/// Flow of the non-identical statistic for a duration `t ≥ 0`.
pub fn flow_general(t: f64, s: &GeneralState, gp: &GeneralParams) -> Result<GeneralState> {
    if !(t >= 0.0) {
        return Err(Error::NegativeTime(t));
    }
    s.ensure_nonnegative()?;
    let [r1, r2] = gp.sources;
    let c1 = flow_coefficients(t, r1.a(), r1.cutoff());
    let c2 = flow_coefficients(t, r2.a(), r2.cutoff());
    let z1 = c1.growth * s.phi_1 + r1.lambda * c1.drift;
    let z2 = c2.growth * s.phi_2 + r2.lambda * c2.drift;
    let gap = s.phi_x - s.phi_1 * s.phi_2;
    let decay = c1.growth * c2.growth;
    Ok(GeneralState {
        phi_x: z1 * z2 + decay * gap,
        phi_1: z1,
        phi_2: z2,
    })
}

/// Update when `channel` registers an arrival.
pub fn jump_general(s: &GeneralState, channel: Channel, gp: &GeneralParams) -> Result<GeneralState> {
    s.ensure_nonnegative()?;
    let r = gp.source(channel).ratio();
    Ok(match channel {
        Channel::One => GeneralState {
            phi_x: r * s.phi_x,
            phi_1: r * s.phi_1,
            phi_2: s.phi_2,
        },
        Channel::Two => GeneralState {
            phi_x: r * s.phi_x,
            phi_1: s.phi_1,
            phi_2: r * s.phi_2,
        },
    })
}

/// Velocity `(dφ×, dφ¹, dφ²)/dt` between arrivals.
pub fn drift_general(s: &GeneralState, gp: &GeneralParams) -> [f64; 3] {
    let [r1, r2] = gp.sources;
    [
        r1.lambda * s.phi_2 + r2.lambda * s.phi_1 + (r1.a() + r2.a()) * s.phi_x,
        r1.lambda + r1.a() * s.phi_1,
        r2.lambda + r2.a() * s.phi_2,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::dynamics::{flow, jump};
    use crate::model::statistic::Statistic3;

    fn rates(alpha: f64, beta: f64, lambda: f64) -> SourceRates {
        SourceRates {
            alpha,
            beta,
            lambda,
            pi: 0.0,
        }
    }

    #[test]
    fn zero_time_is_identity() {
        let gp = GeneralParams::new(rates(2.0, 1.0, 0.5), rates(0.7, 1.4, 0.2)).unwrap();
        let s = GeneralState::from_channel_odds(0.3, 1.1);
        assert_eq!(flow_general(0.0, &s, &gp).unwrap(), s);
        assert!(flow_general(-1.0, &s, &gp).is_err());
    }

    #[test]
    fn reduces_to_identical_flow() {
        let p = ModelParams::with_rates(3.0, 1.0, 0.5, 1.0).unwrap();
        let gp = GeneralParams::identical(&p);
        let g = GeneralState::from_channel_odds(0.4, 0.9);
        let s = Statistic3::from_channel_odds(0.4, 0.9);
        for &t in &[0.1, 1.0, 3.7] {
            let a = flow_general(t, &g, &gp).unwrap();
            let b = flow(t, &s, &p).unwrap();
            assert!((a.phi_x - b.phi_x).abs() <= 1e-10 * b.phi_x.max(1.0));
            assert!((a.phi_1 + a.phi_2 - b.phi_p).abs() <= 1e-10 * b.phi_p.max(1.0));
            assert!((a.phi_1 - b.phi_1).abs() <= 1e-10 * b.phi_1.max(1.0));
        }
        for ch in Channel::BOTH {
            let a = jump_general(&g, ch, &gp).unwrap();
            let b = jump(&s, ch, &p).unwrap();
            assert!((a.phi_x - b.phi_x).abs() < 1e-14);
            assert!((a.phi_1 + a.phi_2 - b.phi_p).abs() < 1e-14);
        }
    }

    #[test]
    fn off_manifold_gap_decays() {
        let gp = GeneralParams::new(rates(3.0, 1.0, 0.5), rates(2.0, 1.0, 0.3)).unwrap();
        let s = GeneralState {
            phi_x: 2.0,
            phi_1: 1.0,
            phi_2: 1.0,
        };
        let out = flow_general(2.0, &s, &gp).unwrap();
        let expected = ((gp.a(Channel::One) + gp.a(Channel::Two)) * 2.0).exp();
        assert!(((out.phi_x - out.phi_1 * out.phi_2) - expected).abs() < 1e-12);
    }
}
