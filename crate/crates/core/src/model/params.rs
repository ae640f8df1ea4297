use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which discount/threshold pair the stopping problem is posed with.
///
/// `Rederived` uses the discount `2λ` carried by the minimum of the two
/// disorder times, with threshold `2λ/c`. `PaperLiteral` keeps the single-rate
/// pair `(λ, λ/c)`. Both satisfy `κ/ρ = 1/c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiscountMode {
    #[default]
    Rederived,
    PaperLiteral,
}

impl DiscountMode {
    pub fn tag(self) -> &'static str {
        match self {
            DiscountMode::Rederived => "rederived",
            DiscountMode::PaperLiteral => "paper-literal",
        }
    }
}

impl std::fmt::Display for DiscountMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

impl std::str::FromStr for DiscountMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rederived" => Ok(DiscountMode::Rederived),
            "paper-literal" => Ok(DiscountMode::PaperLiteral),
            other => Err(Error::InvalidParameter {
                name: "mode",
                reason: format!("unknown mode `{other}` (expected rederived or paper-literal)"),
            }),
        }
    }
}

/// Discount rate `ρ` and running-cost threshold `κ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscountSpec {
    rho: f64,
    kappa: f64,
    mode: DiscountMode,
}

impl DiscountSpec {
    pub fn rederived(lambda: f64, c: f64) -> Self {
        DiscountSpec {
            rho: 2.0 * lambda,
            kappa: 2.0 * lambda / c,
            mode: DiscountMode::Rederived,
        }
    }

    pub fn paper_literal(lambda: f64, c: f64) -> Self {
        DiscountSpec {
            rho: lambda,
            kappa: lambda / c,
            mode: DiscountMode::PaperLiteral,
        }
    }

    pub fn for_mode(mode: DiscountMode, lambda: f64, c: f64) -> Self {
        match mode {
            DiscountMode::Rederived => Self::rederived(lambda, c),
            DiscountMode::PaperLiteral => Self::paper_literal(lambda, c),
        }
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn mode(&self) -> DiscountMode {
        self.mode
    }
}

/// Parameters of the identical two-channel disorder model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    alpha: f64,
    beta: f64,
    lambda: f64,
    c: f64,
    pi1: f64,
    pi2: f64,
    disc: DiscountSpec,
}

fn check_rate(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be a finite positive number, got {value}"),
        })
    }
}

pub(crate) fn check_prior(name: &'static str, value: f64) -> Result<()> {
    if (0.0..1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must lie in [0, 1), got {value}"),
        })
    }
}

impl ModelParams {
    pub fn new(
        alpha: f64,
        beta: f64,
        lambda: f64,
        c: f64,
        pi1: f64,
        pi2: f64,
        mode: DiscountMode,
    ) -> Result<Self> {
        check_rate("alpha", alpha)?;
        check_rate("beta", beta)?;
        check_rate("lambda", lambda)?;
        check_rate("c", c)?;
        check_prior("pi1", pi1)?;
        check_prior("pi2", pi2)?;
        Ok(ModelParams {
            alpha,
            beta,
            lambda,
            c,
            pi1,
            pi2,
            disc: DiscountSpec::for_mode(mode, lambda, c),
        })
    }

    /// Zero priors, rederived discount.
    pub fn with_rates(alpha: f64, beta: f64, lambda: f64, c: f64) -> Result<Self> {
        Self::new(alpha, beta, lambda, c, 0.0, 0.0, DiscountMode::Rederived)
    }

    pub fn with_priors(self, pi1: f64, pi2: f64) -> Result<Self> {
        check_prior("pi1", pi1)?;
        check_prior("pi2", pi2)?;
        Ok(ModelParams { pi1, pi2, ..self })
    }

    pub fn with_mode(self, mode: DiscountMode) -> Self {
        ModelParams {
            disc: DiscountSpec::for_mode(mode, self.lambda, self.c),
            ..self
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn pi1(&self) -> f64 {
        self.pi1
    }

    pub fn pi2(&self) -> f64 {
        self.pi2
    }

    /// `a = λ − α + β`, the common linear drift coefficient of the odds.
    pub fn a(&self) -> f64 {
        self.lambda - self.alpha + self.beta
    }

    /// Prior mass of `θ = θ₁ ∧ θ₂` at zero.
    pub fn pi(&self) -> f64 {
        1.0 - (1.0 - self.pi1) * (1.0 - self.pi2)
    }

    /// Jump multiplier `α/β`.
    pub fn ratio(&self) -> f64 {
        self.alpha / self.beta
    }

    pub fn discount(&self) -> DiscountSpec {
        self.disc
    }

    pub fn mode(&self) -> DiscountMode {
        self.disc.mode
    }

    pub fn rho(&self) -> f64 {
        self.disc.rho
    }

    pub fn kappa(&self) -> f64 {
        self.disc.kappa
    }

    /// Below this magnitude of `a` the flow uses its polynomial form.
    pub fn a_cutoff(&self) -> f64 {
        1e-10 * (self.lambda + self.alpha + self.beta)
    }
}

/// Key/value form of [`ModelParams`] as it appears in run configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
    pub c: f64,
    #[serde(default)]
    pub pi1: f64,
    #[serde(default)]
    pub pi2: f64,
    #[serde(default)]
    pub mode: DiscountMode,
}

impl ModelSpec {
    pub fn to_params(&self) -> Result<ModelParams> {
        ModelParams::new(
            self.alpha, self.beta, self.lambda, self.c, self.pi1, self.pi2, self.mode,
        )
    }
}

impl From<&ModelParams> for ModelSpec {
    fn from(p: &ModelParams) -> Self {
        ModelSpec {
            alpha: p.alpha,
            beta: p.beta,
            lambda: p.lambda,
            c: p.c,
            pi1: p.pi1,
            pi2: p.pi2,
            mode: p.mode(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_quantities_are_exact() {
        let p = ModelParams::new(3.0, 1.0, 0.5, 2.0, 0.3, 0.1, DiscountMode::Rederived).unwrap();
        assert_eq!(p.a(), 0.5 - 3.0 + 1.0);
        assert_eq!(p.pi(), 1.0 - 0.7 * 0.9);
        assert_eq!(p.rho(), 1.0);
        assert_eq!(p.kappa(), 0.5);
        let q = p.with_mode(DiscountMode::PaperLiteral);
        assert_eq!(q.rho(), 0.5);
        assert_eq!(q.kappa(), 0.25);
    }

    #[test]
    fn kappa_over_rho_is_inverse_cost() {
        for &(lambda, c) in &[(0.5, 2.0), (2.0, 0.3), (1e-3, 7.0)] {
            for mode in [DiscountMode::Rederived, DiscountMode::PaperLiteral] {
                let d = DiscountSpec::for_mode(mode, lambda, c);
                assert!((d.kappa() / d.rho() - 1.0 / c).abs() < 1e-15 / c.min(1.0));
            }
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(ModelParams::with_rates(0.0, 1.0, 1.0, 1.0).is_err());
        assert!(ModelParams::with_rates(1.0, -1.0, 1.0, 1.0).is_err());
        assert!(ModelParams::with_rates(1.0, 1.0, f64::NAN, 1.0).is_err());
        let p = ModelParams::with_rates(2.0, 1.0, 1.0, 1.0).unwrap();
        assert!(p.with_priors(1.0, 0.0).is_err());
        assert!(p.with_priors(0.0, -0.1).is_err());
    }

    #[test]
    fn mode_parses_from_tags() {
        assert_eq!("rederived".parse::<DiscountMode>().unwrap(), DiscountMode::Rederived);
        assert_eq!(
            "paper-literal".parse::<DiscountMode>().unwrap(),
            DiscountMode::PaperLiteral
        );
        assert!("literal".parse::<DiscountMode>().is_err());
    }
}
