//! Small user-declared models used as controls: a linear autoregression and
//! an iid sequence.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{default_burn_in, Family, RandomIterate, RealLaw, StationaryMode};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearArSpec {
    pub rho: f64,
    pub innovation: RealLaw,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
}

/// `W_n = ρ W_{n-1} + ε_n`, observable `X_n = W_n`.
#[derive(Debug, Clone)]
pub struct LinearAr {
    rho: f64,
    innovation: RealLaw,
    burn_in: usize,
}

impl LinearAr {
    pub fn new(spec: &LinearArSpec) -> Result<Self> {
        if !(spec.rho.abs() < 1.0) {
            return Err(Error::invalid("rho", format!("|rho| < 1 required, got {}", spec.rho)));
        }
        spec.innovation.validate("innovation")?;
        if spec.burn_in == 0 {
            return Err(Error::invalid("burn_in", "burn_in must be >= 1"));
        }
        Ok(Self {
            rho: spec.rho,
            innovation: spec.innovation,
            burn_in: spec.burn_in,
        })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// `Var(ε) / (1 - ρ)^2`
    pub fn long_run_variance(&self) -> Option<f64> {
        self.innovation.variance().map(|v| v / (1.0 - self.rho).powi(2))
    }
}

impl RandomIterate for LinearAr {
    type State = f64;
    type Innovation = f64;

    fn family(&self) -> Family {
        Family::Custom
    }

    fn draw_innovation<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.innovation.sample(rng)
    }

    fn step(&self, e: &f64, w: &f64) -> f64 {
        self.rho * w + e
    }

    fn observable(&self, e: &f64, w: &f64) -> f64 {
        self.rho * w + e
    }

    fn stationary_mode(&self) -> StationaryMode {
        match self.innovation {
            RealLaw::Normal { .. } | RealLaw::Constant { .. } => StationaryMode::Exact,
            _ => StationaryMode::BurnIn(self.burn_in),
        }
    }

    fn sample_exact<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        match self.innovation {
            RealLaw::Normal { mean, sd } => {
                let law = RealLaw::Normal {
                    mean: mean / (1.0 - self.rho),
                    sd: sd / (1.0 - self.rho * self.rho).sqrt(),
                };
                Ok(law.sample(rng))
            }
            RealLaw::Constant { value } => Ok(value / (1.0 - self.rho)),
            _ => Err(Error::ExactSamplerUnavailable("linear_ar")),
        }
    }

    fn burn_in_start(&self) -> f64 {
        0.0
    }

    fn distance(&self, a: &f64, b: &f64) -> Option<f64> {
        Some((a - b).abs())
    }

    fn observable_mean(&self) -> Option<f64> {
        self.innovation.mean().map(|m| m / (1.0 - self.rho))
    }

    fn design_pairs<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<(f64, f64)> {
        let mut xs: Vec<f64> = (0..64).map(|_| super::sample_stationary(self, rng).0).collect();
        xs.sort_by(|a, b| a.total_cmp(b));
        let n = xs.len();
        (0..n / 2).map(|i| (xs[i], xs[n - 1 - i])).collect()
    }

    fn describe_state(&self, w: &f64) -> String {
        format!("{w}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IidSpec {
    pub law: RealLaw,
}

/// `X_n = ε_n`; the state carries no information.
#[derive(Debug, Clone)]
pub struct Iid {
    law: RealLaw,
}

impl Iid {
    pub fn new(spec: &IidSpec) -> Result<Self> {
        spec.law.validate("law")?;
        Ok(Self { law: spec.law })
    }

    pub fn law(&self) -> RealLaw {
        self.law
    }
}

impl RandomIterate for Iid {
    type State = ();
    type Innovation = f64;

    fn family(&self) -> Family {
        Family::Custom
    }

    fn draw_innovation<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.law.sample(rng)
    }

    fn step(&self, _e: &f64, _w: &()) {}

    fn observable(&self, e: &f64, _w: &()) -> f64 {
        *e
    }

    fn stationary_mode(&self) -> StationaryMode {
        StationaryMode::Exact
    }

    fn sample_exact<R: Rng + ?Sized>(&self, _rng: &mut R) -> Result<()> {
        Ok(())
    }

    fn burn_in_start(&self) {}

    fn distance(&self, _a: &(), _b: &()) -> Option<f64> {
        Some(0.0)
    }

    fn observable_mean(&self) -> Option<f64> {
        self.law.mean()
    }

    fn design_pairs<R: Rng + ?Sized>(&self, _rng: &mut R) -> Vec<((), ())> {
        vec![((), ())]
    }

    fn describe_state(&self, _w: &()) -> String {
        "()".into()
    }
}
