use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{default_burn_in, Family, RandomIterate, StationaryMode};
use crate::error::{Error, Result};

/// Innovation law for the affine contraction `F(ε, x) = ρx + (1-ρ)ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum IfsNoise {
    /// `ε ~ Uniform(0, 1)`.
    Uniform,
    /// `ε` uniform on `{0, 1/(b-1), ..., 1}` with `ρ = 1/b`; the stationary
    /// law is then exactly Uniform(0, 1).
    Digits { base: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IfsWeight {
    /// `η ≡ 1`
    #[default]
    Unit,
    /// `η(ε) = 1 + ε`
    OnePlusInnovation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IfsSpec {
    pub contraction_rho: f64,
    #[serde(default = "one")]
    pub kappa: f64,
    pub noise: IfsNoise,
    /// Hölder exponent of the modulus `c(t) = t^α`.
    #[serde(default = "one")]
    pub alpha: f64,
    #[serde(default)]
    pub weight: IfsWeight,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
}

fn one() -> f64 {
    1.0
}

/// Uniformly contracting iterated function system on `[0, 1]` with
/// observable `h(ε, x) = η(ε) x^α`.
#[derive(Debug, Clone)]
pub struct Ifs {
    rho: f64,
    kappa: f64,
    noise: IfsNoise,
    alpha: f64,
    weight: IfsWeight,
    burn_in: usize,
}

impl Ifs {
    pub fn new(spec: &IfsSpec) -> Result<Self> {
        let rho = spec.contraction_rho;
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::invalid("contraction_rho", format!("rho must lie in (0, 1), got {rho}")));
        }
        if !(spec.kappa > 0.0) {
            return Err(Error::invalid("kappa", "kappa must be > 0"));
        }
        if !(spec.alpha > 0.0 && spec.alpha <= 1.0) {
            return Err(Error::invalid("alpha", "modulus exponent must lie in (0, 1]"));
        }
        if let IfsNoise::Digits { base } = spec.noise {
            if base < 2 {
                return Err(Error::invalid("noise.base", "base must be >= 2"));
            }
            if (rho * base as f64 - 1.0).abs() > 1e-12 {
                return Err(Error::invalid("contraction_rho", format!("digit noise needs rho = 1/{base}")));
            }
        }
        if spec.burn_in == 0 {
            return Err(Error::invalid("burn_in", "burn_in must be >= 1"));
        }
        Ok(Self {
            rho,
            kappa: spec.kappa,
            noise: spec.noise,
            alpha: spec.alpha,
            weight: spec.weight,
            burn_in: spec.burn_in,
        })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `c(t) = t^α`
    pub fn modulus(&self, t: f64) -> f64 {
        t.max(0.0).powf(self.alpha)
    }

    /// `A = E η(ε)`
    pub fn weight_mean(&self) -> f64 {
        match self.weight {
            IfsWeight::Unit => 1.0,
            IfsWeight::OnePlusInnovation => 1.5,
        }
    }

    fn eta(&self, e: f64) -> f64 {
        match self.weight {
            IfsWeight::Unit => 1.0,
            IfsWeight::OnePlusInnovation => 1.0 + e,
        }
    }
}

impl RandomIterate for Ifs {
    type State = f64;
    type Innovation = f64;

    fn family(&self) -> Family {
        Family::Ifs
    }

    fn draw_innovation<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.noise {
            IfsNoise::Uniform => rng.random(),
            IfsNoise::Digits { base } => rng.random_range(0..base) as f64 / (base - 1) as f64,
        }
    }

    fn step(&self, e: &f64, x: &f64) -> f64 {
        self.rho * x + (1.0 - self.rho) * e
    }

    fn observable(&self, e: &f64, x: &f64) -> f64 {
        self.eta(*e) * x.powf(self.alpha)
    }

    fn stationary_mode(&self) -> StationaryMode {
        match self.noise {
            IfsNoise::Digits { .. } => StationaryMode::Exact,
            IfsNoise::Uniform => StationaryMode::BurnIn(self.burn_in),
        }
    }

    fn sample_exact<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        match self.noise {
            IfsNoise::Digits { .. } => Ok(rng.random()),
            IfsNoise::Uniform => Err(Error::ExactSamplerUnavailable("ifs")),
        }
    }

    fn burn_in_start(&self) -> f64 {
        0.5
    }

    fn distance(&self, a: &f64, b: &f64) -> Option<f64> {
        Some((a - b).abs())
    }

    fn observable_mean(&self) -> Option<f64> {
        match self.noise {
            IfsNoise::Digits { .. } => Some(self.weight_mean() / (self.alpha + 1.0)),
            IfsNoise::Uniform => None,
        }
    }

    fn design_pairs<R: Rng + ?Sized>(&self, _rng: &mut R) -> Vec<(f64, f64)> {
        let g: Vec<f64> = (0..32).map(|i| i as f64 / 31.0).collect();
        g.iter().flat_map(|&x| g.iter().map(move |&y| (x, y))).collect()
    }

    fn describe_state(&self, w: &f64) -> String {
        format!("{w}")
    }
}
