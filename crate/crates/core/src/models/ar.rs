use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{default_burn_in, sample_stationary, Family, RandomIterate, RealLaw, StationaryMode};
use crate::error::{Error, Result};

fn check_params(c: f64, tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::invalid("tau", format!("tau must lie in (0, 1), got {tau}")));
    }
    if !(c > 0.0 && c <= 1.0) {
        return Err(Error::invalid("c", format!("C must lie in (0, 1], got {c}")));
    }
    Ok(())
}

fn f_unchecked(t: f64, c: f64, tau: f64) -> f64 {
    let a = t.abs();
    let v = a - c * ((1.0 + a).powf(1.0 - tau) - 1.0) / (1.0 - tau);
    v.copysign(t)
}

/// `f(t) = sign(t) [ |t| - C ((1+|t|)^{1-τ} - 1) / (1-τ) ]`.
pub fn ar_map(t: f64, c: f64, tau: f64) -> Result<f64> {
    check_params(c, tau)?;
    Ok(f_unchecked(t, c, tau))
}

/// `f'(t) = 1 - C / (1+|t|)^τ` (f is odd, so f' is even).
pub fn ar_map_derivative(t: f64, c: f64, tau: f64) -> Result<f64> {
    check_params(c, tau)?;
    Ok(1.0 - c / (1.0 + t.abs()).powf(tau))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArLipschitzSpec {
    pub tau: f64,
    pub c: f64,
    pub innovation: RealLaw,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
}

/// `W_n = f(W_{n-1}) + ε_n` with the sub-contracting map above; the
/// observable is the new state.
#[derive(Debug, Clone)]
pub struct ArLipschitz {
    tau: f64,
    c: f64,
    innovation: RealLaw,
    burn_in: usize,
}

impl ArLipschitz {
    pub fn new(spec: &ArLipschitzSpec) -> Result<Self> {
        check_params(spec.c, spec.tau)?;
        spec.innovation.validate("innovation")?;
        if spec.burn_in == 0 {
            return Err(Error::invalid("burn_in", "burn_in must be >= 1"));
        }
        Ok(Self {
            tau: spec.tau,
            c: spec.c,
            innovation: spec.innovation,
            burn_in: spec.burn_in,
        })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn innovation_law(&self) -> RealLaw {
        self.innovation
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in.max(1);
        self
    }

    pub fn f(&self, t: f64) -> f64 {
        f_unchecked(t, self.c, self.tau)
    }
}

impl RandomIterate for ArLipschitz {
    type State = f64;
    type Innovation = f64;

    fn family(&self) -> Family {
        Family::ArLipschitz
    }

    fn draw_innovation<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.innovation.sample(rng)
    }

    fn step(&self, e: &f64, w: &f64) -> f64 {
        self.f(*w) + e
    }

    fn observable(&self, e: &f64, w: &f64) -> f64 {
        self.f(*w) + e
    }

    fn stationary_mode(&self) -> StationaryMode {
        StationaryMode::BurnIn(self.burn_in)
    }

    fn sample_exact<R: Rng + ?Sized>(&self, _rng: &mut R) -> Result<f64> {
        Err(Error::ExactSamplerUnavailable("ar_lipschitz"))
    }

    fn burn_in_start(&self) -> f64 {
        0.0
    }

    fn distance(&self, a: &f64, b: &f64) -> Option<f64> {
        Some((a - b).abs())
    }

    fn design_pairs<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<(f64, f64)> {
        let mut xs: Vec<f64> = (0..64).map(|_| sample_stationary(self, rng).0).collect();
        xs.sort_by(|a, b| a.total_cmp(b));
        let n = xs.len();
        (0..n / 2).map(|i| (xs[i], xs[n - 1 - i])).collect()
    }

    fn describe_state(&self, w: &f64) -> String {
        format!("{w}")
    }
}
