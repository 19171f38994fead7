//! Random iterates `W_n = F(ε_n, W_{n-1})`, `X_n = h(ε_n, W_{n-1})`.
//!
//! Each family implements [`RandomIterate`]; [`AnyModel`] is the closed set of
//! families the config file can name, and [`make_model`] validates a
//! [`ModelSpec`] into one.

mod ar;
mod custom;
mod discrete;
mod ifs;
mod matrix;
mod sticky;

use std::fmt::Debug;

use rand::Rng;
use rand_distr::{Distribution, Normal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use ar::{ar_map, ar_map_derivative, ArLipschitz, ArLipschitzSpec};
pub use custom::{Iid, IidSpec, LinearAr, LinearArSpec};
pub use discrete::{DiscreteObservable, DiscreteRenewal, DiscreteRenewalSpec, RenewalLaw};
pub use ifs::{Ifs, IfsNoise, IfsSpec, IfsWeight};
pub use matrix::{log_moment_check, lyapunov_estimate, EnsembleEntry, LyapunovEstimate, MatrixWalk, MatrixWalkSpec};
pub use sticky::{StickyBeta, StickyBetaSpec, StickyObservable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    MatrixWalk,
    Ifs,
    DiscreteRenewal,
    StickyBeta,
    ArLipschitz,
    Custom,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::MatrixWalk => "matrix_walk",
            Family::Ifs => "ifs",
            Family::DiscreteRenewal => "discrete_renewal",
            Family::StickyBeta => "sticky_beta",
            Family::ArLipschitz => "ar_lipschitz",
            Family::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StationaryMode {
    Exact,
    BurnIn(usize),
}

/// A Markov iterate driven by iid innovations, with an observable.
///
/// `step` and `observable` must be pure in `(innovation, state)`; every
/// source of randomness enters through `draw_innovation` or a stationary
/// sampler with an explicit stream.
pub trait RandomIterate: Send + Sync {
    type State: Clone + PartialEq + Debug + Send + Sync;
    type Innovation: Clone + Debug + Send + Sync;

    fn family(&self) -> Family;

    fn draw_innovation<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::Innovation;

    fn step(&self, innovation: &Self::Innovation, state: &Self::State) -> Self::State;

    fn observable(&self, innovation: &Self::Innovation, state: &Self::State) -> f64;

    fn stationary_mode(&self) -> StationaryMode;

    /// Exact draw from the stationary law, when the family has one.
    fn sample_exact<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Self::State>;

    /// Starting point for burn-in trajectories.
    fn burn_in_start(&self) -> Self::State;

    fn distance(&self, _a: &Self::State, _b: &Self::State) -> Option<f64> {
        None
    }

    /// `E h(ε_1, W_0)` under stationarity, when known in closed form.
    fn observable_mean(&self) -> Option<f64> {
        None
    }

    /// False for families whose coupled chains never coalesce exactly.
    fn can_meet(&self) -> bool {
        true
    }

    /// Finite design of initial pairs for the conditional-sup coefficient.
    fn design_pairs<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<(Self::State, Self::State)>;

    fn describe_state(&self, state: &Self::State) -> String;
}

/// Draws from the stationary law: exact when available, otherwise the
/// endpoint of a burn-in trajectory. The flag is true for burn-in draws.
pub fn sample_stationary<M: RandomIterate, R: Rng + ?Sized>(model: &M, rng: &mut R) -> (M::State, bool) {
    match model.stationary_mode() {
        StationaryMode::Exact => (
            model
                .sample_exact(rng)
                .expect("exact stationary mode implies an exact sampler"),
            false,
        ),
        StationaryMode::BurnIn(len) => {
            let mut w = model.burn_in_start();
            for _ in 0..len {
                let e = model.draw_innovation(rng);
                w = model.step(&e, &w);
            }
            (w, true)
        }
    }
}

/// Stationary draw of `X_1 = h(ε_1, W_0)`.
pub fn sample_observable<M: RandomIterate, R: Rng + ?Sized>(model: &M, rng: &mut R) -> f64 {
    let (w, _) = sample_stationary(model, rng);
    let e = model.draw_innovation(rng);
    model.observable(&e, &w)
}

/// Real-valued innovation laws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum RealLaw {
    Normal { mean: f64, sd: f64 },
    StudentT { df: f64, scale: f64 },
    Uniform { lo: f64, hi: f64 },
    Constant { value: f64 },
}

impl RealLaw {
    pub fn validate(&self, field: &str) -> Result<()> {
        match *self {
            RealLaw::Normal { sd, .. } if !(sd > 0.0) => Err(Error::invalid(field, "normal sd must be > 0")),
            RealLaw::StudentT { df, scale } if !(df > 0.0 && scale > 0.0) => {
                Err(Error::invalid(field, "student_t needs df > 0 and scale > 0"))
            }
            RealLaw::Uniform { lo, hi } if !(hi > lo) => Err(Error::invalid(field, "uniform needs hi > lo")),
            _ => Ok(()),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            RealLaw::Normal { mean, sd } => Normal::new(mean, sd).expect("validated").sample(rng),
            RealLaw::StudentT { df, scale } => scale * StudentT::new(df).expect("validated").sample(rng),
            RealLaw::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            RealLaw::Constant { value } => value,
        }
    }

    pub fn mean(&self) -> Option<f64> {
        match *self {
            RealLaw::Normal { mean, .. } => Some(mean),
            RealLaw::StudentT { df, .. } => (df > 1.0).then_some(0.0),
            RealLaw::Uniform { lo, hi } => Some(0.5 * (lo + hi)),
            RealLaw::Constant { value } => Some(value),
        }
    }

    pub fn variance(&self) -> Option<f64> {
        match *self {
            RealLaw::Normal { sd, .. } => Some(sd * sd),
            RealLaw::StudentT { df, scale } => (df > 2.0).then(|| scale * scale * df / (df - 2.0)),
            RealLaw::Uniform { lo, hi } => Some((hi - lo) * (hi - lo) / 12.0),
            RealLaw::Constant { .. } => Some(0.0),
        }
    }

    /// Supremum of the orders `S` with `E|ε|^S < ∞`.
    pub fn moment_order(&self) -> f64 {
        match *self {
            RealLaw::StudentT { df, .. } => df,
            _ => f64::INFINITY,
        }
    }
}

/// Config-level model declaration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    MatrixWalk(MatrixWalkSpec),
    Ifs(IfsSpec),
    DiscreteRenewal(DiscreteRenewalSpec),
    StickyBeta(StickyBetaSpec),
    ArLipschitz(ArLipschitzSpec),
    LinearAr(LinearArSpec),
    Iid(IidSpec),
}

impl ModelSpec {
    pub fn family(&self) -> Family {
        match self {
            ModelSpec::MatrixWalk(_) => Family::MatrixWalk,
            ModelSpec::Ifs(_) => Family::Ifs,
            ModelSpec::DiscreteRenewal(_) => Family::DiscreteRenewal,
            ModelSpec::StickyBeta(_) => Family::StickyBeta,
            ModelSpec::ArLipschitz(_) => Family::ArLipschitz,
            ModelSpec::LinearAr(_) | ModelSpec::Iid(_) => Family::Custom,
        }
    }
}

/// One of the concrete families, ready to simulate.
#[derive(Debug, Clone)]
pub enum AnyModel {
    MatrixWalk(MatrixWalk),
    Ifs(Ifs),
    DiscreteRenewal(DiscreteRenewal),
    StickyBeta(StickyBeta),
    ArLipschitz(ArLipschitz),
    LinearAr(LinearAr),
    Iid(Iid),
}

/// Runs `$body` with `$m` bound to the concrete model inside an [`AnyModel`].
#[macro_export]
macro_rules! with_model {
    ($any:expr, $m:ident => $body:expr) => {
        match $any {
            $crate::models::AnyModel::MatrixWalk($m) => $body,
            $crate::models::AnyModel::Ifs($m) => $body,
            $crate::models::AnyModel::DiscreteRenewal($m) => $body,
            $crate::models::AnyModel::StickyBeta($m) => $body,
            $crate::models::AnyModel::ArLipschitz($m) => $body,
            $crate::models::AnyModel::LinearAr($m) => $body,
            $crate::models::AnyModel::Iid($m) => $body,
        }
    };
}

impl AnyModel {
    pub fn family(&self) -> Family {
        with_model!(self, m => m.family())
    }

    pub fn stationary_mode(&self) -> StationaryMode {
        with_model!(self, m => m.stationary_mode())
    }
}

/// Validates a spec and builds the model.
pub fn make_model(spec: &ModelSpec) -> Result<AnyModel> {
    Ok(match spec {
        ModelSpec::MatrixWalk(s) => AnyModel::MatrixWalk(MatrixWalk::new(s)?),
        ModelSpec::Ifs(s) => AnyModel::Ifs(Ifs::new(s)?),
        ModelSpec::DiscreteRenewal(s) => AnyModel::DiscreteRenewal(DiscreteRenewal::new(s)?),
        ModelSpec::StickyBeta(s) => AnyModel::StickyBeta(StickyBeta::new(s)?),
        ModelSpec::ArLipschitz(s) => AnyModel::ArLipschitz(ArLipschitz::new(s)?),
        ModelSpec::LinearAr(s) => AnyModel::LinearAr(LinearAr::new(s)?),
        ModelSpec::Iid(s) => AnyModel::Iid(Iid::new(s)?),
    })
}

pub(crate) fn default_burn_in() -> usize {
    1000
}
