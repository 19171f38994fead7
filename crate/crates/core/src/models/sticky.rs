use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Family, RandomIterate, StationaryMode};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StickyObservable {
    #[default]
    Identity,
    /// `w - E_ν(W) = w - a/(a+1)`
    CenteredIdentity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StickyBetaSpec {
    pub a: f64,
    #[serde(default)]
    pub observable: StickyObservable,
}

/// Chain on `[0, 1]` that stays put with probability `1 - x` and otherwise
/// jumps to a draw from `π(dx) = (a+1) x^a dx`. Stationary law
/// `ν(dx) = a x^{a-1} dx`.
#[derive(Debug, Clone)]
pub struct StickyBeta {
    a: f64,
    observable: StickyObservable,
}

impl StickyBeta {
    pub fn new(spec: &StickyBetaSpec) -> Result<Self> {
        if !(spec.a > 1.0) || !spec.a.is_finite() {
            return Err(Error::invalid("a", format!("a > 1 required, got {}", spec.a)));
        }
        Ok(Self {
            a: spec.a,
            observable: spec.observable,
        })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    /// Stationary state for a given uniform draw.
    pub fn stationary_from_uniform(&self, u: f64) -> f64 {
        u.powf(1.0 / self.a)
    }

    /// Jump target for a given uniform draw.
    pub fn jump_target(&self, v: f64) -> f64 {
        v.powf(1.0 / (self.a + 1.0))
    }

    pub fn stationary_cdf(&self, x: f64) -> f64 {
        x.clamp(0.0, 1.0).powf(self.a)
    }
}

impl RandomIterate for StickyBeta {
    type State = f64;
    type Innovation = (f64, f64);

    fn family(&self) -> Family {
        Family::StickyBeta
    }

    fn draw_innovation<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        (rng.random(), rng.random())
    }

    fn step(&self, &(u, v): &(f64, f64), &w: &f64) -> f64 {
        if u >= w {
            w
        } else {
            self.jump_target(v)
        }
    }

    fn observable(&self, _e: &(f64, f64), &w: &f64) -> f64 {
        match self.observable {
            StickyObservable::Identity => w,
            StickyObservable::CenteredIdentity => w - self.a / (self.a + 1.0),
        }
    }

    fn stationary_mode(&self) -> StationaryMode {
        StationaryMode::Exact
    }

    fn sample_exact<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        Ok(self.stationary_from_uniform(rng.random()))
    }

    fn burn_in_start(&self) -> f64 {
        1.0
    }

    fn distance(&self, a: &f64, b: &f64) -> Option<f64> {
        Some((a - b).abs())
    }

    fn observable_mean(&self) -> Option<f64> {
        Some(match self.observable {
            StickyObservable::Identity => self.a / (self.a + 1.0),
            StickyObservable::CenteredIdentity => 0.0,
        })
    }

    fn design_pairs<R: Rng + ?Sized>(&self, _rng: &mut R) -> Vec<(f64, f64)> {
        let g: Vec<f64> = (0..32).map(|i| i as f64 / 31.0).collect();
        g.iter().flat_map(|&x| g.iter().map(move |&y| (x, y))).collect()
    }

    fn describe_state(&self, w: &f64) -> String {
        format!("{w}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(a: f64) -> StickyBeta {
        StickyBeta::new(&StickyBetaSpec {
            a,
            observable: StickyObservable::Identity,
        })
        .unwrap()
    }

    #[test]
    fn step_examples() {
        // a = 1 is outside the validated range but the step formula still applies
        let m = StickyBeta {
            a: 1.0,
            observable: StickyObservable::Identity,
        };
        assert_eq!(m.step(&(0.9, 0.3), &0.7), 0.7);
        assert!((m.step(&(0.1, 0.25), &0.7) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn inverse_cdf_example() {
        assert!((model(2.0).stationary_from_uniform(0.25) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_a_at_most_one() {
        for a in [0.5, 1.0] {
            let e = StickyBeta::new(&StickyBetaSpec {
                a,
                observable: StickyObservable::Identity,
            })
            .unwrap_err();
            assert!(e.to_string().contains("a > 1"));
        }
    }
}
