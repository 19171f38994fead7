use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Family, RandomIterate, StationaryMode};
use crate::error::{Error, Result};

/// Law of the regeneration jump `ε ∈ {1, 2, ...}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RenewalLaw {
    /// `masses[k-1] = P(ε = k)`.
    Explicit { masses: Vec<f64> },
    /// `P(ε = k) ∝ k^{-(p+1)}`, truncated at `truncation` with the remainder
    /// placed on `truncation + 1`.
    Zeta {
        #[serde(default = "default_truncation")]
        truncation: usize,
    },
}

fn default_truncation() -> usize {
    1_000_000
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscreteObservable {
    /// `f(w) = 1{w = 0}`
    #[default]
    IndicatorZero,
    /// `f(w) = 1{w = 0} - ν_0`
    CenteredIndicatorZero,
    /// `f(w) = w`
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteRenewalSpec {
    pub p_seq: RenewalLaw,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default)]
    pub observable: DiscreteObservable,
}

fn default_p() -> f64 {
    3.0
}

impl DiscreteRenewalSpec {
    pub fn explicit(masses: Vec<f64>, observable: DiscreteObservable) -> Self {
        Self {
            p_seq: RenewalLaw::Explicit { masses },
            p: 3.0,
            observable,
        }
    }

    pub fn zeta(p: f64, truncation: usize, observable: DiscreteObservable) -> Self {
        Self {
            p_seq: RenewalLaw::Zeta { truncation },
            p,
            observable,
        }
    }
}

/// Renewal chain on `{0, 1, ...}`: decrement away from 0, jump to `ε - 1`
/// from 0.
#[derive(Debug, Clone)]
pub struct DiscreteRenewal {
    masses: Vec<f64>,
    tail: Vec<f64>,
    nu_tail: Vec<f64>,
    mean: f64,
    second_moment: f64,
    p: f64,
    observable: DiscreteObservable,
    remainder_atom: bool,
}

/// `Σ_{k ≤ K} k^{-s}` and the Euler–Maclaurin remainder `Σ_{k > K} k^{-s}`.
fn zeta_parts(s: f64, k_max: usize) -> (Vec<f64>, f64) {
    let terms: Vec<f64> = (1..=k_max).map(|k| (k as f64).powf(-s)).collect();
    let k = k_max as f64;
    let rest = k.powf(1.0 - s) / (s - 1.0) - 0.5 * k.powf(-s) + s * k.powf(-s - 1.0) / 12.0;
    (terms, rest)
}

impl DiscreteRenewal {
    pub fn new(spec: &DiscreteRenewalSpec) -> Result<Self> {
        if !(spec.p > 2.0) || !spec.p.is_finite() {
            return Err(Error::invalid("p", format!("p must be > 2, got {}", spec.p)));
        }
        let masses = match &spec.p_seq {
            RenewalLaw::Explicit { masses } => {
                if masses.is_empty() {
                    return Err(Error::invalid("p_seq.masses", "empty mass list"));
                }
                if masses.iter().any(|m| !m.is_finite() || *m < 0.0) {
                    return Err(Error::invalid("p_seq.masses", "masses must be finite and nonnegative"));
                }
                let total: f64 = masses.iter().rev().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::invalid("p_seq.masses", format!("masses sum to {total}, not 1")));
                }
                let mut m: Vec<f64> = masses.iter().map(|x| x / total).collect();
                while m.len() > 1 && *m.last().unwrap() == 0.0 {
                    m.pop();
                }
                m
            }
            RenewalLaw::Zeta { truncation } => {
                if *truncation < 1 {
                    return Err(Error::invalid("p_seq.truncation", "truncation must be >= 1"));
                }
                let (terms, rest) = zeta_parts(spec.p + 1.0, *truncation);
                let zeta = terms.iter().rev().sum::<f64>() + rest;
                let mut m: Vec<f64> = terms.iter().map(|t| t / zeta).collect();
                m.push(rest / zeta);
                m
            }
        };
        let mut model = Self::from_masses(masses, spec.p, spec.observable);
        model.remainder_atom = matches!(spec.p_seq, RenewalLaw::Zeta { .. });
        Ok(model)
    }

    fn from_masses(masses: Vec<f64>, p: f64, observable: DiscreteObservable) -> Self {
        let len = masses.len();
        let mut tail = vec![0.0; len + 1];
        for j in (0..len).rev() {
            tail[j] = tail[j + 1] + masses[j];
        }
        let total = tail[0];
        tail.iter_mut().for_each(|t| *t /= total);
        tail[0] = 1.0;
        let masses: Vec<f64> = masses.iter().map(|m| m / total).collect();
        let mean: f64 = tail[..len].iter().rev().sum();
        let second_moment: f64 = masses
            .iter()
            .enumerate()
            .rev()
            .map(|(i, m)| ((i + 1) as f64).powi(2) * m)
            .sum();
        let mut nu_tail = vec![0.0; len + 1];
        for j in (0..len).rev() {
            nu_tail[j] = nu_tail[j + 1] + tail[j] / mean;
        }
        nu_tail[0] = 1.0;
        Self {
            masses,
            tail,
            nu_tail,
            mean,
            second_moment,
            p,
            observable,
            remainder_atom: false,
        }
    }

    /// True when the last atom carries the mass of a truncated tail rather
    /// than belonging to the law itself.
    pub fn has_remainder_atom(&self) -> bool {
        self.remainder_atom
    }

    /// Largest value `ε` can take.
    pub fn support(&self) -> usize {
        self.masses.len()
    }

    /// `P(ε = k)`.
    pub fn mass(&self, k: usize) -> f64 {
        if k == 0 || k > self.masses.len() {
            0.0
        } else {
            self.masses[k - 1]
        }
    }

    /// `P(ε > j)`.
    pub fn tail(&self, j: usize) -> f64 {
        self.tail.get(j).copied().unwrap_or(0.0)
    }

    /// Stationary mass `ν_j = ν_0 P(ε > j)`.
    pub fn nu(&self, j: usize) -> f64 {
        self.tail(j) / self.mean
    }

    /// `Σ_{i ≥ j} ν_i`.
    pub fn nu_tail(&self, j: usize) -> f64 {
        self.nu_tail.get(j).copied().unwrap_or(0.0)
    }

    pub fn mean_innovation(&self) -> f64 {
        self.mean
    }

    pub fn second_moment_innovation(&self) -> f64 {
        self.second_moment
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn observable_kind(&self) -> DiscreteObservable {
        self.observable
    }

    pub fn f(&self, w: usize) -> f64 {
        match self.observable {
            DiscreteObservable::IndicatorZero => (w == 0) as u8 as f64,
            DiscreteObservable::CenteredIndicatorZero => (w == 0) as u8 as f64 - 1.0 / self.mean,
            DiscreteObservable::Identity => w as f64,
        }
    }

    fn draw_from_tail<R: Rng + ?Sized>(table: &[f64], rng: &mut R) -> usize {
        let u = 1.0 - rng.random::<f64>();
        table.partition_point(|&t| t >= u)
    }
}

impl RandomIterate for DiscreteRenewal {
    type State = usize;
    type Innovation = usize;

    fn family(&self) -> Family {
        Family::DiscreteRenewal
    }

    fn draw_innovation<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        Self::draw_from_tail(&self.tail, rng)
    }

    fn step(&self, eps: &usize, w: &usize) -> usize {
        if *w == 0 {
            eps - 1
        } else {
            w - 1
        }
    }

    fn observable(&self, _eps: &usize, w: &usize) -> f64 {
        self.f(*w)
    }

    fn stationary_mode(&self) -> StationaryMode {
        StationaryMode::Exact
    }

    fn sample_exact<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<usize> {
        Ok(Self::draw_from_tail(&self.nu_tail, rng) - 1)
    }

    fn burn_in_start(&self) -> usize {
        0
    }

    fn distance(&self, a: &usize, b: &usize) -> Option<f64> {
        Some(a.abs_diff(*b) as f64)
    }

    fn observable_mean(&self) -> Option<f64> {
        Some(match self.observable {
            DiscreteObservable::IndicatorZero => 1.0 / self.mean,
            DiscreteObservable::CenteredIndicatorZero => 0.0,
            DiscreteObservable::Identity => (1..self.support()).map(|j| self.nu_tail(j)).sum(),
        })
    }

    fn design_pairs<R: Rng + ?Sized>(&self, _rng: &mut R) -> Vec<(usize, usize)> {
        let n = self.support().min(32);
        (0..n).flat_map(|x| (0..n).map(move |y| (x, y))).collect()
    }

    fn describe_state(&self, w: &usize) -> String {
        w.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamRoot;

    fn half_half() -> DiscreteRenewal {
        DiscreteRenewal::new(&DiscreteRenewalSpec::explicit(vec![0.5, 0.5], DiscreteObservable::IndicatorZero)).unwrap()
    }

    #[test]
    fn stationary_law_of_two_point_jump() {
        let m = half_half();
        assert!((m.mean_innovation() - 1.5).abs() < 1e-15);
        assert!((m.nu(0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.nu(1) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.nu(2), 0.0);
    }

    #[test]
    fn degenerate_jump_absorbs_at_zero() {
        let m = DiscreteRenewal::new(&DiscreteRenewalSpec::explicit(vec![1.0], DiscreteObservable::IndicatorZero)).unwrap();
        assert_eq!(m.nu(0), 1.0);
        let mut rng = StreamRoot::new(3, "t").stream(0);
        for _ in 0..100 {
            assert_eq!(m.sample_exact(&mut rng).unwrap(), 0);
            let e = m.draw_innovation(&mut rng);
            assert_eq!(m.step(&e, &0), 0);
        }
    }

    #[test]
    fn decrement_and_observable() {
        let m = half_half();
        assert_eq!(m.step(&7, &3), 2);
        assert_eq!(m.observable(&1, &0), 1.0);
        assert_eq!(m.observable(&1, &1), 0.0);
    }

    #[test]
    fn rejects_small_p_and_bad_masses() {
        let mut s = DiscreteRenewalSpec::explicit(vec![0.5, 0.5], DiscreteObservable::IndicatorZero);
        s.p = 2.0;
        assert!(DiscreteRenewal::new(&s).is_err());
        let s = DiscreteRenewalSpec::explicit(vec![0.5, 0.4], DiscreteObservable::IndicatorZero);
        assert!(DiscreteRenewal::new(&s).is_err());
    }

    #[test]
    fn zeta_family_has_unit_mass_and_tail_atom() {
        let m = DiscreteRenewal::new(&DiscreteRenewalSpec::zeta(3.0, 1000, DiscreteObservable::IndicatorZero)).unwrap();
        assert_eq!(m.support(), 1001);
        let total: f64 = (1..=m.support()).rev().map(|k| m.mass(k)).sum();
        assert!((total - 1.0).abs() < 1e-12);
        // zeta(4) = pi^4 / 90
        let z4 = std::f64::consts::PI.powi(4) / 90.0;
        assert!((m.mass(1) - 1.0 / z4).abs() < 1e-12);
        assert!((m.mass(2) - 1.0 / (16.0 * z4)).abs() < 1e-12);
    }

    #[test]
    fn inverse_cdf_sampling_matches_nu() {
        let m = half_half();
        let mut rng = StreamRoot::new(11, "t").stream(0);
        let n = 200_000;
        let zeros = (0..n).filter(|_| m.sample_exact(&mut rng).unwrap() == 0).count();
        let f = zeros as f64 / n as f64;
        let se = (2.0 / 9.0 / n as f64).sqrt();
        assert!((f - 2.0 / 3.0).abs() < 4.0 * se);
    }
}
