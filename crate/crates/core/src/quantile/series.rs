use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::ols;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtrapolationKind {
    #[default]
    PowerLaw,
    Exponential,
}

/// Continuation of a tabulated non-increasing sequence past its last entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum Extrapolation {
    /// `c n^{-alpha}`
    PowerLaw { c: f64, alpha: f64 },
    /// `c e^{-rate n}`
    Exponential { c: f64, rate: f64 },
    /// The table ends in zeros.
    Zero,
    /// No usable decay: the last value is carried forward.
    Constant { value: f64 },
}

impl Extrapolation {
    pub fn describe(&self) -> String {
        match *self {
            Extrapolation::PowerLaw { c, alpha } => format!("power_law(c={c:.6e}, alpha={alpha:.6})"),
            Extrapolation::Exponential { c, rate } => format!("exponential(c={c:.6e}, rate={rate:.6})"),
            Extrapolation::Zero => "zero".into(),
            Extrapolation::Constant { value } => format!("constant({value:.6e})"),
        }
    }
}

/// A tabulated sequence `v(0), v(1), ...` with a fitted tail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailSeries {
    pub values: Vec<f64>,
    pub extrapolation: Extrapolation,
    monotone: bool,
}

impl TailSeries {
    /// Fits the declared tail model to the last half of the table.
    pub fn new(values: Vec<f64>, kind: ExtrapolationKind) -> Self {
        let extrapolation = fit_tail(&values, kind);
        let monotone = values.windows(2).all(|w| w[1] <= w[0]);
        Self {
            values,
            extrapolation,
            monotone,
        }
    }

    pub fn with_extrapolation(values: Vec<f64>, extrapolation: Extrapolation) -> Self {
        let monotone = values.windows(2).all(|w| w[1] <= w[0]);
        Self {
            values,
            extrapolation,
            monotone,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn last(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    pub fn value_at(&self, n: usize) -> f64 {
        if let Some(&v) = self.values.get(n) {
            return v;
        }
        let last = self.last();
        let x = n as f64;
        let e = match self.extrapolation {
            Extrapolation::PowerLaw { c, alpha } => c * x.powf(-alpha),
            Extrapolation::Exponential { c, rate } => c * (-rate * x).exp(),
            Extrapolation::Zero => 0.0,
            Extrapolation::Constant { value } => value,
        };
        e.min(last).max(0.0)
    }

    /// `#{n ≥ 0 : v(n) > u}`; `None` when infinite.
    pub fn count_above(&self, u: f64) -> Option<u64> {
        let table = if self.monotone {
            self.values.partition_point(|&v| v > u) as u64
        } else {
            self.values.iter().filter(|&&v| v > u).count() as u64
        };
        let len = self.values.len() as f64;
        let last = self.last();
        if !(last > u) {
            return Some(table);
        }
        let bound = match self.extrapolation {
            Extrapolation::Zero => return Some(table),
            Extrapolation::Constant { .. } => return None,
            Extrapolation::PowerLaw { c, alpha } => {
                if u <= 0.0 || alpha <= 0.0 {
                    return None;
                }
                (c / u).powf(1.0 / alpha)
            }
            Extrapolation::Exponential { c, rate } => {
                if u <= 0.0 || rate <= 0.0 {
                    return None;
                }
                (c / u).ln() / rate
            }
        };
        if !bound.is_finite() || bound > 1e18 {
            return None;
        }
        Some(table + (bound.ceil() - len).max(0.0) as u64)
    }
}

fn fit_tail(values: &[f64], kind: ExtrapolationKind) -> Extrapolation {
    let len = values.len();
    let last = values.last().copied().unwrap_or(0.0);
    if len == 0 || last <= 0.0 {
        return Extrapolation::Zero;
    }
    let lo = (len / 2).max(1);
    let pts: Vec<(f64, f64)> = (lo..len)
        .filter(|&n| values[n] > 0.0)
        .map(|n| (n as f64, values[n].ln()))
        .collect();
    if pts.len() < 2 {
        return Extrapolation::Constant { value: last };
    }
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    match kind {
        ExtrapolationKind::PowerLaw => {
            let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
            match ols(&xs, &ys) {
                Ok(f) if f.slope < 0.0 => Extrapolation::PowerLaw {
                    c: f.intercept.exp(),
                    alpha: -f.slope,
                },
                _ => Extrapolation::Constant { value: last },
            }
        }
        ExtrapolationKind::Exponential => {
            let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
            match ols(&xs, &ys) {
                Ok(f) if f.slope < 0.0 => Extrapolation::Exponential {
                    c: f.intercept.exp(),
                    rate: -f.slope,
                },
                _ => Extrapolation::Constant { value: last },
            }
        }
    }
}

/// `δ^{-1}(u) = #{n ≥ 0 : δ(n) > u}`; `None` when infinite.
pub fn delta_inverse(u: f64, delta: &TailSeries) -> Result<Option<u64>> {
    if !(u >= 0.0) {
        return Err(Error::OutOfRange {
            value: u,
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    Ok(delta.count_above(u))
}
