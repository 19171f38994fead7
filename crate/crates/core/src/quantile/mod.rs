//! Quantile calculus for `|X_1|`: `Q`, `H = ∫Q`, `H^{-1}`, and the
//! composite functions `γ = H^{-1}∘δ`, `γ^{-1} = δ^{-1}∘H`, `R = γ^{-1} Q`.

mod conditions;
mod series;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use conditions::{
    eval_series_condition, psi_moment_tau, ConditionInputs, ConditionKind, ConditionParams, ConditionReport, Modulus,
    PartialSum, PsiMoment, Verdict,
};
pub use series::{delta_inverse, Extrapolation, ExtrapolationKind, TailSeries};

/// `Q(u) = a + b (u - u0)` on `[u0, u1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Segment {
    u0: f64,
    u1: f64,
    a: f64,
    b: f64,
}

impl Segment {
    fn q(&self, u: f64) -> f64 {
        self.a + self.b * (u - self.u0)
    }

    fn integral(&self, d: f64) -> f64 {
        self.a * d + 0.5 * self.b * d * d
    }

    /// `∫_0^d (a + b t)^m dt`
    fn power_integral(&self, m: f64, d: f64) -> f64 {
        if d <= 0.0 {
            return 0.0;
        }
        if self.b == 0.0 {
            return self.a.powf(m) * d;
        }
        let end = (self.a + self.b * d).max(0.0);
        (end.powf(m + 1.0) - self.a.powf(m + 1.0)) / (self.b * (m + 1.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QuantileSource {
    Empirical { sample_size: usize },
    Analytic { name: String },
    Steps,
}

/// Closed-form laws of `|X|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnalyticLaw {
    Constant(f64),
    /// Uniform on `[0, hi]`.
    Uniform(f64),
}

/// Piecewise-linear, non-increasing `Q` on `[0, 1)` with its exact integral.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileTable {
    segments: Vec<Segment>,
    /// `H` at the left end of each segment, plus `H(1)` last.
    h_start: Vec<f64>,
    pub source: QuantileSource,
    pub warnings: Vec<String>,
}

impl QuantileTable {
    fn from_segments(segments: Vec<Segment>, source: QuantileSource) -> Self {
        let mut h_start = Vec::with_capacity(segments.len() + 1);
        let mut acc = 0.0;
        for s in &segments {
            h_start.push(acc);
            acc += s.integral(s.u1 - s.u0);
        }
        h_start.push(acc);
        Self {
            segments,
            h_start,
            source,
            warnings: Vec::new(),
        }
    }

    /// Step quantile of `values` taken with the given probabilities.
    pub fn from_steps(values: &[f64], probs: &[f64]) -> Result<Self> {
        if values.is_empty() || values.len() != probs.len() {
            return Err(Error::invalid("values", "need matching nonempty values and probabilities"));
        }
        let mut pairs: Vec<(f64, f64)> = values.iter().map(|v| v.abs()).zip(probs.iter().copied()).collect();
        if pairs.iter().any(|(v, p)| !v.is_finite() || !(*p >= 0.0)) {
            return Err(Error::invalid("values", "values must be finite and probabilities nonnegative"));
        }
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        if !(total > 0.0) {
            return Err(Error::invalid("probs", "probabilities sum to zero"));
        }
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut segments: Vec<Segment> = Vec::new();
        let mut u = 0.0;
        for (v, p) in pairs {
            if p == 0.0 {
                continue;
            }
            let w = p / total;
            match segments.last_mut() {
                Some(s) if s.a == v => s.u1 += w,
                _ => segments.push(Segment {
                    u0: u,
                    u1: u + w,
                    a: v,
                    b: 0.0,
                }),
            }
            u += w;
        }
        if let Some(s) = segments.last_mut() {
            s.u1 = 1.0;
        }
        Ok(Self::from_segments(segments, QuantileSource::Steps))
    }

    pub fn analytic(law: AnalyticLaw) -> Result<Self> {
        let (seg, name) = match law {
            AnalyticLaw::Constant(c) => (
                Segment {
                    u0: 0.0,
                    u1: 1.0,
                    a: c.abs(),
                    b: 0.0,
                },
                format!("constant({})", c.abs()),
            ),
            AnalyticLaw::Uniform(hi) => {
                if !(hi > 0.0) {
                    return Err(Error::invalid("hi", "uniform upper end must be > 0"));
                }
                (
                    Segment {
                        u0: 0.0,
                        u1: 1.0,
                        a: hi,
                        b: -hi,
                    },
                    format!("uniform(0, {hi})"),
                )
            }
        };
        Ok(Self::from_segments(vec![seg], QuantileSource::Analytic { name }))
    }

    pub fn segment_count(&self) -> usize {
        self.segments.len()
    }

    /// `Q(u) = inf{t : P(|X| > t) ≤ u}`; right-continuous, `Q(u) = 0` for `u ≥ 1`.
    pub fn q(&self, u: f64) -> f64 {
        if u >= 1.0 {
            return 0.0;
        }
        let u = u.max(0.0);
        let i = self.segments.partition_point(|s| s.u1 <= u).min(self.segments.len() - 1);
        self.segments[i].q(u).max(0.0)
    }

    /// `H(x) = ∫_0^x Q`.
    pub fn h(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        let i = self.segments.partition_point(|s| s.u1 <= x);
        if i == self.segments.len() {
            return self.h_start[i];
        }
        self.h_start[i] + self.segments[i].integral(x - self.segments[i].u0)
    }

    /// Lebesgue measure of `{u : Q(u) > t}`, i.e. `P(|X| > t)`.
    pub fn exceedance(&self, t: f64) -> f64 {
        if self.q(0.0) <= t {
            return 0.0;
        }
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.q(mid) > t {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }

    /// `H(1) = E|X|`.
    pub fn mean(&self) -> f64 {
        *self.h_start.last().unwrap()
    }

    /// Smallest `u` with `H(u) = y`.
    pub fn h_inv(&self, y: f64) -> Result<f64> {
        let top = self.mean();
        if !(y >= 0.0) || y > top * (1.0 + 1e-12) + 1e-300 {
            return Err(Error::OutOfRange { value: y, lo: 0.0, hi: top });
        }
        Ok(self.h_inv_clamped(y))
    }

    /// `H^{-1}(min(y, H(1)))` for `y ≥ 0`.
    pub fn h_inv_clamped(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        let y = y.min(self.mean());
        let i = self.h_start[1..].partition_point(|&h| h < y).min(self.segments.len() - 1);
        let s = &self.segments[i];
        let rest = (y - self.h_start[i]).max(0.0);
        let disc = (s.a * s.a + 2.0 * s.b * rest).max(0.0);
        let denom = s.a + disc.sqrt();
        let d = if denom > 0.0 { 2.0 * rest / denom } else { 0.0 };
        (s.u0 + d).min(s.u1)
    }

    /// `∫_0^x Q(u)^m du`, exact on the piecewise structure.
    pub fn power_integral(&self, m: f64, x: f64) -> f64 {
        PowerIntegral::new(self, m).upto(x)
    }

    /// Breakpoints of the piecewise structure, `0` and `1` included.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.segments.iter().map(|s| s.u0).collect();
        b.push(1.0);
        b
    }

    /// `(u, Q(u), H(u))` on a regular grid of `points + 1` values.
    pub fn grid(&self, points: usize) -> Vec<(f64, f64, f64)> {
        (0..=points)
            .map(|i| {
                let u = i as f64 / points as f64;
                (u, self.q(u), self.h(u))
            })
            .collect()
    }
}

/// Prefix integrals of `Q^m` for repeated evaluation at one exponent.
pub struct PowerIntegral<'a> {
    table: &'a QuantileTable,
    m: f64,
    prefix: Vec<f64>,
}

impl<'a> PowerIntegral<'a> {
    pub fn new(table: &'a QuantileTable, m: f64) -> Self {
        let mut prefix = Vec::with_capacity(table.segments.len() + 1);
        let mut acc = 0.0;
        for s in &table.segments {
            prefix.push(acc);
            acc += s.power_integral(m, s.u1 - s.u0);
        }
        prefix.push(acc);
        Self { table, m, prefix }
    }

    pub fn upto(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        let segs = &self.table.segments;
        let i = segs.partition_point(|s| s.u1 <= x);
        if i == segs.len() {
            return self.prefix[i];
        }
        self.prefix[i] + segs[i].power_integral(self.m, x - segs[i].u0)
    }

    pub fn between(&self, lo: f64, hi: f64) -> f64 {
        (self.upto(hi) - self.upto(lo)).max(0.0)
    }
}

/// Exact step quantile of a sample of `|X_1|`.
pub fn build_quantile(samples: &[f64]) -> Result<QuantileTable> {
    if samples.is_empty() {
        return Err(Error::InsufficientData("empty sample".into()));
    }
    let n = samples.len();
    let values: Vec<f64> = samples.iter().map(|v| v.abs()).collect();
    let mut t = QuantileTable::from_steps(&values, &vec![1.0; n])?;
    t.source = QuantileSource::Empirical { sample_size: n };
    if n < 10_000 {
        t.warnings.push(format!("empirical quantile from only {n} samples"));
    }
    Ok(t)
}

/// `γ(x) = H^{-1}(δ(⌊x⌋))`, `γ^{-1}(u) = δ^{-1}(H(u))`, `R(u) = γ^{-1}(u) Q(u)`.
pub struct GammaTables<'a> {
    pub delta: &'a TailSeries,
    pub quantile: &'a QuantileTable,
    pub warnings: Vec<String>,
}

impl<'a> GammaTables<'a> {
    pub fn gamma(&self, n: usize) -> f64 {
        self.quantile.h_inv_clamped(self.delta.value_at(n))
    }

    /// `None` when the count is infinite.
    pub fn gamma_inv(&self, u: f64) -> Option<u64> {
        self.delta.count_above(self.quantile.h(u))
    }

    pub fn r(&self, u: f64) -> f64 {
        let q = self.quantile.q(u);
        match self.gamma_inv(u) {
            Some(m) => m as f64 * q,
            None if q == 0.0 => 0.0,
            None => f64::INFINITY,
        }
    }
}

pub fn gamma_tables<'a>(delta: &'a TailSeries, quantile: &'a QuantileTable) -> GammaTables<'a> {
    let mut warnings = Vec::new();
    let d0 = delta.value_at(0);
    let h1 = quantile.mean();
    let scale = d0.abs().max(h1.abs());
    if scale > 0.0 && (d0 - h1).abs() / scale > 0.05 {
        warnings.push(format!(
            "delta(0) = {d0} and quantile mean {h1} differ by more than 5%; tables may describe different laws"
        ));
    }
    GammaTables {
        delta,
        quantile,
        warnings,
    }
}
