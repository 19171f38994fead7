//! Long-run variance, CLT and decay-rate diagnostics.

use serde::{Deserialize, Serialize};

use crate::coupling::estimate_pairwise_distance;
use crate::error::{Error, Result};
use crate::models::{sample_stationary, RandomIterate};
use crate::rng::{chunked, StreamRoot};
use crate::stats::{ks_critical, ks_statistic, normal_cdf, ols, Moments, SlopeFit};

/// Below this the long-run variance is treated as zero.
pub const DEGENERATE_SIGMA2: f64 = 1e-12;

/// Independent paths behind a spectral estimate.
pub const SPECTRAL_BATCHES: usize = 16;

/// Default path length of the spectral estimate inside [`variance_growth`].
pub const SPECTRAL_PATH_LENGTH: usize = 1 << 17;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralEstimate {
    pub sigma2: f64,
    pub se: f64,
    pub window: usize,
    pub path_length: usize,
    pub batches: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceGrowth {
    pub n: Vec<usize>,
    /// `Var(S_n) / n`
    pub value: Vec<f64>,
    pub se: Vec<f64>,
    pub reps: usize,
    pub sigma2_growth: f64,
    pub sigma2_growth_se: f64,
    pub spectral: SpectralEstimate,
    pub approximate: bool,
}

impl VarianceGrowth {
    /// `|growth - spectral| / sqrt(se² + se²)`
    pub fn agreement_z(&self) -> f64 {
        let s = (self.sigma2_growth_se.powi(2) + self.spectral.se.powi(2)).sqrt();
        let d = (self.sigma2_growth - self.spectral.sigma2).abs();
        if s > 0.0 {
            d / s
        } else if d == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Stationary path of observables `X_1..X_n`.
fn observable_path<M: RandomIterate>(model: &M, n: usize, rng: &mut rand_chacha::ChaCha8Rng) -> (Vec<f64>, bool) {
    let (mut w, burn) = sample_stationary(model, rng);
    let mut xs = Vec::with_capacity(n);
    for _ in 0..n {
        let e = model.draw_innovation(rng);
        xs.push(model.observable(&e, &w));
        w = model.step(&e, &w);
    }
    (xs, burn)
}

/// Partial sums `S_n` at each grid point for `reps` stationary paths, laid
/// out rep-major.
fn partial_sums<M: RandomIterate>(model: &M, grid: &[usize], reps: usize, root: &StreamRoot) -> (Vec<Vec<f64>>, bool) {
    let n_max = *grid.iter().max().unwrap();
    let parts = chunked(reps, |range| {
        let mut out = Vec::with_capacity(range.len());
        let mut burn = false;
        for r in range {
            let mut rng = root.stream(r as u64);
            let (mut w, b) = sample_stationary(model, &mut rng);
            burn |= b;
            let mut s = 0.0;
            let mut row = Vec::with_capacity(grid.len());
            let mut gi = 0;
            for n in 1..=n_max {
                let e = model.draw_innovation(&mut rng);
                s += model.observable(&e, &w);
                w = model.step(&e, &w);
                while gi < grid.len() && grid[gi] == n {
                    row.push(s);
                    gi += 1;
                }
            }
            out.push(row);
        }
        (out, burn)
    });
    let mut rows = Vec::with_capacity(reps);
    let mut burn = false;
    for (r, b) in parts {
        rows.extend(r);
        burn |= b;
    }
    (rows, burn)
}

/// Sample variance and its asymptotic standard error `sqrt((m4 - s^4) / n)`.
fn variance_with_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let (mut m2, mut m4) = (0.0, 0.0);
    for x in xs {
        let d = (x - mean) * (x - mean);
        m2 += d;
        m4 += d * d;
    }
    let var = m2 / (n - 1.0);
    let m4 = m4 / n;
    let se = ((m4 - (m2 / n).powi(2)).max(0.0) / n).sqrt();
    (var, se)
}

/// `Var(S_n)/n` over a grid of `n` from independent stationary paths, plus
/// the spectral estimate.
pub fn variance_growth<M: RandomIterate>(model: &M, n_grid: &[usize], reps: usize, root: &StreamRoot) -> Result<VarianceGrowth> {
    if n_grid.is_empty() || n_grid.contains(&0) {
        return Err(Error::invalid("n_grid", "grid must be non-empty with n >= 1"));
    }
    if reps < 4 {
        return Err(Error::invalid("reps", "reps must be >= 4"));
    }
    let mut grid = n_grid.to_vec();
    grid.sort_unstable();
    grid.dedup();
    let (rows, approximate) = partial_sums(model, &grid, reps, &root.child("growth", 0));
    let mut value = Vec::with_capacity(grid.len());
    let mut se = Vec::with_capacity(grid.len());
    for (j, &n) in grid.iter().enumerate() {
        let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
        let (v, s) = variance_with_se(&col);
        value.push(v / n as f64);
        se.push(s / n as f64);
    }
    let spectral = sigma2_spectral(model, None, SPECTRAL_PATH_LENGTH, &root.child("spectral", 0))?;
    Ok(VarianceGrowth {
        sigma2_growth: *value.last().unwrap(),
        sigma2_growth_se: *se.last().unwrap(),
        n: grid,
        value,
        se,
        reps,
        spectral,
        approximate,
    })
}

/// Flat-top lag weights: 1 up to `L/2`, then linear down to 0 at `L`.
fn flat_top(h: usize, window: usize) -> f64 {
    let x = h as f64 / window as f64;
    if x <= 0.5 {
        1.0
    } else if x < 1.0 {
        2.0 * (1.0 - x)
    } else {
        0.0
    }
}

/// `γ(0) + 2 Σ_h w(h) γ(h)` from one path.
fn spectral_single(xs: &[f64], window: usize) -> f64 {
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let c: Vec<f64> = xs.iter().map(|x| x - mean).collect();
    let acov = |h: usize| c[..n - h].iter().zip(&c[h..]).map(|(a, b)| a * b).sum::<f64>() / n as f64;
    let mut s = acov(0);
    for h in 1..=window {
        let w = flat_top(h, window);
        if w == 0.0 {
            break;
        }
        s += 2.0 * w * acov(h);
    }
    s
}

/// Truncated autocovariance sum averaged over independent stationary paths.
/// The default window is `⌈path_length^{1/3}⌉` lags.
pub fn sigma2_spectral<M: RandomIterate>(model: &M, lag_window: Option<usize>, path_length: usize, root: &StreamRoot) -> Result<SpectralEstimate> {
    let window = lag_window.unwrap_or_else(|| (path_length as f64).cbrt().ceil() as usize).max(1);
    if window * 10 >= path_length {
        return Err(Error::invalid(
            "lag_window",
            format!("window {window} must stay below path_length/10 = {}", path_length / 10),
        ));
    }
    let ests: Vec<f64> = crate::rng::par_indexed(SPECTRAL_BATCHES, |b| {
        let mut rng = root.stream(b as u64);
        let (xs, _) = observable_path(model, path_length, &mut rng);
        spectral_single(&xs, window)
    });
    let mut m = Moments::default();
    ests.iter().for_each(|&x| m.push(x));
    Ok(SpectralEstimate {
        sigma2: m.mean(),
        se: m.se(),
        window,
        path_length,
        batches: SPECTRAL_BATCHES,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltReport {
    pub n: usize,
    pub reps: usize,
    /// `None` when the variance is degenerate.
    pub ks: Option<f64>,
    pub critical_1pct: f64,
    pub critical_5pct: f64,
    pub sigma_hat: f64,
    /// Where `σ̂` came from: "supplied" or "sample".
    pub sigma_source: String,
    pub mean_used: f64,
    pub degenerate: bool,
}

/// KS distance between `(S_n - n EX) / (σ̂ √n)` over `reps` stationary
/// paths and the standard normal law. Without a supplied `σ²`, `σ̂²` is
/// `Var(S_n)/n` from the same replications.
pub fn clt_check<M: RandomIterate>(model: &M, n: usize, reps: usize, sigma2: Option<f64>, root: &StreamRoot) -> Result<CltReport> {
    if n == 0 || reps < 4 {
        return Err(Error::invalid("reps", "n >= 1 and reps >= 4 required"));
    }
    let (rows, _) = partial_sums(model, &[n], reps, root);
    let s: Vec<f64> = rows.into_iter().map(|r| r[0]).collect();
    let mean = match model.observable_mean() {
        Some(m) => m,
        None => s.iter().sum::<f64>() / (reps as f64 * n as f64),
    };
    let (s2, source) = match sigma2 {
        Some(v) => (v, "supplied"),
        None => (variance_with_se(&s).0 / n as f64, "sample"),
    };
    let degenerate = !(s2 >= DEGENERATE_SIGMA2);
    let sigma = s2.max(0.0).sqrt();
    let ks = if degenerate {
        None
    } else {
        let scale = sigma * (n as f64).sqrt();
        let z: Vec<f64> = s.iter().map(|x| (x - n as f64 * mean) / scale).collect();
        Some(ks_statistic(&z, normal_cdf))
    };
    Ok(CltReport {
        n,
        reps,
        ks,
        critical_1pct: ks_critical(reps, 0.01),
        critical_5pct: ks_critical(reps, 0.05),
        sigma_hat: sigma,
        sigma_source: source.into(),
        mean_used: mean,
        degenerate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayModel {
    /// `log y` against `log n`.
    Power,
    /// `log y` against `n`; the slope is the log of the per-step factor.
    Exponential,
}

/// Least-squares decay fit of `(n, value)` pairs.
pub fn decay_fit(series: &[(f64, f64)], model: DecayModel) -> Result<SlopeFit> {
    if series.len() < 4 {
        return Err(Error::InsufficientData(format!("decay fit needs >= 4 points, got {}", series.len())));
    }
    if let Some(&(n, v)) = series.iter().find(|(n, v)| !(*v > 0.0) || (model == DecayModel::Power && !(*n > 0.0))) {
        return Err(Error::invalid("series", format!("nonpositive entry ({n}, {v}) in the fit window")));
    }
    let ys: Vec<f64> = series.iter().map(|p| p.1.ln()).collect();
    let xs: Vec<f64> = match model {
        DecayModel::Power => series.iter().map(|p| p.0.ln()).collect(),
        DecayModel::Exponential => series.iter().map(|p| p.0).collect(),
    };
    ols(&xs, &ys)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceDecay {
    /// `n = 0..=n_max`
    pub value: Vec<f64>,
    pub se: Vec<f64>,
    pub gamma: f64,
    /// Fit of `log(n^γ E d(W_n, W*_n))` against `log n` on the upper half.
    pub term_fit: SlopeFit,
}

/// `γ = (S - 1)/τ - 2` with `S = p + τ p`: the weight exponent for which
/// `Σ n^γ ∬ E|W_{n,x} - W_{n,y}| dν dν` must converge when the stationary
/// law has `S - τ` moments.
pub fn lipschitz_weight_exponent(p: f64, tau: f64) -> f64 {
    let s = p + tau * p;
    (s - 1.0) / tau - 2.0
}

/// Monte Carlo `∬ E d(W_{n,x}, W_{n,y}) ν(dx) ν(dy)` with the weighted-term
/// slope for exponent `gamma`.
pub fn distance_decay<M: RandomIterate>(model: &M, n_max: usize, paths: usize, gamma: f64, root: &StreamRoot) -> Result<DistanceDecay> {
    if n_max < 8 {
        return Err(Error::invalid("n_max", "n_max must be >= 8"));
    }
    let (value, se) = estimate_pairwise_distance(model, n_max, paths, root)?;
    let series: Vec<(f64, f64)> = (n_max / 2..=n_max)
        .map(|n| (n as f64, (n as f64).powf(gamma) * value[n]))
        .collect();
    let term_fit = decay_fit(&series, DecayModel::Power)?;
    Ok(DistanceDecay {
        value,
        se,
        gamma,
        term_fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Iid, IidSpec, LinearAr, LinearArSpec, RealLaw};

    #[test]
    fn exact_geometric_rate() {
        let s: Vec<(f64, f64)> = (1..30).map(|n| (n as f64, 3.0 * 0.7f64.powi(n))).collect();
        let f = decay_fit(&s, DecayModel::Exponential).unwrap();
        assert!((f.slope - 0.7f64.ln()).abs() < 1e-12);
        let p: Vec<(f64, f64)> = (1..30).map(|n| (n as f64, 2.0 * (n as f64).powf(-1.5))).collect();
        assert!((decay_fit(&p, DecayModel::Power).unwrap().slope + 1.5).abs() < 1e-12);
        assert!(decay_fit(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0), (4.0, 1.0)], DecayModel::Power).is_err());
        assert!(decay_fit(&p[..3], DecayModel::Power).is_err());
    }

    #[test]
    fn weight_exponent_arithmetic() {
        assert!((lipschitz_weight_exponent(2.5, 0.3) - 5.5).abs() < 1e-12);
    }

    #[test]
    fn iid_normal_variance_is_one() {
        let m = Iid::new(&IidSpec {
            law: RealLaw::Normal { mean: 0.0, sd: 1.0 },
        })
        .unwrap();
        let g = variance_growth(&m, &[10, 100], 4000, &StreamRoot::new(3, "vg")).unwrap();
        for (v, s) in g.value.iter().zip(&g.se) {
            assert!((v - 1.0).abs() < 4.0 * s, "{g:?}");
        }
        assert!((g.spectral.sigma2 - 1.0).abs() < 4.0 * g.spectral.se);
    }

    #[test]
    fn zero_observable_is_degenerate() {
        let m = Iid::new(&IidSpec {
            law: RealLaw::Constant { value: 0.0 },
        })
        .unwrap();
        let g = variance_growth(&m, &[10], 16, &StreamRoot::new(3, "vg")).unwrap();
        assert_eq!(g.value, vec![0.0]);
        assert_eq!(g.sigma2_growth, 0.0);
        let c = clt_check(&m, 10, 16, None, &StreamRoot::new(3, "clt")).unwrap();
        assert!(c.degenerate);
        assert!(c.ks.is_none());
    }

    #[test]
    fn ar_spectral_oracle() {
        let m = LinearAr::new(&LinearArSpec {
            rho: 0.5,
            innovation: RealLaw::Normal { mean: 0.0, sd: 1.0 },
            burn_in: 1000,
        })
        .unwrap();
        let s = sigma2_spectral(&m, None, 1 << 16, &StreamRoot::new(9, "spec")).unwrap();
        assert!((s.sigma2 - 4.0).abs() < 4.0 * s.se + 0.05, "{s:?}");
        assert!(sigma2_spectral(&m, Some(100), 1000, &StreamRoot::new(9, "spec")).is_err());
    }
}
