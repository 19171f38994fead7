//! Coupled pairs driven by shared innovations, the coupling coefficients
//! `δ(n)` and `δ∞(n)`, and meeting times.

mod exact;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{sample_stationary, RandomIterate};
use crate::rng::{chunked, par_indexed, StreamRoot};
use crate::stats::{binomial_se, ols, Moments, SlopeFit};

pub use exact::{
    exact_pair_tail_discrete, exact_return_tail_discrete, pair_tail_truncation_mass, renewal_sequence, required_cap,
    tv_coupling_bound_check, PairTail, TvCheck,
};

/// How the two chains start.
#[derive(Debug, Clone, PartialEq)]
pub enum Init<S> {
    /// One stationary draw shared by both chains.
    Identical,
    /// Two independent stationary draws.
    IndependentStationary,
    FixedPair(S, S),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledPath<S> {
    /// `W_0..W_n`
    pub states: Vec<S>,
    pub states_star: Vec<S>,
    /// `X_1..X_n`
    pub x: Vec<f64>,
    pub x_star: Vec<f64>,
    pub meeting_index: Option<usize>,
    /// True when a stationary start came from burn-in.
    pub burn_in_used: bool,
}

/// Runs both chains on the given innovation sequence.
pub fn simulate_coupled_with<M: RandomIterate>(
    model: &M,
    w0: M::State,
    w0_star: M::State,
    innovations: &[M::Innovation],
) -> CoupledPath<M::State> {
    let n = innovations.len();
    let mut states = Vec::with_capacity(n + 1);
    let mut states_star = Vec::with_capacity(n + 1);
    let mut x = Vec::with_capacity(n);
    let mut x_star = Vec::with_capacity(n);
    let mut meeting_index = (w0 == w0_star).then_some(0);
    states.push(w0);
    states_star.push(w0_star);
    for (k, e) in innovations.iter().enumerate() {
        let (w, ws) = (&states[k], &states_star[k]);
        x.push(model.observable(e, w));
        x_star.push(model.observable(e, ws));
        let nw = model.step(e, w);
        let nws = model.step(e, ws);
        if meeting_index.is_none() && nw == nws {
            meeting_index = Some(k + 1);
        }
        states.push(nw);
        states_star.push(nws);
    }
    CoupledPath {
        states,
        states_star,
        x,
        x_star,
        meeting_index,
        burn_in_used: false,
    }
}

/// Simulates a coupled pair of length `n` from one stream.
pub fn simulate_coupled<M: RandomIterate, R: Rng + ?Sized>(
    model: &M,
    n: usize,
    init: &Init<M::State>,
    rng: &mut R,
) -> Result<CoupledPath<M::State>> {
    if n == 0 {
        return Err(Error::invalid("n", "path length must be >= 1"));
    }
    let (w0, w0s, burn) = match init {
        Init::Identical => {
            let (w, b) = sample_stationary(model, rng);
            (w.clone(), w, b)
        }
        Init::IndependentStationary => {
            let (w, b) = sample_stationary(model, rng);
            let (ws, _) = sample_stationary(model, rng);
            (w, ws, b)
        }
        Init::FixedPair(a, b) => (a.clone(), b.clone(), false),
    };
    let eps: Vec<M::Innovation> = (0..n).map(|_| model.draw_innovation(rng)).collect();
    let mut path = simulate_coupled_with(model, w0, w0s, &eps);
    path.burn_in_used = burn;
    Ok(path)
}

/// Per-k Monte Carlo table of `E|X_k - X*_k|^q` over independent stationary
/// starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseTable {
    pub q: f64,
    /// `k = 1..=k_max`
    pub k: Vec<usize>,
    pub value: Vec<f64>,
    pub se: Vec<f64>,
    pub count: Vec<u64>,
    pub mean_abs_x: f64,
    pub mean_abs_x_se: f64,
    pub burn_in_used: bool,
}

pub fn estimate_pairwise_l1<M: RandomIterate>(model: &M, k_max: usize, n_paths: usize, root: &StreamRoot) -> Result<PairwiseTable> {
    estimate_pairwise_moment(model, k_max, 1.0, n_paths, root)
}

pub fn estimate_pairwise_moment<M: RandomIterate>(
    model: &M,
    k_max: usize,
    q: f64,
    n_paths: usize,
    root: &StreamRoot,
) -> Result<PairwiseTable> {
    if k_max == 0 || n_paths < 2 {
        return Err(Error::invalid("k_max", "k_max >= 1 and n_paths >= 2 required"));
    }
    if !(q > 0.0) {
        return Err(Error::invalid("q", "q must be > 0"));
    }
    let parts = chunked(n_paths, |range| {
        let mut per_k = vec![Moments::default(); k_max];
        let mut abs_x = Moments::default();
        let mut burn = false;
        for i in range {
            let mut rng = root.stream(i as u64);
            let (mut w, b) = sample_stationary(model, &mut rng);
            let (mut ws, _) = sample_stationary(model, &mut rng);
            burn |= b;
            let mut met = w == ws;
            for (k, slot) in per_k.iter_mut().enumerate() {
                let e = model.draw_innovation(&mut rng);
                let x = model.observable(&e, &w);
                if k == 0 {
                    abs_x.push(x.abs());
                }
                if met {
                    slot.push(0.0);
                    continue;
                }
                let xs = model.observable(&e, &ws);
                slot.push((x - xs).abs().powf(q));
                w = model.step(&e, &w);
                ws = model.step(&e, &ws);
                met = w == ws;
            }
        }
        (per_k, abs_x, burn)
    });
    let mut per_k = vec![Moments::default(); k_max];
    let mut abs_x = Moments::default();
    let mut burn = false;
    for (pk, ax, b) in &parts {
        per_k.iter_mut().zip(pk).for_each(|(a, b)| a.merge(b));
        abs_x.merge(ax);
        burn |= b;
    }
    Ok(PairwiseTable {
        q,
        k: (1..=k_max).collect(),
        value: per_k.iter().map(|m| m.mean()).collect(),
        se: per_k.iter().map(|m| m.se()).collect(),
        count: per_k.iter().map(|m| m.count()).collect(),
        mean_abs_x: abs_x.mean(),
        mean_abs_x_se: abs_x.se(),
        burn_in_used: burn,
    })
}

/// Monte Carlo table of `E d(W_n, W*_n)`, `n = 0..=n_max`, over independent
/// stationary starts.
pub fn estimate_pairwise_distance<M: RandomIterate>(
    model: &M,
    n_max: usize,
    n_paths: usize,
    root: &StreamRoot,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let probe = model.burn_in_start();
    if model.distance(&probe, &probe).is_none() {
        return Err(Error::Unsupported("state distance".into()));
    }
    let parts = chunked(n_paths, |range| {
        let mut per_n = vec![Moments::default(); n_max + 1];
        for i in range {
            let mut rng = root.stream(i as u64);
            let (mut w, _) = sample_stationary(model, &mut rng);
            let (mut ws, _) = sample_stationary(model, &mut rng);
            for (n, slot) in per_n.iter_mut().enumerate() {
                slot.push(model.distance(&w, &ws).unwrap_or(0.0));
                if n < n_max {
                    let e = model.draw_innovation(&mut rng);
                    w = model.step(&e, &w);
                    ws = model.step(&e, &ws);
                }
            }
        }
        per_n
    });
    let mut per_n = vec![Moments::default(); n_max + 1];
    for p in &parts {
        per_n.iter_mut().zip(p).for_each(|(a, b)| a.merge(b));
    }
    Ok((per_n.iter().map(|m| m.mean()).collect(), per_n.iter().map(|m| m.se()).collect()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaFlavor {
    L1,
    Linf,
}

/// Tabulated coupling coefficient on `n = 0, 1, ...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaTable {
    pub flavor: DeltaFlavor,
    pub n: Vec<usize>,
    pub value: Vec<f64>,
    pub se: Vec<f64>,
    pub count: Vec<u64>,
    pub envelope_applied: bool,
    pub mean_abs_x: f64,
    /// Number of initial pairs behind a `Linf` estimate (a lower bound on the
    /// essential supremum).
    pub design_size: Option<usize>,
}

impl DeltaTable {
    /// Builds an `L1` table from explicit values on `n = 0..len`.
    pub fn from_values(values: Vec<f64>) -> Self {
        let len = values.len();
        Self {
            flavor: DeltaFlavor::L1,
            n: (0..len).collect(),
            se: vec![0.0; len],
            count: vec![0; len],
            mean_abs_x: values.first().copied().unwrap_or(0.0),
            value: values,
            envelope_applied: true,
            design_size: None,
        }
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }
}

/// `δ(0) = δ(1) = E|X_1|` and `δ(n) = ½ sup_{k ≥ n-1} ‖X_k - X*_k‖_1` for
/// `2 ≤ n ≤ k_max + 1`, where `values[k-1]` holds `‖X_k - X*_k‖_1`.
///
/// Values are capped at `E|X_1|` so the output is non-increasing even when
/// Monte Carlo noise pushes a pairwise mean above it.
pub fn delta_envelope(values: &[f64], ses: &[f64], mean_abs_x: f64) -> DeltaTable {
    let k_max = values.len();
    let mut value = vec![0.0; k_max + 2];
    let mut se = vec![0.0; k_max + 2];
    let mut run = 0.0f64;
    let mut run_se = 0.0;
    for k in (1..=k_max).rev() {
        if values[k - 1] >= run {
            run = values[k - 1];
            run_se = ses.get(k - 1).copied().unwrap_or(0.0);
        }
        // n = k + 1 sees the suffix starting at k
        value[k + 1] = (0.5 * run).min(mean_abs_x);
        se[k + 1] = 0.5 * run_se;
    }
    value[0] = mean_abs_x;
    value[1] = mean_abs_x;
    DeltaTable {
        flavor: DeltaFlavor::L1,
        n: (0..k_max + 2).collect(),
        value,
        se,
        count: vec![0; k_max + 2],
        envelope_applied: true,
        mean_abs_x,
        design_size: None,
    }
}

impl PairwiseTable {
    pub fn envelope(&self) -> DeltaTable {
        let mut t = delta_envelope(&self.value, &self.se, self.mean_abs_x);
        t.se[0] = self.mean_abs_x_se;
        t.se[1] = self.mean_abs_x_se;
        let c = self.count.first().copied().unwrap_or(0);
        t.count = vec![c; t.value.len()];
        t
    }
}

/// `max` over design pairs of the inner Monte Carlo estimate of
/// `E(|X_n - X*_n| | W_0, W*_0)`, for every `n` in `n_grid`.
///
/// The reported se combines the Monte Carlo error with a rounding floor
/// `4 n ε_mach max|X_n|`: n floating-point steps can bias every difference
/// by that much, and averaging does not remove it.
///
/// Pass `None` to use the model's default design.
pub fn estimate_delta_inf<M: RandomIterate>(
    model: &M,
    n_grid: &[usize],
    design: Option<Vec<(M::State, M::State)>>,
    inner_reps: usize,
    root: &StreamRoot,
) -> Result<DeltaTable> {
    if n_grid.is_empty() || n_grid.contains(&0) {
        return Err(Error::invalid("n_grid", "grid must be nonempty with n >= 1"));
    }
    if inner_reps < 2 {
        return Err(Error::invalid("inner_reps", "inner_reps must be >= 2"));
    }
    let design = match design {
        Some(d) => d,
        None => model.design_pairs(&mut root.child("design", 0).stream(0)),
    };
    if design.is_empty() {
        return Err(Error::invalid("design", "empty design"));
    }
    let n_max = *n_grid.iter().max().unwrap();
    let per_pair: Vec<Vec<(Moments, f64)>> = par_indexed(design.len(), |i| {
        let sub = root.child("pair", i as u64);
        let (x0, y0) = &design[i];
        let mut acc = vec![(Moments::default(), 0.0f64); n_grid.len()];
        for r in 0..inner_reps {
            let mut rng = sub.stream(r as u64);
            let (mut w, mut ws) = (x0.clone(), y0.clone());
            let mut diffs = vec![(0.0, 0.0); n_max + 1];
            for d in diffs.iter_mut().skip(1) {
                let e = model.draw_innovation(&mut rng);
                if w != ws {
                    let (x, xs) = (model.observable(&e, &w), model.observable(&e, &ws));
                    *d = ((x - xs).abs(), x.abs().max(xs.abs()));
                    w = model.step(&e, &w);
                    ws = model.step(&e, &ws);
                }
            }
            for ((m, scale), &n) in acc.iter_mut().zip(n_grid) {
                m.push(diffs[n].0);
                *scale = scale.max(diffs[n].1);
            }
        }
        acc
    });
    let mut value = vec![0.0; n_grid.len()];
    let mut se = vec![0.0; n_grid.len()];
    for acc in &per_pair {
        for (j, (m, scale)) in acc.iter().enumerate() {
            if m.mean() > value[j] {
                value[j] = m.mean();
                let floor = 4.0 * n_grid[j] as f64 * f64::EPSILON * scale;
                se[j] = m.se().hypot(floor);
            }
        }
    }
    let mut abs_x = Moments::default();
    let mut rng = root.child("mean", 0).stream(0);
    for _ in 0..inner_reps.max(1000) {
        let (w, _) = sample_stationary(model, &mut rng);
        let e = model.draw_innovation(&mut rng);
        abs_x.push(model.observable(&e, &w).abs());
    }
    Ok(DeltaTable {
        flavor: DeltaFlavor::Linf,
        n: n_grid.to_vec(),
        value,
        se,
        count: vec![inner_reps as u64; n_grid.len()],
        envelope_applied: false,
        mean_abs_x: abs_x.mean(),
        design_size: Some(design.len()),
    })
}

/// Monte Carlo survival function of the meeting time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalTable {
    /// `n = 0..=cap`
    pub n: Vec<usize>,
    pub survival: Vec<f64>,
    pub se: Vec<f64>,
    /// Paths with `T* ≥ n`.
    pub count: Vec<u64>,
    pub paths: u64,
    pub cap: usize,
    /// Paths that had not met by `cap`; `P(T* > cap)` lies in
    /// `[censored / paths, 1]` only as far as the table can tell.
    pub censored: u64,
    pub burn_in_used: bool,
}

/// Meeting times of independent stationary pairs, censored at `cap`.
pub fn sample_meeting_times<M: RandomIterate>(model: &M, cap: usize, n_paths: usize, root: &StreamRoot) -> Result<SurvivalTable> {
    if !model.can_meet() {
        return Err(Error::Unsupported(format!("meeting times ({})", model.family().name())));
    }
    if cap == 0 || n_paths == 0 {
        return Err(Error::invalid("cap", "cap and n_paths must be >= 1"));
    }
    // hist[t] counts paths with T* = t; hist[cap + 1] collects censored paths
    let parts = chunked(n_paths, |range| {
        let mut hist = vec![0u64; cap + 2];
        let mut burn = false;
        for i in range {
            let mut rng = root.stream(i as u64);
            let (mut w, b) = sample_stationary(model, &mut rng);
            let (mut ws, _) = sample_stationary(model, &mut rng);
            burn |= b;
            let mut t = 0;
            while w != ws && t <= cap {
                let e = model.draw_innovation(&mut rng);
                w = model.step(&e, &w);
                ws = model.step(&e, &ws);
                t += 1;
            }
            hist[t.min(cap + 1)] += 1;
        }
        (hist, burn)
    });
    let mut hist = vec![0u64; cap + 2];
    let mut burn = false;
    for (h, b) in &parts {
        hist.iter_mut().zip(h).for_each(|(a, b)| *a += b);
        burn |= b;
    }
    let paths = n_paths as u64;
    let mut count = vec![0u64; cap + 1];
    let mut at_least = paths;
    for n in 0..=cap {
        count[n] = at_least;
        at_least -= hist[n];
    }
    let survival: Vec<f64> = count.iter().map(|&c| c as f64 / paths as f64).collect();
    let se = survival.iter().map(|&p| binomial_se(p, paths)).collect();
    Ok(SurvivalTable {
        n: (0..=cap).collect(),
        survival,
        se,
        count,
        paths,
        cap,
        censored: hist[cap + 1],
        burn_in_used: burn,
    })
}

/// Least-squares slope of `log P(T* ≥ n)` on `log n` over grid points in
/// `[n_lo, n_hi]` that keep at least `min_count` surviving paths.
pub fn fit_tail_slope(table: &SurvivalTable, n_lo: usize, n_hi: usize, min_count: u64) -> Result<SlopeFit> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut first_bad = None;
    for (i, &n) in table.n.iter().enumerate() {
        if n < n_lo.max(1) || n > n_hi {
            continue;
        }
        if table.count[i] >= min_count && table.survival[i] > 0.0 {
            xs.push((n as f64).ln());
            ys.push(table.survival[i].ln());
        } else if first_bad.is_none() {
            first_bad = Some(n);
        }
    }
    if xs.len() < 4 {
        let at = first_bad.map_or_else(|| "window lies outside the table".to_string(), |n| format!("first unusable grid point n = {n}"));
        return Err(Error::InsufficientData(format!(
            "only {} grid points with >= {min_count} survivors in [{n_lo}, {n_hi}]; {at}",
            xs.len()
        )));
    }
    ols(&xs, &ys)
}

/// 99th percentile of the meeting time times 50; a burn-in length that
/// makes the distance to stationarity negligible.
pub fn suggest_burn_in(table: &SurvivalTable) -> usize {
    let q = table
        .n
        .iter()
        .zip(&table.survival)
        .find(|(_, &s)| s <= 0.01)
        .map_or(table.cap, |(&n, _)| n);
    50 * q.max(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{DiscreteObservable, DiscreteRenewal, DiscreteRenewalSpec, Iid, IidSpec, RealLaw};

    fn half_half() -> DiscreteRenewal {
        DiscreteRenewal::new(&DiscreteRenewalSpec::explicit(vec![0.5, 0.5], DiscreteObservable::IndicatorZero)).unwrap()
    }

    #[test]
    fn hand_trace_meets_at_three() {
        let m = half_half();
        let p = simulate_coupled_with(&m, 2, 5, &[1, 2, 3, 1]);
        assert_eq!(&p.states[..4], &[2, 1, 0, 2]);
        assert_eq!(&p.states_star[..4], &[5, 4, 3, 2]);
        assert_eq!(p.meeting_index, Some(3));
    }

    #[test]
    fn identical_init_meets_at_zero() {
        let m = half_half();
        let mut rng = StreamRoot::new(1, "t").stream(0);
        let p = simulate_coupled(&m, 20, &Init::Identical, &mut rng).unwrap();
        assert_eq!(p.meeting_index, Some(0));
        assert_eq!(p.states, p.states_star);
    }

    #[test]
    fn state_free_observable_has_no_pairwise_gap() {
        let m = Iid::new(&IidSpec {
            law: RealLaw::Normal { mean: 0.0, sd: 1.0 },
        })
        .unwrap();
        let t = estimate_pairwise_l1(&m, 5, 100, &StreamRoot::new(1, "t")).unwrap();
        assert!(t.value.iter().all(|&v| v == 0.0));
        let d = estimate_delta_inf(&m, &[1, 2, 3], None, 10, &StreamRoot::new(1, "t")).unwrap();
        assert!(d.value.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn envelope_example() {
        let t = delta_envelope(&[4.0, 2.0, 1.0], &[0.0; 3], 5.0);
        assert_eq!(t.value, vec![5.0, 5.0, 2.0, 1.0, 0.5]);
        let z = delta_envelope(&[0.0; 4], &[0.0; 4], 1.0);
        assert!(z.value[2..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn synthetic_power_tail_slope_is_exact() {
        let cap = 300;
        let a = 1.7;
        let survival: Vec<f64> = (0..=cap).map(|n| if n == 0 { 1.0 } else { (n as f64).powf(-a) }).collect();
        let table = SurvivalTable {
            n: (0..=cap).collect(),
            se: vec![0.0; cap + 1],
            count: vec![1000; cap + 1],
            survival,
            paths: 1000,
            cap,
            censored: 0,
            burn_in_used: false,
        };
        let fit = fit_tail_slope(&table, 8, 256, 20).unwrap();
        assert!((fit.slope + a).abs() < 1e-12);
    }

    #[test]
    fn slope_fit_names_first_unusable_point() {
        let table = SurvivalTable {
            n: (0..=10).collect(),
            survival: vec![1.0; 11],
            se: vec![0.0; 11],
            count: vec![100, 100, 50, 10, 5, 1, 0, 0, 0, 0, 0],
            paths: 100,
            cap: 10,
            censored: 0,
            burn_in_used: false,
        };
        let e = fit_tail_slope(&table, 1, 10, 20).unwrap_err().to_string();
        assert!(e.contains("n = 3"), "{e}");
    }
}
