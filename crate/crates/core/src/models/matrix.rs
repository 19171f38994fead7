use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{default_burn_in, Family, RandomIterate, StationaryMode};
use crate::error::{Error, Result};
use crate::rng::{chunked, StreamRoot};
use crate::stats::Moments;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleEntry {
    /// Row-major matrix.
    pub matrix: Vec<Vec<f64>>,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixWalkSpec {
    pub dim: usize,
    pub ensemble: Vec<EnsembleEntry>,
    pub start_direction: Vec<f64>,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    /// Recorded in reports; not verified.
    #[serde(default)]
    pub assert_proximal: bool,
    /// Recorded in reports; not verified.
    #[serde(default)]
    pub assert_strongly_irreducible: bool,
}

impl MatrixWalkSpec {
    pub fn from_ensemble(ensemble: Vec<(Vec<Vec<f64>>, f64)>, start_direction: Vec<f64>) -> Self {
        Self {
            dim: start_direction.len(),
            ensemble: ensemble
                .into_iter()
                .map(|(matrix, prob)| EnsembleEntry { matrix, prob })
                .collect(),
            start_direction,
            burn_in: default_burn_in(),
            assert_proximal: false,
            assert_strongly_irreducible: false,
        }
    }
}

/// Left random walk `A_n = ε_n ⋯ ε_1` on `GL_d` acting on directions, with
/// the log-norm cocycle as observable.
#[derive(Debug, Clone)]
pub struct MatrixWalk {
    matrices: Vec<DMatrix<f64>>,
    cumulative: Vec<f64>,
    probs: Vec<f64>,
    start: DVector<f64>,
    burn_in: usize,
    flags: (bool, bool),
}

impl MatrixWalk {
    pub fn new(spec: &MatrixWalkSpec) -> Result<Self> {
        let d = spec.dim;
        if d < 2 {
            return Err(Error::invalid("dim", "dim must be >= 2"));
        }
        if spec.ensemble.is_empty() {
            return Err(Error::invalid("ensemble", "ensemble is empty"));
        }
        let mut matrices = Vec::with_capacity(spec.ensemble.len());
        let mut probs = Vec::with_capacity(spec.ensemble.len());
        for (i, entry) in spec.ensemble.iter().enumerate() {
            let field = format!("ensemble[{i}]");
            if entry.matrix.len() != d || entry.matrix.iter().any(|r| r.len() != d) {
                return Err(Error::invalid(&field, format!("matrix must be {d}x{d}")));
            }
            if !(entry.prob >= 0.0) {
                return Err(Error::invalid(&field, "probability must be nonnegative"));
            }
            let m = DMatrix::from_fn(d, d, |r, c| entry.matrix[r][c]);
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(&field, "matrix entries must be finite"));
            }
            let sv = m.singular_values();
            let smax = sv.max();
            let smin = sv.min();
            if m.determinant() == 0.0 || smin <= smax * 1e-14 {
                return Err(Error::invalid(&field, "matrix is singular (nonzero determinant required)"));
            }
            matrices.push(m);
            probs.push(entry.prob);
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("ensemble", format!("probabilities sum to {total}, not 1")));
        }
        let mut acc = 0.0;
        let cumulative = probs
            .iter()
            .map(|p| {
                acc += p / total;
                acc
            })
            .collect();
        if spec.start_direction.len() != d {
            return Err(Error::invalid("start_direction", format!("expected {d} coordinates")));
        }
        let start = DVector::from_vec(spec.start_direction.clone());
        if (start.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("start_direction", "start_direction must have unit norm"));
        }
        if spec.burn_in == 0 {
            return Err(Error::invalid("burn_in", "burn_in must be >= 1"));
        }
        Ok(Self {
            matrices,
            cumulative,
            probs,
            start,
            burn_in: spec.burn_in,
            flags: (spec.assert_proximal, spec.assert_strongly_irreducible),
        })
    }

    pub fn dim(&self) -> usize {
        self.start.len()
    }

    pub fn matrix(&self, i: usize) -> &DMatrix<f64> {
        &self.matrices[i]
    }

    pub fn start_direction(&self) -> &DVector<f64> {
        &self.start
    }

    /// User-asserted (proximal, strongly irreducible) flags.
    pub fn asserted_flags(&self) -> (bool, bool) {
        self.flags
    }

    /// `log(‖g x‖ / ‖x‖)`, rejecting the zero vector.
    pub fn log_norm_increment(&self, g: usize, x: &DVector<f64>) -> Result<f64> {
        let nx = x.norm();
        if nx == 0.0 {
            return Err(Error::ZeroDirection);
        }
        Ok(((&self.matrices[g] * x).norm() / nx).ln())
    }

    fn log_n(&self, g: usize) -> f64 {
        let sv = self.matrices[g].singular_values();
        sv.max().max(1.0 / sv.min()).ln()
    }
}

impl RandomIterate for MatrixWalk {
    type State = DVector<f64>;
    type Innovation = usize;

    fn family(&self) -> Family {
        Family::MatrixWalk
    }

    fn draw_innovation<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.cumulative
            .partition_point(|&c| c <= u)
            .min(self.matrices.len() - 1)
    }

    fn step(&self, g: &usize, x: &DVector<f64>) -> DVector<f64> {
        let y = &self.matrices[*g] * x;
        let n = y.norm();
        y / n
    }

    fn observable(&self, g: &usize, x: &DVector<f64>) -> f64 {
        ((&self.matrices[*g] * x).norm() / x.norm()).ln()
    }

    fn stationary_mode(&self) -> StationaryMode {
        StationaryMode::BurnIn(self.burn_in)
    }

    fn sample_exact<R: Rng + ?Sized>(&self, _rng: &mut R) -> Result<DVector<f64>> {
        Err(Error::ExactSamplerUnavailable("matrix_walk"))
    }

    fn burn_in_start(&self) -> DVector<f64> {
        self.start.clone()
    }

    fn distance(&self, a: &DVector<f64>, b: &DVector<f64>) -> Option<f64> {
        Some((a - b).norm().min((a + b).norm()))
    }

    fn can_meet(&self) -> bool {
        false
    }

    fn design_pairs<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<(DVector<f64>, DVector<f64>)> {
        let d = self.dim();
        let sphere = |rng: &mut R| loop {
            let v = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
            let n = v.norm();
            if n > 1e-12 {
                break v / n;
            }
        };
        (0..256).map(|_| (sphere(rng), sphere(rng))).collect()
    }

    fn describe_state(&self, w: &DVector<f64>) -> String {
        let parts: Vec<String> = w.iter().map(|v| format!("{v}")).collect();
        format!("[{}]", parts.join(" "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LyapunovEstimate {
    pub lambda: f64,
    /// Monte Carlo error combined with [`LyapunovEstimate::rounding_floor`].
    pub se: f64,
    /// Spread of the per-path averages alone.
    pub se_mc: f64,
    /// Bound on the bias from rounding in one renormalised step,
    /// `(d + 2) ε_mach`. Each log-increment carries at most this relative
    /// error, and it does not average out.
    pub rounding_floor: f64,
    pub reps: usize,
    /// Paths aborted because the norm became non-finite.
    pub aborted: usize,
}

/// Mean over paths of `n^{-1} Σ_{k ≤ n} X_{k,x}` from the declared start
/// direction.
pub fn lyapunov_estimate(model: &MatrixWalk, n: usize, reps: usize, root: &StreamRoot) -> Result<LyapunovEstimate> {
    if n == 0 || reps == 0 {
        return Err(Error::invalid("n", "n and reps must be >= 1"));
    }
    let parts = chunked(reps, |range| {
        let mut m = Moments::default();
        let mut aborted = 0usize;
        for i in range {
            let mut rng = root.stream(i as u64);
            let mut x = model.start.clone();
            let mut s = 0.0;
            let mut ok = true;
            for _ in 0..n {
                let g = model.draw_innovation(&mut rng);
                let y = &model.matrices[g] * &x;
                let norm = y.norm();
                if !norm.is_finite() || norm == 0.0 {
                    ok = false;
                    break;
                }
                s += norm.ln();
                x = y / norm;
            }
            if ok {
                m.push(s / n as f64);
            } else {
                aborted += 1;
            }
        }
        (m, aborted)
    });
    let mut total = Moments::default();
    let mut aborted = 0;
    for (m, a) in &parts {
        total.merge(m);
        aborted += a;
    }
    let floor = (model.dim() as f64 + 2.0) * f64::EPSILON;
    Ok(LyapunovEstimate {
        lambda: total.mean(),
        se: total.se().hypot(floor),
        se_mc: total.se(),
        rounding_floor: floor,
        reps: total.count() as usize,
        aborted,
    })
}

/// `E[(log N(g))^p]` with `N(g) = max(‖g‖, ‖g^{-1}‖)`, exact for the finite
/// ensemble.
pub fn log_moment_check(model: &MatrixWalk, p: f64) -> Result<f64> {
    if !(p > 0.0) {
        return Err(Error::invalid("p", "p must be > 0"));
    }
    Ok((0..model.matrices.len())
        .map(|i| model.probs[i] * model.log_n(i).powf(p))
        .sum())
}
