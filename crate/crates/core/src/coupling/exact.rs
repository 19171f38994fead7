//! Exact dynamic programs for the discrete renewal chain.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::DiscreteRenewal;

const TRUNCATION_BUDGET: f64 = 1e-10;

/// Renewal sequence `u(t) = P_0(W_t = 0)`, `t = 0..len`.
pub fn renewal_sequence(model: &DiscreteRenewal, len: usize) -> Vec<f64> {
    let mut u = vec![0.0; len];
    if len == 0 {
        return u;
    }
    u[0] = 1.0;
    for t in 1..len {
        u[t] = (1..=t.min(model.support())).map(|k| model.mass(k) * u[t - k]).sum();
    }
    u
}

/// Exact `P(T* ≥ n)` under `ν ⊗ ν`, `n = 0..=n_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairTail {
    pub n: Vec<usize>,
    pub survival: Vec<f64>,
    pub state_cap: usize,
    /// Upper bound on the probability mass ignored by the cap.
    pub truncation_mass: f64,
}

/// Bound on the mass that can reach a zero time above `cap` while still
/// able to meet before `n_max`: a start above the cap, or a jump from some
/// `s ≤ n_max - 2` longer than `cap - s`.
pub fn pair_tail_truncation_mass(model: &DiscreteRenewal, n_max: usize, cap: usize) -> f64 {
    let jump = model.tail((cap + 2).saturating_sub(n_max));
    2.0 * model.nu_tail(cap + 1) + 2.0 * n_max as f64 * jump
}

/// Smallest state cap whose truncation mass fits the budget.
pub fn required_cap(model: &DiscreteRenewal, n_max: usize) -> usize {
    let mut hi = n_max.max(1);
    while pair_tail_truncation_mass(model, n_max, hi) > TRUNCATION_BUDGET {
        hi *= 2;
    }
    let mut lo = hi / 2;
    while lo + 1 < hi {
        let mid = (lo + hi) / 2;
        if pair_tail_truncation_mass(model, n_max, mid) > TRUNCATION_BUDGET {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Meeting-time tail of the shared-innovation coupling from `ν ⊗ ν`.
///
/// The pair is tracked through its next zero times. `m[b][s]` is the mass of
/// "one chain is at 0 at time `s`, the other next hits 0 at time `b > s`,
/// not yet met". A jump `ε` from 0 at `s` meets the other chain at `s + 1`
/// when `ε = b - s`, moves the event to `(s + ε, b)` when shorter and to
/// `(b, s + ε)` when longer. Zero times at or beyond `N = n_max` are handled
/// in closed form: the other chain's zero `B` stays fixed while the lower
/// chain renews, which gives
/// `meet(s + 1) = Σ_{s0 ≤ s} u(s - s0) G(s0, s)`,
/// `G(s0, s) = Σ_{B ≥ N} M(s0, B) p_{B - s}`.
pub fn exact_pair_tail_discrete(model: &DiscreteRenewal, n_max: usize, state_cap: usize) -> Result<PairTail> {
    if n_max == 0 {
        return Err(Error::invalid("n_max", "n_max must be >= 1"));
    }
    let mass = pair_tail_truncation_mass(model, n_max, state_cap);
    if mass > TRUNCATION_BUDGET {
        return Err(Error::TruncationBudget {
            mass,
            budget: TRUNCATION_BUDGET,
            required_cap: required_cap(model, n_max),
        });
    }
    let big_n = n_max;
    let cap = state_cap.max(big_n).min(model.support() + big_n);
    let p = |k: usize| model.mass(k);
    let nu = |j: usize| model.nu(j);

    let mut meet = vec![0.0; big_n + 1];
    let mut m = vec![0.0; big_n * big_n];
    for s in 0..big_n {
        for b in s + 1..big_n {
            m[b * big_n + s] = 2.0 * nu(s) * nu(b);
        }
    }
    for s in 0..big_n {
        for b in s + 1..big_n {
            let w = m[b * big_n + s];
            if w == 0.0 {
                continue;
            }
            let gap = b - s;
            meet[s + 1] += w * p(gap);
            for e in 1..gap {
                m[b * big_n + s + e] += w * p(e);
            }
            for t in b + 1..big_n {
                m[t * big_n + b] += w * p(t - s);
            }
        }
    }

    // V(s) = Σ_{B=N}^{cap} ν_B p_{B-s}
    let v: Vec<f64> = (0..big_n)
        .map(|s| (big_n..=cap).map(|bb| nu(bb) * p(bb - s)).sum())
        .collect();
    // C(x, y) = Σ_{B=N}^{cap} p_{B-x} p_{B-y}, built from its first row and
    // column with C(x, y) = C(x-1, y-1) + p_{N-x} p_{N-y} - p_{cap+1-x} p_{cap+1-y}
    let mut c = vec![0.0; big_n * big_n];
    for y in 0..big_n {
        let direct: f64 = (big_n..=cap).map(|bb| p(bb) * p(bb - y)).sum();
        c[y] = direct;
        c[y * big_n] = direct;
    }
    for x in 1..big_n {
        for y in 1..big_n {
            c[x * big_n + y] =
                c[(x - 1) * big_n + y - 1] + p(big_n - x) * p(big_n - y) - p(cap + 1 - x) * p(cap + 1 - y);
        }
    }
    let u = renewal_sequence(model, big_n);
    for s in 0..big_n.saturating_sub(1) {
        let mut total = 0.0;
        for s0 in 0..=s {
            let mut g = 2.0 * nu(s0) * v[s];
            for sp in 0..s0 {
                g += m[s0 * big_n + sp] * c[sp * big_n + s];
            }
            total += u[s - s0] * g;
        }
        meet[s + 1] += total;
    }

    let p0: f64 = 1.0 - (0..model.support()).map(|j| nu(j) * nu(j)).sum::<f64>();
    let mut survival = vec![1.0; n_max + 1];
    let mut left = p0;
    for n in 1..=n_max {
        survival[n] = left.max(0.0);
        left -= meet[n];
    }
    Ok(PairTail {
        n: (0..=n_max).collect(),
        survival,
        state_cap: cap,
        truncation_mass: mass,
    })
}

/// Exact `P_ν(τ ≥ n)` for the return time `τ = inf{k ≥ 1 : W_k = 0}`,
/// `n = 0..=n_max`. From `ℓ ≥ 1` the return takes `ℓ` steps; from 0 it
/// takes `ε`.
pub fn exact_return_tail_discrete(model: &DiscreteRenewal, n_max: usize) -> Vec<f64> {
    (0..=n_max)
        .map(|n| {
            if n <= 1 {
                1.0
            } else {
                model.nu(0) * model.tail(n - 1) + model.nu_tail(n)
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TvCheck {
    pub n: Vec<usize>,
    pub beta: Vec<f64>,
    pub pair_tail: Vec<f64>,
    /// Grid points where `β(n)` exceeds the meeting-time tail.
    pub violations: Vec<usize>,
}

/// `β(n) = ½ Σ_x ν_x Σ_y |P^n(x, y) - ν_y|` paired with the exact
/// meeting-time tail.
pub fn tv_coupling_bound_check(model: &DiscreteRenewal, n_max: usize, state_cap: usize) -> Result<TvCheck> {
    let tail = exact_pair_tail_discrete(model, n_max, state_cap)?;
    let support = model.support();
    let ycap = state_cap.max(n_max).min(support);
    let u = renewal_sequence(model, n_max + 1);
    // ‖δ_0 P^t - ν‖ for t = 0..=n_max, with r_t(0) = u(t) and
    // r_t(y) = Σ_{s<t} u(s) p_{t-s+y}
    let from_zero: Vec<f64> = (0..=n_max)
        .map(|t| {
            let mut acc = (u[t] - model.nu(0)).abs();
            let mut seen = u[t];
            let mut seen_nu = model.nu(0);
            for y in 1..ycap {
                let r: f64 = (0..t).map(|s| u[s] * model.mass(t - s + y)).sum();
                acc += (r - model.nu(y)).abs();
                seen += r;
                seen_nu += model.nu(y);
            }
            // whatever lies beyond ycap contributes at most its total mass
            acc + (1.0 - seen).max(0.0) + (1.0 - seen_nu).max(0.0)
        })
        .collect();
    let mut beta = vec![0.0; n_max + 1];
    for n in 0..=n_max {
        let mut acc = 0.0;
        for x in 0..support {
            let w = model.nu(x);
            if w == 0.0 {
                continue;
            }
            acc += w * if x >= n {
                2.0 * (1.0 - model.nu(x - n))
            } else {
                from_zero[n - x]
            };
        }
        beta[n] = 0.5 * acc;
    }
    let violations = (0..=n_max)
        .filter(|&n| beta[n] > tail.survival[n] + 1e-12)
        .collect();
    Ok(TvCheck {
        n: (0..=n_max).collect(),
        beta,
        pair_tail: tail.survival,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{DiscreteObservable, DiscreteRenewalSpec};

    fn model(masses: Vec<f64>) -> DiscreteRenewal {
        DiscreteRenewal::new(&DiscreteRenewalSpec::explicit(masses, DiscreteObservable::IndicatorZero)).unwrap()
    }

    /// Forward DP over the full pair state space `(x, y)`.
    fn brute_pair_tail(m: &DiscreteRenewal, n_max: usize) -> Vec<f64> {
        let l = m.support();
        let mut dist = vec![vec![0.0; l]; l];
        for x in 0..l {
            for y in 0..l {
                if x != y {
                    dist[x][y] = m.nu(x) * m.nu(y);
                }
            }
        }
        let mut out = vec![1.0];
        for _ in 1..=n_max {
            out.push(dist.iter().flatten().sum());
            let mut next = vec![vec![0.0; l]; l];
            for x in 0..l {
                for y in 0..l {
                    if dist[x][y] == 0.0 {
                        continue;
                    }
                    for e in 1..=l {
                        let nx = if x == 0 { e - 1 } else { x - 1 };
                        let ny = if y == 0 { e - 1 } else { y - 1 };
                        if nx != ny {
                            next[nx][ny] += dist[x][y] * m.mass(e);
                        }
                    }
                }
            }
            dist = next;
        }
        out
    }

    #[test]
    fn two_point_jump_tail() {
        let m = model(vec![0.5, 0.5]);
        let t = exact_pair_tail_discrete(&m, 50, 100).unwrap();
        assert!((t.survival[1] - 4.0 / 9.0).abs() < 1e-15);
        for n in 1..=50 {
            let want = 4.0 / 9.0 * 0.5f64.powi(n as i32 - 1);
            assert!((t.survival[n] - want).abs() < 1e-15, "n={n}");
        }
    }

    #[test]
    fn degenerate_jump_never_separates() {
        let m = model(vec![1.0]);
        let t = exact_pair_tail_discrete(&m, 10, 10).unwrap();
        assert_eq!(t.survival[0], 1.0);
        assert!(t.survival[1..].iter().all(|&s| s.abs() < 1e-15));
    }

    #[test]
    fn agrees_with_brute_force_when_states_cross_the_split() {
        let masses = vec![0.1, 0.05, 0.2, 0.0, 0.15, 0.1, 0.05, 0.1, 0.05, 0.2];
        let m = model(masses);
        let brute = brute_pair_tail(&m, 30);
        // n_max below the support forces the closed-form large-state branch
        for n_max in [3, 5, 8, 30] {
            let t = exact_pair_tail_discrete(&m, n_max, 64).unwrap();
            for n in 0..=n_max {
                assert!((t.survival[n] - brute[n]).abs() < 1e-13, "n_max={n_max} n={n}");
            }
        }
    }

    #[test]
    fn return_tail_first_principles() {
        let m = model(vec![0.5, 0.5]);
        let t = exact_return_tail_discrete(&m, 4);
        assert_eq!(t[1], 1.0);
        assert!((t[2] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(t[3], 0.0);
    }

    #[test]
    fn truncation_budget_reports_required_cap() {
        let m = DiscreteRenewal::new(&DiscreteRenewalSpec::zeta(3.0, 1_000_000, DiscreteObservable::IndicatorZero)).unwrap();
        match exact_pair_tail_discrete(&m, 100, 1000) {
            Err(Error::TruncationBudget { required_cap, .. }) => {
                assert!(pair_tail_truncation_mass(&m, 100, required_cap) <= TRUNCATION_BUDGET);
                assert!(pair_tail_truncation_mass(&m, 100, required_cap - 1) > TRUNCATION_BUDGET);
            }
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn beta_below_pair_tail() {
        for masses in [vec![0.5, 0.5], vec![0.2, 0.3, 0.1, 0.4], vec![1.0]] {
            let m = model(masses);
            let chk = tv_coupling_bound_check(&m, 50, 100).unwrap();
            assert!(chk.violations.is_empty());
            assert!(chk.beta[0] <= 1.0 + 1e-15);
        }
    }
}
