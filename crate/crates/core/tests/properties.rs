use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use randiter::coupling::{delta_envelope, simulate_coupled_with};
use randiter::models::{ar_map, DiscreteObservable, DiscreteRenewal, DiscreteRenewalSpec, RandomIterate};
use randiter::quantile::{delta_inverse, ExtrapolationKind, QuantileTable, TailSeries};

fn masses_strategy() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, 1..8).prop_map(|w| {
        let total: f64 = w.iter().sum();
        let mut m: Vec<f64> = w.iter().map(|x| x / total).collect();
        // renormalise so the masses sum to 1 to within the model's check
        let rest: f64 = m[1..].iter().sum();
        m[0] = 1.0 - rest;
        m
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn coalescence_is_absorbing(masses in masses_strategy(), seed in any::<u64>(), a in 0usize..8, b in 0usize..8) {
        let m = DiscreteRenewal::new(&DiscreteRenewalSpec::explicit(masses, DiscreteObservable::Identity)).unwrap();
        let top = m.support() - 1;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let eps: Vec<_> = (0..60).map(|_| m.draw_innovation(&mut rng)).collect();
        let path = simulate_coupled_with(&m, a.min(top), b.min(top), &eps);
        if let Some(t) = path.meeting_index {
            for k in t..path.states.len() {
                prop_assert_eq!(path.states[k], path.states_star[k]);
            }
            for k in t..path.x.len() {
                prop_assert_eq!(path.x[k], path.x_star[k]);
            }
        }
        let first = (0..path.states.len()).find(|&k| path.states[k] == path.states_star[k]);
        prop_assert_eq!(first, path.meeting_index);
    }

    #[test]
    fn delta_envelope_is_non_increasing(values in prop::collection::vec(0.0f64..5.0, 1..40), mean_abs in 0.0f64..5.0) {
        let ses = vec![0.01; values.len()];
        let d = delta_envelope(&values, &ses, mean_abs);
        prop_assert_eq!(d.value[0], mean_abs);
        prop_assert_eq!(d.value[1], mean_abs);
        for w in d.value.windows(2) {
            prop_assert!(w[1] <= w[0]);
        }
        for (k, v) in values.iter().enumerate() {
            // n = k + 1 dominates half the pairwise mean at lag k, up to the cap
            prop_assert!(d.value[k + 1] >= (0.5 * v).min(mean_abs));
        }
    }

    #[test]
    fn h_of_h_inverse_is_identity(
        values in prop::collection::vec(0.0f64..100.0, 1..30),
        weights in prop::collection::vec(0.01f64..1.0, 30),
        frac in 0.0f64..=1.0,
    ) {
        let q = QuantileTable::from_steps(&values, &weights[..values.len()]).unwrap();
        let y = frac * q.mean();
        let x = q.h_inv(y).unwrap();
        prop_assert!((0.0..=1.0).contains(&x));
        prop_assert!((q.h(x) - y).abs() <= 1e-9 * q.mean().max(1.0), "H(H^-1({})) = {}", y, q.h(x));
    }

    #[test]
    fn delta_inverse_matches_brute_force(
        steps in prop::collection::vec(0.0f64..1.0, 1..50),
        zeros in 1usize..5,
        u in 0.0f64..3.0,
    ) {
        // non-increasing table ending in zeros
        let mut v: Vec<f64> = Vec::new();
        let mut level = 2.5;
        for s in steps {
            level *= s;
            v.push(level);
        }
        v.extend(std::iter::repeat_n(0.0, zeros));
        let d = TailSeries::new(v.clone(), ExtrapolationKind::PowerLaw);
        let brute = v.iter().filter(|&&x| x > u).count() as u64;
        prop_assert_eq!(delta_inverse(u, &d).unwrap(), Some(brute));
    }

    #[test]
    fn ar_map_is_one_lipschitz(s in -1e4f64..1e4, t in -1e4f64..1e4, c in 0.01f64..=1.0, tau in 0.01f64..0.99) {
        let (fs, ft) = (ar_map(s, c, tau).unwrap(), ar_map(t, c, tau).unwrap());
        prop_assert!((fs - ft).abs() <= (s - t).abs() * (1.0 + 1e-12) + 1e-9);
        prop_assert!(fs.abs() <= s.abs() * (1.0 + 1e-12));
    }
}
