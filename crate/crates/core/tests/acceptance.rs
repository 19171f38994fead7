//! End-to-end acceptance checks. Each test prints one line
//! `[criterion N] PASS|FAIL ...` with the measured values and the tolerance.

use std::f64::consts::{FRAC_1_SQRT_2, LN_2};
use std::path::{Path, PathBuf};
use std::process::Command;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use randiter::blocks::{check_tilde_distance, estimate_nu_k, plan_blocks_power};
use randiter::coupling::{
    estimate_delta_inf, estimate_pairwise_l1, exact_pair_tail_discrete, fit_tail_slope, required_cap,
    sample_meeting_times, tv_coupling_bound_check,
};
use randiter::diagnostics::{clt_check, decay_fit, variance_growth, DecayModel};
use randiter::models::*;
use randiter::quantile::{
    eval_series_condition, ConditionInputs, ConditionKind, ConditionParams, ExtrapolationKind, QuantileTable,
    TailSeries, Verdict,
};
use randiter::rng::StreamRoot;

fn verdict_line(n: u32, pass: bool, detail: String) {
    println!("[criterion {n}] {} {detail}", if pass { "PASS" } else { "FAIL" });
}

fn half_half(obs: DiscreteObservable) -> DiscreteRenewal {
    DiscreteRenewal::new(&DiscreteRenewalSpec::explicit(vec![0.5, 0.5], obs)).unwrap()
}

fn sticky(a: f64, observable: StickyObservable) -> StickyBeta {
    StickyBeta::new(&StickyBetaSpec { a, observable }).unwrap()
}

/// `σ² = Σ_{k ∈ Z} Cov_ν(f(W_0), f(W_k))` for a finite chain, by summing
/// lagged covariances from the transition matrix.
fn finite_chain_sigma2(p: &[Vec<f64>], nu: &[f64], f: &[f64], lags: usize) -> f64 {
    let d = nu.len();
    let mean: f64 = (0..d).map(|i| nu[i] * f[i]).sum();
    let g: Vec<f64> = f.iter().map(|x| x - mean).collect();
    // v = P^k g
    let mut v = g.clone();
    let mut total: f64 = (0..d).map(|i| nu[i] * g[i] * g[i]).sum();
    for _ in 0..lags {
        v = (0..d).map(|i| (0..d).map(|j| p[i][j] * v[j]).sum()).collect();
        total += 2.0 * (0..d).map(|i| nu[i] * g[i] * v[i]).sum::<f64>();
    }
    total
}

#[test]
fn criterion_01_sticky_meeting_time_slope() {
    let mut pass = true;
    let mut detail = String::new();
    for a in [1.5, 2.0] {
        let m = sticky(a, StickyObservable::Identity);
        let tab = sample_meeting_times(&m, 256, 2_000_000, &StreamRoot::new(11, "acceptance-1")).unwrap();
        let fit = fit_tail_slope(&tab, 8, 256, 20).unwrap();
        let ok = (fit.slope + a).abs() <= 0.2;
        pass &= ok;
        detail += &format!("a={a}: slope {:.4} (target {:.1} ± 0.2); ", fit.slope, -a);
    }
    verdict_line(1, pass, detail);
    assert!(pass);
}

#[test]
fn criterion_02_discrete_survival_matches_exact() {
    let m = half_half(DiscreteObservable::IndicatorZero);
    let paths = 1_000_000u64;
    let mc = sample_meeting_times(&m, 50, paths as usize, &StreamRoot::new(2, "acceptance-2")).unwrap();
    let exact = exact_pair_tail_discrete(&m, 50, required_cap(&m, 50)).unwrap();
    let mut worst = 0.0f64;
    for n in 0..=50 {
        let p = exact.survival[n];
        let se = (p * (1.0 - p) / paths as f64).sqrt();
        let diff = (mc.survival[n] - p).abs();
        let z = if se > 0.0 {
            diff / se
        } else if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        worst = worst.max(z);
    }
    let pass = worst <= 3.0;
    verdict_line(2, pass, format!("max |MC - exact| / binomial se over n <= 50: {worst:.3} (tolerance 3)"));
    assert!(pass);
}

#[test]
fn criterion_03_tv_distance_below_meeting_tail() {
    let fixtures = [
        ("[1/2,1/2]", half_half(DiscreteObservable::IndicatorZero)),
        (
            "zeta p=3",
            DiscreteRenewal::new(&DiscreteRenewalSpec::zeta(3.0, 400, DiscreteObservable::IndicatorZero)).unwrap(),
        ),
    ];
    let mut pass = true;
    let mut detail = String::new();
    for (name, m) in &fixtures {
        let check = tv_coupling_bound_check(m, 50, required_cap(m, 50)).unwrap();
        pass &= check.violations.is_empty() && check.n.len() == 51;
        detail += &format!("{name}: {} violations over n <= 50; ", check.violations.len());
    }
    verdict_line(3, pass, detail);
    assert!(pass);
}

#[test]
fn criterion_04_meeting_tail_series_diverges() {
    let m = DiscreteRenewal::new(&DiscreteRenewalSpec::zeta(3.0, 1_000_000, DiscreteObservable::IndicatorZero)).unwrap();
    let n_max = 1000;
    let tail = exact_pair_tail_discrete(&m, n_max, required_cap(&m, n_max)).unwrap();
    let survival = TailSeries::new(tail.survival, ExtrapolationKind::PowerLaw);
    let inputs = ConditionInputs {
        survival: Some(&survival),
        ..Default::default()
    };
    let r = eval_series_condition(ConditionKind::C4, &ConditionParams::new(3.0), &inputs).unwrap();
    let slope = r.slope.unwrap();
    let pass = (slope + 1.0).abs() <= 0.15 && r.verdict != Verdict::Convergent;
    verdict_line(4, pass, format!("C4 term slope {slope:.5} (target -1 ± 0.15), verdict {:?}", r.verdict));
    assert!(pass);
}

#[test]
fn criterion_05_long_run_variance_oracle() {
    let p = vec![vec![0.5, 0.5], vec![1.0, 0.0]];
    let nu = [2.0 / 3.0, 1.0 / 3.0];
    let oracle = finite_chain_sigma2(&p, &nu, &[1.0, 0.0], 200);
    assert!((oracle - 2.0 / 27.0).abs() < 1e-12, "oracle {oracle}");
    let m = half_half(DiscreteObservable::CenteredIndicatorZero);
    let g = variance_growth(&m, &[10, 100, 1000], 20_000, &StreamRoot::new(5, "acceptance-5")).unwrap();
    let e1 = (g.sigma2_growth - oracle).abs() / oracle;
    let e2 = (g.spectral.sigma2 - oracle).abs() / oracle;
    let pass = e1 <= 0.1 && e2 <= 0.1;
    verdict_line(
        5,
        pass,
        format!(
            "growth {:.5} ({:.1}%), spectral {:.5} ({:.1}%), oracle 2/27 = {oracle:.5} (tolerance 10%)",
            g.sigma2_growth,
            100.0 * e1,
            g.spectral.sigma2,
            100.0 * e2
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_06_nu_k_converges_to_sigma2() {
    let m = half_half(DiscreteObservable::CenteredIndicatorZero);
    let g = variance_growth(&m, &[10, 100, 1000], 20_000, &StreamRoot::new(5, "acceptance-5")).unwrap();
    let sigma2 = g.sigma2_growth;
    let plan = plan_blocks_power(3.0, 2.0, 0.1, 3, 8).unwrap();
    let nu = estimate_nu_k(&m, &plan, 20_000, 64, &StreamRoot::new(6, "acceptance-6")).unwrap();
    let last = nu.nu.len() - 1;
    let gap = (nu.nu[last] - sigma2).abs();
    let z = nu.agreement_z();
    let z_max = z.iter().cloned().fold(0.0, f64::max);
    let pass = gap <= 0.15 * sigma2 && z_max < 3.0;
    verdict_line(
        6,
        pass,
        format!(
            "nu_8 = {:.5} ± {:.5}, sigma2_hat = {sigma2:.5}, |gap| = {gap:.5} (tolerance {:.5}); max agreement z {z_max:.3} (tolerance 3)",
            nu.nu[last],
            nu.se[last],
            0.15 * sigma2
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_07_windowed_approximation_error() {
    let plan = plan_blocks_power(3.0, 2.0, 0.1, 3, 3).unwrap();
    let disc = half_half(DiscreteObservable::CenteredIndicatorZero);
    let st = sticky(2.0, StickyObservable::CenteredIdentity);
    let mut pass = true;
    let mut detail = String::new();
    for q in [1.0, 2.0] {
        let root = StreamRoot::new(7, "acceptance-7").child("q", q as u64);
        let c = check_tilde_distance(&disc, 3, &plan, q, 10_000, 64, &root.child("discrete", 0)).unwrap();
        pass &= c.holds;
        detail += &format!("discrete q={q}: lhs {:.3e} rhs {:.3e} holds={}; ", c.lhs, c.rhs, c.holds);
        let c = check_tilde_distance(&st, 3, &plan, q, 10_000, 64, &root.child("sticky", 0)).unwrap();
        pass &= c.holds;
        detail += &format!("sticky q={q}: lhs {:.3e} rhs {:.3e} holds={}; ", c.lhs, c.rhs, c.holds);
    }
    verdict_line(7, pass, detail);
    assert!(pass);
}

#[test]
fn criterion_08_contraction_rates() {
    let ar = LinearAr::new(&LinearArSpec {
        rho: 0.5,
        innovation: RealLaw::Normal { mean: 0.0, sd: 1.0 },
        burn_in: 200,
    })
    .unwrap();
    let pw = estimate_pairwise_l1(&ar, 20, 20_000, &StreamRoot::new(8, "acceptance-8")).unwrap();
    let series: Vec<(f64, f64)> = pw.k.iter().zip(&pw.value).map(|(&k, &v)| (k as f64, v)).collect();
    let rate = decay_fit(&series, DecayModel::Exponential).unwrap().slope;
    let rate_ok = (rate - 0.5f64.ln()).abs() <= 0.1 * 0.5f64.ln().abs();
    let mut pass = rate_ok;
    let mut detail = format!("AR rate {rate:.5} vs ln 0.5 = {:.5} (tolerance 10%); ", 0.5f64.ln());

    let fixtures = [
        ("unit weight, alpha=1", IfsWeight::Unit, 1.0),
        ("1+eps weight, alpha=0.5", IfsWeight::OnePlusInnovation, 0.5),
    ];
    let grid: Vec<usize> = (1..=12).collect();
    for (i, (name, weight, alpha)) in fixtures.into_iter().enumerate() {
        let ifs = Ifs::new(&IfsSpec {
            contraction_rho: 0.5,
            kappa: 1.0,
            noise: IfsNoise::Uniform,
            alpha,
            weight,
            burn_in: 200,
        })
        .unwrap();
        let d = estimate_delta_inf(&ifs, &grid, None, 2000, &StreamRoot::new(8, "acceptance-8-ifs").child("f", i as u64))
            .unwrap();
        let mut violations = 0;
        for (j, &n) in d.n.iter().enumerate() {
            let bound = ifs.weight_mean() * ifs.modulus(ifs.kappa() * ifs.rho().powi(n as i32 - 1));
            if d.value[j] > bound + 3.0 * d.se[j] {
                violations += 1;
            }
        }
        pass &= violations == 0;
        detail += &format!("IFS {name}: {violations} bound violations over n = 1..=12; ");
    }
    verdict_line(8, pass, detail);
    assert!(pass);
}

#[test]
fn criterion_09_lyapunov_exponents() {
    let diag = MatrixWalk::new(&MatrixWalkSpec::from_ensemble(
        vec![(vec![vec![2.0, 0.0], vec![0.0, 0.5]], 1.0)],
        vec![FRAC_1_SQRT_2, FRAC_1_SQRT_2],
    ))
    .unwrap();
    let d = lyapunov_estimate(&diag, 10_000, 64, &StreamRoot::new(9, "acceptance-9")).unwrap();
    let th = 0.7f64;
    let rot = MatrixWalk::new(&MatrixWalkSpec::from_ensemble(
        vec![
            (vec![vec![th.cos(), -th.sin()], vec![th.sin(), th.cos()]], 0.5),
            (vec![vec![0.0, -1.0], vec![1.0, 0.0]], 0.5),
        ],
        vec![1.0, 0.0],
    ))
    .unwrap();
    let r = lyapunov_estimate(&rot, 10_000, 64, &StreamRoot::new(9, "acceptance-9")).unwrap();
    let pass = (d.lambda - LN_2).abs() <= 0.02 && r.lambda.abs() <= 3.0 * r.se;
    verdict_line(
        9,
        pass,
        format!(
            "diagonal {:.5} vs log 2 = {LN_2:.5} (tolerance 0.02); rotation {:.3e} with se {:.3e} (tolerance 3 se)",
            d.lambda, r.lambda, r.se
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_10_clt_consequence() {
    let st = sticky(3.0, StickyObservable::CenteredIdentity);
    let c = clt_check(&st, 5000, 2000, None, &StreamRoot::new(10, "acceptance-10")).unwrap();
    let ks = c.ks.unwrap();
    let iid = Iid::new(&IidSpec {
        law: RealLaw::Normal { mean: 0.0, sd: 1.0 },
    })
    .unwrap();
    let meta = StreamRoot::new(10, "acceptance-10-meta");
    let below = (0..100u64)
        .filter(|&r| {
            let c = clt_check(&iid, 1000, 2000, Some(1.0), &meta.child("rep", r)).unwrap();
            c.ks.unwrap() < 0.0363
        })
        .count();
    let pass = ks <= 0.05 && below >= 93;
    verdict_line(
        10,
        pass,
        format!("sticky a=3 KS {ks:.4} (tolerance 0.05); iid control {below}/100 below 0.0363 (need >= 93)"),
    );
    assert!(pass);
}

#[test]
fn criterion_11_c1_c2_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    let mut verdicts_match = 0;
    let fixtures = 20;
    for _ in 0..fixtures {
        let atoms = rng.random_range(3..40);
        let values: Vec<f64> = (0..atoms).map(|_| rng.random_range(0.0..10.0f64).powi(2)).collect();
        let probs: Vec<f64> = (0..atoms).map(|_| rng.random_range(0.05..1.0)).collect();
        let q = QuantileTable::from_steps(&values, &probs).unwrap();
        let len = rng.random_range(30..200);
        let alpha = rng.random_range(1.2..3.5);
        let mut run = q.mean();
        let d: Vec<f64> = (0..len)
            .map(|n| {
                if n >= 2 {
                    let target = q.mean() * (n as f64).powf(-alpha) * rng.random_range(0.8..1.0);
                    run = run.min(target);
                }
                run
            })
            .collect();
        let delta = TailSeries::new(d, ExtrapolationKind::PowerLaw);
        let inputs = ConditionInputs {
            delta: Some(&delta),
            quantile: Some(&q),
            ..Default::default()
        };
        let params = ConditionParams::new(rng.random_range(2.2..4.0)).with_budget(5000);
        let a = eval_series_condition(ConditionKind::C1, &params, &inputs).unwrap();
        let b = eval_series_condition(ConditionKind::C2, &params, &inputs).unwrap();
        for (x, y) in a.partial_sums.iter().zip(&b.partial_sums) {
            assert_eq!(x.n, y.n);
            worst = worst.max((x.value - y.value).abs() / x.value.abs().max(1.0));
        }
        if a.verdict == b.verdict {
            verdicts_match += 1;
        }
    }
    let pass = worst <= 1e-8 && verdicts_match == fixtures;
    verdict_line(
        11,
        pass,
        format!("max relative partial-sum gap {worst:.3e} (tolerance 1e-8); verdicts identical on {verdicts_match}/{fixtures}"),
    );
    assert!(pass);
}

const DETERMINISM_CONFIG: &str = r#"
seed = 12

[model]
family = "discrete_renewal"
p_seq = { kind = "explicit", masses = [0.5, 0.25, 0.25] }
observable = "centered_indicator_zero"

[budgets]
paths = 4000
horizon = 24
cap = 64
fit_window = [4, 64]
reps = 200
n_grid = [10, 50]
clt_n = 300
outer = 400
inner = 32
k_range = [3, 4]
exact_horizon = 200

[conditions]
p = 3.0
r = 4.0
budget = 2000
"#;

fn run_cli(kind: &str, config: &Path, out: &Path, threads: usize) -> Vec<String> {
    let status = Command::new(env!("CARGO_BIN_EXE_randiter"))
        .args([kind, "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(["--threads", &threads.to_string()])
        .output()
        .unwrap();
    assert!(status.status.success(), "{kind}: {}", String::from_utf8_lossy(&status.stderr));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    manifest["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f.as_str().unwrap().to_string())
        .collect()
}

#[test]
fn criterion_12_cli_determinism_across_workers() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path().join("base.toml");
    std::fs::write(&base, DETERMINISM_CONFIG).unwrap();
    // the conditions run reads the delta table of a coupling run
    let seed_out = dir.path().join("seed-coupling");
    run_cli("coupling", &base, &seed_out, 1);
    let with_delta = dir.path().join("with_delta.toml");
    std::fs::write(
        &with_delta,
        format!("{DETERMINISM_CONFIG}\n[inputs]\ndelta = {:?}\n", seed_out.join("delta.csv")),
    )
    .unwrap();

    let kinds = ["simulate", "coupling", "meeting-time", "conditions", "blocks", "variance", "clt", "report"];
    let mut mismatches = Vec::new();
    let mut compared = 0;
    for kind in kinds {
        let config: PathBuf = if kind == "conditions" { with_delta.clone() } else { base.clone() };
        let runs: Vec<(PathBuf, Vec<String>)> = [1, 4, 8]
            .into_iter()
            .map(|t| {
                let out = dir.path().join(format!("{kind}-{t}"));
                let files = run_cli(kind, &config, &out, t);
                (out, files)
            })
            .collect();
        assert!(!runs[0].1.is_empty(), "{kind} wrote no data files");
        for (out, files) in &runs[1..] {
            if files != &runs[0].1 {
                mismatches.push(format!("{kind}: file lists differ"));
                continue;
            }
            for f in files {
                compared += 1;
                if std::fs::read(out.join(f)).unwrap() != std::fs::read(runs[0].0.join(f)).unwrap() {
                    mismatches.push(format!("{kind}/{f}"));
                }
            }
        }
    }
    let pass = mismatches.is_empty();
    verdict_line(
        12,
        pass,
        format!("{compared} data-file comparisons across 1/4/8 workers, mismatches: {mismatches:?}"),
    );
    assert!(pass);
}
