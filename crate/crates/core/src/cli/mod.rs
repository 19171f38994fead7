//! Config-driven experiment runner.
//!
//! Every experiment draws its randomness from `StreamRoot::new(seed, name)`
//! and derived child streams, and all reductions run in a fixed order, so a
//! given config and seed produce byte-identical data files whatever the
//! worker count.

mod config;
mod emit;

use std::path::PathBuf;
use std::time::Instant;

use serde_json::json;

use crate::blocks::{
    check_tilde_distance, estimate_nu_k, eval_block_conditions, plan_blocks_power, plan_blocks_quantile, BlockTables,
};
use crate::coupling::{
    estimate_delta_inf, estimate_pairwise_l1, exact_pair_tail_discrete, fit_tail_slope, required_cap,
    sample_meeting_times, suggest_burn_in, DeltaTable, SurvivalTable,
};
use crate::diagnostics::{clt_check, variance_growth};
use crate::error::{Error, Result};
use crate::models::{lyapunov_estimate, sample_observable, sample_stationary, AnyModel, DiscreteRenewal, RandomIterate};
use crate::quantile::{
    build_quantile, eval_series_condition, gamma_tables, ConditionInputs, ConditionKind, ConditionParams, Modulus,
    QuantileTable, TailSeries, Verdict,
};
use crate::rng::{par_indexed, StreamRoot};
use crate::with_model;

pub use config::{
    parse_config, parse_config_bytes, read_config_bytes, BlocksSection, Budgets, ConditionsSection, ExperimentConfig,
    ExperimentKind, Format, Inputs, OutputSection, PlanScheme,
};
pub use emit::{emit, fmt_f64, read_series, sha256_hex, write_manifest, LongRow, Manifest, ReportBundle, Table};

pub const ECHO_FILE: &str = "config.echo.toml";

fn verdict_str(v: Verdict) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|v| v.as_str().map(String::from))
        .unwrap_or_default()
}

fn kind_id(k: ConditionKind) -> String {
    format!("{k:?}")
}

fn int<T: ToString>(x: T) -> String {
    x.to_string()
}

/// Runs the experiment named in the config.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ReportBundle> {
    let kind = cfg.kind()?;
    let seed = cfg.seed()?;
    let model = cfg.build_model()?;
    let root = |k: ExperimentKind| StreamRoot::new(seed, k.name());
    let mut b = ReportBundle::default();
    match kind {
        ExperimentKind::Simulate => with_model!(&model, m => simulate(m, cfg, &root(kind), &mut b)),
        ExperimentKind::Coupling => with_model!(&model, m => coupling(m, cfg, &root(kind), &mut b).map(|_| ())),
        ExperimentKind::MeetingTime => meeting_time(&model, cfg, &root(kind), &mut b).map(|_| ()),
        ExperimentKind::Conditions => {
            let delta = match &cfg.inputs.delta {
                Some(path) => Some(read_delta(path)?),
                None => None,
            };
            let survival = match (&cfg.inputs.survival, &model) {
                (Some(path), _) => Some(read_series(path, "survival")?.into_iter().map(|(_, v)| v).collect()),
                (None, AnyModel::DiscreteRenewal(d)) => {
                    Some(exact_survival(d, cfg.budgets.exact_horizon, &mut b)?)
                }
                (None, _) => None,
            };
            conditions(&model, cfg, &root(kind), &mut b, delta, survival)
        }
        ExperimentKind::Blocks => blocks(&model, cfg, &root(kind), &mut b),
        ExperimentKind::Variance => with_model!(&model, m => variance(m, cfg, &root(kind), &mut b).map(|_| ())),
        ExperimentKind::Clt => with_model!(&model, m => clt(m, cfg, &root(kind), &mut b)),
        ExperimentKind::FullReport => full_report(&model, cfg, seed, &mut b),
    }?;
    Ok(b)
}

fn simulate<M: RandomIterate>(m: &M, cfg: &ExperimentConfig, root: &StreamRoot, b: &mut ReportBundle) -> Result<()> {
    let mut rng = root.stream(0);
    let (mut w, burn) = sample_stationary(m, &mut rng);
    let mut t = Table::new("path", &["n", "state", "x"]);
    t.push(vec![int(0), m.describe_state(&w), String::new()]);
    for n in 1..=cfg.budgets.horizon {
        let e = m.draw_innovation(&mut rng);
        let x = m.observable(&e, &w);
        w = m.step(&e, &w);
        t.push(vec![int(n), m.describe_state(&w), fmt_f64(x)]);
    }
    b.tables.push(t);
    if burn {
        b.warnings.push("stationary start drawn by burn-in".into());
    }
    Ok(())
}

fn coupling<M: RandomIterate>(m: &M, cfg: &ExperimentConfig, root: &StreamRoot, b: &mut ReportBundle) -> Result<DeltaTable> {
    let bu = &cfg.budgets;
    let pw = estimate_pairwise_l1(m, bu.horizon, bu.paths, &root.child("pairwise", 0))?;
    let mut t = Table::new("pairwise", &["k", "value", "se", "count"]);
    for i in 0..pw.k.len() {
        t.push(vec![int(pw.k[i]), fmt_f64(pw.value[i]), fmt_f64(pw.se[i]), int(pw.count[i])]);
    }
    b.tables.push(t);
    let delta = pw.envelope();
    let mut t = Table::new("delta", &["n", "value", "se", "count"]);
    for i in 0..delta.len() {
        t.push(vec![int(delta.n[i]), fmt_f64(delta.value[i]), fmt_f64(delta.se[i]), int(delta.count[i])]);
        b.series("delta", delta.n[i] as f64, delta.value[i], delta.se[i]);
    }
    b.tables.push(t);
    let mut report = json!({
        "paths": bu.paths,
        "horizon": bu.horizon,
        "mean_abs_x": pw.mean_abs_x,
        "mean_abs_x_se": pw.mean_abs_x_se,
        "burn_in_used": pw.burn_in_used,
    });
    match estimate_delta_inf(m, &bu.n_grid, None, bu.reps, &root.child("delta_inf", 0)) {
        Ok(d) => {
            let mut t = Table::new("delta_inf", &["n", "value", "se", "count"]);
            for i in 0..d.len() {
                t.push(vec![int(d.n[i]), fmt_f64(d.value[i]), fmt_f64(d.se[i]), int(d.count[i])]);
                b.series("delta_inf", d.n[i] as f64, d.value[i], d.se[i]);
            }
            b.tables.push(t);
            report["delta_inf_design_size"] = json!(d.design_size);
        }
        Err(e) => b.warnings.push(format!("delta_inf skipped: {e}")),
    }
    if pw.burn_in_used {
        b.warnings.push("coupling: stationary starts drawn by burn-in".into());
    }
    b.report("coupling", &report);
    Ok(delta)
}

fn survival_table(s: &SurvivalTable, b: &mut ReportBundle) {
    let mut t = Table::new("survival", &["n", "survival", "se", "count"]);
    for i in 0..s.n.len() {
        t.push(vec![int(s.n[i]), fmt_f64(s.survival[i]), fmt_f64(s.se[i]), int(s.count[i])]);
        b.series("survival", s.n[i] as f64, s.survival[i], s.se[i]);
    }
    b.tables.push(t);
}

/// Monte Carlo meeting times, plus the exact tail for discrete chains.
/// Returns the survival column to feed the meeting-time conditions.
fn meeting_time(model: &AnyModel, cfg: &ExperimentConfig, root: &StreamRoot, b: &mut ReportBundle) -> Result<Vec<f64>> {
    let bu = &cfg.budgets;
    let s = with_model!(model, m => sample_meeting_times(m, bu.cap, bu.paths, &root.child("mc", 0)))?;
    survival_table(&s, b);
    let (lo, hi) = (bu.fit_window[0].min(bu.cap), bu.fit_window[1].min(bu.cap));
    let fit = match fit_tail_slope(&s, lo, hi, bu.min_count) {
        Ok(f) => Some(f),
        Err(e) => {
            b.warnings.push(format!("meeting-time slope fit skipped: {e}"));
            None
        }
    };
    b.report(
        "meeting_time",
        &json!({
            "paths": s.paths,
            "cap": s.cap,
            "censored": s.censored,
            "burn_in_used": s.burn_in_used,
            "suggested_burn_in": suggest_burn_in(&s),
            "fit_window": [lo, hi],
            "tail_fit": fit,
        }),
    );
    if s.censored > 0 {
        b.warnings.push(format!("{} of {} pairs had not met by n = {}", s.censored, s.paths, s.cap));
    }
    if let AnyModel::DiscreteRenewal(d) = model {
        return exact_survival(d, bu.cap, b);
    }
    Ok(s.survival)
}

fn exact_survival(d: &DiscreteRenewal, n_max: usize, b: &mut ReportBundle) -> Result<Vec<f64>> {
    let tail = exact_pair_tail_discrete(d, n_max, required_cap(d, n_max))?;
    let mut t = Table::new("exact_survival", &["n", "survival"]);
    for (n, v) in tail.n.iter().zip(&tail.survival) {
        t.push(vec![int(n), fmt_f64(*v)]);
        b.series("exact_survival", *n as f64, *v, 0.0);
    }
    b.tables.push(t);
    Ok(tail.survival)
}

/// Reads `delta.csv`; rows must cover `n = 0, 1, ...` in order.
fn read_delta(path: &std::path::Path) -> Result<Vec<f64>> {
    let rows = read_series(path, "value")?;
    for (i, (n, _)) in rows.iter().enumerate() {
        if *n != i {
            return Err(Error::Config {
                path: "inputs.delta".into(),
                reason: format!("{} must list n = 0, 1, ... in order (row {} has n = {n})", path.display(), i + 1),
            });
        }
    }
    if rows.is_empty() {
        return Err(Error::InsufficientData(format!("{} has no rows", path.display())));
    }
    Ok(rows.into_iter().map(|(_, v)| v).collect())
}

fn abs_quantile<M: RandomIterate>(m: &M, paths: usize, root: &StreamRoot) -> Result<QuantileTable> {
    let xs = par_indexed(paths, |i| sample_observable(m, &mut root.stream(i as u64)));
    build_quantile(&xs)
}

fn delta_needed() -> Error {
    Error::MissingInput(
        "no delta table: run the coupling experiment first and set inputs.delta to its delta.csv".into(),
    )
}

fn conditions(
    model: &AnyModel,
    cfg: &ExperimentConfig,
    root: &StreamRoot,
    b: &mut ReportBundle,
    delta: Option<Vec<f64>>,
    survival: Option<Vec<f64>>,
) -> Result<()> {
    use ConditionKind::*;
    let c = &cfg.conditions;
    let renewal = match model {
        AnyModel::DiscreteRenewal(d) => Some(d),
        _ => None,
    };
    let modulus = c.modulus.or(match model {
        AnyModel::Ifs(f) => Some(Modulus::Holder { alpha: f.alpha() }),
        _ => None,
    });
    let kinds: Vec<ConditionKind> = if c.kinds.is_empty() {
        if delta.is_none() {
            return Err(delta_needed());
        }
        let available = |k: ConditionKind| match k {
            C1 | C2 | C6 => delta.is_some(),
            C3 | C4 => survival.is_some(),
            C5 | C8 => renewal.is_some(),
            C7 => modulus.is_some(),
            BlockTruncation | BlockVariance => false,
        };
        let picked: Vec<_> = ConditionKind::ALL
            .into_iter()
            .filter(|&k| available(k) && (!k.needs_r() || c.r.is_some()))
            .collect();
        if c.r.is_none() {
            b.warnings.push("conditions.r not set: C5-C8 skipped".into());
        }
        picked
    } else {
        for &k in &c.kinds {
            match k {
                BlockTruncation | BlockVariance => {
                    return Err(Error::Config {
                        path: "conditions.kinds".into(),
                        reason: format!("{k:?} is evaluated by the blocks experiment"),
                    })
                }
                C1 | C2 | C6 if delta.is_none() => return Err(delta_needed()),
                C3 | C4 if survival.is_none() => {
                    return Err(Error::MissingInput(
                        "no survival table: run the meeting-time experiment first and set inputs.survival".into(),
                    ))
                }
                _ => {}
            }
        }
        c.kinds.clone()
    };
    let quantile = if kinds.iter().any(|k| matches!(k, C1 | C2 | C3)) {
        let q = with_model!(model, m => abs_quantile(m, cfg.budgets.paths, &root.child("quantile", 0)))?;
        b.warnings.extend(q.warnings.iter().cloned());
        Some(q)
    } else {
        None
    };
    let delta = delta.map(|v| TailSeries::new(v, c.extrapolation));
    let survival = survival.map(|v| TailSeries::new(v, c.extrapolation));
    let mut params = ConditionParams::new(c.p).with_budget(c.budget);
    params.margin = c.margin;
    if let Some(r) = c.r {
        params = params.with_r(r);
    }
    let inputs = ConditionInputs {
        delta: delta.as_ref(),
        quantile: quantile.as_ref(),
        survival: survival.as_ref(),
        renewal,
        modulus,
    };
    let mut t = Table::new(
        "conditions",
        &["condition", "name", "verdict", "slope", "se", "final_sum", "window_lo", "window_hi"],
    );
    for k in kinds {
        let r = eval_series_condition(k, &params, &inputs)?;
        let id = kind_id(k);
        let opt = |x: Option<f64>| x.map(fmt_f64).unwrap_or_default();
        t.push(vec![
            id.clone(),
            r.name.clone(),
            verdict_str(r.verdict),
            opt(r.slope),
            opt(r.se),
            fmt_f64(r.final_sum()),
            int(r.window[0]),
            int(r.window[1]),
        ]);
        for ps in &r.partial_sums {
            b.series(&format!("partial_{id}"), ps.n as f64, ps.value, 0.0);
        }
        b.verdicts.insert(id.clone(), verdict_str(r.verdict));
        b.report(&format!("condition_{id}"), &r);
    }
    b.tables.push(t);
    Ok(())
}

fn blocks(model: &AnyModel, cfg: &ExperimentConfig, root: &StreamRoot, b: &mut ReportBundle) -> Result<()> {
    let bl = &cfg.blocks;
    let bu = &cfg.budgets;
    let [k_lo, k_hi] = bu.k_range;
    let quantile = with_model!(model, m => abs_quantile(m, bu.paths, &root.child("quantile", 0)))?;
    let plan = match bl.scheme {
        PlanScheme::Power => plan_blocks_power(bl.p, bl.q, bl.epsilon, k_lo, k_hi)?,
        PlanScheme::Quantile => {
            let path = cfg.inputs.delta.as_ref().ok_or_else(delta_needed)?;
            let delta = TailSeries::new(read_delta(path)?, cfg.conditions.extrapolation);
            let g = gamma_tables(&delta, &quantile);
            b.warnings.extend(g.warnings.iter().cloned());
            plan_blocks_quantile(bl.p, &quantile, &g, k_lo, k_hi)?
        }
    };
    if !plan.window_ratio_decreasing {
        b.warnings.push("m_k k 3^(-2k/p) is not decreasing over the k range".into());
    }
    let mut t = Table::new("plan", &["k", "M_k", "m_k", "v_k"]);
    for i in 0..plan.len() {
        let v = plan.v.as_ref().map(|v| fmt_f64(v[i])).unwrap_or_default();
        t.push(vec![int(plan.k[i]), fmt_f64(plan.levels[i]), int(plan.windows[i]), v]);
    }
    b.tables.push(t);

    let nu = with_model!(model, m => estimate_nu_k(m, &plan, bu.outer, bu.inner, &root.child("nu", 0)))?;
    b.warnings.extend(nu.warnings.iter().cloned());
    let mut t = Table::new("nu", &["k", "m_k", "M_k", "nu", "se", "nu_cov", "se_cov"]);
    for i in 0..nu.k.len() {
        t.push(vec![
            int(nu.k[i]),
            int(nu.windows[i]),
            fmt_f64(nu.levels[i]),
            fmt_f64(nu.nu[i]),
            fmt_f64(nu.se[i]),
            fmt_f64(nu.nu_cov[i]),
            fmt_f64(nu.se_cov[i]),
        ]);
        b.series("nu", nu.k[i] as f64, nu.nu[i], nu.se[i]);
        b.series("nu_cov", nu.k[i] as f64, nu.nu_cov[i], nu.se_cov[i]);
    }
    b.tables.push(t);

    let mut t = Table::new("tilde", &["k", "window", "q", "lhs", "lhs_se", "rhs", "rhs_se", "holds"]);
    let mut checks = Vec::new();
    for q in [1u64, 2] {
        let c = with_model!(model, m => check_tilde_distance(
            m, k_lo, &plan, q as f64, bu.outer, bu.inner, &root.child("tilde", q)
        ))?;
        t.push(vec![
            int(c.k),
            int(c.window),
            fmt_f64(c.q),
            fmt_f64(c.lhs),
            fmt_f64(c.lhs_se),
            fmt_f64(c.rhs),
            fmt_f64(c.rhs_se),
            int(c.holds),
        ]);
        b.verdicts.insert(format!("tilde_q{q}"), if c.holds { "HOLDS" } else { "VIOLATED" }.into());
        checks.push(c);
    }
    b.tables.push(t);

    let sigma2 = match cfg.inputs.sigma2 {
        Some(s) => (s, 0.0),
        None => {
            let g = with_model!(model, m => variance_growth(m, &bu.n_grid, bu.reps, &root.child("variance", 0)))?;
            (g.sigma2_growth, g.sigma2_growth_se)
        }
    };
    let tables = BlockTables {
        quantile: Some(&quantile),
        nu: Some(&nu),
        sigma2: Some(sigma2),
    };
    for kind in [ConditionKind::BlockTruncation, ConditionKind::BlockVariance] {
        let r = eval_block_conditions(kind, bl.p, &plan, &tables, cfg.conditions.margin)?;
        let id = kind_id(kind);
        b.verdicts.insert(id.clone(), verdict_str(r.verdict));
        b.report(&format!("condition_{id}"), &r);
    }
    b.report(
        "blocks",
        &json!({
            "plan": plan,
            "nu": nu,
            "agreement_z": nu.agreement_z(),
            "tilde": checks,
            "sigma2": sigma2.0,
            "sigma2_se": sigma2.1,
        }),
    );
    Ok(())
}

fn variance<M: RandomIterate>(m: &M, cfg: &ExperimentConfig, root: &StreamRoot, b: &mut ReportBundle) -> Result<f64> {
    let g = variance_growth(m, &cfg.budgets.n_grid, cfg.budgets.reps, root)?;
    let mut t = Table::new("variance", &["n", "value", "se", "count"]);
    for i in 0..g.n.len() {
        t.push(vec![int(g.n[i]), fmt_f64(g.value[i]), fmt_f64(g.se[i]), int(g.reps)]);
        b.series("variance", g.n[i] as f64, g.value[i], g.se[i]);
    }
    b.tables.push(t);
    let z = g.agreement_z();
    if z > 3.0 {
        b.warnings.push(format!("variance-growth and spectral estimates differ by {z:.2} se"));
    }
    b.report("variance", &json!({ "estimate": g, "agreement_z": z }));
    Ok(g.sigma2_growth)
}

fn clt<M: RandomIterate>(m: &M, cfg: &ExperimentConfig, root: &StreamRoot, b: &mut ReportBundle) -> Result<()> {
    let c = clt_check(m, cfg.budgets.clt_n, cfg.budgets.reps, cfg.inputs.sigma2, root)?;
    let verdict = match c.ks {
        None => "DEGENERATE",
        Some(ks) if ks <= c.critical_1pct => "PASS",
        Some(_) => "FAIL",
    };
    b.verdicts.insert("clt".into(), verdict.into());
    b.report("clt", &c);
    Ok(())
}

/// Soft failures skip a stage of the full report with a warning.
fn soft<T>(b: &mut ReportBundle, stage: &str, r: Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(e @ (Error::Unsupported(_) | Error::InsufficientData(_) | Error::ExactSamplerUnavailable(_))) => {
            b.warnings.push(format!("{stage} skipped: {e}"));
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

fn full_report(model: &AnyModel, cfg: &ExperimentConfig, seed: u64, b: &mut ReportBundle) -> Result<()> {
    let root = |k: ExperimentKind| StreamRoot::new(seed, k.name());
    let delta = with_model!(model, m => coupling(m, cfg, &root(ExperimentKind::Coupling), b))?;
    let can_meet = with_model!(model, m => m.can_meet());
    let mut survival = None;
    if can_meet {
        let r = meeting_time(model, cfg, &root(ExperimentKind::MeetingTime), b);
        survival = soft(b, "meeting-time", r)?;
    }
    if let AnyModel::DiscreteRenewal(d) = model {
        // the longer exact tail replaces the Monte Carlo one for the conditions
        let r = exact_pair_tail_discrete(d, cfg.budgets.exact_horizon, required_cap(d, cfg.budgets.exact_horizon));
        survival = Some(r?.survival);
    }
    let r = conditions(model, cfg, &root(ExperimentKind::Conditions), b, Some(delta.value), survival);
    soft(b, "conditions", r)?;
    let r = with_model!(model, m => variance(m, cfg, &root(ExperimentKind::Variance), b));
    soft(b, "variance", r)?;
    let r = with_model!(model, m => clt(m, cfg, &root(ExperimentKind::Clt), b));
    soft(b, "clt", r)?;
    if let AnyModel::MatrixWalk(w) = model {
        let l = lyapunov_estimate(w, cfg.budgets.lyapunov_n, cfg.budgets.lyapunov_reps, &StreamRoot::new(seed, "lyapunov"))?;
        b.report("lyapunov", &l);
    }
    b.report("summary", &json!({ "verdicts": b.verdicts, "warnings": b.warnings }));
    Ok(())
}

/// Command-line options shared by every subcommand.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct RunArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the output directory in the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Comma-separated output formats.
    #[arg(long, value_delimiter = ',')]
    pub format: Option<Vec<Format>>,
}

fn exit_code(e: &Error) -> i32 {
    if e.is_validation() || matches!(e, Error::MissingInput(_)) {
        2
    } else {
        1
    }
}

/// Parses, runs and emits one experiment. Returns the process exit code:
/// 0 on success, 2 on a validation error, 1 on a runtime error. The manifest
/// is written whenever an output directory is known.
pub fn execute(kind: ExperimentKind, args: &RunArgs) -> i32 {
    let start = Instant::now();
    let mut manifest = Manifest {
        toolkit_version: env!("CARGO_PKG_VERSION").into(),
        experiment: kind.name().into(),
        seed: args.seed,
        config_path: args.config.display().to_string(),
        config_sha256: String::new(),
        threads: rayon::current_num_threads(),
        wall_time_seconds: 0.0,
        status: "ok".into(),
        files: Vec::new(),
        verdicts: Default::default(),
        warnings: Vec::new(),
        errors: Vec::new(),
    };
    let mut out_dir = args.out.clone();
    let mut run = || -> Result<(ExperimentConfig, ReportBundle)> {
        let bytes = read_config_bytes(&args.config)?;
        manifest.config_sha256 = sha256_hex(&bytes);
        let mut cfg = parse_config_bytes(&bytes)?;
        cfg.experiment = Some(kind);
        if let Some(s) = args.seed {
            cfg.seed = Some(s);
        }
        if let Some(f) = &args.format {
            cfg.output.formats = f.clone();
        }
        match &out_dir {
            Some(d) => cfg.output.dir = d.clone(),
            None => out_dir = Some(cfg.output.dir.clone()),
        }
        cfg.validate()?;
        manifest.seed = cfg.seed;
        let bundle = run_experiment(&cfg)?;
        Ok((cfg, bundle))
    };
    let outcome = run();
    let code = match (outcome, &out_dir) {
        (Ok((cfg, bundle)), Some(dir)) => {
            manifest.verdicts = bundle.verdicts.clone();
            manifest.warnings = bundle.warnings.clone();
            let written = emit(&bundle, dir, &cfg.output.formats).and_then(|files| {
                if !bundle.is_empty() {
                    std::fs::write(dir.join(ECHO_FILE), cfg.to_toml()).map_err(|source| Error::Io {
                        path: dir.join(ECHO_FILE).display().to_string(),
                        source,
                    })?;
                }
                Ok(files)
            });
            match written {
                Ok(files) => {
                    manifest.files = files;
                    0
                }
                Err(e) => {
                    manifest.errors.push(e.to_string());
                    1
                }
            }
        }
        (Ok(_), None) => unreachable!("a parsed config always names an output directory"),
        (Err(e), _) => {
            manifest.errors.push(e.to_string());
            exit_code(&e)
        }
    };
    if code != 0 {
        manifest.status = "error".into();
    }
    manifest.wall_time_seconds = start.elapsed().as_secs_f64();
    for e in &manifest.errors {
        eprintln!("error: {e}");
    }
    for w in &manifest.warnings {
        eprintln!("warning: {w}");
    }
    match &out_dir {
        Some(dir) => match write_manifest(&manifest, dir) {
            Ok(path) => {
                println!("{} {}: {} file(s) in {}", kind.name(), manifest.status, manifest.files.len(), dir.display());
                for (k, v) in &manifest.verdicts {
                    println!("  {k}: {v}");
                }
                if code == 0 {
                    println!("manifest: {}", path.display());
                }
                code
            }
            Err(e) => {
                eprintln!("error: {e}");
                1
            }
        },
        None => code,
    }
}
