//! One function per subcommand; each returns its verdict and artifacts.

use std::time::Instant;

use serde_json::{json, Value};
use slowfast::average::{
    asymptotic_a, bohr_limit_drift, measure_ap_diagnostic, time_avg_g1, translation_number_scan,
    ApDiagnosticSettings, AveragedDriftProvider, DriftTable,
};
use slowfast::coeffs::{check_all, CheckSettings, CoefficientBundle};
use slowfast::ergodic::{estimate_evolution_measure, PullbackSettings};
use slowfast::harness::{run_convergence_t1, run_convergence_t2, run_khasminskii_study, EpsResult};
use slowfast::integrate::{simulate_coupled, simulate_frozen, write_path_file, PathSample, SeedRecord};
use slowfast::spaces::{GalerkinSpace, State, TimeGrid};

use crate::config::{RunConfig, Theorem};
use crate::output::{csv_table, Artifacts, Blob, Cell};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Flagged,
}

pub struct Outcome {
    pub verdict: Verdict,
    /// Reasons for a flagged verdict.
    pub flags: Vec<String>,
    pub artifacts: Artifacts,
}

impl Outcome {
    fn new(flags: Vec<String>, artifacts: Artifacts) -> Self {
        let verdict = if flags.is_empty() { Verdict::Pass } else { Verdict::Flagged };
        Outcome { verdict, flags, artifacts }
    }
}

struct Setup {
    slow_space: GalerkinSpace,
    fast_space: GalerkinSpace,
    bundle: CoefficientBundle,
}

fn setup(cfg: &RunConfig) -> Result<Setup, CliError> {
    let (slow_space, fast_space, bundle) = cfg.plan().build().map_err(|e| CliError::core("building the system", e))?;
    Ok(Setup { slow_space, fast_space, bundle })
}

fn path_blob(name: &str, path: &PathSample) -> Result<Blob, CliError> {
    let mut bytes = Vec::new();
    write_path_file(path, &mut bytes).map_err(|e| CliError::core("encoding path file", e))?;
    Ok(Blob { name: name.into(), bytes, deterministic: true })
}

fn norm_rows(path: &PathSample) -> Vec<Vec<Cell>> {
    path.grid
        .times()
        .enumerate()
        .map(|(i, t)| {
            let mut row = vec![Cell::F(t)];
            for side in [&path.slow, &path.fast] {
                if let Some(states) = side {
                    row.push(Cell::F(states[i].norm_h()));
                }
            }
            row
        })
        .collect()
}

fn measure_horizon(cfg: &RunConfig, bundle: &CoefficientBundle) -> f64 {
    cfg.measure.horizon.unwrap_or(40.0 / bundle.profile.gamma)
}

pub fn simulate(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let s = setup(cfg)?;
    let plan = cfg.plan();
    let grid = TimeGrid::new(0.0, plan.horizon, plan.integrator.step).map_err(|e| CliError::core("time grid", e))?;
    let seeds = plan.path_seeds(0);
    let path = match simulate_coupled(&s.bundle, cfg.plan.epsilon, &plan.x0(), &plan.y0(), &grid, &plan.integrator, seeds) {
        Ok(p) => p,
        Err(e) if e.is_path_failure() => {
            let results = json!({ "system": s.bundle.name, "eps": cfg.plan.epsilon, "failure": e.to_string() });
            return Ok(Outcome::new(vec![format!("path failed: {e}")], Artifacts { results, ..Default::default() }));
        }
        Err(e) => return Err(CliError::core("simulate", e)),
    };
    let x_end = path.slow_final().cloned().unwrap_or_else(|| State::zeros(0));
    let y_end = path.fast_final().cloned().unwrap_or_else(|| State::zeros(0));
    let results = json!({
        "system": s.bundle.name,
        "eps": cfg.plan.epsilon,
        "horizon": plan.horizon,
        "step": grid.step,
        "seeds": path.seeds,
        "w1_checksum": path.w1_checksum,
        "x_final": x_end.coeffs,
        "y_final": y_end.coeffs,
        "x_final_norm_h": x_end.norm_h(),
        "y_final_norm_h": y_end.norm_h(),
    });
    let mut art = Artifacts {
        results,
        tables: vec![csv_table("trajectory.csv", &["t", "x_norm_h", "y_norm_h"], &norm_rows(&path), true)],
        ..Default::default()
    };
    if cfg.output.write_paths {
        art.paths.push(path_blob("coupled.bin", &path)?);
    }
    Ok(Outcome::new(vec![], art))
}

pub fn frozen(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let s = setup(cfg)?;
    let plan = cfg.plan();
    let horizon = measure_horizon(cfg, &s.bundle);
    let t = cfg.measure.t;
    let seeds = SeedRecord::new(cfg.seed_base, plan.integrator.noise_levels);
    let path = simulate_frozen(&s.bundle, &plan.x0(), t - horizon, t, &plan.y0(), cfg.measure.step, &plan.integrator, seeds)
        .map_err(|e| CliError::core("simulate_frozen", e))?;
    let y_end = path.fast_final().cloned().unwrap_or_else(|| State::zeros(0));
    let results = json!({
        "system": s.bundle.name,
        "start": t - horizon,
        "end": t,
        "step": path.grid.step,
        "seeds": path.seeds,
        "y_final": y_end.coeffs,
        "y_final_norm_h": y_end.norm_h(),
    });
    let mut art = Artifacts {
        results,
        tables: vec![csv_table("frozen.csv", &["t", "y_norm_h"], &norm_rows(&path), true)],
        ..Default::default()
    };
    if cfg.output.write_paths {
        art.paths.push(path_blob("frozen.bin", &path)?);
    }
    Ok(Outcome::new(vec![], art))
}

pub fn measure(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let s = setup(cfg)?;
    let plan = cfg.plan();
    let settings = PullbackSettings {
        particles: cfg.measure.particles,
        horizon: measure_horizon(cfg, &s.bundle),
        step: cfg.measure.step,
        seed: cfg.seed_base,
        bias_tol: Some(cfg.measure.bias_tol).filter(|b| b.is_finite()),
    };
    let ens = estimate_evolution_measure(&s.bundle, &plan.x0(), cfg.measure.t, &plan.y0(), &settings, &plan.integrator)
        .map_err(|e| CliError::core("estimate_evolution_measure", e))?;
    let (mean, var) = (ens.mean(), ens.variance());
    let rows: Vec<Vec<Cell>> = mean
        .iter()
        .zip(&var)
        .enumerate()
        .map(|(k, (m, v))| vec![Cell::from(k), Cell::F(*m), Cell::F(*v)])
        .collect();
    let results = json!({
        "system": s.bundle.name,
        "t": ens.t_anchor,
        "particles": ens.len(),
        "pullback_horizon": ens.pullback_horizon,
        "step": ens.step,
        "bias_bound": ens.bias_bound,
        "moment_constant": ens.moment_constant,
        "second_moment": ens.second_moment(),
        "mean": mean,
        "variance": var,
    });
    let mut art = Artifacts {
        results,
        tables: vec![csv_table("measure.csv", &["mode", "mean", "variance"], &rows, true)],
        ..Default::default()
    };
    if cfg.output.write_paths {
        let mut bytes = Vec::new();
        ens.write_to(&mut bytes).map_err(|e| CliError::core("encoding ensemble", e))?;
        art.paths.push(Blob { name: "ensemble.bin".into(), bytes, deterministic: true });
    }
    Ok(Outcome::new(vec![], art))
}

pub fn average(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let s = setup(cfg)?;
    let plan = cfg.plan();
    let x0 = plan.x0();
    let av = &cfg.average;
    let provider = AveragedDriftProvider::new(cfg.provider, cfg.integrator).map_err(|e| CliError::core("provider", e))?;
    let table = DriftTable::build(&provider, &s.bundle, &av.anchors, std::slice::from_ref(&x0))
        .map_err(|e| CliError::core("averaged drift", e))?;
    let mut flags = Vec::new();
    let mut results = json!({
        "system": s.bundle.name,
        "provider": provider.mode(),
        "drift": table.rows.iter().map(|r| json!({"t": r.t, "value": r.drift, "stderr": r.stderr})).collect::<Vec<_>>(),
    });
    if s.bundle.ap.is_some() {
        let (limit, report) = bohr_limit_drift(&provider, &s.bundle, &x0, av.window, &av.anchors, av.quad_step)
            .map_err(|e| CliError::core("bohr_limit_drift", e))?;
        let (_, residual) = asymptotic_a(&s.bundle, &s.slow_space, std::slice::from_ref(&x0), av.t_probe)
            .map_err(|e| CliError::core("asymptotic_a", e))?;
        let (_, deviation) = time_avg_g1(&s.bundle, &x0, av.window, &av.anchors, av.quad_step)
            .map_err(|e| CliError::core("time_avg_g1", e))?;
        results["limit_drift"] = json!({
            "value": limit.coeffs,
            "window": report.window_t,
            "tail_estimate": report.tail_estimate,
            "anchors": report.anchors_probed,
        });
        results["a_residual_vstar"] = json!(residual);
        results["g1_mean_square_deviation"] = json!(deviation);
    } else {
        flags.push(format!("{} has no almost-periodic limit data; only F̄(t,x) was computed", s.bundle.name));
    }
    results["cache"] = json!({ "hits": provider.stats().hits, "misses": provider.stats().misses });
    let mut bytes = Vec::new();
    table.write_csv(&mut bytes).map_err(|e| CliError::core("drift table", e))?;
    let art = Artifacts {
        results,
        tables: vec![Blob { name: "drift.csv".into(), bytes, deterministic: true }],
        ..Default::default()
    };
    Ok(Outcome::new(flags, art))
}

fn eps_rows(rows: &[EpsResult], wall: Option<&[f64]>) -> Vec<Vec<Cell>> {
    rows.iter()
        .enumerate()
        .map(|(i, e)| {
            let mut r = vec![Cell::F(e.eps), Cell::F(e.strong_error), Cell::F(e.stderr), Cell::from(e.failed_paths)];
            if let Some(w) = wall {
                r.push(Cell::F(w.get(i).copied().unwrap_or(f64::NAN)));
            }
            r
        })
        .collect()
}

pub fn converge(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let plan = cfg.plan();
    let start = Instant::now();
    let report = match cfg.plan.theorem {
        Theorem::T1 => run_convergence_t1(&plan),
        Theorem::T2 => run_convergence_t2(&plan),
    }
    .map_err(|e| CliError::core("convergence study", e))?;
    let total = start.elapsed().as_secs_f64();
    let mut flags = Vec::new();
    if !report.monotone {
        flags.push("errors do not decrease beyond twice the combined standard error".into());
    }
    if !report.bound_check {
        flags.push("fitted slope below the 1/6 consistency bound".into());
    }
    if report.inconclusive && report.monotone {
        flags.push("some ε levels are invalid or lost noise coupling".into());
    }
    let mut tables = vec![csv_table(
        "convergence.csv",
        &["eps", "error", "stderr", "failures", "wall_time"],
        &eps_rows(&report.eps, Some(&report.wall_times)),
        false,
    )];
    if let Some(inter) = &report.intermediate {
        tables.push(csv_table("intermediate.csv", &["eps", "error", "stderr", "failures"], &eps_rows(inter, None), true));
    }
    let timing = json!({ "total_seconds": total, "per_eps_seconds": report.wall_times });
    let results = serde_json::to_value(&report).unwrap_or(Value::Null);
    Ok(Outcome::new(flags, Artifacts { results, tables, paths: vec![], timing }))
}

pub fn khasminskii(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let plan = cfg.plan();
    let k = &cfg.khasminskii;
    let report = run_khasminskii_study(&plan, k.eps, &k.delta_list).map_err(|e| CliError::core("khasminskii study", e))?;
    let rows: Vec<Vec<Cell>> = report
        .deltas
        .iter()
        .map(|d| vec![Cell::F(d.delta), Cell::F(d.mean), Cell::F(d.stderr)])
        .collect();
    let flags = if report.passed {
        vec![]
    } else {
        vec![format!("log-log slope {:.3} outside the accepted range", report.slope)]
    };
    let art = Artifacts {
        results: serde_json::to_value(&report).unwrap_or(Value::Null),
        tables: vec![csv_table("khasminskii.csv", &["delta", "mean", "stderr"], &rows, true)],
        ..Default::default()
    };
    Ok(Outcome::new(flags, art))
}

/// Midpoints of runs of consecutive accepted translations.
pub fn cluster_centers(taus: &[f64], step: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < taus.len() {
        let mut j = i;
        while j + 1 < taus.len() && taus[j + 1] - taus[j] <= 1.5 * step {
            j += 1;
        }
        out.push(0.5 * (taus[i] + taus[j]));
        i = j + 1;
    }
    out
}

pub fn apcheck(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let s = setup(cfg)?;
    let plan = cfg.plan();
    let a = &cfg.apcheck;
    let n = ((a.probe_end - a.probe_start) / a.probe_step).floor().max(0.0) as usize;
    let probes: Vec<f64> = (0..=n).map(|i| a.probe_start + i as f64 * a.probe_step).collect();
    let phi = s.bundle.fast.phi.clone();
    let f = move |t: f64| vec![phi.value(t)];
    let accepted = translation_number_scan(&f, a.epsilon, (a.tau_min, a.tau_max), a.tau_step, &probes)
        .map_err(|e| CliError::core("translation_number_scan", e))?;
    let centers = cluster_centers(&accepted, a.tau_step);
    let taus: Vec<f64> = match &a.taus {
        Some(t) => t.clone(),
        None => centers.iter().take(a.max_taus).copied().collect(),
    };
    let mut flags = Vec::new();
    let mut results = json!({
        "system": s.bundle.name,
        "scan": { "epsilon": a.epsilon, "accepted": accepted.len(), "cluster_centers": centers },
    });
    let mut tables = vec![csv_table(
        "translations.csv",
        &["tau"],
        &accepted.iter().map(|t| vec![Cell::F(*t)]).collect::<Vec<_>>(),
        true,
    )];
    if taus.is_empty() {
        flags.push("no accepted translation in the scanned range".into());
    } else {
        let settings = ApDiagnosticSettings {
            pullback: PullbackSettings {
                particles: a.particles,
                horizon: a.horizon,
                step: a.step,
                seed: cfg.seed_base,
                bias_tol: None,
            },
            dictionary_size: a.dictionary_size,
            dictionary_seed: cfg.seed_base,
            epsilon: a.measure_epsilon,
        };
        let report = measure_ap_diagnostic(&s.bundle, &plan.x0(), &taus, &a.anchors, &settings, &plan.integrator)
            .map_err(|e| CliError::core("measure_ap_diagnostic", e))?;
        if !report.passed {
            flags.push("measure translations exceed the Monte Carlo threshold".into());
        }
        tables.push(csv_table(
            "ap_distances.csv",
            &["tau", "t", "distance"],
            &report.distances.iter().map(|d| vec![Cell::F(d.tau), Cell::F(d.t), Cell::F(d.distance)]).collect::<Vec<_>>(),
            true,
        ));
        results["measure"] = serde_json::to_value(&report).unwrap_or(Value::Null);
    }
    Ok(Outcome::new(flags, Artifacts { results, tables, ..Default::default() }))
}

pub fn conditions(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let s = setup(cfg)?;
    let settings = CheckSettings::new(cfg.conditions.samples, cfg.conditions.seed);
    let reports = check_all(&s.bundle, &s.slow_space, &s.fast_space, &settings).map_err(|e| CliError::core("condition checks", e))?;
    let flags: Vec<String> = reports
        .iter()
        .filter(|r| !r.passed)
        .map(|r| format!("{} violated in {} of {} samples", r.condition, r.violations, r.samples))
        .collect();
    let rows: Vec<Vec<Cell>> = reports
        .iter()
        .map(|r| {
            vec![
                Cell::from(r.condition.as_str()),
                Cell::from(r.samples),
                Cell::from(r.violations),
                Cell::F(r.max_margin),
                Cell::from(r.passed),
            ]
        })
        .collect();
    let art = Artifacts {
        results: json!({ "system": s.bundle.name, "profile": s.bundle.profile, "checks": reports }),
        tables: vec![csv_table("conditions.csv", &["condition", "samples", "violations", "max_margin", "passed"], &rows, true)],
        ..Default::default()
    };
    Ok(Outcome::new(flags, art))
}
