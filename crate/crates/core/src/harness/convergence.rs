use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::plan::ExperimentPlan;
use crate::average::{affine_limit_drift, AveragedDriftProvider, BohrLimitDrift, ProviderMode};
use crate::coeffs::CoefficientBundle;
use crate::error::{invalid, Error, Result};
use crate::integrate::{
    simulate_averaged_eps, simulate_averaged_limit, simulate_coupled, IntegratorConfig,
    LimitCoefficients, MeanDrift, PathSample,
};
use crate::spaces::{dist2, TimeGrid};
use crate::stats::{linear_fit, mean_stderr};

/// Largest fraction of failed paths for which an ε is still reported as valid.
pub const MAX_FAILED_FRACTION: f64 = 0.05;

/// `sup_i ‖a_i − b_i‖_H^{2p}` over the common grid.
pub fn strong_error(a: &PathSample, b: &PathSample, p: f64) -> Result<f64> {
    if a.grid != b.grid {
        return Err(invalid("paths live on different grids"));
    }
    if !(p >= 1.0) {
        return Err(invalid("moment p must be >= 1"));
    }
    let (sa, sb) = match (&a.slow, &b.slow) {
        (Some(x), Some(y)) if x.len() == y.len() => (x, y),
        _ => return Err(invalid("both paths need slow trajectories of equal length")),
    };
    let sup = sa
        .iter()
        .zip(sb)
        .map(|(u, v)| dist2(&u.coeffs, &v.coeffs))
        .fold(0.0, f64::max);
    Ok(sup.powf(2.0 * p))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsResult {
    pub eps: f64,
    /// Monte Carlo mean of the per-path sup errors, failed paths excluded.
    pub strong_error: f64,
    pub stderr: f64,
    pub failed_paths: usize,
    pub paths_used: usize,
    /// At most 5% of the paths failed.
    pub valid: bool,
    /// The estimate is conditional on survival (some paths failed).
    pub conditional: bool,
    /// Every coupled/averaged pair consumed identical W¹ increments.
    pub coupling_intact: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub slope_stderr: f64,
    pub low_r2: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub theorem: String,
    pub system: String,
    pub moment_p: f64,
    pub paths: usize,
    pub eps: Vec<EpsResult>,
    /// Log-log fit of error against ε.
    pub rate_fit: Option<RateFit>,
    /// Fitted slope at least `1/6` minus its standard error.
    pub bound_check: bool,
    /// Errors decrease along the ε ladder beyond twice the combined standard error.
    pub monotone: bool,
    pub inconclusive: bool,
    /// Averaged-ε versus limit equation (second comparison only).
    pub intermediate: Option<Vec<EpsResult>>,
    /// `E sup‖X̄_h − X̄_{h/2}‖^{2p}` of the limit equation (second comparison only).
    pub h_refinement_delta: Option<f64>,
    #[serde(skip)]
    pub wall_times: Vec<f64>,
}

/// Slope tolerance reference for the bound consistency check.
pub const RATE_LOWER_BOUND: f64 = 1.0 / 6.0;

struct PairOutcome {
    error: f64,
    coupled_ok: bool,
}

fn summarize(eps: f64, outcomes: &[Option<PairOutcome>]) -> EpsResult {
    let ok: Vec<&PairOutcome> = outcomes.iter().flatten().collect();
    let values: Vec<f64> = ok.iter().map(|o| o.error).collect();
    let (mean, se) = mean_stderr(&values);
    let failed = outcomes.len() - ok.len();
    EpsResult {
        eps,
        strong_error: mean,
        stderr: se,
        failed_paths: failed,
        paths_used: ok.len(),
        valid: (failed as f64) <= MAX_FAILED_FRACTION * outcomes.len() as f64 && !ok.is_empty(),
        conditional: failed > 0,
        coupling_intact: ok.iter().all(|o| o.coupled_ok),
    }
}

/// `None` for a counted path failure; other errors abort the study.
fn absorb<T>(r: Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(e) if e.is_path_failure() => Ok(None),
        Err(e) => Err(e),
    }
}

fn pair(a: Result<PathSample>, b: Result<PathSample>, p: f64) -> Result<Option<PairOutcome>> {
    match (absorb(a)?, absorb(b)?) {
        (Some(a), Some(b)) => Ok(Some(PairOutcome {
            error: strong_error(&a, &b, p)?,
            coupled_ok: a.w1_checksum.is_some() && a.w1_checksum == b.w1_checksum,
        })),
        _ => Ok(None),
    }
}

fn finish(
    theorem: &str,
    plan: &ExperimentPlan,
    bundle: &CoefficientBundle,
    eps: Vec<EpsResult>,
    wall_times: Vec<f64>,
) -> ConvergenceReport {
    let usable: Vec<&EpsResult> = eps.iter().filter(|e| e.valid && e.strong_error > 0.0).collect();
    let rate_fit = if usable.len() >= 2 {
        let lx: Vec<f64> = usable.iter().map(|e| e.eps.ln()).collect();
        let ly: Vec<f64> = usable.iter().map(|e| e.strong_error.ln()).collect();
        linear_fit(&lx, &ly).map(|f| RateFit {
            slope: f.slope,
            intercept: f.intercept,
            r2: f.r2,
            slope_stderr: f.slope_stderr,
            low_r2: f.r2 < 0.9,
        })
    } else {
        None
    };
    let bound_check = rate_fit
        .map(|f| f.slope >= RATE_LOWER_BOUND - if f.slope_stderr.is_finite() { f.slope_stderr } else { 0.0 })
        .unwrap_or(false);
    let monotone = eps.len() >= 2
        && eps.windows(2).all(|w| {
            let margin = 2.0 * (w[0].stderr.powi(2) + w[1].stderr.powi(2)).sqrt();
            w[1].strong_error < w[0].strong_error - margin
        });
    let all_valid = eps.iter().all(|e| e.valid && e.coupling_intact);
    ConvergenceReport {
        theorem: theorem.into(),
        system: bundle.name.clone(),
        moment_p: plan.moment_p,
        paths: plan.mc_paths,
        inconclusive: !(monotone && all_valid),
        eps,
        rate_fit,
        bound_check,
        monotone,
        intermediate: None,
        h_refinement_delta: None,
        wall_times,
    }
}

fn grid_of(plan: &ExperimentPlan) -> Result<TimeGrid> {
    TimeGrid::new(0.0, plan.horizon, plan.integrator.step)
}

fn provider_of(plan: &ExperimentPlan) -> Result<AveragedDriftProvider> {
    AveragedDriftProvider::new(plan.provider, plan.integrator)
}

/// Coupled `X^ε` against the averaged `X̄^ε` on the same W¹, for every ε of the plan.
pub fn run_convergence_t1(plan: &ExperimentPlan) -> Result<ConvergenceReport> {
    let (_, _, bundle) = plan.build()?;
    let provider = provider_of(plan)?;
    let drift = provider.bind(&bundle)?;
    let grid = grid_of(plan)?;
    let (x0, y0) = (plan.x0(), plan.y0());
    let mut results = Vec::new();
    let mut times = Vec::new();
    for &eps in &plan.eps_list {
        let start = Instant::now();
        let outcomes = (0..plan.mc_paths)
            .into_par_iter()
            .map(|i| {
                let seeds = plan.path_seeds(i);
                pair(
                    simulate_coupled(&bundle, eps, &x0, &y0, &grid, &plan.integrator, seeds),
                    simulate_averaged_eps(&bundle, eps, &x0, &grid, &drift, &plan.integrator, seeds),
                    plan.moment_p,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        results.push(summarize(eps, &outcomes));
        times.push(start.elapsed().as_secs_f64());
    }
    Ok(finish("T1", plan, &bundle, results, times))
}

/// Limit coefficients `(Ā, Ḡ1)` of an almost-periodic bundle.
fn limit_parts(bundle: &CoefficientBundle) -> Result<(crate::coeffs::SlowDrift, crate::coeffs::SlowNoise)> {
    let ap = bundle.ap.as_ref().ok_or_else(|| {
        Error::UnsupportedBundle(format!("{} has no almost-periodic limit data", bundle.name))
    })?;
    Ok((
        bundle.slow.with_constant_modulation(ap.ell1_limit),
        bundle.slow_noise.with_constant_modulation(ap.ell2_limit),
    ))
}

/// Coupled `X^ε` against the ε-free limit `X̄`, plus the intermediate `X̄^ε` versus `X̄`
/// comparison and the step-refinement delta of `X̄`.
pub fn run_convergence_t2(plan: &ExperimentPlan) -> Result<ConvergenceReport> {
    let (_, _, bundle) = plan.build()?;
    let provider = provider_of(plan)?;
    let drift = provider.bind(&bundle)?;
    let (a_bar, g_bar) = limit_parts(&bundle)?;
    let affine;
    let bohr;
    let f_bar: &dyn MeanDrift = if provider.mode() == ProviderMode::OracleLinear {
        affine = affine_limit_drift(&bundle, plan.bohr.window, &plan.bohr.anchors, plan.bohr.quad_step)?;
        &affine
    } else {
        bohr = BohrLimitDrift {
            bound: provider.bind(&bundle)?,
            window_t: plan.bohr.window,
            anchors: plan.bohr.anchors.clone(),
            quad_step: plan.bohr.quad_step,
        };
        &bohr
    };
    let limits = LimitCoefficients { a: a_bar, g1: g_bar, f: f_bar };
    let grid = grid_of(plan)?;
    let (x0, y0) = (plan.x0(), plan.y0());
    let cfg = &plan.integrator;
    let mut results = Vec::new();
    let mut intermediate = Vec::new();
    let mut times = Vec::new();
    for &eps in &plan.eps_list {
        let start = Instant::now();
        let outcomes = (0..plan.mc_paths)
            .into_par_iter()
            .map(|i| {
                let seeds = plan.path_seeds(i);
                let limit = simulate_averaged_limit(&limits, &x0, &grid, cfg, seeds);
                let main = pair(
                    simulate_coupled(&bundle, eps, &x0, &y0, &grid, cfg, seeds),
                    limit.clone(),
                    plan.moment_p,
                )?;
                let inter = pair(
                    simulate_averaged_eps(&bundle, eps, &x0, &grid, &drift, cfg, seeds),
                    limit,
                    plan.moment_p,
                )?;
                Ok((main, inter))
            })
            .collect::<Result<Vec<_>>>()?;
        let (main, inter): (Vec<_>, Vec<_>) = outcomes.into_iter().unzip();
        results.push(summarize(eps, &main));
        intermediate.push(summarize(eps, &inter));
        times.push(start.elapsed().as_secs_f64());
    }
    let delta = h_refinement_delta(plan, &limits, &grid)?;
    let mut report = finish("T2", plan, &bundle, results, times);
    report.intermediate = Some(intermediate);
    report.h_refinement_delta = Some(delta);
    Ok(report)
}

/// `E sup_i ‖X̄_h(t_i) − X̄_{h/2}(t_i)‖^{2p}` over the plan's paths.
fn h_refinement_delta(plan: &ExperimentPlan, limits: &LimitCoefficients<'_>, grid: &TimeGrid) -> Result<f64> {
    let fine = grid.refined(2);
    let fine_cfg = IntegratorConfig {
        step: fine.step,
        ..plan.integrator
    };
    let x0 = plan.x0();
    let values = (0..plan.mc_paths)
        .into_par_iter()
        .map(|i| {
            let seeds = plan.path_seeds(i);
            let coarse = absorb(simulate_averaged_limit(limits, &x0, grid, &plan.integrator, seeds))?;
            let fine_path = absorb(simulate_averaged_limit(limits, &x0, &fine, &fine_cfg, seeds))?;
            Ok(match (coarse, fine_path) {
                (Some(c), Some(f)) => {
                    let fs = f.slow.unwrap();
                    let sub = PathSample {
                        grid: *grid,
                        slow: Some(fs.into_iter().step_by(2).collect()),
                        ..c.clone()
                    };
                    Some(strong_error(&c, &sub, plan.moment_p)?)
                }
                _ => None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let ok: Vec<f64> = values.into_iter().flatten().collect();
    Ok(mean_stderr(&ok).0)
}
