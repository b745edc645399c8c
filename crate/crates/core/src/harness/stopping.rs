use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::plan::ExperimentPlan;
use crate::error::{invalid, Result};
use crate::integrate::{simulate_coupled, PathSample};
use crate::spaces::{GalerkinSpace, Norm, TimeGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppingDiagnostic {
    pub times: Vec<f64>,
    /// `∫_0^t (1 + ‖X_s‖_V^α)(1 + ‖X_s‖_H^β) ds` at the grid times.
    pub functional_trace: Vec<f64>,
    pub threshold_r: f64,
    /// First grid time with trace `≥ R`.
    pub hit_time: Option<f64>,
}

/// Trapezoidal stopping functional along the slow path.
pub fn stopping_diagnostic(
    path: &PathSample,
    space: &GalerkinSpace,
    alpha: f64,
    beta: f64,
    r: f64,
) -> Result<StoppingDiagnostic> {
    let slow = path
        .slow
        .as_ref()
        .ok_or_else(|| invalid("stopping diagnostic needs a slow path"))?;
    let integrand = slow
        .iter()
        .map(|x| {
            let v = space.norm(&x.coeffs, Norm::V)?;
            let h = space.norm(&x.coeffs, Norm::H)?;
            Ok((1.0 + v.powf(alpha)) * (1.0 + h.powf(beta)))
        })
        .collect::<Result<Vec<f64>>>()?;
    let times: Vec<f64> = path.grid.times().collect();
    let mut trace = Vec::with_capacity(times.len());
    let mut acc = 0.0;
    trace.push(0.0);
    for i in 1..times.len() {
        acc += 0.5 * (integrand[i - 1] + integrand[i]) * (times[i] - times[i - 1]);
        trace.push(acc);
    }
    let hit_time = trace.iter().position(|v| *v >= r).map(|i| times[i]);
    Ok(StoppingDiagnostic {
        times,
        functional_trace: trace,
        threshold_r: r,
        hit_time,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppingStudy {
    pub eps: f64,
    pub paths: usize,
    pub failed_paths: usize,
    pub hits: usize,
    pub hit_fraction: f64,
}

/// Fraction of coupled paths whose stopping functional reaches `R` before `T`.
pub fn run_stopping_study(plan: &ExperimentPlan, eps: f64, alpha: f64, beta: f64, r: f64) -> Result<StoppingStudy> {
    let (slow_space, _, bundle) = plan.build()?;
    let grid = TimeGrid::new(0.0, plan.horizon, plan.integrator.step)?;
    let (x0, y0) = (plan.x0(), plan.y0());
    let hits = (0..plan.mc_paths)
        .into_par_iter()
        .map(|i| match simulate_coupled(&bundle, eps, &x0, &y0, &grid, &plan.integrator, plan.path_seeds(i)) {
            Ok(p) => Ok(Some(stopping_diagnostic(&p, &slow_space, alpha, beta, r)?.hit_time.is_some())),
            Err(e) if e.is_path_failure() => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<Vec<_>>>()?;
    let failed = hits.iter().filter(|h| h.is_none()).count();
    let count = hits.iter().filter(|h| **h == Some(true)).count();
    let used = hits.len() - failed;
    Ok(StoppingStudy {
        eps,
        paths: plan.mc_paths,
        failed_paths: failed,
        hits: count,
        hit_fraction: if used > 0 { count as f64 / used as f64 } else { f64::NAN },
    })
}
