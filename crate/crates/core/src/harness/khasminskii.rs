use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::plan::ExperimentPlan;
use crate::average::{khasminskii_auxiliary, KhasminskiiConfig};
use crate::error::{invalid, Error, Result};
use crate::integrate::simulate_coupled;
use crate::spaces::{dist2, TimeGrid};
use crate::stats::{linear_fit, mean_stderr};

/// Accepted log-log slope range of the δ study.
pub const KHASMINSKII_SLOPE_RANGE: (f64, f64) = (0.3, 0.8);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaResult {
    pub delta: f64,
    /// Monte Carlo mean of `∫_0^T ‖Y − Ŷ‖² dt`.
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KhasminskiiReport {
    pub system: String,
    pub eps: f64,
    pub paths: usize,
    pub failed_paths: usize,
    pub deltas: Vec<DeltaResult>,
    pub slope: f64,
    pub slope_stderr: f64,
    pub r2: f64,
    pub passed: bool,
}

/// `E∫_0^T ‖Y − Ŷ_δ‖²` for each `δ`, `Ŷ_δ` driven by the block-frozen slow path on the
/// same W² as `Y`, and the log-log slope in `δ`.
pub fn run_khasminskii_study(plan: &ExperimentPlan, eps: f64, deltas: &[f64]) -> Result<KhasminskiiReport> {
    let (_, _, bundle) = plan.build()?;
    if deltas.len() < 2 || deltas.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(invalid("delta_list needs at least two strictly decreasing values"));
    }
    let grid = TimeGrid::new(0.0, plan.horizon, plan.integrator.step)?;
    if deltas.iter().any(|d| *d < grid.step * (1.0 - 1e-9)) {
        return Err(Error::InvalidConfiguration("every delta must be >= the grid step".into()));
    }
    let (x0, y0) = (plan.x0(), plan.y0());
    let cfg = &plan.integrator;
    let per_path = (0..plan.mc_paths)
        .into_par_iter()
        .map(|i| -> Result<Option<Vec<f64>>> {
            let seeds = plan.path_seeds(i);
            let coupled = match simulate_coupled(&bundle, eps, &x0, &y0, &grid, cfg, seeds) {
                Ok(p) => p,
                Err(e) if e.is_path_failure() => return Ok(None),
                Err(e) => return Err(e),
            };
            let y = coupled.fast.as_ref().unwrap();
            let mut out = Vec::with_capacity(deltas.len());
            for &d in deltas {
                let aux = match khasminskii_auxiliary(&bundle, eps, &coupled, &y0, &KhasminskiiConfig::fixed(d), cfg, seeds) {
                    Ok(p) => p,
                    Err(e) if e.is_path_failure() => return Ok(None),
                    Err(e) => return Err(e),
                };
                let yh = aux.fast.unwrap();
                let sq: Vec<f64> = y.iter().zip(&yh).map(|(a, b)| dist2(&a.coeffs, &b.coeffs).powi(2)).collect();
                let n = sq.len();
                let integral = grid.step * (sq[1..n - 1].iter().sum::<f64>() + 0.5 * (sq[0] + sq[n - 1]));
                out.push(integral);
            }
            Ok(Some(out))
        })
        .collect::<Result<Vec<_>>>()?;
    let ok: Vec<&Vec<f64>> = per_path.iter().flatten().collect();
    let results: Vec<DeltaResult> = deltas
        .iter()
        .enumerate()
        .map(|(j, &delta)| {
            let col: Vec<f64> = ok.iter().map(|v| v[j]).collect();
            let (mean, stderr) = mean_stderr(&col);
            DeltaResult { delta, mean, stderr }
        })
        .collect();
    let lx: Vec<f64> = results.iter().map(|r| r.delta.ln()).collect();
    let ly: Vec<f64> = results.iter().map(|r| r.mean.ln()).collect();
    let fit = linear_fit(&lx, &ly);
    let (slope, slope_stderr, r2) = fit.map(|f| (f.slope, f.slope_stderr, f.r2)).unwrap_or((f64::NAN, f64::NAN, 0.0));
    Ok(KhasminskiiReport {
        system: bundle.name.clone(),
        eps,
        paths: plan.mc_paths,
        failed_paths: per_path.len() - ok.len(),
        deltas: results,
        slope,
        slope_stderr,
        r2,
        passed: (KHASMINSKII_SLOPE_RANGE.0..=KHASMINSKII_SLOPE_RANGE.1).contains(&slope),
    })
}
