use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coeffs::CoefficientBundle;
use crate::ergodic::{dbl_distance, estimate_evolution_measure, MeasureEnsemble, PullbackSettings};
use crate::error::{invalid, Result};
use crate::integrate::IntegratorConfig;
use crate::spaces::{derive_seed, State};

/// Translations `τ` in `[lo, hi]` (grid `tau_step`) with `max_probe ‖f(t+τ) − f(t)‖ < ε`.
///
/// Only the probes are checked, so acceptance is a necessary condition for `τ` to be an
/// `ε`-translation number.
pub fn translation_number_scan(
    f: &(dyn Fn(f64) -> Vec<f64> + Sync),
    epsilon: f64,
    tau_range: (f64, f64),
    tau_step: f64,
    probes: &[f64],
) -> Result<Vec<f64>> {
    if !(tau_step > 0.0) {
        return Err(invalid("tau_step must be > 0"));
    }
    if !(tau_range.1 >= tau_range.0) {
        return Err(invalid("tau range must satisfy lo <= hi"));
    }
    let base: Vec<Vec<f64>> = probes.iter().map(|&t| f(t)).collect();
    let n = ((tau_range.1 - tau_range.0) / tau_step + 1e-9).floor() as usize;
    Ok((0..=n)
        .into_par_iter()
        .filter_map(|i| {
            let tau = tau_range.0 + i as f64 * tau_step;
            let ok = probes.iter().zip(&base).all(|(&t, ft)| {
                let d: f64 = f(t + tau).iter().zip(ft).map(|(a, b)| (a - b).powi(2)).sum();
                d.sqrt() < epsilon
            });
            ok.then_some(tau)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApDistance {
    pub tau: f64,
    pub t: f64,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauVerdict {
    pub tau: f64,
    pub max_distance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApDiagnosticReport {
    pub distances: Vec<ApDistance>,
    /// Largest distance between two independent ensembles of the same `μ_t^x`.
    pub mc_tolerance: f64,
    pub threshold: f64,
    pub per_tau: Vec<TauVerdict>,
    pub max_distance: f64,
    pub passed: bool,
}

/// Settings of [`measure_ap_diagnostic`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApDiagnosticSettings {
    pub pullback: PullbackSettings,
    pub dictionary_size: usize,
    pub dictionary_seed: u64,
    /// Allowed translation error on top of Monte Carlo noise.
    pub epsilon: f64,
}

/// Dictionary distances `d_BL(μ_{t+τ}^x, μ_t^x)`. A `τ` passes when every distance stays
/// below `ε + 3·mc_tolerance`.
pub fn measure_ap_diagnostic(
    bundle: &CoefficientBundle,
    x: &State,
    taus: &[f64],
    anchors: &[f64],
    settings: &ApDiagnosticSettings,
    cfg: &IntegratorConfig,
) -> Result<ApDiagnosticReport> {
    if taus.is_empty() || anchors.is_empty() {
        return Err(invalid("taus and anchors must be non-empty"));
    }
    let y0 = State::zeros(bundle.fast_dim);
    let ensemble = |t: f64, stream: u64| -> Result<MeasureEnsemble> {
        let s = PullbackSettings {
            seed: derive_seed(settings.pullback.seed, stream),
            ..settings.pullback
        };
        estimate_evolution_measure(bundle, x, t, &y0, &s, cfg)
    };
    let d = |a: &MeasureEnsemble, b: &MeasureEnsemble| {
        dbl_distance(a, b, settings.dictionary_size, settings.dictionary_seed)
    };
    let mut mc_tolerance: f64 = 0.0;
    let mut distances = Vec::new();
    let mut stream = 0u64;
    for &t in anchors {
        let base = ensemble(t, stream)?;
        let twin = ensemble(t, stream + 1)?;
        stream += 2;
        mc_tolerance = mc_tolerance.max(d(&base, &twin)?);
        for &tau in taus {
            let shifted = ensemble(t + tau, stream)?;
            stream += 1;
            distances.push(ApDistance {
                tau,
                t,
                distance: d(&base, &shifted)?,
            });
        }
    }
    let threshold = settings.epsilon + 3.0 * mc_tolerance;
    let per_tau: Vec<TauVerdict> = taus
        .iter()
        .map(|&tau| {
            let m = distances
                .iter()
                .filter(|e| e.tau == tau)
                .map(|e| e.distance)
                .fold(0.0, f64::max);
            TauVerdict {
                tau,
                max_distance: m,
                passed: m < threshold,
            }
        })
        .collect();
    let max_distance = per_tau.iter().map(|v| v.max_distance).fold(0.0, f64::max);
    Ok(ApDiagnosticReport {
        passed: per_tau.iter().all(|v| v.passed),
        distances,
        mc_tolerance,
        threshold,
        per_tau,
        max_distance,
    })
}
