use serde::{Deserialize, Serialize};

use super::ensemble::run_particles;
use crate::coeffs::CoefficientBundle;
use crate::error::{invalid, Result};
use crate::integrate::{simulate_frozen, IntegratorConfig, SeedRecord};
use crate::spaces::{derive_seed, dist2, State};
use crate::stats::linear_fit;

/// Squared distances below this are treated as numerical zero and cut from the fit.
const ZERO_DISTANCE: f64 = 1e-250;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseCoupling {
    /// Both starts see the same Wiener increments.
    Synchronous,
    /// The second start is driven by an independent realization.
    Independent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixingSettings {
    pub start: f64,
    pub horizon: f64,
    pub step: f64,
    pub replicas: usize,
    pub seed: u64,
    pub coupling: NoiseCoupling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingReport {
    /// Slope of `log E‖Y^{y1} − Y^{y2}‖²` against elapsed time (negative when contracting).
    pub fitted_rate: f64,
    /// Linear-theory contraction rate `2(λ_1 − ⟨φ⟩) − c²`, so that `fitted_rate ≈ −theoretical_gamma`.
    pub theoretical_gamma: Option<f64>,
    pub pairs_used: usize,
    pub fit_r2: f64,
    /// Grid points used in the fit.
    pub fit_points: usize,
    /// The distance reached numerical zero and the fit window was cut short.
    pub truncated: bool,
    /// No usable distance curve (for example `y1 = y2`).
    pub degenerate: bool,
}

/// Linear-theory rate for bundles with linear fast dynamics.
pub fn linear_mixing_gamma(bundle: &CoefficientBundle) -> Option<f64> {
    if !bundle.fast.is_linear() {
        return None;
    }
    let lambda1 = bundle.fast.rates.iter().cloned().fold(f64::INFINITY, f64::min);
    let c = bundle.fast_noise.multiplicative;
    Some(2.0 * (lambda1 - bundle.fast.phi.mean()) - c * c)
}

pub fn estimate_mixing_rate(
    bundle: &CoefficientBundle,
    x: &State,
    y1: &State,
    y2: &State,
    settings: &MixingSettings,
    cfg: &IntegratorConfig,
) -> Result<MixingReport> {
    if settings.replicas == 0 {
        return Err(invalid("mixing estimate needs at least one replica"));
    }
    if !(settings.horizon > 0.0) {
        return Err(invalid("mixing horizon must be > 0"));
    }
    let end = settings.start + settings.horizon;
    let curves = run_particles(settings.replicas, |i| {
        let base = derive_seed(settings.seed, i as u64);
        let s1 = SeedRecord::new(base, cfg.noise_levels);
        let s2 = match settings.coupling {
            NoiseCoupling::Synchronous => s1,
            NoiseCoupling::Independent => SeedRecord::new(derive_seed(base, u64::MAX), cfg.noise_levels),
        };
        let a = simulate_frozen(bundle, x, settings.start, end, y1, settings.step, cfg, s1)?;
        let b = simulate_frozen(bundle, x, settings.start, end, y2, settings.step, cfg, s2)?;
        let (a, b) = (a.fast.expect("frozen path"), b.fast.expect("frozen path"));
        Ok(a.iter().zip(&b).map(|(p, q)| dist2(p, q).powi(2)).collect::<Vec<f64>>())
    })?;
    let points = curves[0].len();
    let mut mean = vec![0.0; points];
    for c in &curves {
        for (m, v) in mean.iter_mut().zip(c) {
            *m += v;
        }
    }
    let n = settings.replicas as f64;
    mean.iter_mut().for_each(|m| *m /= n);

    let grid_step = settings.horizon / (points - 1) as f64;
    let mut ts = Vec::new();
    let mut logs = Vec::new();
    let mut truncated = false;
    for (j, d) in mean.iter().enumerate() {
        if !(d.is_finite() && *d > ZERO_DISTANCE) {
            truncated = j > 0;
            break;
        }
        ts.push(j as f64 * grid_step);
        logs.push(d.ln());
    }
    let fit = if ts.len() >= 3 { linear_fit(&ts, &logs) } else { None };
    let theoretical_gamma = linear_mixing_gamma(bundle);
    Ok(match fit {
        Some(f) => MixingReport {
            fitted_rate: f.slope,
            theoretical_gamma,
            pairs_used: settings.replicas,
            fit_r2: f.r2,
            fit_points: ts.len(),
            truncated,
            degenerate: false,
        },
        None => MixingReport {
            fitted_rate: 0.0,
            theoretical_gamma,
            pairs_used: settings.replicas,
            fit_r2: 0.0,
            fit_points: ts.len(),
            truncated,
            degenerate: true,
        },
    })
}
