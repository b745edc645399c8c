use serde::{Deserialize, Serialize};

use super::dictionary::Dictionary;
use super::ensemble::{estimate_evolution_measure, run_particles, PullbackSettings};
use crate::coeffs::CoefficientBundle;
use crate::error::{invalid, Result};
use crate::integrate::{frozen_endpoint, IntegratorConfig, SeedRecord};
use crate::spaces::{derive_seed, State};
use crate::stats::mean_stderr;

/// Test function on the fast space.
pub type TestFn<'a> = &'a (dyn Fn(&[f64]) -> f64 + Sync);

/// Monte Carlo estimate of `P^x_{s,t}φ(y) = E φ(Y_t^{s,x,y})` with its standard error.
#[allow(clippy::too_many_arguments)]
pub fn semigroup_expectation(
    bundle: &CoefficientBundle,
    x: &State,
    s: f64,
    t: f64,
    y: &State,
    test_fn: TestFn<'_>,
    m: usize,
    step: f64,
    seed: u64,
    cfg: &IntegratorConfig,
) -> Result<(f64, f64)> {
    if !(t >= s) {
        return Err(invalid(format!("semigroup needs t >= s, got s = {s}, t = {t}")));
    }
    if m < 2 {
        return Err(invalid("semigroup expectation needs M >= 2"));
    }
    if t == s {
        return Ok((test_fn(y), 0.0));
    }
    let values = run_particles(m, |i| {
        let seeds = SeedRecord::new(derive_seed(seed, i as u64), cfg.noise_levels);
        let end = frozen_endpoint(bundle, x, s, t, y, step, cfg, seeds)?;
        Ok(test_fn(&end))
    })?;
    Ok(mean_stderr(&values))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionReport {
    /// `∫P_{s,t}φ dμ_s − ∫φ dμ_t` per test function.
    pub discrepancies: Vec<f64>,
    pub stderrs: Vec<f64>,
    pub z_scores: Vec<f64>,
    /// Stouffer combination `Σz/√n`.
    pub combined_z: f64,
    pub passed: bool,
}

/// Pass threshold on every `|z|`.
pub const EVOLUTION_Z_THRESHOLD: f64 = 4.0;

/// Compares `∫P^x_{s,t}φ dμ_s^x` with `∫φ dμ_t^{x'}` (`x' = x` unless `x_target` is set).
///
/// The left side pushes a pullback ensemble at `s` forward on the continuation of each
/// particle's own noise; the right side is an independent pullback ensemble at `t`.
#[allow(clippy::too_many_arguments)]
pub fn check_evolution_property(
    bundle: &CoefficientBundle,
    x: &State,
    s: f64,
    t: f64,
    test_fns: &Dictionary,
    settings: &PullbackSettings,
    x_target: Option<&State>,
    cfg: &IntegratorConfig,
) -> Result<EvolutionReport> {
    if !(t >= s) {
        return Err(invalid(format!("evolution property needs t >= s, got s = {s}, t = {t}")));
    }
    let y0 = State::zeros(bundle.fast_dim);
    let at_s = estimate_evolution_measure(bundle, x, s, &y0, settings, cfg)?;
    let pushed: Vec<Vec<f64>> = if t == s {
        at_s.particle_vectors()
    } else {
        run_particles(at_s.len(), |i| {
            let seeds = SeedRecord::new(derive_seed(settings.seed, i as u64), cfg.noise_levels);
            Ok(frozen_endpoint(bundle, x, s, t, &at_s.particles[i], settings.step, cfg, seeds)?.coeffs)
        })?
    };
    let target_x = x_target.unwrap_or(x);
    let at_t: Vec<Vec<f64>> = if t == s && x_target.is_none() {
        pushed.clone()
    } else {
        let other = PullbackSettings {
            seed: derive_seed(settings.seed, 0x7e57_0000_0000_0001),
            ..*settings
        };
        estimate_evolution_measure(bundle, target_x, t, &y0, &other, cfg)?.particle_vectors()
    };
    Ok(compare(test_fns, &pushed, &at_t))
}

fn compare(dict: &Dictionary, a: &[Vec<f64>], b: &[Vec<f64>]) -> EvolutionReport {
    let mut discrepancies = Vec::with_capacity(dict.len());
    let mut stderrs = Vec::with_capacity(dict.len());
    let mut z_scores = Vec::with_capacity(dict.len());
    for j in 0..dict.len() {
        let va: Vec<f64> = a.iter().map(|y| dict.eval(j, y)).collect();
        let vb: Vec<f64> = b.iter().map(|y| dict.eval(j, y)).collect();
        let (ma, sa) = mean_stderr(&va);
        let (mb, sb) = mean_stderr(&vb);
        let d = ma - mb;
        let se = (sa * sa + sb * sb).sqrt();
        let z = if d == 0.0 { 0.0 } else if se > 0.0 { d / se } else { f64::INFINITY * d.signum() };
        discrepancies.push(d);
        stderrs.push(se);
        z_scores.push(z);
    }
    let combined_z = if z_scores.is_empty() {
        0.0
    } else {
        z_scores.iter().sum::<f64>() / (z_scores.len() as f64).sqrt()
    };
    let passed = z_scores.iter().all(|z| z.abs() < EVOLUTION_Z_THRESHOLD);
    EvolutionReport {
        discrepancies,
        stderrs,
        z_scores,
        combined_z,
        passed,
    }
}

