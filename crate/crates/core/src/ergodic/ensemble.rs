use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coeffs::CoefficientBundle;
use crate::error::{invalid, Error, Result};
use crate::integrate::{frozen_endpoint, IntegratorConfig, SeedRecord};
use crate::spaces::{derive_seed, State, TimeGrid};

/// Particle approximation of `μ_t^x`, built by pulling back the frozen equation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureEnsemble {
    pub particles: Vec<State>,
    pub t_anchor: f64,
    pub x_anchor: State,
    /// Horizon actually simulated (a whole number of steps, at least the requested one).
    pub pullback_horizon: f64,
    pub step: f64,
    pub seed: u64,
    /// `e^{-γS/2}` times the initial distance scale.
    pub bias_bound: f64,
    /// Empirical `∫‖y‖² dμ / (1 + ‖x‖²)`.
    pub moment_constant: f64,
}

impl MeasureEnsemble {
    pub fn from_particles(particles: Vec<State>, t_anchor: f64, x_anchor: State) -> Result<Self> {
        if particles.is_empty() {
            return Err(invalid("an ensemble needs at least one particle"));
        }
        let dim = particles[0].len();
        if particles.iter().any(|p| p.len() != dim || !p.is_finite()) {
            return Err(invalid("particles must be finite and share one dimension"));
        }
        let mut e = MeasureEnsemble {
            particles,
            t_anchor,
            x_anchor,
            pullback_horizon: 0.0,
            step: 0.0,
            seed: 0,
            bias_bound: f64::NAN,
            moment_constant: 0.0,
        };
        e.moment_constant = e.second_moment() / (1.0 + e.x_anchor.norm_h().powi(2));
        Ok(e)
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.particles.first().map_or(0, |p| p.len())
    }

    pub fn particle_vectors(&self) -> Vec<Vec<f64>> {
        self.particles.iter().map(|p| p.coeffs.clone()).collect()
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim()];
        for p in &self.particles {
            for (a, v) in m.iter_mut().zip(p.iter()) {
                *a += v;
            }
        }
        let n = self.len() as f64;
        m.iter_mut().for_each(|a| *a /= n);
        m
    }

    /// Per-mode sample variance (zero for a single particle).
    pub fn variance(&self) -> Vec<f64> {
        let m = self.mean();
        let n = self.len();
        if n < 2 {
            return vec![0.0; self.dim()];
        }
        let mut v = vec![0.0; self.dim()];
        for p in &self.particles {
            for (k, a) in v.iter_mut().enumerate() {
                *a += (p[k] - m[k]).powi(2);
            }
        }
        v.iter_mut().for_each(|a| *a /= (n - 1) as f64);
        v
    }

    pub fn second_moment(&self) -> f64 {
        self.particles.iter().map(|p| p.norm_h().powi(2)).sum::<f64>() / self.len() as f64
    }

    /// Header JSON, its length as `u64` little endian in front, then the particles as
    /// row-major little-endian `f64`.
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let header = EnsembleHeader {
            t_anchor: self.t_anchor,
            x_anchor: self.x_anchor.clone(),
            pullback_horizon: self.pullback_horizon,
            particles: self.len(),
            dim: self.dim(),
            step: self.step,
            seed: self.seed,
            bias_bound: self.bias_bound,
            moment_constant: self.moment_constant,
        };
        let json = serde_json::to_vec(&header).map_err(|e| Error::Format(e.to_string()))?;
        let mut buf = Vec::with_capacity(8 + json.len() + 8 * self.len() * self.dim());
        buf.extend_from_slice(&(json.len() as u64).to_le_bytes());
        buf.extend_from_slice(&json);
        for p in &self.particles {
            for v in p.iter() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut data = Vec::new();
        r.read_to_end(&mut data)?;
        let short = || Error::Format("ensemble file truncated".into());
        let len_bytes: [u8; 8] = data.get(..8).ok_or_else(short)?.try_into().expect("8 bytes");
        let hlen = u64::from_le_bytes(len_bytes) as usize;
        let json = data.get(8..8 + hlen).ok_or_else(short)?;
        let h: EnsembleHeader = serde_json::from_slice(json).map_err(|e| Error::Format(e.to_string()))?;
        let body = &data[8 + hlen..];
        if body.len() != 8 * h.particles * h.dim {
            return Err(Error::Format(format!(
                "ensemble body has {} bytes, header implies {}",
                body.len(),
                8 * h.particles * h.dim
            )));
        }
        let particles = body
            .chunks_exact(8 * h.dim.max(1))
            .map(|row| {
                State::new(
                    row.chunks_exact(8)
                        .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
                        .collect(),
                )
            })
            .collect();
        Ok(MeasureEnsemble {
            particles,
            t_anchor: h.t_anchor,
            x_anchor: h.x_anchor,
            pullback_horizon: h.pullback_horizon,
            step: h.step,
            seed: h.seed,
            bias_bound: h.bias_bound,
            moment_constant: h.moment_constant,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnsembleHeader {
    t_anchor: f64,
    x_anchor: State,
    pullback_horizon: f64,
    particles: usize,
    dim: usize,
    step: f64,
    seed: u64,
    bias_bound: f64,
    moment_constant: f64,
}

/// Options of the pullback construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PullbackSettings {
    pub particles: usize,
    pub horizon: f64,
    pub step: f64,
    pub seed: u64,
    /// Reject horizons whose bias bound exceeds this value.
    pub bias_tol: Option<f64>,
}

/// Scale of the initial distance `E‖y_start − Y‖`: the start state plus the size of the
/// forced linear response to `x`.
fn distance_scale(bundle: &CoefficientBundle, x: &State, y_start: &State) -> f64 {
    let lambda1 = bundle.fast.rates.iter().cloned().fold(f64::INFINITY, f64::min);
    let margin = (lambda1 - bundle.fast.phi.sup_abs()).max(1e-12);
    1.0 + y_start.norm_h() + bundle.fast.coupling.abs() * x.norm_h() / margin
}

/// Shortest horizon with `e^{-γS/2}·scale ≤ tol`.
pub fn required_horizon(gamma: f64, scale: f64, tol: f64) -> f64 {
    (2.0 / gamma * (scale / tol).ln()).max(0.0)
}

/// Pulls `M` two-sided noise realizations of the frozen equation from `t − S` to `t`.
pub fn estimate_evolution_measure(
    bundle: &CoefficientBundle,
    x: &State,
    t: f64,
    y_start: &State,
    settings: &PullbackSettings,
    cfg: &IntegratorConfig,
) -> Result<MeasureEnsemble> {
    if settings.particles == 0 {
        return Err(invalid("ensemble size M must be >= 1"));
    }
    if !(settings.horizon > 0.0) || !(settings.step > 0.0) {
        return Err(invalid("pullback horizon S and step must be > 0"));
    }
    if x.len() != bundle.slow_dim || y_start.len() != bundle.fast_dim {
        return Err(invalid("x or y_start does not conform to the bundle spaces"));
    }
    let gamma = bundle.profile.gamma;
    let scale = distance_scale(bundle, x, y_start);
    let bias_bound = (-gamma * settings.horizon / 2.0).exp() * scale;
    if let Some(tol) = settings.bias_tol {
        if bias_bound > tol {
            return Err(Error::HorizonTooShort {
                given: settings.horizon,
                required: required_horizon(gamma, scale, tol),
            });
        }
    }
    // Whole number of steps ending at t, so dyadic steps stay on dyadic times.
    let n = (settings.horizon / settings.step * (1.0 - 1e-12)).ceil().max(1.0);
    let horizon = n * settings.step;
    let start = t - horizon;
    TimeGrid::new(start, t, settings.step)?;
    let particles = run_particles(settings.particles, |i| {
        let seeds = SeedRecord::new(derive_seed(settings.seed, i as u64), cfg.noise_levels);
        frozen_endpoint(bundle, x, start, t, y_start, settings.step, cfg, seeds)
    })?;
    let mut e = MeasureEnsemble::from_particles(particles, t, x.clone())?;
    e.pullback_horizon = horizon;
    e.step = settings.step;
    e.seed = settings.seed;
    e.bias_bound = bias_bound;
    Ok(e)
}

/// Runs `m` independent particle tasks in parallel, collecting in index order.
pub(crate) fn run_particles<T: Send>(m: usize, task: impl Fn(usize) -> Result<T> + Sync) -> Result<Vec<T>> {
    (0..m).into_par_iter().map(&task).collect()
}

