use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, StandardNormal};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bundle::CoefficientBundle;
use super::profile::ConditionProfile;
use crate::error::{invalid, Result};
use crate::spaces::{derive_seed, dist2, dot, norm2, GalerkinSpace, Norm};

/// Margins above this value count as violations.
pub const CHECK_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSettings {
    pub samples: usize,
    pub seed: u64,
    /// Standard deviation of the component-wise Gaussian states.
    pub state_scale: f64,
    /// Times are drawn uniformly from `[-t_range, t_range]`.
    pub t_range: f64,
    /// Overrides the `ρ + η` envelope factor `generic_C` of the local monotonicity check.
    pub envelope_scale: Option<f64>,
}

impl CheckSettings {
    pub fn new(samples: usize, seed: u64) -> Self {
        CheckSettings {
            samples,
            seed,
            state_scale: 1.0,
            t_range: 100.0,
            envelope_scale: None,
        }
    }
}

impl CheckSettings {
    pub fn with_envelope(mut self, scale: f64) -> Self {
        self.envelope_scale = Some(scale);
        self
    }
}

impl Default for CheckSettings {
    fn default() -> Self {
        CheckSettings::new(10_000, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub condition: String,
    pub samples: usize,
    pub violations: usize,
    /// Largest `lhs − rhs` over the samples; `≤ 0` means the inequality held everywhere.
    pub max_margin: f64,
    pub worst_index: usize,
    pub passed: bool,
}

struct Sampler {
    rng: Xoshiro256PlusPlus,
    scale: f64,
    t_range: f64,
}

impl Sampler {
    fn new(settings: &CheckSettings, index: usize) -> Self {
        Sampler {
            rng: Xoshiro256PlusPlus::seed_from_u64(derive_seed(settings.seed, index as u64)),
            scale: settings.state_scale,
            t_range: settings.t_range,
        }
    }

    fn state(&mut self, dim: usize) -> Vec<f64> {
        (0..dim)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut self.rng);
                self.scale * z
            })
            .collect()
    }

    fn time(&mut self) -> f64 {
        if self.t_range == 0.0 {
            return 0.0;
        }
        self.rng.gen_range(-self.t_range..=self.t_range)
    }
}

fn run<F>(condition: &str, settings: &CheckSettings, margin: F) -> Result<CheckReport>
where
    F: Fn(&mut Sampler) -> f64 + Sync,
{
    if settings.samples == 0 {
        return Err(invalid("checker needs at least one sample"));
    }
    if !(settings.state_scale > 0.0) || !(settings.t_range >= 0.0) {
        return Err(invalid("state_scale must be > 0 and t_range >= 0"));
    }
    let margins: Vec<f64> = (0..settings.samples)
        .into_par_iter()
        .map(|i| margin(&mut Sampler::new(settings, i)))
        .collect();
    let mut worst = (0, f64::NEG_INFINITY);
    let mut violations = 0;
    for (i, &m) in margins.iter().enumerate() {
        let m = if m.is_nan() { f64::INFINITY } else { m };
        if m > CHECK_TOLERANCE {
            violations += 1;
        }
        if m > worst.1 {
            worst = (i, m);
        }
    }
    Ok(CheckReport {
        condition: condition.to_string(),
        samples: settings.samples,
        violations,
        max_margin: worst.1,
        worst_index: worst.0,
        passed: violations == 0,
    })
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `⟨A(t,u) − A(t,v), u − v⟩ − [ρ(v) + η(u)]‖u − v‖²` with
/// `ρ(w) = η(w) = ½·scale·(1 + ‖w‖_V^α)(1 + ‖w‖_H^β)`.
pub fn monotonicity_margin(
    bundle: &CoefficientBundle,
    space: &GalerkinSpace,
    envelope_scale: f64,
    t: f64,
    u: &[f64],
    v: &[f64],
) -> f64 {
    let p = &bundle.profile;
    let envelope = |w: &[f64]| {
        0.5 * envelope_scale
            * (1.0 + space.norm_unchecked(w, Norm::V).powf(p.alpha))
            * (1.0 + norm2(w).powf(p.beta))
    };
    let diff = sub(&bundle.a(t, u), &bundle.a(t, v));
    let d = sub(u, v);
    dot(&diff, &d) - (envelope(v) + envelope(u)) * dot(&d, &d)
}

/// `⟨A(t,v), v⟩ − (C‖v‖_H² − θ‖v‖_V^α + C)`.
pub fn coercivity_margin(bundle: &CoefficientBundle, space: &GalerkinSpace, t: f64, v: &[f64]) -> f64 {
    let p = &bundle.profile;
    let lhs = dot(&bundle.a(t, v), v);
    let h = norm2(v);
    lhs - (p.generic_c * h * h - p.theta * space.norm_unchecked(v, Norm::V).powf(p.alpha) + p.generic_c)
}

/// `2⟨B(t,u1,u) − B(t,v1,v), u − v⟩ + ‖G2(t,u1,u) − G2(t,v1,v)‖² − (−γ‖u − v‖² + C‖u1 − v1‖²)`.
pub fn strong_monotonicity_margin(
    bundle: &CoefficientBundle,
    t: f64,
    u1: &[f64],
    u: &[f64],
    v1: &[f64],
    v: &[f64],
) -> f64 {
    let p = &bundle.profile;
    let db = sub(&bundle.b(t, u1, u), &bundle.b(t, v1, v));
    let dg = dist2(&bundle.g2(t, u1, u), &bundle.g2(t, v1, v));
    let d = sub(u, v);
    let dx = dist2(u1, v1);
    2.0 * dot(&db, &d) + dg * dg - (-p.gamma * dot(&d, &d) + p.generic_c * dx * dx)
}

/// Largest margin among the two difference and two growth bounds on `F` and `G1`.
pub fn lipschitz_margin(
    bundle: &CoefficientBundle,
    t: f64,
    u1: &[f64],
    u2: &[f64],
    v1: &[f64],
    v2: &[f64],
) -> f64 {
    let p = &bundle.profile;
    let c = p.generic_c;
    let dx = dist2(u1, v1);
    let dy = dist2(u2, v2);
    let f_diff = dist2(&bundle.f(t, u1, u2), &bundle.f(t, v1, v2)) - p.lip_f * (dx + dy);
    let f_growth = norm2(&bundle.f(t, u1, u2)) - c * (1.0 + norm2(u1) + norm2(u2));
    let g_diff = dist2(&bundle.g1(t, u1), &bundle.g1(t, v1)) - p.lip_g1 * dx;
    let g_growth = norm2(&bundle.g1(t, u1)) - c * (1.0 + norm2(u1));
    f_diff.max(f_growth).max(g_diff).max(g_growth)
}

/// Largest margin of the `V*` growth bound on `B` and the sublinear bound on `G2`.
pub fn growth_fast_margin(
    bundle: &CoefficientBundle,
    fast_space: &GalerkinSpace,
    t: f64,
    u1: &[f64],
    v: &[f64],
) -> f64 {
    let p = &bundle.profile;
    let c = p.generic_c;
    let k = p.kappa;
    let b = fast_space.norm_unchecked(&bundle.b(t, u1, v), Norm::VStar);
    let b_rhs = c
        * (1.0
            + fast_space.norm_unchecked(v, Norm::V).powf(k - 1.0)
            + norm2(u1).powf(2.0 * (k - 1.0) / k));
    let g = norm2(&bundle.g2(t, u1, v));
    let g_rhs = c * (1.0 + norm2(u1) + norm2(v).powf(p.zeta));
    (b - b_rhs).max(g - g_rhs)
}

pub fn check_local_monotonicity(
    bundle: &CoefficientBundle,
    space: &GalerkinSpace,
    settings: &CheckSettings,
) -> Result<CheckReport> {
    let scale = settings.envelope_scale.unwrap_or(bundle.profile.generic_c);
    run("local_monotonicity", settings, |s| {
        let t = s.time();
        let u = s.state(space.dim);
        let v = s.state(space.dim);
        monotonicity_margin(bundle, space, scale, t, &u, &v)
    })
}

pub fn check_coercivity(
    bundle: &CoefficientBundle,
    space: &GalerkinSpace,
    settings: &CheckSettings,
) -> Result<CheckReport> {
    run("coercivity", settings, |s| {
        let t = s.time();
        let v = s.state(space.dim);
        coercivity_margin(bundle, space, t, &v)
    })
}

pub fn check_strong_monotonicity_fast(
    bundle: &CoefficientBundle,
    slow_space: &GalerkinSpace,
    fast_space: &GalerkinSpace,
    settings: &CheckSettings,
) -> Result<CheckReport> {
    run("strong_monotonicity_fast", settings, |s| {
        let t = s.time();
        let u1 = s.state(slow_space.dim);
        let v1 = s.state(slow_space.dim);
        let u = s.state(fast_space.dim);
        let v = s.state(fast_space.dim);
        strong_monotonicity_margin(bundle, t, &u1, &u, &v1, &v)
    })
}

pub fn check_lipschitz_f_g1(
    bundle: &CoefficientBundle,
    slow_space: &GalerkinSpace,
    fast_space: &GalerkinSpace,
    settings: &CheckSettings,
) -> Result<CheckReport> {
    run("lipschitz_f_g1", settings, |s| {
        let t = s.time();
        let u1 = s.state(slow_space.dim);
        let v1 = s.state(slow_space.dim);
        let u2 = s.state(fast_space.dim);
        let v2 = s.state(fast_space.dim);
        lipschitz_margin(bundle, t, &u1, &u2, &v1, &v2)
    })
}

pub fn check_growth_fast(
    bundle: &CoefficientBundle,
    slow_space: &GalerkinSpace,
    fast_space: &GalerkinSpace,
    settings: &CheckSettings,
) -> Result<CheckReport> {
    run("growth_fast", settings, |s| {
        let t = s.time();
        let u1 = s.state(slow_space.dim);
        let v = s.state(fast_space.dim);
        growth_fast_margin(bundle, fast_space, t, &u1, &v)
    })
}

/// All five sampled checkers in a fixed order.
pub fn check_all(
    bundle: &CoefficientBundle,
    slow_space: &GalerkinSpace,
    fast_space: &GalerkinSpace,
    settings: &CheckSettings,
) -> Result<Vec<CheckReport>> {
    Ok(vec![
        check_local_monotonicity(bundle, slow_space, settings)?,
        check_coercivity(bundle, slow_space, settings)?,
        check_strong_monotonicity_fast(bundle, slow_space, fast_space, settings)?,
        check_lipschitz_f_g1(bundle, slow_space, fast_space, settings)?,
        check_growth_fast(bundle, slow_space, fast_space, settings)?,
    ])
}

/// Profile with one field replaced, for building deliberately failing fixtures.
pub fn with_profile(bundle: &CoefficientBundle, edit: impl FnOnce(&mut ConditionProfile)) -> CoefficientBundle {
    let mut b = bundle.clone();
    edit(&mut b.profile);
    b
}
