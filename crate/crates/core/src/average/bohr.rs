use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::provider::{mean_gains, AveragedDriftProvider, BoundDrift, ProviderMode};
use crate::coeffs::CoefficientBundle;
use crate::error::{invalid, Error, Result};
use crate::integrate::MeanDrift;
use crate::spaces::{transfer, State};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BohrMeanReport {
    pub value: Vec<f64>,
    pub window_t: f64,
    /// Largest distance between a window mean and `value`.
    pub tail_estimate: f64,
    pub anchors_probed: usize,
}

fn check_window(t: f64, anchors: &[f64], quad_step: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(invalid(format!("window length T must be > 0, got {t}")));
    }
    if anchors.is_empty() {
        return Err(invalid("at least one anchor is needed"));
    }
    if !(quad_step > 0.0) {
        return Err(invalid("quadrature step must be > 0"));
    }
    Ok(())
}

/// Trapezoidal window mean `T⁻¹∫_a^{a+T} f`.
fn window_mean(f: &(dyn Fn(f64) -> Result<Vec<f64>> + Sync), a: f64, t: f64, quad_step: f64) -> Result<Vec<f64>> {
    let n = (t / quad_step).ceil().max(1.0) as usize;
    let h = t / n as f64;
    let mut acc = f(a)?.iter().map(|v| v / 2.0).collect::<Vec<_>>();
    for i in 1..=n {
        let w = if i == n { 0.5 } else { 1.0 };
        let v = f(a + i as f64 * h)?;
        if v.len() != acc.len() {
            return Err(invalid("function changed output length"));
        }
        acc.iter_mut().zip(v).for_each(|(s, x)| *s += w * x);
    }
    Ok(acc.into_iter().map(|s| s * h / t).collect())
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn bohr_mean_fallible(
    f: &(dyn Fn(f64) -> Result<Vec<f64>> + Sync),
    t: f64,
    anchors: &[f64],
    quad_step: f64,
) -> Result<BohrMeanReport> {
    check_window(t, anchors, quad_step)?;
    let windows = anchors
        .par_iter()
        .map(|&a| window_mean(f, a, t, quad_step))
        .collect::<Result<Vec<_>>>()?;
    let n = windows[0].len();
    let value: Vec<f64> = (0..n)
        .map(|k| windows.iter().map(|w| w[k]).sum::<f64>() / windows.len() as f64)
        .collect();
    let tail = windows.iter().map(|w| dist(w, &value)).fold(0.0, f64::max);
    Ok(BohrMeanReport {
        value,
        window_t: t,
        tail_estimate: tail,
        anchors_probed: anchors.len(),
    })
}

/// Mean over anchors of the window means `T⁻¹∫_a^{a+T} f`.
pub fn bohr_mean(
    f: &(dyn Fn(f64) -> Vec<f64> + Sync),
    t: f64,
    anchors: &[f64],
    quad_step: f64,
) -> Result<BohrMeanReport> {
    bohr_mean_fallible(&|s| Ok(f(s)), t, anchors, quad_step)
}

/// `F̄(x) = lim T⁻¹∫_a^{a+T} F̄(s, x) ds`, the spread of the window means being the
/// uniformity diagnostic.
pub fn bohr_limit_drift(
    provider: &AveragedDriftProvider,
    bundle: &CoefficientBundle,
    x: &State,
    t: f64,
    anchors: &[f64],
    quad_step: f64,
) -> Result<(State, BohrMeanReport)> {
    let bound = provider.bind(bundle)?;
    let r = if provider.mode() == ProviderMode::OracleLinear {
        // Direct gains: the quadrature nodes are not worth caching.
        bohr_mean_fallible(
            &|s| Ok(super::provider::oracle_drift(bundle, s, &x.coeffs, &mean_gains(bundle, s)?)),
            t,
            anchors,
            quad_step,
        )?
    } else {
        bohr_mean_fallible(&|s| bound.eval(s, &x.coeffs), t, anchors, quad_step)?
    };
    Ok((State::new(r.value.clone()), r))
}

/// Closed-form limit drift of a linear-fast bundle,
/// `F̄(x)_k = x_gain·⟨m⟩·x_k + y_gain·a·⟨m·g_k⟩·x̃_k`, with `⟨·⟩` Bohr means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineLimitDrift {
    pub x_coef: f64,
    pub y_coef: Vec<f64>,
    pub tail_estimate: f64,
}

impl AffineLimitDrift {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.y_coef).map(|(xk, c)| (self.x_coef + c) * xk).collect()
    }
}

impl MeanDrift for AffineLimitDrift {
    fn eval(&self, _tau: f64, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.apply(x))
    }
}

/// Builds [`AffineLimitDrift`] from Bohr means of the modulation and the mean gains.
pub fn affine_limit_drift(
    bundle: &CoefficientBundle,
    t: f64,
    anchors: &[f64],
    quad_step: f64,
) -> Result<AffineLimitDrift> {
    if !bundle.is_linear_fast() {
        return Err(Error::UnsupportedBundle(format!(
            "closed-form limit drift needs a linear fast equation ({})",
            bundle.name
        )));
    }
    let m = &bundle.forcing.modulation;
    let shared = bundle.slow_dim.min(bundle.fast_dim);
    let r = bohr_mean_fallible(
        &|s| {
            let ms = m.value(s);
            let mut v = vec![ms];
            if bundle.forcing.depends_on_y() {
                v.extend(mean_gains(bundle, s)?.into_iter().take(shared).map(|g| ms * g));
            }
            Ok(v)
        },
        t,
        anchors,
        quad_step,
    )?;
    let f = &bundle.forcing;
    let gains = transfer(&r.value[1..], bundle.slow_dim);
    Ok(AffineLimitDrift {
        x_coef: f.x_gain * r.value[0],
        y_coef: gains.iter().map(|g| f.y_gain * bundle.fast.coupling * g).collect(),
        tail_estimate: r.tail_estimate,
    })
}

/// Limit drift evaluated by a fresh Bohr quadrature at every query.
pub struct BohrLimitDrift<'a> {
    pub bound: BoundDrift<'a>,
    pub window_t: f64,
    pub anchors: Vec<f64>,
    pub quad_step: f64,
}

impl MeanDrift for BohrLimitDrift<'_> {
    fn eval(&self, _tau: f64, x: &[f64]) -> Result<Vec<f64>> {
        bohr_mean_fallible(&|s| self.bound.eval(s, x), self.window_t, &self.anchors, self.quad_step)
            .map(|r| r.value)
    }
}
