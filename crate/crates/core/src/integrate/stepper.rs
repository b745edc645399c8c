use super::solver::{solve_implicit, Nonlinear, PointwiseMap};
use super::{IntegratorConfig, Scheme, SeedRecord, DIVERGENCE_THRESHOLD};
use crate::coeffs::{CoefficientBundle, FastDrift, FastNoise, SlowDrift, SlowNoise};
use crate::error::{invalid, Error, Result};
use crate::spaces::{mix64, norm2, transfer, WienerCursor};

/// Noise readers for one path plus a running hash of the W¹ increments.
#[derive(Debug, Clone)]
pub struct StepNoise {
    pub slow: WienerCursor,
    pub fast: WienerCursor,
    checksum: u64,
}

impl StepNoise {
    pub fn new(seeds: &SeedRecord, slow_modes: usize, fast_modes: usize) -> Self {
        StepNoise {
            slow: seeds.slow_source(slow_modes).cursor(),
            fast: seeds.fast_source(fast_modes).cursor(),
            checksum: 0,
        }
    }

    pub fn checksum(&self) -> u64 {
        self.checksum
    }

    pub(crate) fn slow_increment(&mut self, s: f64, t: f64, out: &mut [f64]) -> Result<()> {
        self.slow.increment(s, t, out)?;
        for v in out.iter() {
            self.checksum = mix64(self.checksum ^ v.to_bits());
        }
        Ok(())
    }
}

/// Number of fast sub-steps per slow step: the smallest power of two with
/// `h / n ≤ factor·ε`.
pub fn fast_substeps(h: f64, eps: f64, factor: f64) -> usize {
    let n = (h / (factor * eps) * (1.0 - 1e-12)).ceil().max(1.0);
    (n as usize).next_power_of_two()
}

pub(crate) fn check_finite(v: &[f64]) -> Result<()> {
    let mut m = 0.0f64;
    for c in v {
        if !c.is_finite() {
            return Err(Error::Divergence { magnitude: f64::INFINITY });
        }
        m = m.max(c.abs());
    }
    if m > DIVERGENCE_THRESHOLD {
        return Err(Error::Divergence { magnitude: m });
    }
    Ok(())
}

/// One slow step with the forcing value `forcing` already evaluated at the left endpoint.
pub(crate) fn slow_step(
    slow: &SlowDrift,
    noise: &SlowNoise,
    tau: f64,
    h: f64,
    x: &[f64],
    forcing: &[f64],
    dw: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Vec<f64>> {
    let g = noise.eval(tau, x);
    let out = match cfg.scheme {
        Scheme::SemiImplicitEuler => {
            let ell = slow.modulation.value(tau);
            let diag: Vec<f64> = slow.shape.iter().map(|a| h * ell * a).collect();
            let mut rhs: Vec<f64> = x.iter().zip(forcing).map(|(a, f)| a + h * f).collect();
            for (k, (gk, w)) in g.iter().zip(dw).enumerate() {
                rhs[k] += gk * w;
            }
            let nl = slow.projector.as_ref().map(|p| Nonlinear {
                projector: p,
                coef: h * slow.cubic,
                map: PointwiseMap::Cube,
            });
            solve_implicit(&diag, nl.as_ref(), &rhs, cfg.newton_tol, cfg.newton_max_iter)?
        }
        Scheme::TamedEuler => {
            let drift: Vec<f64> = slow.eval(tau, x).iter().zip(forcing).map(|(a, f)| a + f).collect();
            let damp = 1.0 + h.powf(cfg.taming_power) * norm2(&drift);
            let mut out: Vec<f64> = x.iter().zip(&drift).map(|(a, d)| a + h * d / damp).collect();
            for (k, (gk, w)) in g.iter().zip(dw).enumerate() {
                out[k] += gk * w;
            }
            out
        }
    };
    check_finite(&out)?;
    Ok(out)
}

/// One fast sub-step of length `hf` for `dY = ε⁻¹B dt + ε^{-1/2} G2 dW`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn fast_substep(
    fast: &FastDrift,
    noise: &FastNoise,
    eps: f64,
    tau: f64,
    hf: f64,
    x: &[f64],
    y: &[f64],
    dw: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Vec<f64>> {
    let g = noise.eval(tau, x, y);
    let scale = eps.sqrt().recip();
    let out = match cfg.scheme {
        Scheme::SemiImplicitEuler => {
            let r = hf / eps;
            let phi = fast.phi.value(tau);
            let diag: Vec<f64> = fast.rates.iter().map(|l| r * (l - phi)).collect();
            let xt = transfer(x, fast.dim());
            let mut rhs: Vec<f64> = y
                .iter()
                .zip(&xt)
                .map(|(a, b)| a + r * fast.coupling * b)
                .collect();
            for (k, (gk, w)) in g.iter().zip(dw).enumerate() {
                rhs[k] += scale * gk * w;
            }
            let nl = fast.projector.as_ref().map(|p| Nonlinear {
                projector: p,
                coef: r * fast.absorption,
                map: PointwiseMap::AbsSquare,
            });
            solve_implicit(&diag, nl.as_ref(), &rhs, cfg.newton_tol, cfg.newton_max_iter)?
        }
        Scheme::TamedEuler => {
            let drift: Vec<f64> = fast.eval(tau, x, y).iter().map(|b| b / eps).collect();
            let damp = 1.0 + hf.powf(cfg.taming_power) * norm2(&drift);
            let mut out: Vec<f64> = y.iter().zip(&drift).map(|(a, d)| a + hf * d / damp).collect();
            for (k, (gk, w)) in g.iter().zip(dw).enumerate() {
                out[k] += scale * gk * w;
            }
            out
        }
    };
    check_finite(&out)?;
    Ok(out)
}

/// Advances the fast state from `t` to `t_next` (physical time) with the slow input held
/// at `x`, sub-cycling as configured.
#[allow(clippy::too_many_arguments)]
pub(crate) fn fast_advance(
    bundle: &CoefficientBundle,
    eps: f64,
    t: f64,
    t_next: f64,
    x: &[f64],
    y: Vec<f64>,
    cursor: &mut WienerCursor,
    dw: &mut [f64],
    cfg: &IntegratorConfig,
) -> Result<Vec<f64>> {
    let n = fast_substeps(t_next - t, eps, cfg.h_fast_factor);
    let hf = (t_next - t) / n as f64;
    let mut y = y;
    for j in 0..n {
        let a = t + j as f64 * hf;
        let b = if j + 1 == n { t_next } else { t + (j + 1) as f64 * hf };
        cursor.increment(a, b, dw)?;
        y = fast_substep(&bundle.fast, &bundle.fast_noise, eps, a / eps, b - a, x, &y, dw, cfg)?;
    }
    Ok(y)
}

/// One step of the coupled system over `[t, t + h]`. Both components read the state at `t`.
#[allow(clippy::too_many_arguments)]
pub fn step_coupled(
    bundle: &CoefficientBundle,
    eps: f64,
    x: &[f64],
    y: &[f64],
    t: f64,
    h: f64,
    noise: &mut StepNoise,
    cfg: &IntegratorConfig,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_eps(eps)?;
    if !(h > 0.0) {
        return Err(invalid("step must be positive"));
    }
    if x.len() != bundle.slow_dim || y.len() != bundle.fast_dim {
        return Err(invalid("state dimensions do not match the bundle"));
    }
    coupled_step(bundle, eps, x, y, t, t + h, noise, cfg)
}

pub(crate) fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(invalid(format!("epsilon must lie in (0, 1], got {eps}")));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn coupled_step(
    bundle: &CoefficientBundle,
    eps: f64,
    x: &[f64],
    y: &[f64],
    t: f64,
    t_next: f64,
    noise: &mut StepNoise,
    cfg: &IntegratorConfig,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let tau = t / eps;
    let mut dw1 = vec![0.0; bundle.slow_noise.modes];
    noise.slow_increment(t, t_next, &mut dw1)?;
    let forcing = bundle.f(tau, x, y);
    let x_new = slow_step(&bundle.slow, &bundle.slow_noise, tau, t_next - t, x, &forcing, &dw1, cfg)
        .map_err(|e| e.at_time(t))?;
    let mut dw2 = vec![0.0; bundle.fast_noise.modes];
    let y_new = fast_advance(bundle, eps, t, t_next, x, y.to_vec(), &mut noise.fast, &mut dw2, cfg)
        .map_err(|e| e.at_time(t))?;
    Ok((x_new, y_new))
}
