use crate::coeffs::{ApMetadata, CoefficientBundle, SlowDrift, SlowNoise};
use crate::error::{invalid, Error, Result};
use crate::spaces::{GalerkinSpace, Norm, State};

fn metadata(bundle: &CoefficientBundle) -> Result<&ApMetadata> {
    bundle.ap.as_ref().ok_or_else(|| {
        Error::UnsupportedBundle(format!("{} carries no almost-periodic limit data", bundle.name))
    })
}

/// `Ā = ℓ̄1·A_shape` and `max_probe ‖A(t_probe, x) − Ā(x)‖_{V*}`.
pub fn asymptotic_a(
    bundle: &CoefficientBundle,
    space: &GalerkinSpace,
    probes: &[State],
    t_probe: f64,
) -> Result<(SlowDrift, f64)> {
    let limit = bundle.slow.with_constant_modulation(metadata(bundle)?.ell1_limit);
    let mut residual: f64 = 0.0;
    for x in probes {
        let diff: Vec<f64> = bundle
            .a(t_probe, &x.coeffs)
            .iter()
            .zip(limit.eval(t_probe, &x.coeffs))
            .map(|(a, b)| a - b)
            .collect();
        residual = residual.max(space.norm(&diff, Norm::VStar)?);
    }
    Ok((limit, residual))
}

/// `Ḡ1 = ℓ̄2·G1_shape` and `max_anchor T⁻¹∫_a^{a+T} ‖G1(s,x) − Ḡ1(x)‖² ds` (trapezoidal).
pub fn time_avg_g1(
    bundle: &CoefficientBundle,
    x: &State,
    t: f64,
    anchors: &[f64],
    quad_step: f64,
) -> Result<(SlowNoise, f64)> {
    let limit = bundle.slow_noise.with_constant_modulation(metadata(bundle)?.ell2_limit);
    if !(t > 0.0) || !(quad_step > 0.0) || anchors.is_empty() {
        return Err(invalid("time_avg_g1 needs T > 0, quad_step > 0 and anchors"));
    }
    let n = (t / quad_step).ceil() as usize;
    let h = t / n as f64;
    let sq = |s: f64| -> f64 {
        bundle
            .g1(s, &x.coeffs)
            .iter()
            .zip(limit.eval(s, &x.coeffs))
            .map(|(a, b)| (a - b).powi(2))
            .sum()
    };
    let deviation = anchors
        .iter()
        .map(|&a| {
            let inner: f64 = (1..n).map(|i| sq(a + i as f64 * h)).sum();
            (inner + 0.5 * (sq(a) + sq(a + t))) * h / t
        })
        .fold(0.0, f64::max);
    Ok((limit, deviation))
}
