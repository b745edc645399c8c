use serde::{Deserialize, Serialize};

use super::bundle::{
    ApMetadata, CoefficientBundle, FastDrift, FastNoise, Forcing, SlowDrift, SlowNoise, YMap,
};
use super::profile::ConditionProfile;
use super::time_profile::TimeProfile;
use crate::error::{Error, Result};
use crate::spaces::GalerkinSpace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExampleKind {
    /// Slow `−ℓ1(t)Δ²u + F`, fast linear heat equation with multiplicative noise.
    #[serde(rename = "cahn_hilliard_heat_1d")]
    CahnHilliardHeat1d,
    /// Slow `ℓ1(t)Δu − u³ + F` with additive noise, fast linear heat equation.
    #[serde(rename = "reaction_diffusion_1d")]
    ReactionDiffusion1d,
    /// Slow heat equation, fast heat equation with a monotone `−|v|v` absorption.
    #[serde(rename = "porous_fast_1d")]
    PorousFast1d,
}

impl ExampleKind {
    pub fn name(self) -> &'static str {
        match self {
            ExampleKind::CahnHilliardHeat1d => "cahn_hilliard_heat_1d",
            ExampleKind::ReactionDiffusion1d => "reaction_diffusion_1d",
            ExampleKind::PorousFast1d => "porous_fast_1d",
        }
    }

    pub fn all() -> [ExampleKind; 3] {
        [
            ExampleKind::CahnHilliardHeat1d,
            ExampleKind::ReactionDiffusion1d,
            ExampleKind::PorousFast1d,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftSpec {
    pub x_gain: f64,
    pub y_gain: f64,
    pub y_map: YMap,
    pub modulation: TimeProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExampleParams {
    pub ell1: TimeProfile,
    pub ell2: TimeProfile,
    pub phi: TimeProfile,
    pub c: f64,
    pub a_coupling: f64,
    pub drift: DriftSpec,
    pub cubic: f64,
    pub absorption: f64,
    pub slow_additive: f64,
    pub slow_multiplicative: f64,
    pub fast_additive: f64,
    /// Noise truncation; `None` uses the full space dimension.
    pub slow_noise_modes: Option<usize>,
    pub fast_noise_modes: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleSystem {
    pub kind: ExampleKind,
    pub params: ExampleParams,
}

impl ExampleSystem {
    pub fn new(kind: ExampleKind) -> Self {
        let linear_drift = DriftSpec {
            x_gain: 0.0,
            y_gain: 1.0,
            y_map: YMap::Linear,
            modulation: TimeProfile::constant(1.0),
        };
        let params = match kind {
            ExampleKind::CahnHilliardHeat1d => ExampleParams {
                ell1: TimeProfile::xi(1.0, 1.0),
                ell2: TimeProfile::xi(1.0, 1.0),
                phi: TimeProfile::sine(1.0, 1.0),
                c: 0.3,
                a_coupling: 1.0,
                drift: linear_drift,
                cubic: 0.0,
                absorption: 0.0,
                slow_additive: 0.0,
                slow_multiplicative: 1.0,
                fast_additive: 0.0,
                slow_noise_modes: None,
                fast_noise_modes: None,
            },
            ExampleKind::ReactionDiffusion1d => ExampleParams {
                ell1: TimeProfile::constant(1.0),
                ell2: TimeProfile::constant(1.0),
                phi: TimeProfile::sine(0.5, 2f64.sqrt()),
                c: 0.5,
                a_coupling: 1.0,
                drift: DriftSpec {
                    x_gain: -0.5,
                    y_gain: 1.0,
                    y_map: YMap::Tanh,
                    modulation: TimeProfile::constant(1.0),
                },
                cubic: 1.0,
                absorption: 0.0,
                slow_additive: 0.5,
                slow_multiplicative: 0.0,
                fast_additive: 0.0,
                slow_noise_modes: None,
                fast_noise_modes: None,
            },
            ExampleKind::PorousFast1d => ExampleParams {
                ell1: TimeProfile::constant(1.0),
                ell2: TimeProfile::constant(0.5),
                phi: TimeProfile::sine(1.0, 1.0),
                c: 0.2,
                a_coupling: 1.0,
                drift: linear_drift,
                cubic: 0.0,
                absorption: 1.0,
                slow_additive: 0.0,
                slow_multiplicative: 1.0,
                fast_additive: 0.5,
                slow_noise_modes: None,
                fast_noise_modes: None,
            },
        };
        ExampleSystem { kind, params }
    }

    /// Exponent of the slow operator relative to the spectrum (2 for `Δ²`, 1 for `Δ`).
    pub fn slow_order(&self) -> i32 {
        match self.kind {
            ExampleKind::CahnHilliardHeat1d => 2,
            _ => 1,
        }
    }
}

/// Realizes a built-in system on the given spaces and derives its condition profile.
pub fn build_system(
    example: &ExampleSystem,
    slow_space: &GalerkinSpace,
    fast_space: &GalerkinSpace,
) -> Result<CoefficientBundle> {
    let p = &example.params;
    p.ell1.validate("ell1")?;
    p.ell2.validate("ell2")?;
    p.phi.validate("phi")?;
    p.drift.modulation.validate("drift.modulation")?;
    let reject = |msg: String| Err(Error::ConfigurationRejected(msg));
    if !(p.ell1.inf() > 0.0) {
        return reject(format!("ell1 must stay positive, inf = {}", p.ell1.inf()));
    }
    if !(p.ell2.inf() >= 0.0) {
        return reject(format!("ell2 must be nonnegative, inf = {}", p.ell2.inf()));
    }
    for (name, v) in [
        ("c", p.c),
        ("a_coupling", p.a_coupling),
        ("cubic", p.cubic),
        ("absorption", p.absorption),
        ("slow_additive", p.slow_additive),
        ("slow_multiplicative", p.slow_multiplicative),
        ("fast_additive", p.fast_additive),
        ("drift.x_gain", p.drift.x_gain),
        ("drift.y_gain", p.drift.y_gain),
    ] {
        if !v.is_finite() {
            return reject(format!("{name} must be finite"));
        }
    }
    if p.cubic < 0.0 || p.absorption < 0.0 {
        return reject("cubic and absorption coefficients must be >= 0".into());
    }
    let lambda_star = fast_space.first_eigenvalue();
    let lhs = p.phi.sup_abs() + p.c * p.c / 2.0;
    if !(lhs < lambda_star) {
        return reject(format!(
            "phi_sup + c^2/2 must be < lambda_star ({lambda_star:.4}), got {lhs:?}"
        ));
    }
    let slow_modes = p.slow_noise_modes.unwrap_or(slow_space.dim);
    let fast_modes = p.fast_noise_modes.unwrap_or(fast_space.dim);
    if slow_modes == 0 || slow_modes > slow_space.dim {
        return reject(format!("slow noise modes must be in 1..={}", slow_space.dim));
    }
    if fast_modes == 0 || fast_modes > fast_space.dim {
        return reject(format!("fast noise modes must be in 1..={}", fast_space.dim));
    }

    let order = example.slow_order();
    let shape: Vec<f64> = slow_space.eigenvalues.iter().map(|l| l.powi(order)).collect();
    let slow = SlowDrift {
        shape,
        modulation: p.ell1.clone(),
        cubic: p.cubic,
        projector: (p.cubic != 0.0).then(|| slow_space.projector()),
    };
    let forcing = Forcing {
        modulation: p.drift.modulation.clone(),
        x_gain: p.drift.x_gain,
        y_gain: p.drift.y_gain,
        y_map: p.drift.y_map,
        slow_dim: slow_space.dim,
    };
    let slow_noise = SlowNoise {
        modulation: p.ell2.clone(),
        multiplicative: p.slow_multiplicative,
        additive: p.slow_additive,
        modes: slow_modes,
    };
    let fast = FastDrift {
        rates: fast_space.eigenvalues.clone(),
        phi: p.phi.clone(),
        coupling: p.a_coupling,
        absorption: p.absorption,
        projector: (p.absorption != 0.0).then(|| fast_space.projector()),
    };
    let fast_noise = FastNoise {
        multiplicative: p.c,
        additive: p.fast_additive,
        modes: fast_modes,
    };

    let ap = match (p.ell1.limit(), p.ell2.limit()) {
        (Some(l1), Some(l2))
            if p.phi.is_almost_periodic() && p.drift.modulation.is_almost_periodic() =>
        {
            Some(ApMetadata {
                ell1_limit: l1,
                ell2_limit: l2,
                phi_frequencies: p.phi.frequencies(),
                forcing_frequencies: p.drift.modulation.frequencies(),
            })
        }
        _ => None,
    };

    let mut bundle = CoefficientBundle {
        name: example.kind.name().to_string(),
        slow_dim: slow_space.dim,
        fast_dim: fast_space.dim,
        slow,
        forcing,
        slow_noise,
        fast,
        fast_noise,
        profile: placeholder_profile(),
        ap,
    };
    bundle.profile = derive_profile(&bundle, slow_space, fast_space);
    bundle.profile.validate()?;
    Ok(bundle)
}

fn placeholder_profile() -> ConditionProfile {
    ConditionProfile {
        alpha: 2.0,
        beta: 0.0,
        theta: 1.0,
        kappa: 2.0,
        gamma: 1.0,
        eta: 1.0,
        zeta: 0.5,
        lip_f: 0.0,
        lip_g1: 0.0,
        generic_c: 1.0,
    }
}

/// Largest fast state norm the growth envelope of `G2` is calibrated for.
pub const GROWTH_STATE_RADIUS: f64 = 100.0;

/// Constants for which the structural inequalities hold on the truncated system.
///
/// The strong-monotonicity rate of the linear fast part is
/// `r = 2λ_1 − 2 sup φ − c²`; half of it is kept as `γ` so the cross term
/// `2a⟨Δx, Δy⟩` can be absorbed by Young's inequality with `C ≥ 2a²/r`.
pub fn derive_profile(
    bundle: &CoefficientBundle,
    slow_space: &GalerkinSpace,
    fast_space: &GalerkinSpace,
) -> ConditionProfile {
    let slow = &bundle.slow;
    let fast = &bundle.fast;
    let s1 = slow_space.v_exponent;
    let s2 = fast_space.v_exponent;

    let ratio = slow
        .shape
        .iter()
        .zip(&slow_space.eigenvalues)
        .map(|(a, l)| a / l.powf(s1))
        .fold(f64::INFINITY, f64::min);
    let theta = 0.5 * slow.modulation.inf() * ratio;

    let lambda1 = fast_space.first_eigenvalue();
    let c = bundle.fast_noise.multiplicative;
    let phi_abs = fast.phi.sup_abs();
    let rate = 2.0 * lambda1 - 2.0 * phi_abs - c * c;
    let gamma = 0.5 * rate;
    let kappa = if fast.is_linear() { 2.0 } else { 3.0 };

    let m_sup = bundle.forcing.modulation.sup_abs();
    let lip_f = m_sup * (bundle.forcing.x_gain.abs() + bundle.forcing.y_gain.abs());
    let l2_sup = bundle.slow_noise.modulation.sup_abs();
    let lip_g1 = l2_sup * bundle.slow_noise.multiplicative.abs();

    let mut needed: Vec<f64> = vec![1.0, lip_f, lip_g1];
    // Young absorption of the cross term 2a<dx, dy> into half the fast rate.
    needed.push(2.0 * fast.coupling * fast.coupling / rate);
    let k1 = bundle.slow_noise.modes as f64;
    needed.push(l2_sup * bundle.slow_noise.additive.abs() * k1.sqrt() + lip_g1);
    // Slow growth: |Φu|_∞ ≤ √(2n)‖u‖_H bounds the cubic term by 4 n^{3/2} ‖u‖_H³.
    let l1_sup = slow.modulation.sup_abs();
    let n1 = slow_space.dim as f64;
    let s_slow: f64 = slow_space.eigenvalues.iter().map(|l| l.powf(-s1)).sum();
    let cubic_c = slow.cubic * 4.0 * n1.powf(1.5) * s_slow.sqrt();
    let shape_ratio = slow
        .shape
        .iter()
        .zip(&slow_space.eigenvalues)
        .map(|(a, l)| a / l.powf(s1))
        .fold(0.0, f64::max);
    needed.push(2.0 * (l1_sup * l1_sup * shape_ratio * shape_ratio + cubic_c * cubic_c / slow_space.first_eigenvalue().powf(s1)));
    // Fast growth in V*: linear part, coupling, and |Φv|_∞² ≤ 2 S ‖v‖_V² for the absorption.
    let c_lin = fast
        .rates
        .iter()
        .map(|l| (l + phi_abs) * l.powf(-s2))
        .fold(0.0, f64::max);
    let c_cpl = fast.coupling.abs() * lambda1.powf(-s2 / 2.0);
    let s_fast: f64 = fast.rates.iter().map(|l| l.powf(-s2)).sum();
    let c_abs = fast.absorption * 2.0 * 2f64.sqrt() * s_fast.powf(1.5);
    needed.push(c_lin + c_cpl + c_abs);
    // Linear G2 obeys the sublinear bound only on ‖v‖_H ≤ GROWTH_STATE_RADIUS.
    let zeta = 0.5;
    let k2 = bundle.fast_noise.modes as f64;
    needed.push(
        c.abs() * GROWTH_STATE_RADIUS.powf(1.0 - zeta) + bundle.fast_noise.additive.abs() * k2.sqrt(),
    );
    let generic_c = 1.25 * needed.into_iter().fold(0.0, f64::max);

    ConditionProfile {
        alpha: 2.0,
        beta: if slow.is_linear() { 0.0 } else { 4.0 },
        theta,
        kappa,
        gamma,
        eta: 0.5 * lambda1.powf(1.0 - s2).min(1.0),
        zeta,
        lip_f,
        lip_g1,
        generic_c,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::{GalerkinSpace, OperatorKind};

    fn spaces() -> (GalerkinSpace, GalerkinSpace) {
        (
            GalerkinSpace::new(8, OperatorKind::NeumannLaplacian1d, 2.0, 1.0).unwrap(),
            GalerkinSpace::new(8, OperatorKind::DirichletLaplacian1d, 1.0, 1.0).unwrap(),
        )
    }

    #[test]
    fn eigenvalue_constraint() {
        let (s, f) = spaces();
        let mut ex = ExampleSystem::new(ExampleKind::CahnHilliardHeat1d);
        ex.params.phi = TimeProfile::sine(4.0, 1.0);
        ex.params.c = 3.0;
        assert!(build_system(&ex, &s, &f).is_ok(), "8.5 < pi^2 must be accepted");
        ex.params.c = 4.0;
        let err = build_system(&ex, &s, &f).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("phi_sup + c^2/2 must be < lambda_star (9.8696), got 12.0"), "{msg}");
    }

    #[test]
    fn xi_limits_recorded() {
        let (s, f) = spaces();
        let b = build_system(&ExampleSystem::new(ExampleKind::CahnHilliardHeat1d), &s, &f).unwrap();
        let ap = b.ap.as_ref().unwrap();
        assert_eq!(ap.ell1_limit, 1.0);
        assert_eq!(ap.ell2_limit, 1.0);
        assert_eq!(ap.phi_frequencies, vec![1.0]);
    }

    #[test]
    fn decoupled_fast_relaxes_towards_x_over_lambda() {
        let (s, f) = spaces();
        let mut ex = ExampleSystem::new(ExampleKind::CahnHilliardHeat1d);
        ex.params.phi = TimeProfile::constant(0.0);
        ex.params.c = 0.0;
        let b = build_system(&ex, &s, &f).unwrap();
        let x: Vec<f64> = (0..8).map(|k| 1.0 + k as f64).collect();
        let fixed: Vec<f64> = x.iter().zip(&f.eigenvalues).map(|(a, l)| a / l).collect();
        let drift = b.b(0.3, &x, &fixed);
        assert!(drift.iter().all(|d| d.abs() < 1e-12));
        assert!(b.g2(0.0, &x, &fixed).iter().all(|g| *g == 0.0));
    }

    #[test]
    fn g1_does_not_see_fast_state() {
        let (s, f) = spaces();
        for kind in ExampleKind::all() {
            let b = build_system(&ExampleSystem::new(kind), &s, &f).unwrap();
            let x = vec![0.3; 8];
            // G1 has no fast argument at all; two evaluations at the same slow state agree.
            assert_eq!(b.g1(1.7, &x), b.g1(1.7, &x));
        }
    }

    #[test]
    fn all_builtins_have_valid_profiles() {
        let (s, f) = spaces();
        for kind in ExampleKind::all() {
            let b = build_system(&ExampleSystem::new(kind), &s, &f).unwrap();
            b.profile.validate().unwrap();
            assert!(b.profile.gamma > 0.0);
        }
    }
}
