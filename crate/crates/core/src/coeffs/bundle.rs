use serde::{Deserialize, Serialize};

use super::profile::ConditionProfile;
use super::time_profile::TimeProfile;
use crate::spaces::{transfer, Projector};

/// Slow drift `A(t,u) = −ℓ1(t)·shape⊙u − cubic·P((Φu)³)`.
#[derive(Debug, Clone)]
pub struct SlowDrift {
    pub shape: Vec<f64>,
    pub modulation: TimeProfile,
    pub cubic: f64,
    pub projector: Option<Projector>,
}

impl SlowDrift {
    pub fn eval(&self, t: f64, u: &[f64]) -> Vec<f64> {
        self.eval_scaled(self.modulation.value(t), u)
    }

    pub(crate) fn eval_scaled(&self, ell: f64, u: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = u.iter().zip(&self.shape).map(|(c, a)| -ell * a * c).collect();
        if let (true, Some(p)) = (self.cubic != 0.0, &self.projector) {
            let nl = p.apply_pointwise(u, |v| v * v * v);
            out.iter_mut().zip(nl).for_each(|(o, n)| *o -= self.cubic * n);
        }
        out
    }

    /// Autonomous operator with the modulation replaced by its limit.
    pub fn with_constant_modulation(&self, ell: f64) -> SlowDrift {
        SlowDrift {
            modulation: TimeProfile::constant(ell),
            ..self.clone()
        }
    }

    pub fn is_linear(&self) -> bool {
        self.cubic == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum YMap {
    Linear,
    Tanh,
}

/// Slow forcing `F(t,x,y) = m(t)·(x_gain·x + y_gain·map(ỹ))`, `ỹ` the fast state carried
/// over mode-by-mode into the slow space.
#[derive(Debug, Clone)]
pub struct Forcing {
    pub modulation: TimeProfile,
    pub x_gain: f64,
    pub y_gain: f64,
    pub y_map: YMap,
    pub slow_dim: usize,
}

impl Forcing {
    pub fn eval(&self, t: f64, x: &[f64], y: &[f64]) -> Vec<f64> {
        let m = self.modulation.value(t);
        let yt = transfer(y, self.slow_dim);
        x.iter()
            .zip(yt)
            .map(|(xk, yk)| {
                let my = match self.y_map {
                    YMap::Linear => yk,
                    YMap::Tanh => yk.tanh(),
                };
                m * (self.x_gain * xk + self.y_gain * my)
            })
            .collect()
    }

    /// `F` evaluated with the fast argument replaced by a mean vector (exact when the
    /// map is linear).
    pub fn eval_at_mean(&self, t: f64, x: &[f64], y_mean: &[f64]) -> Vec<f64> {
        self.eval(t, x, y_mean)
    }

    pub fn depends_on_y(&self) -> bool {
        self.y_gain != 0.0
    }
}

/// Diagonal slow diffusion `G1(t,x) e_k = ℓ2(t)·(multiplicative·x_k + additive) e_k`.
#[derive(Debug, Clone)]
pub struct SlowNoise {
    pub modulation: TimeProfile,
    pub multiplicative: f64,
    pub additive: f64,
    pub modes: usize,
}

impl SlowNoise {
    pub fn eval(&self, t: f64, x: &[f64]) -> Vec<f64> {
        self.eval_scaled(self.modulation.value(t), x)
    }

    pub(crate) fn eval_scaled(&self, ell: f64, x: &[f64]) -> Vec<f64> {
        x[..self.modes]
            .iter()
            .map(|xk| ell * (self.multiplicative * xk + self.additive))
            .collect()
    }

    pub fn with_constant_modulation(&self, ell: f64) -> SlowNoise {
        SlowNoise {
            modulation: TimeProfile::constant(ell),
            ..self.clone()
        }
    }
}

/// Fast drift `B(t,x,y) = (−λ + φ(t))⊙y + coupling·x̃ − absorption·P(|Φy|Φy)`.
#[derive(Debug, Clone)]
pub struct FastDrift {
    pub rates: Vec<f64>,
    pub phi: TimeProfile,
    pub coupling: f64,
    pub absorption: f64,
    pub projector: Option<Projector>,
}

impl FastDrift {
    pub fn dim(&self) -> usize {
        self.rates.len()
    }

    pub fn eval(&self, t: f64, x: &[f64], y: &[f64]) -> Vec<f64> {
        let phi = self.phi.value(t);
        let xt = transfer(x, self.dim());
        let mut out: Vec<f64> = y
            .iter()
            .zip(&self.rates)
            .zip(xt)
            .map(|((yk, l), xk)| (phi - l) * yk + self.coupling * xk)
            .collect();
        if let (true, Some(p)) = (self.absorption != 0.0, &self.projector) {
            let nl = p.apply_pointwise(y, |v| v.abs() * v);
            out.iter_mut().zip(nl).for_each(|(o, n)| *o -= self.absorption * n);
        }
        out
    }

    pub fn is_linear(&self) -> bool {
        self.absorption == 0.0
    }
}

/// Diagonal fast diffusion `G2(t,x,y) e_k = (multiplicative·y_k + additive) e_k`.
#[derive(Debug, Clone)]
pub struct FastNoise {
    pub multiplicative: f64,
    pub additive: f64,
    pub modes: usize,
}

impl FastNoise {
    pub fn eval(&self, _t: f64, _x: &[f64], y: &[f64]) -> Vec<f64> {
        y[..self.modes]
            .iter()
            .map(|yk| self.multiplicative * yk + self.additive)
            .collect()
    }
}

/// Almost-periodic structure and asymptotic limits of the modulations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApMetadata {
    pub ell1_limit: f64,
    pub ell2_limit: f64,
    pub phi_frequencies: Vec<f64>,
    pub forcing_frequencies: Vec<f64>,
}

/// The coefficient set `(A, F, G1, B, G2)` of a slow-fast system.
#[derive(Debug, Clone)]
pub struct CoefficientBundle {
    pub name: String,
    pub slow_dim: usize,
    pub fast_dim: usize,
    pub slow: SlowDrift,
    pub forcing: Forcing,
    pub slow_noise: SlowNoise,
    pub fast: FastDrift,
    pub fast_noise: FastNoise,
    pub profile: ConditionProfile,
    pub ap: Option<ApMetadata>,
}

impl CoefficientBundle {
    pub fn a(&self, t: f64, u: &[f64]) -> Vec<f64> {
        self.slow.eval(t, u)
    }

    pub fn f(&self, t: f64, x: &[f64], y: &[f64]) -> Vec<f64> {
        self.forcing.eval(t, x, y)
    }

    pub fn g1(&self, t: f64, x: &[f64]) -> Vec<f64> {
        self.slow_noise.eval(t, x)
    }

    pub fn b(&self, t: f64, x: &[f64], y: &[f64]) -> Vec<f64> {
        self.fast.eval(t, x, y)
    }

    pub fn g2(&self, t: f64, x: &[f64], y: &[f64]) -> Vec<f64> {
        self.fast_noise.eval(t, x, y)
    }

    /// Linear fast dynamics with a forcing affine in `y`: the frozen-equation mean solves
    /// a closed linear ODE.
    pub fn is_linear_fast(&self) -> bool {
        self.fast.is_linear() && (self.forcing.y_map == YMap::Linear || !self.forcing.depends_on_y())
    }

    pub fn is_autonomous(&self) -> bool {
        self.slow.modulation.is_constant()
            && self.slow_noise.modulation.is_constant()
            && self.fast.phi.is_constant()
            && self.forcing.modulation.is_constant()
    }

    /// Same bundle with different fast-to-slow and slow-to-fast couplings.
    pub fn with_couplings(&self, fast_coupling: f64, y_gain: f64) -> CoefficientBundle {
        let mut b = self.clone();
        b.fast.coupling = fast_coupling;
        b.forcing.y_gain = y_gain;
        b
    }
}
