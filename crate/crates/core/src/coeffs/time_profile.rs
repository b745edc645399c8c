use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// One term `amplitude · sin(frequency · t + phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigTerm {
    pub amplitude: f64,
    pub frequency: f64,
    #[serde(default)]
    pub phase: f64,
}

/// Scalar time modulation used by the built-in coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeProfile {
    Constant { value: f64 },
    /// `1/(1 + |t|^iota) + offset`, converging to `offset` as `t → ∞`.
    Xi { iota: f64, offset: f64 },
    /// `offset + Σ amplitude · sin(frequency · t + phase)`; almost periodic.
    Trig {
        #[serde(default)]
        offset: f64,
        terms: Vec<TrigTerm>,
    },
}

impl TimeProfile {
    pub fn constant(value: f64) -> Self {
        TimeProfile::Constant { value }
    }

    pub fn xi(iota: f64, offset: f64) -> Self {
        TimeProfile::Xi { iota, offset }
    }

    pub fn sine(amplitude: f64, frequency: f64) -> Self {
        TimeProfile::Trig {
            offset: 0.0,
            terms: vec![TrigTerm {
                amplitude,
                frequency,
                phase: 0.0,
            }],
        }
    }

    pub fn validate(&self, what: &str) -> Result<()> {
        let finite = |v: f64| v.is_finite();
        match self {
            TimeProfile::Constant { value } if !finite(*value) => {
                Err(invalid(format!("{what}: constant must be finite")))
            }
            TimeProfile::Xi { iota, offset } => {
                if !(*iota > 0.0) || !finite(*iota) {
                    return Err(invalid(format!("{what}: xi profile needs iota > 0")));
                }
                if !(*offset > 0.0) || !finite(*offset) {
                    return Err(invalid(format!("{what}: xi profile needs a positive limit (offset)")));
                }
                Ok(())
            }
            TimeProfile::Trig { offset, terms } => {
                if !finite(*offset)
                    || terms
                        .iter()
                        .any(|t| !(finite(t.amplitude) && finite(t.frequency) && finite(t.phase)))
                {
                    return Err(invalid(format!("{what}: trig profile entries must be finite")));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    #[inline]
    pub fn value(&self, t: f64) -> f64 {
        match self {
            TimeProfile::Constant { value } => *value,
            TimeProfile::Xi { iota, offset } => 1.0 / (1.0 + t.abs().powf(*iota)) + offset,
            TimeProfile::Trig { offset, terms } => {
                offset
                    + terms
                        .iter()
                        .map(|s| s.amplitude * (s.frequency * t + s.phase).sin())
                        .sum::<f64>()
            }
        }
    }

    /// Upper bound on `sup_t |value(t)|` (exact for a single sine or a constant).
    pub fn sup_abs(&self) -> f64 {
        match self {
            TimeProfile::Constant { value } => value.abs(),
            TimeProfile::Xi { offset, .. } => (1.0 + offset).abs().max(offset.abs()),
            TimeProfile::Trig { offset, terms } => {
                offset.abs() + terms.iter().map(|s| s.amplitude.abs()).sum::<f64>()
            }
        }
    }

    /// Upper bound on `sup_t value(t)`.
    pub fn sup(&self) -> f64 {
        match self {
            TimeProfile::Constant { value } => *value,
            TimeProfile::Xi { offset, .. } => 1.0 + offset,
            TimeProfile::Trig { offset, terms } => {
                offset + terms.iter().map(|s| s.amplitude.abs()).sum::<f64>()
            }
        }
    }

    /// Lower bound on `inf_t value(t)`.
    pub fn inf(&self) -> f64 {
        match self {
            TimeProfile::Constant { value } => *value,
            TimeProfile::Xi { offset, .. } => *offset,
            TimeProfile::Trig { offset, terms } => {
                offset - terms.iter().map(|s| s.amplitude.abs()).sum::<f64>()
            }
        }
    }

    /// `lim_{t→∞} value(t)` when it exists.
    pub fn limit(&self) -> Option<f64> {
        match self {
            TimeProfile::Constant { value } => Some(*value),
            TimeProfile::Xi { offset, .. } => Some(*offset),
            TimeProfile::Trig { .. } if self.is_constant() => Some(self.value(0.0)),
            TimeProfile::Trig { .. } => None,
        }
    }

    /// Bohr mean `lim T⁻¹∫_t^{t+T} value`, in closed form.
    pub fn mean(&self) -> f64 {
        match self {
            TimeProfile::Constant { value } => *value,
            TimeProfile::Xi { offset, .. } => *offset,
            TimeProfile::Trig { offset, terms } => {
                offset
                    + terms
                        .iter()
                        .filter(|s| s.frequency == 0.0)
                        .map(|s| s.amplitude * s.phase.sin())
                        .sum::<f64>()
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            TimeProfile::Constant { .. } => true,
            TimeProfile::Xi { .. } => false,
            TimeProfile::Trig { terms, .. } => {
                terms.iter().all(|s| s.amplitude == 0.0 || s.frequency == 0.0)
            }
        }
    }

    /// True for constants and trigonometric polynomials.
    pub fn is_almost_periodic(&self) -> bool {
        !matches!(self, TimeProfile::Xi { .. })
    }

    pub fn frequencies(&self) -> Vec<f64> {
        match self {
            TimeProfile::Trig { terms, .. } => terms
                .iter()
                .filter(|s| s.frequency != 0.0 && s.amplitude != 0.0)
                .map(|s| s.frequency.abs())
                .collect(),
            _ => Vec::new(),
        }
    }

    /// An antiderivative `Φ` with `Φ' = value`, when available in closed form.
    pub fn antiderivative(&self, t: f64) -> Option<f64> {
        match self {
            TimeProfile::Constant { value } => Some(value * t),
            TimeProfile::Xi { iota, offset } if *iota == 1.0 => {
                Some(t.signum() * t.abs().ln_1p() + offset * t)
            }
            TimeProfile::Xi { .. } => None,
            TimeProfile::Trig { offset, terms } => Some(
                offset * t
                    + terms
                        .iter()
                        .map(|s| {
                            if s.frequency == 0.0 {
                                s.amplitude * s.phase.sin() * t
                            } else {
                                -s.amplitude / s.frequency * (s.frequency * t + s.phase).cos()
                            }
                        })
                        .sum::<f64>(),
            ),
        }
    }

    /// Bound on `sup_t |Φ(t) − mean · t|` for almost periodic profiles.
    pub fn oscillation_bound(&self) -> Option<f64> {
        match self {
            TimeProfile::Constant { .. } => Some(0.0),
            TimeProfile::Xi { .. } => None,
            TimeProfile::Trig { terms, .. } => Some(
                terms
                    .iter()
                    .filter(|s| s.frequency != 0.0)
                    .map(|s| (s.amplitude / s.frequency).abs())
                    .sum(),
            ),
        }
    }
}
