use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Exponents and constants of the structural conditions on the slow (A2–A5) and fast
/// (B2–B4) coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionProfile {
    pub alpha: f64,
    pub beta: f64,
    pub theta: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub eta: f64,
    pub zeta: f64,
    pub lip_f: f64,
    pub lip_g1: f64,
    pub generic_c: f64,
}

impl ConditionProfile {
    pub fn validate(&self) -> Result<()> {
        let checks: [(bool, &str); 10] = [
            (self.alpha > 1.0, "alpha must be > 1"),
            (self.beta >= 0.0, "beta must be >= 0"),
            (self.theta > 0.0, "theta must be > 0"),
            (self.kappa > 1.0, "kappa must be > 1"),
            (self.gamma > 0.0, "gamma must be > 0"),
            (self.eta > 0.0, "eta must be > 0"),
            (self.zeta > 0.0 && self.zeta < 1.0, "zeta must lie in (0, 1)"),
            (self.lip_f >= 0.0, "lip_f must be >= 0"),
            (self.lip_g1 >= 0.0, "lip_g1 must be >= 0"),
            (self.generic_c > 0.0, "generic_c must be > 0"),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(invalid(format!("condition profile: {msg}")));
            }
        }
        Ok(())
    }
}
