use serde::{Deserialize, Serialize};

use crate::coeffs::CoefficientBundle;
use crate::error::{invalid, Error, Result};
use crate::integrate::{simulate_fast_driven, IntegratorConfig, PathSample, SeedRecord};
use crate::spaces::State;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaRule {
    Fixed,
    EpsTwoThirds,
}

/// Block length of the frozen slow input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KhasminskiiConfig {
    pub delta: f64,
    pub rule: DeltaRule,
}

impl Default for KhasminskiiConfig {
    fn default() -> Self {
        KhasminskiiConfig {
            delta: 0.1,
            rule: DeltaRule::EpsTwoThirds,
        }
    }
}

impl KhasminskiiConfig {
    pub fn fixed(delta: f64) -> Self {
        KhasminskiiConfig {
            delta,
            rule: DeltaRule::Fixed,
        }
    }

    /// `δ` in effect at scale `ε`.
    pub fn delta_for(&self, eps: f64) -> Result<f64> {
        let d = match self.rule {
            DeltaRule::Fixed => self.delta,
            DeltaRule::EpsTwoThirds => (eps * eps).cbrt(),
        };
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::InvalidConfiguration(format!("delta must be > 0, got {d}")));
        }
        Ok(d)
    }
}

/// Fast process driven by the slow path frozen on blocks `[kδ, (k+1)δ)`.
#[allow(clippy::too_many_arguments)]
pub fn khasminskii_auxiliary(
    bundle: &CoefficientBundle,
    eps: f64,
    slow_path: &PathSample,
    y0: &State,
    kcfg: &KhasminskiiConfig,
    cfg: &IntegratorConfig,
    seeds: SeedRecord,
) -> Result<PathSample> {
    let slow = slow_path
        .slow
        .as_ref()
        .ok_or_else(|| invalid("slow path sample carries no slow trajectory"))?;
    let delta = kcfg.delta_for(eps)?;
    simulate_fast_driven(bundle, eps, slow, &slow_path.grid, y0, Some(delta), cfg, seeds)
}
