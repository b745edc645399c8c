use serde::{Deserialize, Serialize};

use crate::average::ProviderConfig;
use crate::coeffs::{build_system, CoefficientBundle, ExampleKind, ExampleSystem};
use crate::error::{invalid, Result};
use crate::integrate::{IntegratorConfig, SeedRecord};
use crate::spaces::{GalerkinSpace, OperatorKind, State, DEFAULT_MASS_SHIFT};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSpec {
    pub dim: usize,
    pub operator: OperatorKind,
    pub v_exponent: f64,
}

impl SpaceSpec {
    pub fn build(&self) -> Result<GalerkinSpace> {
        GalerkinSpace::new(self.dim, self.operator, self.v_exponent, DEFAULT_MASS_SHIFT)
    }
}

/// Initial data `x0_k = x_amplitude/(k+1)`, `y0_k = y_amplitude/(k+1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialSpec {
    pub x_amplitude: f64,
    pub y_amplitude: f64,
}

impl Default for InitialSpec {
    fn default() -> Self {
        InitialSpec {
            x_amplitude: 1.0,
            y_amplitude: 0.0,
        }
    }
}

/// Window and anchors of the Bohr means behind the limit drift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BohrSpec {
    pub window: f64,
    pub anchors: Vec<f64>,
    pub quad_step: f64,
}

impl Default for BohrSpec {
    fn default() -> Self {
        BohrSpec {
            window: 1e3,
            anchors: vec![0.0, 1.0, 2.0],
            quad_step: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub system: ExampleSystem,
    pub slow_space: SpaceSpec,
    pub fast_space: SpaceSpec,
    /// Strictly decreasing scales in `(0, 1]`.
    pub eps_list: Vec<f64>,
    pub mc_paths: usize,
    pub horizon: f64,
    pub moment_p: f64,
    pub integrator: IntegratorConfig,
    pub provider: ProviderConfig,
    pub initial: InitialSpec,
    pub bohr: BohrSpec,
    pub seed_base: u64,
    pub seed_stride: u64,
}

/// Default slow space of a built-in: Neumann with `V = H²` for the fourth-order slow
/// operator, `V = H¹` otherwise.
pub fn default_slow_space(kind: ExampleKind, dim: usize) -> SpaceSpec {
    let system = ExampleSystem::new(kind);
    SpaceSpec {
        dim,
        operator: OperatorKind::NeumannLaplacian1d,
        v_exponent: system.slow_order() as f64,
    }
}

pub fn default_fast_space(dim: usize) -> SpaceSpec {
    SpaceSpec {
        dim,
        operator: OperatorKind::DirichletLaplacian1d,
        v_exponent: 1.0,
    }
}

impl ExperimentPlan {
    /// Dimension 16, `T = 1`, `h = 2·10⁻⁴`, 200 paths, `ε ∈ {0.1, 0.02, 0.004}`.
    pub fn new(kind: ExampleKind) -> Self {
        ExperimentPlan {
            system: ExampleSystem::new(kind),
            slow_space: default_slow_space(kind, 16),
            fast_space: default_fast_space(16),
            eps_list: vec![0.1, 0.02, 0.004],
            mc_paths: 200,
            horizon: 1.0,
            moment_p: 1.0,
            integrator: IntegratorConfig::default(),
            provider: ProviderConfig::default(),
            initial: InitialSpec::default(),
            bohr: BohrSpec::default(),
            seed_base: 0,
            seed_stride: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.eps_list.is_empty() {
            return Err(invalid("eps_list must not be empty"));
        }
        if self.eps_list.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
            return Err(invalid("every eps must lie in (0, 1]"));
        }
        if self.eps_list.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(invalid("eps_list must be strictly decreasing"));
        }
        if self.mc_paths < 2 {
            return Err(invalid("mc_paths must be >= 2"));
        }
        if !(self.horizon > 0.0) {
            return Err(invalid("horizon T must be > 0"));
        }
        if !(self.moment_p >= 1.0) {
            return Err(invalid("moment_p must be >= 1"));
        }
        self.integrator.validate()?;
        self.provider.validate()
    }

    pub fn build(&self) -> Result<(GalerkinSpace, GalerkinSpace, CoefficientBundle)> {
        self.validate()?;
        let slow = self.slow_space.build()?;
        let fast = self.fast_space.build()?;
        let bundle = build_system(&self.system, &slow, &fast)?;
        Ok((slow, fast, bundle))
    }

    pub fn x0(&self) -> State {
        State::new((0..self.slow_space.dim).map(|k| self.initial.x_amplitude / (k + 1) as f64).collect())
    }

    pub fn y0(&self) -> State {
        State::new((0..self.fast_space.dim).map(|k| self.initial.y_amplitude / (k + 1) as f64).collect())
    }

    /// Noise seeds of path `i`: `seed_base + i·stride`.
    pub fn path_seeds(&self, i: usize) -> SeedRecord {
        let seed = self
            .seed_base
            .wrapping_add((i as u64).wrapping_mul(self.seed_stride));
        SeedRecord::new(seed, self.integrator.noise_levels)
    }
}
