//! Time stepping for the coupled system, the frozen fast equation and the averaged
//! equations.

mod pathfile;
mod simulate;
mod solver;
mod stepper;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::spaces::{NoiseSource, State, TimeGrid, DEFAULT_LEVELS, STREAM_FAST, STREAM_SLOW};

pub use pathfile::{read_path_file, write_path_file, PATH_FILE_MAGIC};
pub use simulate::{
    simulate_averaged_eps, simulate_averaged_limit, simulate_coupled, simulate_fast_driven,
    simulate_frozen, frozen_endpoint, LimitCoefficients, MeanDrift,
};
pub use stepper::{fast_substeps, step_coupled, StepNoise};

/// Any coefficient above this magnitude aborts the path.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    SemiImplicitEuler,
    TamedEuler,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorConfig {
    pub scheme: Scheme,
    /// Slow step `h`.
    pub step: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub taming_power: f64,
    /// Fast sub-steps are at most `h_fast_factor·ε`.
    pub h_fast_factor: f64,
    /// Finest noise cell is `2^-noise_levels`.
    pub noise_levels: u32,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            scheme: Scheme::SemiImplicitEuler,
            step: 2e-4,
            newton_tol: 1e-10,
            newton_max_iter: 50,
            taming_power: 1.0,
            h_fast_factor: 0.1,
            noise_levels: DEFAULT_LEVELS,
        }
    }
}

impl IntegratorConfig {
    pub fn with_step(step: f64) -> Self {
        IntegratorConfig {
            step,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(invalid("integrator step must be > 0"));
        }
        if !(self.newton_tol > 0.0) {
            return Err(invalid("newton_tol must be > 0"));
        }
        if self.newton_max_iter == 0 {
            return Err(invalid("newton_max_iter must be >= 1"));
        }
        if !(self.h_fast_factor > 0.0) {
            return Err(invalid("h_fast_factor must be > 0"));
        }
        if !(self.taming_power > 0.0) {
            return Err(invalid("taming_power must be > 0"));
        }
        if !(1..=40).contains(&self.noise_levels) {
            return Err(invalid("noise_levels must be in 1..=40"));
        }
        Ok(())
    }
}

/// Seed and stream ids of the noise that drove a path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub seed: u64,
    pub slow_stream: u32,
    pub fast_stream: u32,
    pub levels: u32,
}

impl SeedRecord {
    pub fn new(seed: u64, levels: u32) -> Self {
        SeedRecord {
            seed,
            slow_stream: STREAM_SLOW,
            fast_stream: STREAM_FAST,
            levels,
        }
    }

    pub fn slow_source(&self, modes: usize) -> NoiseSource {
        NoiseSource::new(self.seed, modes, self.slow_stream).with_levels(self.levels)
    }

    pub fn fast_source(&self, modes: usize) -> NoiseSource {
        NoiseSource::new(self.seed, modes, self.fast_stream).with_levels(self.levels)
    }
}

/// Trajectory of the slow and/or fast state on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub grid: TimeGrid,
    pub slow: Option<Vec<State>>,
    pub fast: Option<Vec<State>>,
    pub seeds: SeedRecord,
    /// Hash of every W¹ increment consumed, in order.
    pub w1_checksum: Option<u64>,
}

impl PathSample {
    pub fn slow_final(&self) -> Option<&State> {
        self.slow.as_ref().and_then(|s| s.last())
    }

    pub fn fast_final(&self) -> Option<&State> {
        self.fast.as_ref().and_then(|s| s.last())
    }
}
