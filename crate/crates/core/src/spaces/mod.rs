//! Truncated Gelfand triples, states, time grids and noise.

mod galerkin;
mod grid;
mod noise;

pub use galerkin::{GalerkinSpace, Norm, OperatorKind, Projector, State, DEFAULT_MASS_SHIFT};
pub(crate) use galerkin::{dist2, dot, norm2, transfer};
pub use grid::TimeGrid;
pub use noise::{
    derive_seed, past_stream_id, NoiseSource, WienerCursor, DEFAULT_LEVELS, PAST_FLAG,
    STREAM_FAST, STREAM_SLOW,
};
pub(crate) use noise::mix64;

use crate::error::Result;

/// Builds a space with the default Neumann mass shift.
pub fn make_space(dim: usize, operator: OperatorKind, v_exponent: f64) -> Result<GalerkinSpace> {
    GalerkinSpace::new(dim, operator, v_exponent, DEFAULT_MASS_SHIFT)
}

pub fn norm(space: &GalerkinSpace, u: &State, which: Norm) -> Result<f64> {
    space.norm(u, which)
}

pub fn wiener_increment(src: &NoiseSource, s: f64, t: f64) -> Result<Vec<f64>> {
    src.increment(s, t)
}
