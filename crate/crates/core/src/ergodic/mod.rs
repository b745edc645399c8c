//! Ergodic behaviour of the frozen fast equation: evolution systems of measures built by
//! pullback, mixing rates, semigroup expectations and bounded-Lipschitz distances.

mod dictionary;
mod ensemble;
mod mixing;
mod semigroup;

pub use dictionary::{dbl_distance, dictionary_distance, Dictionary, DEFAULT_DICTIONARY_SIZE};
pub use ensemble::{estimate_evolution_measure, required_horizon, MeasureEnsemble, PullbackSettings};
pub use mixing::{estimate_mixing_rate, linear_mixing_gamma, MixingReport, MixingSettings, NoiseCoupling};
pub use semigroup::{
    check_evolution_property, semigroup_expectation, EvolutionReport, TestFn, EVOLUTION_Z_THRESHOLD,
};
