//! Coefficients of the built-in slow-fast systems and sampled condition checkers.

mod bundle;
mod checks;
mod examples;
mod profile;
mod time_profile;

pub use bundle::{
    ApMetadata, CoefficientBundle, FastDrift, FastNoise, Forcing, SlowDrift, SlowNoise, YMap,
};
pub use checks::{
    check_all, check_coercivity, check_growth_fast, check_lipschitz_f_g1,
    check_local_monotonicity, check_strong_monotonicity_fast, coercivity_margin,
    growth_fast_margin, lipschitz_margin, monotonicity_margin, strong_monotonicity_margin,
    with_profile, CheckReport, CheckSettings, CHECK_TOLERANCE,
};
pub use examples::{
    build_system, derive_profile, DriftSpec, ExampleKind, ExampleParams, ExampleSystem,
    GROWTH_STATE_RADIUS,
};
pub use profile::ConditionProfile;
pub use time_profile::{TimeProfile, TrigTerm};
