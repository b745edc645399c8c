//! Convergence experiments: strong errors over ε ladders, rate fits, the Khasminskii
//! δ-study and stopping-functional diagnostics.

mod convergence;
mod khasminskii;
mod plan;
mod stopping;

pub use convergence::{
    run_convergence_t1, run_convergence_t2, strong_error, ConvergenceReport, EpsResult, RateFit,
    MAX_FAILED_FRACTION, RATE_LOWER_BOUND,
};
pub use khasminskii::{run_khasminskii_study, DeltaResult, KhasminskiiReport, KHASMINSKII_SLOPE_RANGE};
pub use plan::{default_fast_space, default_slow_space, BohrSpec, ExperimentPlan, InitialSpec, SpaceSpec};
pub use stopping::{run_stopping_study, stopping_diagnostic, StoppingDiagnostic, StoppingStudy};
