//! Averaged coefficients: `F̄(t,x)` over the evolution system of measures, Bohr means and
//! asymptotic limits, the Khasminskii auxiliary process and almost-periodicity probes.

mod apcheck;
mod bohr;
mod khasminskii;
mod limits;
mod provider;

pub use apcheck::{
    measure_ap_diagnostic, translation_number_scan, ApDiagnosticReport, ApDiagnosticSettings,
    ApDistance, TauVerdict,
};
pub use bohr::{affine_limit_drift, bohr_limit_drift, bohr_mean, AffineLimitDrift, BohrLimitDrift, BohrMeanReport};
pub use khasminskii::{khasminskii_auxiliary, DeltaRule, KhasminskiiConfig};
pub use limits::{asymptotic_a, time_avg_g1};
pub use provider::{
    averaged_drift, AveragedDriftProvider, BoundDrift, CacheStats, DriftEstimate, DriftTable,
    ProviderConfig, ProviderMode, TableRow, MIN_NESTED_M, T_QUANTUM, X_QUANTUM,
};
