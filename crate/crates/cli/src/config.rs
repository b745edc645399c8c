//! Strict TOML experiment documents.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use slowfast::average::ProviderConfig;
use slowfast::coeffs::{DriftSpec, ExampleKind, ExampleSystem, TimeProfile};
use slowfast::harness::{BohrSpec, ExperimentPlan, InitialSpec, SpaceSpec};
use slowfast::integrate::IntegratorConfig;
use slowfast::spaces::OperatorKind;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("unknown key `{key}` in [{section}]{}", suggestion.as_ref().map(|s| format!(" (did you mean `{s}`?)")).unwrap_or_default())]
    UnknownKey { section: String, key: String, suggestion: Option<String> },
    #[error("invalid value at `{path}`: {message}")]
    Invalid { path: String, message: String },
    #[error("constraint violated in [{path}]: {message}")]
    Rejected { path: String, message: String },
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Theorem {
    /// Coupled system against the ε-dependent averaged equation.
    #[default]
    T1,
    /// Coupled system against the ε-free limit equation.
    T2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemSection {
    pub kind: ExampleKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ell1: Option<TimeProfile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ell2: Option<TimeProfile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi: Option<TimeProfile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_coupling: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cubic: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub absorption: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slow_additive: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slow_multiplicative: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fast_additive: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slow_noise_modes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fast_noise_modes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drift: Option<DriftSpec>,
}

impl Default for SystemSection {
    fn default() -> Self {
        SystemSection {
            kind: ExampleKind::CahnHilliardHeat1d,
            ell1: None,
            ell2: None,
            phi: None,
            c: None,
            a_coupling: None,
            cubic: None,
            absorption: None,
            slow_additive: None,
            slow_multiplicative: None,
            fast_additive: None,
            slow_noise_modes: None,
            fast_noise_modes: None,
            drift: None,
        }
    }
}

impl SystemSection {
    pub fn example(&self) -> ExampleSystem {
        let mut ex = ExampleSystem::new(self.kind);
        let p = &mut ex.params;
        macro_rules! over {
            ($($f:ident),*) => {$(if let Some(v) = &self.$f { p.$f = v.clone(); })*};
        }
        over!(ell1, ell2, phi, c, a_coupling, cubic, absorption, slow_additive, slow_multiplicative, fast_additive, drift);
        if self.slow_noise_modes.is_some() {
            p.slow_noise_modes = self.slow_noise_modes;
        }
        if self.fast_noise_modes.is_some() {
            p.fast_noise_modes = self.fast_noise_modes;
        }
        ex
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpacesSection {
    pub slow_dim: usize,
    pub fast_dim: usize,
    pub slow_operator: OperatorKind,
    /// Defaults to the order of the slow operator.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slow_v_exponent: Option<f64>,
    pub fast_operator: OperatorKind,
    pub fast_v_exponent: f64,
}

impl Default for SpacesSection {
    fn default() -> Self {
        SpacesSection {
            slow_dim: 16,
            fast_dim: 16,
            slow_operator: OperatorKind::NeumannLaplacian1d,
            slow_v_exponent: None,
            fast_operator: OperatorKind::DirichletLaplacian1d,
            fast_v_exponent: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlanSection {
    pub theorem: Theorem,
    /// Scale of single runs (`simulate`).
    pub epsilon: f64,
    pub eps_list: Vec<f64>,
    pub mc_paths: usize,
    pub horizon: f64,
    pub moment_p: f64,
    pub seed_stride: u64,
    pub x_amplitude: f64,
    pub y_amplitude: f64,
}

impl Default for PlanSection {
    fn default() -> Self {
        PlanSection {
            theorem: Theorem::T1,
            epsilon: 0.01,
            eps_list: vec![0.1, 0.02, 0.004],
            mc_paths: 200,
            horizon: 1.0,
            moment_p: 1.0,
            seed_stride: 1,
            x_amplitude: 1.0,
            y_amplitude: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeasureSection {
    pub t: f64,
    pub particles: usize,
    /// Pullback horizon `S`; defaults to `40/γ`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    pub step: f64,
    /// Largest accepted pullback bias bound; `inf` disables the check.
    pub bias_tol: f64,
}

impl Default for MeasureSection {
    fn default() -> Self {
        MeasureSection {
            t: 0.0,
            particles: 1000,
            horizon: None,
            step: 1.0 / 1024.0,
            bias_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AverageSection {
    pub window: f64,
    pub anchors: Vec<f64>,
    pub quad_step: f64,
    pub t_probe: f64,
}

impl Default for AverageSection {
    fn default() -> Self {
        let b = BohrSpec::default();
        AverageSection {
            window: b.window,
            anchors: b.anchors,
            quad_step: b.quad_step,
            t_probe: 1e3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KhasminskiiSection {
    pub eps: f64,
    pub delta_list: Vec<f64>,
}

impl Default for KhasminskiiSection {
    fn default() -> Self {
        KhasminskiiSection {
            eps: 0.004,
            delta_list: vec![0.2, 0.05, 0.0125],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ApcheckSection {
    /// Translation threshold of the coefficient scan.
    pub epsilon: f64,
    pub tau_min: f64,
    pub tau_max: f64,
    pub tau_step: f64,
    pub probe_start: f64,
    pub probe_end: f64,
    pub probe_step: f64,
    /// Translations fed to the measure diagnostic; defaults to the first accepted ones.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub taus: Option<Vec<f64>>,
    pub max_taus: usize,
    pub anchors: Vec<f64>,
    pub particles: usize,
    pub horizon: f64,
    pub step: f64,
    pub dictionary_size: usize,
    /// Allowed measure translation error on top of Monte Carlo noise.
    pub measure_epsilon: f64,
}

impl Default for ApcheckSection {
    fn default() -> Self {
        ApcheckSection {
            epsilon: 0.3,
            tau_min: 0.5,
            tau_max: 600.0,
            tau_step: 0.01,
            probe_start: 0.0,
            probe_end: 100.0,
            probe_step: 0.05,
            taus: None,
            max_taus: 2,
            anchors: vec![PI / 2.0],
            particles: 1000,
            horizon: 6.0,
            step: 1.0 / 128.0,
            dictionary_size: 128,
            measure_epsilon: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConditionsSection {
    pub samples: usize,
    pub seed: u64,
}

impl Default for ConditionsSection {
    fn default() -> Self {
        ConditionsSection {
            samples: 10_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub directory: String,
    /// Any of `json`, `csv`.
    pub formats: Vec<String>,
    pub write_paths: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            directory: "slowfast-out".into(),
            formats: vec!["json".into(), "csv".into()],
            write_paths: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed_base: u64,
    pub system: SystemSection,
    pub spaces: SpacesSection,
    pub integrator: IntegratorConfig,
    pub provider: ProviderConfig,
    pub plan: PlanSection,
    pub measure: MeasureSection,
    pub average: AverageSection,
    pub khasminskii: KhasminskiiSection,
    pub apcheck: ApcheckSection,
    pub conditions: ConditionsSection,
    pub output: OutputSection,
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map(|i| i + 1).unwrap_or(0) + 1;
    (line, column)
}

/// Closest allowed key by edit distance, if reasonably close.
fn suggest(key: &str, expected: &[&str]) -> Option<String> {
    expected
        .iter()
        .map(|e| (strsim::levenshtein(key, e), *e))
        .filter(|(d, e)| *d <= (e.len().max(key.len()) / 2).max(2))
        .min()
        .map(|(_, e)| e.to_string())
}

/// Splits serde's "unknown field `k`, expected one of `a`, `b`" message.
fn unknown_field(message: &str) -> Option<(String, Vec<&str>)> {
    let rest = message.split("unknown field `").nth(1)?;
    let key = rest.split('`').next()?.to_string();
    let expected = message
        .split("expected")
        .nth(1)
        .map(|s| s.split('`').skip(1).step_by(2).collect())
        .unwrap_or_default();
    Some((key, expected))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let de = toml::Deserializer::new(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            let message = inner.message().to_string();
            if let Some((key, expected)) = unknown_field(&message) {
                let section = path.rsplit_once('.').map(|(s, _)| s.to_string()).unwrap_or_else(|| {
                    if path == "." || path.is_empty() { "root".into() } else { path.clone() }
                });
                let section = if section == key { "root".into() } else { section };
                return ConfigError::UnknownKey {
                    suggestion: suggest(&key, &expected),
                    section,
                    key,
                };
            }
            match inner.span() {
                Some(span) if path == "." || path.is_empty() => {
                    let (line, column) = line_col(text, span.start);
                    ConfigError::Syntax { line, column, message }
                }
                _ => ConfigError::Invalid { path, message },
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs always serialize")
    }

    pub fn slow_space(&self) -> SpaceSpec {
        SpaceSpec {
            dim: self.spaces.slow_dim,
            operator: self.spaces.slow_operator,
            v_exponent: self
                .spaces
                .slow_v_exponent
                .unwrap_or(ExampleSystem::new(self.system.kind).slow_order() as f64),
        }
    }

    pub fn fast_space(&self) -> SpaceSpec {
        SpaceSpec {
            dim: self.spaces.fast_dim,
            operator: self.spaces.fast_operator,
            v_exponent: self.spaces.fast_v_exponent,
        }
    }

    pub fn plan(&self) -> ExperimentPlan {
        ExperimentPlan {
            system: self.system.example(),
            slow_space: self.slow_space(),
            fast_space: self.fast_space(),
            eps_list: self.plan.eps_list.clone(),
            mc_paths: self.plan.mc_paths,
            horizon: self.plan.horizon,
            moment_p: self.plan.moment_p,
            integrator: self.integrator,
            provider: self.provider,
            initial: InitialSpec {
                x_amplitude: self.plan.x_amplitude,
                y_amplitude: self.plan.y_amplitude,
            },
            bohr: BohrSpec {
                window: self.average.window,
                anchors: self.average.anchors.clone(),
                quad_step: self.average.quad_step,
            },
            seed_base: self.seed_base,
            seed_stride: self.plan.seed_stride,
        }
    }

    /// Cross-field checks; messages name the offending section.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |path: &str, e: slowfast::Error| ConfigError::Invalid {
            path: path.into(),
            message: e.root().to_string(),
        };
        self.integrator.validate().map_err(|e| invalid("integrator", e))?;
        self.provider.validate().map_err(|e| invalid("provider", e))?;
        let plan = self.plan();
        match plan.build() {
            Ok(_) => {}
            Err(slowfast::Error::ConfigurationRejected(m)) => {
                return Err(ConfigError::Rejected {
                    path: "system".into(),
                    message: m,
                })
            }
            Err(e) => {
                let path = if plan.validate().is_err() { "plan" } else { "spaces" };
                return Err(invalid(path, e));
            }
        }
        for (path, seed) in [
            ("seed_base", self.seed_base),
            ("provider.seed", self.provider.seed),
            ("conditions.seed", self.conditions.seed),
        ] {
            if seed > i64::MAX as u64 {
                return Err(ConfigError::Invalid {
                    path: path.into(),
                    message: format!("seeds must be <= {}", i64::MAX),
                });
            }
        }
        if !(self.measure.bias_tol > 0.0) {
            return Err(ConfigError::Invalid {
                path: "measure.bias_tol".into(),
                message: "bias_tol must be > 0 (inf disables the check)".into(),
            });
        }
        if !(self.plan.epsilon > 0.0 && self.plan.epsilon <= 1.0) {
            return Err(ConfigError::Invalid {
                path: "plan.epsilon".into(),
                message: "epsilon must lie in (0, 1]".into(),
            });
        }
        for f in &self.output.formats {
            if f != "json" && f != "csv" {
                return Err(ConfigError::Invalid {
                    path: "output.formats".into(),
                    message: format!("unknown format `{f}` (expected json or csv)"),
                });
            }
        }
        Ok(())
    }
}
