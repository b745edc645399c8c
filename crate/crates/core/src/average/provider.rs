use std::collections::HashMap;
use std::hash::{Hash, Hasher};
use std::io::{Read, Write};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coeffs::{CoefficientBundle, TimeProfile};
use crate::ergodic::{estimate_evolution_measure, PullbackSettings};
use crate::error::{invalid, Error, Result};
use crate::integrate::{IntegratorConfig, MeanDrift};
use crate::spaces::{derive_seed, mix64, transfer, State};
use crate::stats::mean_stderr;

/// Cache lattice spacing in `t`.
pub const T_QUANTUM: f64 = 1e-3;
/// Cache lattice spacing per `x` coordinate.
pub const X_QUANTUM: f64 = 1e-6;
/// Smallest ensemble accepted in nested Monte Carlo mode.
pub const MIN_NESTED_M: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderMode {
    /// Closed-form mean of the frozen measure (linear fast dynamics, `F` affine in `y`).
    OracleLinear,
    /// Pullback ensemble per query, cached on the `(t, x)` lattice.
    NestedMc,
    /// Lookup in a previously exported table.
    Tabulated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProviderConfig {
    pub mode: ProviderMode,
    pub ensemble_m: usize,
    pub pullback_s: f64,
    pub step: f64,
    pub seed: u64,
    /// Largest acceptable standard error of a nested Monte Carlo estimate.
    pub stderr_tol: Option<f64>,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig {
            mode: ProviderMode::OracleLinear,
            ensemble_m: 1000,
            pullback_s: 5.0,
            step: 1.0 / 1024.0,
            seed: 0,
            stderr_tol: None,
        }
    }
}

impl ProviderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.mode == ProviderMode::NestedMc && self.ensemble_m < MIN_NESTED_M {
            return Err(invalid(format!(
                "nested_mc needs ensemble_m >= {MIN_NESTED_M}, got {}",
                self.ensemble_m
            )));
        }
        if !(self.pullback_s > 0.0) || !(self.step > 0.0) {
            return Err(invalid("pullback_s and step must be > 0"));
        }
        if let Some(tol) = self.stderr_tol {
            if !(tol > 0.0) {
                return Err(invalid("stderr_tol must be > 0"));
            }
        }
        Ok(())
    }
}

/// `F̄(t, x)` with a per-component Monte Carlo standard error (zero for exact modes).
#[derive(Debug, Clone, PartialEq)]
pub struct DriftEstimate {
    pub value: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl DriftEstimate {
    pub fn max_stderr(&self) -> f64 {
        self.stderr.iter().cloned().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct LatticeKey {
    t: i64,
    x: Vec<i64>,
}

impl LatticeKey {
    fn of(t: f64, x: &[f64]) -> Self {
        LatticeKey {
            t: (t / T_QUANTUM).round() as i64,
            x: x.iter().map(|v| (v / X_QUANTUM).round() as i64).collect(),
        }
    }

    fn t(&self) -> f64 {
        self.t as f64 * T_QUANTUM
    }

    fn x(&self) -> Vec<f64> {
        self.x.iter().map(|k| *k as f64 * X_QUANTUM).collect()
    }

    fn digest(&self) -> u64 {
        self.x
            .iter()
            .fold(mix64(self.t as u64), |h, k| mix64(h ^ (*k as u64)))
    }
}

/// Cache hit statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
    pub entries: usize,
}

type Cache<K, V> = Mutex<HashMap<K, V>>;

/// Source of the averaged drift `F̄(t,x) = ∫F(t,x,y) μ_t^x(dy)`.
///
/// A provider remembers the bundle it was last bound to and clears its caches when bound
/// to a different one.
pub struct AveragedDriftProvider {
    pub config: ProviderConfig,
    pub integrator: IntegratorConfig,
    table: HashMap<LatticeKey, DriftEstimate>,
    drift_cache: Cache<(u64, LatticeKey), DriftEstimate>,
    mean_cache: Cache<(u64, u64), Arc<Vec<f64>>>,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl std::fmt::Debug for AveragedDriftProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AveragedDriftProvider")
            .field("config", &self.config)
            .field("table_rows", &self.table.len())
            .field("stats", &self.stats())
            .finish()
    }
}

impl AveragedDriftProvider {
    pub fn new(config: ProviderConfig, integrator: IntegratorConfig) -> Result<Self> {
        config.validate()?;
        integrator.validate()?;
        if config.mode == ProviderMode::Tabulated {
            return Err(invalid("tabulated providers are built with from_table"));
        }
        Ok(Self::raw(config, integrator, HashMap::new()))
    }

    pub fn oracle() -> Self {
        Self::raw(ProviderConfig::default(), IntegratorConfig::default(), HashMap::new())
    }

    pub fn from_table(table: &DriftTable) -> Self {
        let rows = table
            .rows
            .iter()
            .map(|r| {
                (
                    LatticeKey::of(r.t, &r.x),
                    DriftEstimate {
                        value: r.drift.clone(),
                        stderr: vec![r.stderr; r.drift.len()],
                    },
                )
            })
            .collect();
        let config = ProviderConfig {
            mode: ProviderMode::Tabulated,
            ..Default::default()
        };
        Self::raw(config, IntegratorConfig::default(), rows)
    }

    fn raw(config: ProviderConfig, integrator: IntegratorConfig, table: HashMap<LatticeKey, DriftEstimate>) -> Self {
        AveragedDriftProvider {
            config,
            integrator,
            table,
            drift_cache: Mutex::new(HashMap::new()),
            mean_cache: Mutex::new(HashMap::new()),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        }
    }

    pub fn mode(&self) -> ProviderMode {
        self.config.mode
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats {
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
            entries: self.drift_cache.lock().unwrap().len() + self.mean_cache.lock().unwrap().len(),
        }
    }

    /// Binds the provider to a bundle, giving a [`MeanDrift`] for the integrators.
    pub fn bind<'a>(&'a self, bundle: &'a CoefficientBundle) -> Result<BoundDrift<'a>> {
        if self.config.mode == ProviderMode::OracleLinear && !bundle.is_linear_fast() {
            return Err(Error::UnsupportedBundle(format!(
                "oracle_linear needs linear fast dynamics and F affine in y ({})",
                bundle.name
            )));
        }
        Ok(BoundDrift {
            provider: self,
            bundle,
            fingerprint: fingerprint(bundle),
        })
    }

    /// Rows of the nested Monte Carlo cache, sorted by lattice key.
    pub fn export_cache(&self) -> DriftTable {
        let cache = self.drift_cache.lock().unwrap();
        let mut rows: Vec<_> = cache.iter().map(|((_, k), v)| (k.clone(), v.clone())).collect();
        rows.sort_by(|a, b| (a.0.t, &a.0.x).cmp(&(b.0.t, &b.0.x)));
        DriftTable {
            rows: rows
                .into_iter()
                .map(|(k, v)| TableRow {
                    t: k.t(),
                    x: k.x(),
                    stderr: v.max_stderr(),
                    drift: v.value,
                })
                .collect(),
        }
    }
}

fn fingerprint(bundle: &CoefficientBundle) -> u64 {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    format!(
        "{:?}|{:?}|{:?}|{:?}",
        bundle.fast.rates, bundle.fast.phi, bundle.forcing, bundle.fast_noise
    )
    .hash(&mut h);
    (bundle.fast.coupling.to_bits(), bundle.fast.absorption.to_bits(), bundle.slow_dim).hash(&mut h);
    h.finish()
}

/// A provider tied to one bundle.
pub struct BoundDrift<'a> {
    provider: &'a AveragedDriftProvider,
    bundle: &'a CoefficientBundle,
    fingerprint: u64,
}

impl BoundDrift<'_> {
    pub fn estimate(&self, t: f64, x: &[f64]) -> Result<DriftEstimate> {
        if x.len() != self.bundle.slow_dim {
            return Err(invalid(format!(
                "x has length {}, expected {}",
                x.len(),
                self.bundle.slow_dim
            )));
        }
        let b = self.bundle;
        if !b.forcing.depends_on_y() {
            let value = b.f(t, x, &vec![0.0; b.fast_dim]);
            return Ok(DriftEstimate {
                stderr: vec![0.0; value.len()],
                value,
            });
        }
        match self.provider.config.mode {
            ProviderMode::OracleLinear => {
                let g = self.cached_gains(t)?;
                let value = oracle_drift(b, t, x, &g);
                Ok(DriftEstimate {
                    stderr: vec![0.0; value.len()],
                    value,
                })
            }
            ProviderMode::NestedMc => self.nested(t, x),
            ProviderMode::Tabulated => {
                let key = LatticeKey::of(t, x);
                self.provider.table.get(&key).cloned().ok_or_else(|| {
                    invalid(format!("drift table does not cover the query (t = {t})"))
                })
            }
        }
    }

    fn cached_gains(&self, t: f64) -> Result<Arc<Vec<f64>>> {
        let p = self.provider;
        let key = (self.fingerprint, t.to_bits());
        if let Some(g) = p.mean_cache.lock().unwrap().get(&key) {
            p.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(g.clone());
        }
        p.misses.fetch_add(1, Ordering::Relaxed);
        let g = Arc::new(mean_gains(self.bundle, t)?);
        p.mean_cache.lock().unwrap().insert(key, g.clone());
        Ok(g)
    }

    fn nested(&self, t: f64, x: &[f64]) -> Result<DriftEstimate> {
        let p = self.provider;
        let key = LatticeKey::of(t, x);
        let ck = (self.fingerprint, key);
        if let Some(v) = p.drift_cache.lock().unwrap().get(&ck) {
            p.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(v.clone());
        }
        p.misses.fetch_add(1, Ordering::Relaxed);
        let key = ck.1;
        let (tq, xq) = (key.t(), key.x());
        let b = self.bundle;
        let settings = PullbackSettings {
            particles: p.config.ensemble_m,
            horizon: p.config.pullback_s,
            step: p.config.step,
            seed: derive_seed(p.config.seed, key.digest()),
            bias_tol: None,
        };
        let ens = estimate_evolution_measure(b, &State::new(xq.clone()), tq, &State::zeros(b.fast_dim), &settings, &p.integrator)?;
        let samples: Vec<Vec<f64>> = ens.particles.par_iter().map(|y| b.f(tq, &xq, &y.coeffs)).collect();
        let mut value = Vec::with_capacity(b.slow_dim);
        let mut stderr = Vec::with_capacity(b.slow_dim);
        for k in 0..b.slow_dim {
            let col: Vec<f64> = samples.iter().map(|s| s[k]).collect();
            let (m, se) = mean_stderr(&col);
            value.push(m);
            stderr.push(se);
        }
        let est = DriftEstimate { value, stderr };
        if let Some(tol) = p.config.stderr_tol {
            let se = est.max_stderr();
            if se > tol {
                let m = p.config.ensemble_m as f64;
                return Err(Error::EnsembleTooSmall {
                    stderr: se,
                    tolerance: tol,
                    required_m: (m * (se / tol).powi(2)).ceil() as usize,
                });
            }
        }
        p.drift_cache.lock().unwrap().insert((self.fingerprint, key), est.clone());
        Ok(est)
    }
}

impl MeanDrift for BoundDrift<'_> {
    fn eval(&self, tau: f64, x: &[f64]) -> Result<Vec<f64>> {
        self.estimate(tau, x).map(|e| e.value)
    }
}

/// `F̄(t, x)` for a single query.
pub fn averaged_drift(
    provider: &AveragedDriftProvider,
    bundle: &CoefficientBundle,
    t: f64,
    x: &State,
) -> Result<DriftEstimate> {
    provider.bind(bundle)?.estimate(t, &x.coeffs)
}

/// `F` evaluated at the frozen-measure mean `m_k = a·x̃_k·g_k(t)`.
pub(crate) fn oracle_drift(bundle: &CoefficientBundle, t: f64, x: &[f64], gains: &[f64]) -> Vec<f64> {
    let xt = transfer(x, bundle.fast_dim);
    let mean: Vec<f64> = xt
        .iter()
        .zip(gains)
        .map(|(xk, g)| bundle.fast.coupling * xk * g)
        .collect();
    bundle.forcing.eval_at_mean(t, x, &mean)
}

const GL8_NODES: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL8_WEIGHTS: [f64; 4] = [
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

pub(crate) fn gauss_legendre(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let (mid, half) = ((a + b) / 2.0, (b - a) / 2.0);
    GL8_NODES
        .iter()
        .zip(GL8_WEIGHTS)
        .map(|(n, w)| w * (f(mid - half * n) + f(mid + half * n)))
        .sum::<f64>()
        * half
}

/// `∫_a^b φ`.
pub(crate) fn profile_integral(p: &TimeProfile, a: f64, b: f64) -> f64 {
    if let (Some(fb), Some(fa)) = (p.antiderivative(b), p.antiderivative(a)) {
        return fb - fa;
    }
    let panels = (b - a).abs().ceil().max(1.0) as usize;
    let w = (b - a) / panels as f64;
    (0..panels)
        .map(|i| gauss_legendre(a + i as f64 * w, a + (i + 1) as f64 * w, |s| p.value(s)))
        .sum()
}

/// Mean gains `g_k(t) = ∫_0^∞ exp(−λ_k u + ∫_{t−u}^t φ) du` of the frozen linear fast
/// equation, so that its pullback mean is `a·x̃_k·g_k(t)`.
pub(crate) fn mean_gains(bundle: &CoefficientBundle, t: f64) -> Result<Vec<f64>> {
    let phi = &bundle.fast.phi;
    let sup = phi.sup();
    bundle
        .fast
        .rates
        .iter()
        .map(|&lambda| {
            if !(lambda > sup) {
                return Err(Error::UnsupportedBundle(format!(
                    "fast rate {lambda} does not dominate sup phi = {sup}"
                )));
            }
            if phi.is_constant() {
                return Ok(1.0 / (lambda - phi.value(0.0)));
            }
            // Substitute v = λu; the integrand is e^{−v} times a factor varying on scale λ.
            let v_max = 40.0 / (1.0 - sup / lambda);
            let panels = (v_max / 2.0).ceil() as usize;
            let w = v_max / panels as f64;
            let integrand = |v: f64| (-v + profile_integral(phi, t - v / lambda, t)).exp();
            let total: f64 = (0..panels)
                .map(|i| gauss_legendre(i as f64 * w, (i + 1) as f64 * w, integrand))
                .sum();
            Ok(total / lambda)
        })
        .collect()
}

/// One row of a tabulated drift.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub t: f64,
    pub x: Vec<f64>,
    pub drift: Vec<f64>,
    pub stderr: f64,
}

/// Columnar `F̄` table: `t, x0.., f0.., stderr`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DriftTable {
    pub rows: Vec<TableRow>,
}

impl DriftTable {
    /// Evaluates `provider` on every `(t, x)` pair, snapped to the cache lattice.
    pub fn build(
        provider: &AveragedDriftProvider,
        bundle: &CoefficientBundle,
        times: &[f64],
        states: &[State],
    ) -> Result<Self> {
        let bound = provider.bind(bundle)?;
        let mut rows = Vec::with_capacity(times.len() * states.len());
        for &t in times {
            for x in states {
                let key = LatticeKey::of(t, &x.coeffs);
                let (tq, xq) = (key.t(), key.x());
                let est = bound.estimate(tq, &xq)?;
                rows.push(TableRow {
                    t: tq,
                    x: xq,
                    stderr: est.max_stderr(),
                    drift: est.value,
                });
            }
        }
        Ok(DriftTable { rows })
    }

    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let fmt_err = |e: csv::Error| Error::Io(e.to_string());
        let mut out = csv::Writer::from_writer(w);
        let (nx, nf) = self
            .rows
            .first()
            .map(|r| (r.x.len(), r.drift.len()))
            .unwrap_or((0, 0));
        let mut header = vec!["t".to_string()];
        header.extend((0..nx).map(|k| format!("x{k}")));
        header.extend((0..nf).map(|k| format!("f{k}")));
        header.push("stderr".into());
        out.write_record(&header).map_err(fmt_err)?;
        let mut buf = ryu::Buffer::new();
        for r in &self.rows {
            if r.x.len() != nx || r.drift.len() != nf {
                return Err(invalid("drift table rows have inconsistent widths"));
            }
            let mut rec = Vec::with_capacity(header.len());
            for v in std::iter::once(r.t).chain(r.x.iter().cloned()).chain(r.drift.iter().cloned()).chain([r.stderr]) {
                rec.push(buf.format(v).to_string());
            }
            out.write_record(&rec).map_err(fmt_err)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv(r: impl Read) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let header = rdr.headers().map_err(|e| Error::Format(e.to_string()))?.clone();
        let nx = header.iter().filter(|h| h.starts_with('x')).count();
        let nf = header.iter().filter(|h| h.starts_with('f')).count();
        if header.len() != nx + nf + 2 || header.get(0) != Some("t") || header.get(header.len() - 1) != Some("stderr") {
            return Err(Error::Format("drift table header must be t, x.., f.., stderr".into()));
        }
        let mut rows = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Format(e.to_string()))?;
            let vals: Vec<f64> = rec
                .iter()
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Format(format!("row {}: {e}", line + 1)))?;
            rows.push(TableRow {
                t: vals[0],
                x: vals[1..1 + nx].to_vec(),
                drift: vals[1 + nx..1 + nx + nf].to_vec(),
                stderr: vals[1 + nx + nf],
            });
        }
        Ok(DriftTable { rows })
    }
}
