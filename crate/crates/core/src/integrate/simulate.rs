use super::stepper::{check_eps, coupled_step, fast_advance, slow_step, StepNoise};
use super::{IntegratorConfig, PathSample, SeedRecord};
use crate::coeffs::{CoefficientBundle, SlowDrift, SlowNoise};
use crate::error::{invalid, Error, Result};
use crate::spaces::{State, TimeGrid};

/// Averaged forcing `F̄(τ, x)`, with `τ` on the fast time scale.
pub trait MeanDrift: Sync {
    fn eval(&self, tau: f64, x: &[f64]) -> Result<Vec<f64>>;
}

impl<F> MeanDrift for F
where
    F: Fn(f64, &[f64]) -> Result<Vec<f64>> + Sync,
{
    fn eval(&self, tau: f64, x: &[f64]) -> Result<Vec<f64>> {
        self(tau, x)
    }
}

/// Autonomous limit coefficients `(Ā, F̄, Ḡ1)`.
pub struct LimitCoefficients<'a> {
    pub a: SlowDrift,
    pub g1: SlowNoise,
    pub f: &'a dyn MeanDrift,
}

fn conform(what: &str, v: &State, dim: usize) -> Result<()> {
    if v.len() != dim {
        return Err(invalid(format!("{what} has length {}, expected {dim}", v.len())));
    }
    if !v.is_finite() {
        return Err(invalid(format!("{what} has non-finite entries")));
    }
    Ok(())
}

fn check_start(grid: &TimeGrid) -> Result<()> {
    if grid.t0 != 0.0 {
        return Err(invalid(format!("simulation grids start at 0, got t0 = {}", grid.t0)));
    }
    Ok(())
}

/// Coupled slow-fast trajectory on `grid`, driven by the W¹/W² streams of `seeds`.
pub fn simulate_coupled(
    bundle: &CoefficientBundle,
    eps: f64,
    x0: &State,
    y0: &State,
    grid: &TimeGrid,
    cfg: &IntegratorConfig,
    seeds: SeedRecord,
) -> Result<PathSample> {
    check_eps(eps)?;
    check_start(grid)?;
    cfg.validate()?;
    conform("x0", x0, bundle.slow_dim)?;
    conform("y0", y0, bundle.fast_dim)?;
    let mut noise = StepNoise::new(&seeds, bundle.slow_noise.modes, bundle.fast_noise.modes);
    let mut slow = Vec::with_capacity(grid.points);
    let mut fast = Vec::with_capacity(grid.points);
    let (mut x, mut y) = (x0.coeffs.clone(), y0.coeffs.clone());
    slow.push(x0.clone());
    fast.push(y0.clone());
    for i in 0..grid.steps() {
        let (xn, yn) = coupled_step(bundle, eps, &x, &y, grid.time(i), grid.time(i + 1), &mut noise, cfg)?;
        x = xn;
        y = yn;
        slow.push(State::new(x.clone()));
        fast.push(State::new(y.clone()));
    }
    Ok(PathSample {
        grid: *grid,
        slow: Some(slow),
        fast: Some(fast),
        seeds,
        w1_checksum: Some(noise.checksum()),
    })
}

fn frozen_grid(s: f64, t_end: f64, step: f64) -> Result<TimeGrid> {
    if !(s < t_end) {
        return Err(invalid(format!("frozen equation needs s < t_end, got [{s}, {t_end}]")));
    }
    TimeGrid::covering(s, t_end, step)
}

/// Frozen fast equation `dY = B(t,x,Y)dt + G2(t,x,Y)dW̄²` from `(s, y)`, on the two-sided
/// fast stream.
#[allow(clippy::too_many_arguments)]
pub fn simulate_frozen(
    bundle: &CoefficientBundle,
    x: &State,
    s: f64,
    t_end: f64,
    y: &State,
    step: f64,
    cfg: &IntegratorConfig,
    seeds: SeedRecord,
) -> Result<PathSample> {
    let grid = frozen_grid(s, t_end, step)?;
    let mut fast = Vec::with_capacity(grid.points);
    fast.push(y.clone());
    frozen_run(bundle, x, &grid, y, cfg, seeds, |v| fast.push(State::new(v.to_vec())))?;
    Ok(PathSample {
        grid,
        slow: None,
        fast: Some(fast),
        seeds,
        w1_checksum: None,
    })
}

/// Final state of [`simulate_frozen`] without storing the trajectory.
#[allow(clippy::too_many_arguments)]
pub fn frozen_endpoint(
    bundle: &CoefficientBundle,
    x: &State,
    s: f64,
    t_end: f64,
    y: &State,
    step: f64,
    cfg: &IntegratorConfig,
    seeds: SeedRecord,
) -> Result<State> {
    if s == t_end {
        return Ok(y.clone());
    }
    let grid = frozen_grid(s, t_end, step)?;
    frozen_run(bundle, x, &grid, y, cfg, seeds, |_| ())
}

fn frozen_run(
    bundle: &CoefficientBundle,
    x: &State,
    grid: &TimeGrid,
    y: &State,
    cfg: &IntegratorConfig,
    seeds: SeedRecord,
    mut record: impl FnMut(&[f64]),
) -> Result<State> {
    cfg.validate()?;
    conform("x", x, bundle.slow_dim)?;
    conform("y", y, bundle.fast_dim)?;
    let mut cursor = seeds.fast_source(bundle.fast_noise.modes).cursor();
    let mut dw = vec![0.0; bundle.fast_noise.modes];
    let mut v = y.coeffs.clone();
    for i in 0..grid.steps() {
        let (a, b) = (grid.time(i), grid.time(i + 1));
        v = fast_advance(bundle, 1.0, a, b, x, v, &mut cursor, &mut dw, cfg).map_err(|e| e.at_time(a))?;
        record(&v);
    }
    Ok(State::new(v))
}

/// Fast trajectory driven by a given slow path. With `delta`, the slow input is frozen on
/// blocks `[kδ, (k+1)δ)` at `X_{⌊t/δ⌋δ}`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_fast_driven(
    bundle: &CoefficientBundle,
    eps: f64,
    slow_path: &[State],
    grid: &TimeGrid,
    y0: &State,
    delta: Option<f64>,
    cfg: &IntegratorConfig,
    seeds: SeedRecord,
) -> Result<PathSample> {
    check_eps(eps)?;
    check_start(grid)?;
    cfg.validate()?;
    conform("y0", y0, bundle.fast_dim)?;
    if slow_path.len() != grid.points {
        return Err(invalid("slow path does not cover the grid"));
    }
    if let Some(d) = delta {
        if !(d >= grid.step * (1.0 - 1e-9)) {
            return Err(Error::InvalidConfiguration(format!(
                "delta ({d}) must not be smaller than the grid step ({})",
                grid.step
            )));
        }
    }
    let mut cursor = seeds.fast_source(bundle.fast_noise.modes).cursor();
    let mut dw = vec![0.0; bundle.fast_noise.modes];
    let mut fast = Vec::with_capacity(grid.points);
    fast.push(y0.clone());
    let mut y = y0.coeffs.clone();
    for i in 0..grid.steps() {
        let (a, b) = (grid.time(i), grid.time(i + 1));
        let idx = match delta {
            Some(d) => grid.floor_index(((a + 1e-9 * grid.step) / d).floor() * d),
            None => i,
        };
        y = fast_advance(bundle, eps, a, b, &slow_path[idx], y, &mut cursor, &mut dw, cfg)
            .map_err(|e| e.at_time(a))?;
        fast.push(State::new(y.clone()));
    }
    Ok(PathSample {
        grid: *grid,
        slow: None,
        fast: Some(fast),
        seeds,
        w1_checksum: None,
    })
}

#[allow(clippy::too_many_arguments)]
fn slow_only(
    a: &SlowDrift,
    g1: &SlowNoise,
    eps: f64,
    drift: &dyn MeanDrift,
    x0: &State,
    grid: &TimeGrid,
    cfg: &IntegratorConfig,
    seeds: SeedRecord,
) -> Result<PathSample> {
    check_start(grid)?;
    cfg.validate()?;
    conform("x0", x0, a.shape.len())?;
    let mut noise = StepNoise::new(&seeds, g1.modes, 1);
    let mut dw = vec![0.0; g1.modes];
    let mut slow = Vec::with_capacity(grid.points);
    slow.push(x0.clone());
    let mut x = x0.coeffs.clone();
    for i in 0..grid.steps() {
        let (t, t_next) = (grid.time(i), grid.time(i + 1));
        let tau = t / eps;
        noise.slow_increment(t, t_next, &mut dw)?;
        let f = drift.eval(tau, &x).map_err(|e| e.at_time(t))?;
        x = slow_step(a, g1, tau, t_next - t, &x, &f, &dw, cfg).map_err(|e| e.at_time(t))?;
        slow.push(State::new(x.clone()));
    }
    Ok(PathSample {
        grid: *grid,
        slow: Some(slow),
        fast: None,
        seeds,
        w1_checksum: Some(noise.checksum()),
    })
}

/// `dX̄ = [A(t/ε, X̄) + F̄(t/ε, X̄)]dt + G1(t/ε, X̄)dW¹` on the same W¹ stream as
/// [`simulate_coupled`] with equal seeds.
#[allow(clippy::too_many_arguments)]
pub fn simulate_averaged_eps(
    bundle: &CoefficientBundle,
    eps: f64,
    x0: &State,
    grid: &TimeGrid,
    drift: &dyn MeanDrift,
    cfg: &IntegratorConfig,
    seeds: SeedRecord,
) -> Result<PathSample> {
    check_eps(eps)?;
    slow_only(&bundle.slow, &bundle.slow_noise, eps, drift, x0, grid, cfg, seeds)
}

/// `dX̄ = [Ā(X̄) + F̄(X̄)]dt + Ḡ1(X̄)dW¹`.
pub fn simulate_averaged_limit(
    limits: &LimitCoefficients<'_>,
    x0: &State,
    grid: &TimeGrid,
    cfg: &IntegratorConfig,
    seeds: SeedRecord,
) -> Result<PathSample> {
    slow_only(&limits.a, &limits.g1, 1.0, limits.f, x0, grid, cfg, seeds)
}
