use proptest::prelude::*;
use slowfast::average::*;
use slowfast::coeffs::*;
use slowfast::integrate::{simulate_fast_driven, simulate_frozen, IntegratorConfig, PathSample, SeedRecord};
use slowfast::spaces::{GalerkinSpace, OperatorKind, State, TimeGrid};
use std::f64::consts::PI;

const H: f64 = 1.0 / 1024.0;

fn spaces(dim: usize) -> (GalerkinSpace, GalerkinSpace) {
    (
        GalerkinSpace::new(dim, OperatorKind::NeumannLaplacian1d, 2.0, 1.0).unwrap(),
        GalerkinSpace::new(dim, OperatorKind::DirichletLaplacian1d, 1.0, 1.0).unwrap(),
    )
}

fn system(kind: ExampleKind, dim: usize, edit: impl FnOnce(&mut ExampleParams)) -> CoefficientBundle {
    let (s, f) = spaces(dim);
    let mut ex = ExampleSystem::new(kind);
    edit(&mut ex.params);
    build_system(&ex, &s, &f).unwrap()
}

fn linear(dim: usize, edit: impl FnOnce(&mut ExampleParams)) -> CoefficientBundle {
    system(ExampleKind::CahnHilliardHeat1d, dim, edit)
}

fn rk4(rhs: impl Fn(f64, f64) -> f64, m0: f64, t0: f64, t1: f64, n: usize) -> f64 {
    let dt = (t1 - t0) / n as f64;
    let mut m = m0;
    for i in 0..n {
        let t = t0 + i as f64 * dt;
        let k1 = rhs(t, m);
        let k2 = rhs(t + dt / 2.0, m + dt / 2.0 * k1);
        let k3 = rhs(t + dt / 2.0, m + dt / 2.0 * k2);
        let k4 = rhs(t + dt, m + dt * k3);
        m += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    m
}

#[test]
fn stationary_linear_mean_is_x_over_lambda() {
    let b = linear(6, |p| {
        p.phi = TimeProfile::constant(0.0);
        p.c = 0.7;
    });
    let x = State::new(vec![1.0, -2.0, 0.5, 0.25, 3.0, -1.0]);
    let est = averaged_drift(&AveragedDriftProvider::oracle(), &b, 4.2, &x).unwrap();
    for k in 0..6 {
        let lambda = ((k + 1) as f64 * PI).powi(2);
        assert!((est.value[k] - x[k] / lambda).abs() < 1e-14 * (1.0 + x[k].abs()));
    }
    assert!(est.stderr.iter().all(|s| *s == 0.0));
}

#[test]
fn y_independent_forcing_needs_no_measure() {
    for kind in ExampleKind::all() {
        let b = system(kind, 4, |p| {
            p.drift.y_gain = 0.0;
            p.drift.x_gain = -0.3;
        });
        let cfg = ProviderConfig { mode: ProviderMode::NestedMc, ensemble_m: 100, ..Default::default() };
        let p = AveragedDriftProvider::new(cfg, IntegratorConfig::with_step(H)).unwrap();
        let x = State::new(vec![0.4, 0.1, -0.2, 0.0]);
        let est = averaged_drift(&p, &b, 1.5, &x).unwrap();
        assert_eq!(est.value, b.f(1.5, &x.coeffs, &[0.0; 4]));
        assert_eq!(p.stats().misses, 0);
    }
}

#[test]
fn oracle_mean_matches_pullback_ode() {
    let b = linear(5, |p| p.phi = TimeProfile::sine(1.0, 1.0));
    let x = State::new(vec![1.0, 0.5, -0.5, 0.2, 0.1]);
    let p = AveragedDriftProvider::oracle();
    for t in [0.0, 1.0, 2.5, -3.0] {
        let est = averaged_drift(&p, &b, t, &x).unwrap();
        for k in 0..5 {
            let lambda = b.fast.rates[k];
            let s = 60.0 / (lambda - 1.0);
            let m = rk4(|tt, m| (tt.sin() - lambda) * m + x[k], 0.0, t - s, t, 200_000);
            assert!((est.value[k] - m).abs() <= 1e-8 * m.abs().max(1e-6), "t={t} k={k}: {} vs {m}", est.value[k]);
        }
    }
}

#[test]
fn oracle_rejects_nonlinear_fast_dynamics() {
    let b = system(ExampleKind::PorousFast1d, 4, |_| {});
    let err = averaged_drift(&AveragedDriftProvider::oracle(), &b, 0.0, &State::zeros(4)).unwrap_err();
    assert!(matches!(err, slowfast::Error::UnsupportedBundle(_)));
}

#[test]
fn nested_mc_agrees_with_oracle() {
    let b = linear(4, |_| {});
    let x = State::new(vec![2.0, -1.0, 0.5, 1.0]);
    let cfg = ProviderConfig { mode: ProviderMode::NestedMc, ensemble_m: 10_000, pullback_s: 40.0 / b.profile.gamma, step: H, seed: 3, stderr_tol: None };
    let nested = AveragedDriftProvider::new(cfg, IntegratorConfig::with_step(H)).unwrap();
    let t = 0.75;
    let mc = averaged_drift(&nested, &b, t, &x).unwrap();
    let exact = averaged_drift(&AveragedDriftProvider::oracle(), &b, t, &x).unwrap();
    for k in 0..4 {
        let d = (mc.value[k] - exact.value[k]).abs();
        assert!(d < 3.0 * mc.stderr[k] + 2e-4 * exact.value[k].abs(), "mode {k}: {d} vs stderr {}", mc.stderr[k]);
    }
    // Same lattice point: served from the cache.
    let again = averaged_drift(&nested, &b, t + 2e-4, &State::new(vec![2.0 + 1e-7, -1.0, 0.5, 1.0])).unwrap();
    assert_eq!(again, mc);
    assert_eq!(nested.stats().hits, 1);
}

#[test]
fn nested_mc_size_rules() {
    let b = linear(3, |_| {});
    let small = ProviderConfig { mode: ProviderMode::NestedMc, ensemble_m: 99, ..Default::default() };
    assert!(AveragedDriftProvider::new(small, IntegratorConfig::default()).is_err());
    let strict = ProviderConfig { mode: ProviderMode::NestedMc, ensemble_m: 100, pullback_s: 1.0, step: H, seed: 1, stderr_tol: Some(1e-7) };
    let p = AveragedDriftProvider::new(strict, IntegratorConfig::with_step(H)).unwrap();
    match averaged_drift(&p, &b, 0.0, &State::new(vec![1.0, 1.0, 1.0])) {
        Err(slowfast::Error::EnsembleTooSmall { stderr, tolerance, required_m }) => {
            assert_eq!(tolerance, 1e-7);
            assert!(required_m as f64 >= 100.0 * (stderr / tolerance).powi(2));
        }
        other => panic!("expected a retryable size error, got {other:?}"),
    }
}

#[test]
fn drift_table_round_trips_exactly() {
    let b = linear(3, |_| {});
    let p = AveragedDriftProvider::oracle();
    let times = [0.0, 0.1234, 7.5];
    let states = [State::new(vec![0.1, 0.2, 0.3]), State::new(vec![-1.0 / 3.0, 2.0, 1e-5])];
    let table = DriftTable::build(&p, &b, &times, &states).unwrap();
    let mut buf = Vec::new();
    table.write_csv(&mut buf).unwrap();
    let back = DriftTable::read_csv(&buf[..]).unwrap();
    assert_eq!(back, table);
    let tab = AveragedDriftProvider::from_table(&back);
    for row in &table.rows {
        let est = averaged_drift(&tab, &b, row.t, &State::new(row.x.clone())).unwrap();
        assert_eq!(est.value, row.drift);
    }
    assert!(averaged_drift(&tab, &b, 99.0, &states[0]).is_err());
}

#[test]
fn nested_cache_exports_as_table() {
    let b = linear(3, |_| {});
    let cfg = ProviderConfig { mode: ProviderMode::NestedMc, ensemble_m: 100, pullback_s: 1.0, step: H, seed: 1, stderr_tol: None };
    let p = AveragedDriftProvider::new(cfg, IntegratorConfig::with_step(H)).unwrap();
    let x = State::new(vec![0.5, 0.5, 0.5]);
    let a = averaged_drift(&p, &b, 0.002, &x).unwrap();
    let table = p.export_cache();
    assert_eq!(table.rows.len(), 1);
    let tab = AveragedDriftProvider::from_table(&table);
    assert_eq!(averaged_drift(&tab, &b, 0.002, &x).unwrap().value, a.value);
}

#[test]
fn bohr_mean_examples() {
    let anchors = [0.0, 17.0, 123.4];
    let qp = bohr_mean(&|t| vec![t.sin() + (2f64.sqrt() * t).cos()], 1e4, &anchors, 0.01).unwrap();
    assert!(qp.value[0].abs() < 1e-3);
    let shifted = bohr_mean(&|t| vec![1.0 + t.sin()], 1e4, &anchors, 0.01).unwrap();
    assert!((shifted.value[0] - 1.0).abs() <= 2.0 / 1e4);
    assert!(shifted.tail_estimate <= 2.0 / 1e4);
    let series = |t: f64| vec![(1..=50).map(|n| (n as f64).powi(-2) * ((n as f64).sqrt() * t).sin()).sum::<f64>()];
    let s = bohr_mean(&series, 1e4, &anchors, 0.01).unwrap();
    // Window means of each term are explicit: (cos(ωa) − cos(ω(a+T)))/(ωT).
    let oracle: f64 = anchors
        .iter()
        .map(|&a| {
            (1..=50)
                .map(|n| {
                    let w = (n as f64).sqrt();
                    (n as f64).powi(-2) * ((w * a).cos() - (w * (a + 1e4)).cos()) / (w * 1e4)
                })
                .sum::<f64>()
        })
        .sum::<f64>()
        / 3.0;
    assert!(s.value[0].abs() < 5e-3);
    assert!((s.value[0] - oracle).abs() < 1e-8);
    assert!(bohr_mean(&|_| vec![1.0], 0.0, &anchors, 0.1).is_err());
    assert!(bohr_mean(&|_| vec![1.0], 1.0, &[], 0.1).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn bohr_window_error_within_antiderivative_bound(amp in 0.1f64..3.0, w in 0.2f64..5.0, c in -2.0f64..2.0, a in -50.0f64..50.0, t in 5.0f64..200.0) {
        let r = bohr_mean(&|s| vec![c + amp * (w * s).sin()], t, &[a], 0.01).unwrap();
        // |window mean − c| ≤ 2·sup|Φ − c·s|/T with Φ the antiderivative.
        let err = (r.value[0] - c).abs();
        prop_assert!(err <= 2.0 * amp / w / t + 1e-9);
        if w >= 1.0 {
            prop_assert!(err <= 2.0 * (c.abs() + amp) / t);
        }
        prop_assert!(r.tail_estimate >= 0.0 && r.window_t == t);
    }

    #[test]
    fn oracle_drift_lipschitz(x1 in proptest::collection::vec(-5.0f64..5.0, 4), x2 in proptest::collection::vec(-5.0f64..5.0, 4), t in -10.0f64..10.0) {
        let b = linear(4, |p| p.drift.x_gain = 0.4);
        let p = AveragedDriftProvider::oracle();
        let f1 = averaged_drift(&p, &b, t, &State::new(x1.clone())).unwrap().value;
        let f2 = averaged_drift(&p, &b, t, &State::new(x2.clone())).unwrap().value;
        let lip = b.fast.rates.iter().map(|l| 0.4 + 1.0 / (l - 1.0)).fold(0.0, f64::max);
        let num: f64 = f1.iter().zip(&f2).map(|(a, c)| (a - c).powi(2)).sum::<f64>().sqrt();
        let den: f64 = x1.iter().zip(&x2).map(|(a, c)| (a - c).powi(2)).sum::<f64>().sqrt();
        prop_assert!(num <= lip * den + 1e-6);
        prop_assert!(lip <= b.profile.lip_f * (1.0 + 1.0 / (b.fast.rates[0] - 1.0)));
    }
}

#[test]
fn bohr_limit_stationary_case() {
    let b = linear(3, |p| {
        p.phi = TimeProfile::constant(0.5);
        p.ell1 = TimeProfile::constant(1.0);
    });
    let x = State::new(vec![1.0, 2.0, 3.0]);
    let p = AveragedDriftProvider::oracle();
    let (v, r) = bohr_limit_drift(&p, &b, &x, 100.0, &[0.0, 50.0], 0.5).unwrap();
    let at = averaged_drift(&p, &b, 12.3, &x).unwrap().value;
    for k in 0..3 {
        assert!((v[k] - at[k]).abs() < 1e-14);
    }
    assert!(r.tail_estimate < 1e-14);
}

/// Period average of the periodic solution of `m' = (sin t − λ)m + 1`.
fn periodic_average(lambda: f64) -> f64 {
    let period = 2.0 * PI;
    let mut m = 0.0;
    let mut t = 0.0;
    for _ in 0..40 {
        m = rk4(|tt, m| (tt.sin() - lambda) * m + 1.0, m, t, t + period, 20_000);
        t += period;
    }
    let n = 20_000;
    let dt = period / n as f64;
    let mut acc = 0.0;
    for _ in 0..n {
        let a = m;
        m = rk4(|tt, m| (tt.sin() - lambda) * m + 1.0, m, t, t + dt, 1);
        acc += 0.5 * (a + m) * dt;
        t += dt;
    }
    acc / period
}

#[test]
fn bohr_limit_matches_periodic_ode_average() {
    let b = linear(3, |p| p.phi = TimeProfile::sine(1.0, 1.0));
    let x = State::new(vec![1.0, 1.0, 1.0]);
    let p = AveragedDriftProvider::oracle();
    let (v, _) = bohr_limit_drift(&p, &b, &x, 1e3, &[0.0, 3.0], 0.05).unwrap();
    for k in 0..3 {
        let oracle = periodic_average(b.fast.rates[k]);
        assert!(((v[k] - oracle) / oracle).abs() < 0.01, "mode {k}: {} vs {oracle}", v[k]);
    }
    let affine = affine_limit_drift(&b, 1e3, &[0.0, 3.0], 0.05).unwrap();
    let direct = affine.apply(&x.coeffs);
    for k in 0..3 {
        assert!((direct[k] - v[k]).abs() < 1e-12);
    }
}

#[test]
fn bohr_limit_spread_shrinks_with_window() {
    let b = linear(3, |_| {});
    let x = State::new(vec![1.0, 0.5, 0.25]);
    let p = AveragedDriftProvider::oracle();
    let anchors = [0.0, 1.0, 2.0];
    let (_, r1) = bohr_limit_drift(&p, &b, &x, 1e4, &anchors, 0.05).unwrap();
    let (_, r2) = bohr_limit_drift(&p, &b, &x, 2e4, &anchors, 0.05).unwrap();
    assert!(r2.tail_estimate <= r1.tail_estimate, "{} -> {}", r1.tail_estimate, r2.tail_estimate);
}

#[test]
fn asymptotic_a_residuals() {
    let (s, _) = spaces(4);
    let b = linear(4, |p| p.ell1 = TimeProfile::xi(1.0, 1.0));
    let probes: Vec<State> = (0..5).map(|i| State::new(vec![1.0, -0.5 * i as f64, 0.2, 0.1 * i as f64])).collect();
    let (limit, r) = asymptotic_a(&b, &s, &probes, 1e3).unwrap();
    let expected = probes
        .iter()
        .map(|x| {
            let shape: Vec<f64> = x.coeffs.iter().zip(&b.slow.shape).map(|(u, a)| a * u).collect();
            s.norm(&shape, slowfast::spaces::Norm::VStar).unwrap() / 1001.0
        })
        .fold(0.0, f64::max);
    assert!(((r - expected) / expected).abs() < 0.01);
    assert_eq!(limit.modulation, TimeProfile::constant(1.0));
    let (_, r2) = asymptotic_a(&b, &s, &probes, 2e3).unwrap();
    assert!((r / r2 - 2.0).abs() < 2e-3);
    let auto = linear(4, |p| p.ell1 = TimeProfile::constant(1.5));
    assert_eq!(asymptotic_a(&auto, &s, &probes, 1e3).unwrap().1, 0.0);
    let mut bare = b.clone();
    bare.ap = None;
    assert!(matches!(asymptotic_a(&bare, &s, &probes, 1.0), Err(slowfast::Error::UnsupportedBundle(_))));
}

#[test]
fn time_averaged_g1() {
    let x = State::new(vec![0.3, -0.4, 1.2, 0.0]);
    let constant = linear(4, |p| p.ell2 = TimeProfile::constant(0.7));
    assert_eq!(time_avg_g1(&constant, &x, 100.0, &[0.0, 5.0], 0.01).unwrap().1, 0.0);
    let b = linear(4, |p| p.ell2 = TimeProfile::xi(1.0, 1.0));
    let norm2: f64 = x.coeffs.iter().map(|v| v * v).sum();
    let mut prev = f64::INFINITY;
    for t in [1e2, 1e3, 1e4] {
        let (_, d) = time_avg_g1(&b, &x, t, &[0.0], 0.01).unwrap();
        let exact = norm2 * (1.0 - 1.0 / (1.0 + t)) / t;
        assert!(((d - exact) / exact).abs() < 0.01, "T={t}: {d} vs {exact}");
        assert!(d < prev);
        prev = d;
    }
}

#[test]
fn delta_rule() {
    assert_eq!(KhasminskiiConfig { delta: 1.0, rule: DeltaRule::EpsTwoThirds }.delta_for(1e-3).unwrap(), 1e-2);
    assert_eq!(KhasminskiiConfig::fixed(0.05).delta_for(1e-3).unwrap(), 0.05);
    assert!(KhasminskiiConfig::fixed(0.0).delta_for(0.1).is_err());
}

fn constant_path(x: &State, grid: &TimeGrid) -> PathSample {
    PathSample {
        grid: *grid,
        slow: Some(vec![x.clone(); grid.points]),
        fast: None,
        seeds: SeedRecord::new(0, 20),
        w1_checksum: None,
    }
}

#[test]
fn auxiliary_with_constant_slow_path_is_the_fast_path() {
    let b = linear(4, |_| {});
    let grid = TimeGrid::new(0.0, 0.5, H).unwrap();
    let x = State::new(vec![1.0, 0.3, -0.2, 0.1]);
    let path = constant_path(&x, &grid);
    let cfg = IntegratorConfig::with_step(H);
    let seeds = SeedRecord::new(77, cfg.noise_levels);
    let y0 = State::new(vec![0.2; 4]);
    let truth = simulate_fast_driven(&b, 0.05, path.slow.as_ref().unwrap(), &grid, &y0, None, &cfg, seeds).unwrap();
    let aux = khasminskii_auxiliary(&b, 0.05, &path, &y0, &KhasminskiiConfig::fixed(0.1), &cfg, seeds).unwrap();
    assert_eq!(aux.fast, truth.fast);
    let err = khasminskii_auxiliary(&b, 0.05, &path, &y0, &KhasminskiiConfig::fixed(H / 2.0), &cfg, seeds).unwrap_err();
    assert!(matches!(err, slowfast::Error::InvalidConfiguration(_)));
}

#[test]
fn single_block_reproduces_frozen_equation() {
    let b = linear(4, |_| {});
    let t_end = 0.5;
    let grid = TimeGrid::new(0.0, t_end, H).unwrap();
    let cfg = IntegratorConfig::with_step(H);
    let seeds = SeedRecord::new(5, cfg.noise_levels);
    let x0 = State::new(vec![0.5, 0.4, 0.3, 0.2]);
    // A moving slow path: only X_0 may be seen when δ = T.
    let slow: Vec<State> = (0..grid.points).map(|i| State::new(vec![0.5 + i as f64 * 1e-2, 0.4, 0.3, 0.2])).collect();
    let path = PathSample { grid, slow: Some(slow), fast: None, seeds, w1_checksum: None };
    let y0 = State::zeros(4);
    let aux = khasminskii_auxiliary(&b, 1.0, &path, &y0, &KhasminskiiConfig::fixed(t_end), &cfg, seeds).unwrap();
    let frozen = simulate_frozen(&b, &x0, 0.0, t_end, &y0, H, &cfg, seeds).unwrap();
    assert_eq!(aux.fast, frozen.fast);
}

#[test]
fn translation_scan_examples() {
    let probes: Vec<f64> = (0..400).map(|i| i as f64 * 0.05).collect();
    let sine = |t: f64| vec![t.sin()];
    let acc = translation_number_scan(&sine, 0.1, (0.0, 20.0), 0.01, &probes).unwrap();
    assert!(acc.iter().any(|t| (t - 2.0 * PI).abs() < 0.01));
    assert!(acc.iter().any(|t| (t - 4.0 * PI).abs() < 0.01));
    assert!(acc.iter().all(|t| (t - PI).abs() > 1.0));
    let all = translation_number_scan(&sine, 2.5, (0.0, 10.0), 0.5, &probes).unwrap();
    assert_eq!(all.len(), 21);
}

#[test]
fn quasi_periodic_translations_are_relatively_dense() {
    let f = |t: f64| vec![t.sin() + (2f64.sqrt() * t).cos()];
    let probes: Vec<f64> = (0..2000).map(|i| i as f64 * 0.05).collect();
    let acc = translation_number_scan(&f, 0.3, (0.0, 200.0), 0.005, &probes).unwrap();
    assert!(!acc.is_empty());
    // Dense oracle: |f(t+τ) − f(t)| ≤ 2|sin(τ/2)| + 2|sin(√2τ/2)|, so every τ with that
    // bound below 0.3 must be accepted.
    let mut sure = 0;
    for i in 0..=40_000 {
        let tau = i as f64 * 0.005;
        if 2.0 * (tau / 2.0).sin().abs() + 2.0 * (2f64.sqrt() * tau / 2.0).sin().abs() < 0.3 {
            sure += 1;
            assert!(acc.iter().any(|a| (a - tau).abs() < 1e-9), "tau {tau} missing");
        }
    }
    assert!(sure > 0);
    let gaps = acc.windows(2).map(|w| w[1] - w[0]).fold(acc[0], f64::max);
    let l = gaps + 0.01;
    let mut start = 0.0;
    while start + l <= 200.0 {
        assert!(acc.iter().any(|t| *t >= start && *t < start + l), "empty window at {start}");
        start += l / 2.0;
    }
}

#[test]
fn measure_ap_diagnostic_on_periodic_and_autonomous_fast_equation() {
    let mk = |phi: TimeProfile| {
        let mut b = linear(3, |p| p.phi = phi);
        b.fast.rates = vec![2.0, 8.0, 18.0];
        b.profile.gamma = 0.5;
        b
    };
    let x = State::new(vec![10.0, 0.0, 0.0]);
    let settings = ApDiagnosticSettings {
        pullback: slowfast::ergodic::PullbackSettings { particles: 1000, horizon: 16.0, step: 1.0 / 256.0, seed: 9, bias_tol: None },
        dictionary_size: 128,
        dictionary_seed: 1,
        epsilon: 0.0,
    };
    let cfg = IntegratorConfig::with_step(1.0 / 256.0);
    let periodic = mk(TimeProfile::sine(1.0, 1.0));
    let r = measure_ap_diagnostic(&periodic, &x, &[2.0 * PI, PI], &[PI / 2.0], &settings, &cfg).unwrap();
    assert!(r.per_tau[0].passed, "{r:?}");
    assert!(!r.per_tau[1].passed, "{r:?}");
    assert!(!r.passed);
    let auto = mk(TimeProfile::constant(0.5));
    let r = measure_ap_diagnostic(&auto, &x, &[PI, 1.0], &[0.0], &settings, &cfg).unwrap();
    assert!(r.passed, "{r:?}");
}
