use proptest::prelude::*;
use slowfast::spaces::*;

/// `‖u‖²` by midpoint quadrature of the explicit eigenfunction expansion on a grid fine
/// enough to integrate every product of basis functions exactly.
fn direct_h_norm2(op: OperatorKind, u: &[f64]) -> f64 {
    let n = 8 * u.len();
    let s2 = 2f64.sqrt();
    let mut acc = 0.0;
    for j in 0..n {
        let x = (j as f64 + 0.5) / n as f64;
        let v: f64 = u
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let e = match op {
                    OperatorKind::DirichletLaplacian1d => s2 * ((k + 1) as f64 * std::f64::consts::PI * x).sin(),
                    OperatorKind::NeumannLaplacian1d if k == 0 => 1.0,
                    OperatorKind::NeumannLaplacian1d => s2 * (k as f64 * std::f64::consts::PI * x).cos(),
                };
                c * e
            })
            .sum();
        acc += v * v;
    }
    acc / n as f64
}

/// Asymptotic two-sample Kolmogorov-Smirnov p-value.
fn ks_p_value(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < n && j < m {
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    let p: f64 = (1..=100)
        .map(|k| {
            let k = k as f64;
            2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp()
        })
        .sum();
    p.clamp(0.0, 1.0)
}

#[test]
fn increments_scale_like_square_root_of_time() {
    let eps = 1.0 / 64.0;
    let short: Vec<f64> = (0..10_000u64)
        .map(|s| NoiseSource::new(s, 1, STREAM_SLOW).increment(0.0, eps).unwrap()[0] / eps.sqrt())
        .collect();
    let long: Vec<f64> = (10_000..20_000u64)
        .map(|s| NoiseSource::new(s, 1, STREAM_SLOW).increment(0.0, 1.0).unwrap()[0])
        .collect();
    let p = ks_p_value(short, long);
    assert!(p > 0.01, "KS p-value {p}");
}

#[test]
fn ks_detects_a_wrong_scale() {
    let a: Vec<f64> = (0..10_000u64).map(|s| NoiseSource::new(s, 1, STREAM_SLOW).increment(0.0, 0.5).unwrap()[0]).collect();
    let b: Vec<f64> = (10_000..20_000u64).map(|s| NoiseSource::new(s, 1, STREAM_SLOW).increment(0.0, 1.0).unwrap()[0]).collect();
    assert!(ks_p_value(a, b) < 1e-6);
}

proptest! {
    #[test]
    fn parseval_holds_for_both_bases(u in proptest::collection::vec(-10.0f64..10.0, 1..24), neumann in any::<bool>()) {
        let op = if neumann { OperatorKind::NeumannLaplacian1d } else { OperatorKind::DirichletLaplacian1d };
        let space = make_space(u.len(), op, 1.0).unwrap();
        let coeff_sum: f64 = u.iter().map(|c| c * c).sum();
        let direct = direct_h_norm2(op, &u);
        let via_space = norm(&space, &State::new(u.clone()), Norm::H).unwrap().powi(2);
        let scale = coeff_sum.max(1e-300);
        prop_assert!((direct - coeff_sum).abs() <= 1e-12 * scale);
        prop_assert!((via_space - coeff_sum).abs() <= 1e-12 * scale);
    }

    #[test]
    fn dyadic_splits_sum_exactly(seed in any::<u64>(), modes in 1usize..5, level in 1u32..12, a in 0i64..64, len in 1i64..64, cut in 0.0f64..1.0) {
        let unit = (2.0f64).powi(-(level as i32));
        let left = (a - 32) as f64 * unit;
        let right = left + len as f64 * unit;
        let mid = left + ((cut * len as f64).floor()) * unit;
        let src = NoiseSource::new(seed, modes, STREAM_FAST);
        let whole = src.increment(left, right).unwrap();
        let r = src.increment(mid, right).unwrap();
        let l = if mid > left { src.increment(left, mid).unwrap() } else { vec![0.0; modes] };
        for k in 0..modes {
            prop_assert_eq!(l[k] + r[k], whole[k]);
        }
    }

    #[test]
    fn half_unit_split_is_exact(seed in any::<u64>()) {
        let src = NoiseSource::new(seed, 2, STREAM_SLOW);
        let (a, b, w) = (src.increment(0.0, 0.5).unwrap(), src.increment(0.5, 1.0).unwrap(), src.increment(0.0, 1.0).unwrap());
        prop_assert_eq!(a[0] + b[0], w[0]);
        prop_assert_eq!(a[1] + b[1], w[1]);
    }
}
