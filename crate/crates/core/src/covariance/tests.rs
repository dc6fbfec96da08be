use super::*;
use crate::quad::tanh_sinh;
use crate::special::{gamma, scaled_upper_gamma};
use crate::spectral_model::{build_distributed_model, build_pointwise_model, projection_indicator, projection_sine};
use approx::assert_relative_eq;
use proptest::prelude::*;

/// Time-domain oracle valid for every H:
/// r_kl(t) = φ_kφ_l/2 [ a_l/(a_k+a_l) P_{a_l}(t) + a_k/(a_k+a_l) M_{a_k}(t) − t^{2H} ]
/// with P_a(t) = a∫_0^∞ e^{−as}(t+s)^{2H}ds and M_a(t) = a∫_0^∞ e^{−as}|t−s|^{2H}ds.
fn time_domain_oracle(a_k: f64, a_l: f64, h: f64, t: f64) -> f64 {
    let p = scaled_upper_gamma(2.0 * h + 1.0, a_l * t) * a_l.powf(-2.0 * h);
    let tol = Tolerance::new(0.0, 1e-13);
    let inside = if t > 0.0 {
        a_k * tanh_sinh(|s| (-a_k * s).exp() * (t - s).powf(2.0 * h), 0.0, t, tol)
            .unwrap()
            .value
    } else {
        0.0
    };
    let m = inside + (-a_k * t).exp() * gamma(2.0 * h + 1.0) * a_k.powf(-2.0 * h);
    0.5 * (a_l / (a_k + a_l) * p + a_k / (a_k + a_l) * m - t.powf(2.0 * h))
}

/// Direct frequency integral at lag zero, without any contour rotation:
/// c_H ∫_ℝ |ω|^{1−2H} / ((a_k+iω)(a_l−iω)) dω.
fn frequency_oracle_lag_zero(a_k: f64, a_l: f64, h: f64) -> f64 {
    // Re[1/((a_k+iω)(a_l−iω))] = (a_k a_l + ω²) / ((a_k²+ω²)(a_l²+ω²))
    let f = |w: f64| w.powf(1.0 - 2.0 * h) * (a_k * a_l + w * w) / ((a_k * a_k + w * w) * (a_l * a_l + w * w));
    let tol = Tolerance::new(0.0, 1e-13);
    let scale = a_k.max(a_l);
    let head = tanh_sinh(f, 0.0, scale, tol).unwrap().value;
    // ω = scale·v^{−p} with p = 1/(2H) flattens the ω^{−1−2H} tail on (0, 1].
    let p = 0.5 / h;
    let tail = tanh_sinh(
        |v| {
            let u = v.powf(p) / scale;
            p * scale.powf(-2.0 * h) * (1.0 + a_k * a_l * u * u)
                / ((1.0 + a_k * a_k * u * u) * (1.0 + a_l * a_l * u * u))
        },
        0.0,
        1.0,
        tol,
    )
    .unwrap()
    .value;
    2.0 * spectral::c_h(h) * (head + tail)
}

#[test]
fn stationary_variance_examples() {
    assert_relative_eq!(stationary_variance_mode(1.0, 1.0, 0.5), 0.5, max_relative = 1e-15);
    assert_relative_eq!(stationary_variance_mode(2.0, 1.0, 0.5), 0.25, max_relative = 1e-15);
    assert_relative_eq!(
        stationary_variance_mode(1.0, 1.0, 0.7),
        0.7 * gamma(1.4),
        max_relative = 1e-15
    );
    assert_relative_eq!(
        stationary_variance_mode(1.0, 1.0, 0.7),
        0.621_084_9,
        max_relative = 1e-6
    );
}

#[test]
fn lag_zero_quadrature_matches_closed_form() {
    for &h in &[0.05, 0.2, 0.3, 0.45, 0.5, 0.55, 0.7, 0.85, 0.95] {
        for &(a_k, a_l) in &[
            (1.0, 1.0),
            (0.3, 0.3),
            (9.869_604_401_089_358, 9.869_604_401_089_358),
            (1.0, 7.0),
            (40.0, 0.2),
        ] {
            let closed = stationary_cross_cov(a_k, a_l, 1.0, 1.0, h);
            let rotated = spectral_cross_autocov(a_k, a_l, 1.0, 1.0, h, 0.0).unwrap();
            let direct = frequency_oracle_lag_zero(a_k, a_l, h);
            assert_relative_eq!(rotated, closed, max_relative = 1e-10);
            assert_relative_eq!(direct, closed, max_relative = 1e-9);
        }
    }
}

#[test]
fn markov_case_is_exponential() {
    for &a in &[0.1, 1.0, 2.0, 9.869_604_401_089_358] {
        for &t in &[0.0, 0.01, 0.5, 1.0, 3.0, 39.0 / a, 41.0 / a, 100.0 / a] {
            let r = spectral_cross_autocov(a, a, 1.3, 1.3, 0.5, t).unwrap();
            let exact = 1.69 * (-a * t).exp() / (2.0 * a);
            assert!(
                (r - exact).abs() <= 1e-11 * 1.69 / (2.0 * a),
                "a={a} t={t}: {r} vs {exact}"
            );
        }
    }
}

#[test]
fn spectral_matches_time_domain_oracle() {
    for &h in &[0.1, 0.3, 0.45, 0.6, 0.7, 0.9] {
        for &(a_k, a_l) in &[
            (1.0, 1.0),
            (0.5, 3.0),
            (3.0, 0.5),
            (9.869_604_401_089_358, 39.478_417_604_357_43),
        ] {
            for &t in &[0.0, 0.1, 0.7, 2.0, 5.0] {
                let r = spectral_cross_autocov(a_k, a_l, 1.0, 1.0, h, t).unwrap();
                let o = time_domain_oracle(a_k, a_l, h, t);
                // The oracle loses digits to cancellation between t^{2H} terms.
                let tol = 1e-9 * r.abs() + 1e-12 * (1.0 + t.powf(2.0 * h));
                assert!((r - o).abs() <= tol, "H={h} a=({a_k},{a_l}) t={t}: {r} vs {o}");
            }
        }
    }
}

#[test]
fn kernel_matches_spectral() {
    let pi2 = std::f64::consts::PI.powi(2);
    for &h in &[0.55, 0.65, 0.7, 0.9] {
        for &(a_k, a_l) in &[(1.0, 1.0), (pi2, pi2), (pi2, 4.0 * pi2), (4.0 * pi2, pi2), (0.2, 5.0)] {
            for &t in &[0.0, 0.5, 1.0, 5.0, 20.0] {
                let s = spectral_cross_autocov(a_k, a_l, 1.0, 1.0, h, t).unwrap();
                let k = kernel_autocov(a_k, a_l, 1.0, 1.0, h, t).unwrap();
                assert_relative_eq!(s, k, max_relative = 1e-9);
            }
        }
    }
    assert!(kernel_autocov(1.0, 1.0, 1.0, 1.0, 0.5, 1.0).is_err());
}

#[test]
fn kernel_single_mode_bounds() {
    let r0 = kernel_autocov(1.0, 1.0, 1.0, 1.0, 0.75, 0.0).unwrap();
    let r10 = kernel_autocov(1.0, 1.0, 1.0, 1.0, 0.75, 10.0).unwrap();
    assert!(r10 > 0.0 && r10 < r0);
}

#[test]
fn series_and_quadrature_agree_at_the_switch() {
    for &h in &[0.2, 0.55, 0.7] {
        for &(a_k, a_l) in &[(1.0f64, 1.0f64), (1.0, 3.0), (3.0, 1.0)] {
            let t_lo = WATSON_THRESHOLD / a_k.min(a_l) * (1.0 - 1e-12);
            let t_hi = WATSON_THRESHOLD / a_k.min(a_l) * (1.0 + 1e-12);
            let lo = spectral_cross_autocov(a_k, a_l, 1.0, 1.0, h, t_lo).unwrap();
            let hi = spectral_cross_autocov(a_k, a_l, 1.0, 1.0, h, t_hi).unwrap();
            assert_relative_eq!(lo, hi, max_relative = 1e-10);
        }
    }
}

#[test]
fn long_range_asymptote() {
    for &h in &[0.3, 0.7] {
        let a = 2.0;
        let limit = h * (2.0 * h - 1.0) / (a * a);
        let mut prev = f64::INFINITY;
        for &t in &[1e2, 1e3, 1e4, 1e5] {
            let r = spectral_cross_autocov(a, a, 1.0, 1.0, h, t).unwrap();
            let gap = (t.powf(2.0 - 2.0 * h) * r / limit - 1.0).abs();
            assert!(gap < prev);
            prev = gap;
        }
        assert!(prev < 1e-4);
    }
}

#[test]
fn rank_one_assembly_matches_pairwise_evaluation() {
    let model = build_pointwise_model(0.3, 6, 0.7, 0.35).unwrap();
    for &t in &[0.0, 0.004, 0.05, 0.3, 2.0] {
        let m = autocov_matrix(&model, t).unwrap();
        let a = model.drifts();
        let phi = model.loadings();
        for k in 0..6 {
            for l in 0..6 {
                let direct = spectral_cross_autocov(a[k], a[l], phi[k], phi[l], model.hurst, t).unwrap();
                let scale = (m.get(k, k).abs() * m.get(l, l).abs()).sqrt().max(1e-300);
                assert!((m.get(k, l) - direct).abs() <= 1e-9 * scale, "t={t} ({k},{l})");
            }
        }
    }
}

#[test]
fn lag_zero_matrix_is_symmetric_psd() {
    let model = build_pointwise_model(0.37, 10, 1.0, 0.3).unwrap();
    let r0 = autocov_matrix(&model, 0.0).unwrap().to_dense();
    assert!((&r0 - r0.transpose()).norm() < 1e-15);
    let eig = r0.symmetric_eigenvalues();
    assert!(eig.iter().all(|&e| e > -1e-12 * r0.norm()));
    let q = autocov_matrix_by_quadrature_at_zero(&model).unwrap().to_dense();
    assert!((&q - &r0).norm() < 1e-10 * r0.norm());
}

#[test]
fn hs_norm_examples() {
    let z = AutoCovMatrix {
        t: 0.0,
        entries: Entries::Diagonal(vec![0.0; 3]),
    };
    assert_eq!(hs_norm(&z), 0.0);
    let d = AutoCovMatrix {
        t: 0.0,
        entries: Entries::Diagonal(vec![3.0, 4.0]),
    };
    assert_relative_eq!(hs_norm(&d), 5.0);
    let v = DVector::from_vec(vec![1.0, 2.0, -2.0]);
    let r = AutoCovMatrix {
        t: 0.0,
        entries: Entries::Full(&v * v.transpose()),
    };
    assert_relative_eq!(hs_norm(&r), 9.0, max_relative = 1e-15);
}

#[test]
fn s_n_single_surviving_term() {
    let norms = [2.0, 0.0, 0.0, 0.0];
    assert_relative_eq!(s_n_from_norms(&norms, 4), 8.0);
    let model = build_distributed_model(1, 1, 3, 1.0, 0.6, None).unwrap();
    let r0 = hs_norm(&autocov_matrix(&model, 0.0).unwrap());
    assert_relative_eq!(s_n(&model, 1, 1.0).unwrap(), 2.0 * r0 * r0, max_relative = 1e-14);
}

#[test]
fn markov_limits() {
    // R(t) = e^{−t}/2: s_∞* = 1/2 + e^{−2}/(1 − e^{−2}), u_∞* = 4∫ e^{−2t}/4 = 1/2.
    let model = ModelConfig::new(1.0, 0.5, vec![1.0], vec![1.0], NoiseKind::Diagonal, "scalar").unwrap();
    let s = s_infty_star(&model, 1.0).unwrap();
    let e2 = (-2.0f64).exp();
    assert_relative_eq!(s.value, 0.5 + e2 / (1.0 - e2), max_relative = 1e-10);
    let u = u_infty_star(&model).unwrap();
    assert_relative_eq!(u.value, 0.5, max_relative = 1e-9);
    for n in [1usize, 2, 5, 10, 100, 1000] {
        assert!(s_n(&model, n, 1.0).unwrap() <= s.value);
    }
}

#[test]
fn s_n_approaches_s_infty_star() {
    let model = build_distributed_model(1, 1, 5, 0.1, 0.6, None).unwrap();
    let limit = s_infty_star(&model, 1.0).unwrap();
    let mut gaps = Vec::new();
    for n in [100usize, 1000, 10000] {
        gaps.push((limit.value - s_n(&model, n, 1.0).unwrap()) / limit.value);
    }
    assert!(gaps.windows(2).all(|g| g[1] < g[0]), "{gaps:?}");
    assert!(gaps[2] < 1e-2 && gaps[2] > 0.0);
}

#[test]
fn non_summable_regime_rejected() {
    let model = build_distributed_model(1, 1, 3, 1.0, 0.8, None).unwrap();
    assert!(matches!(s_infty_star(&model, 1.0), Err(Error::UnsupportedHurst { .. })));
    assert!(matches!(u_infty_star(&model), Err(Error::UnsupportedHurst { .. })));
}

#[test]
fn projection_examples() {
    let model = build_pointwise_model(0.5, 8, 1.0, 0.6).unwrap();
    let w = projection_sine(4, 8).unwrap();
    for &t in &[0.0, 0.3, 2.0] {
        assert!(r_z(&model, &w, t).unwrap().abs() < 1e-28);
    }
    let window = projection_indicator(0.0, 0.5, 8).unwrap();
    assert!(r_z(&model, &window, 0.0).unwrap() > 0.0);
    let diag = build_distributed_model(1, 1, 4, 1.0, 0.6, None).unwrap();
    let w = projection_sine(2, 4).unwrap();
    let r = autocov_matrix(&diag, 0.8).unwrap();
    assert_relative_eq!(r_z(&diag, &w, 0.8).unwrap(), 0.5 * r.get(1, 1), max_relative = 1e-15);
}

#[test]
fn trace_scaling_law() {
    let model = build_distributed_model(1, 1, 20, 1.0, 0.55, None).unwrap();
    let base = trace_q(&model);
    for &alpha in &[0.5, 2.0, 3.7] {
        let scaled = model.with_alpha(alpha).unwrap();
        let by_quadrature = autocov_matrix_by_quadrature_at_zero(&scaled).unwrap().trace();
        assert_relative_eq!(
            by_quadrature,
            alpha.powf(-2.0 * model.hurst) * base,
            max_relative = 1e-10
        );
    }
}

#[test]
fn block_covariance_is_psd() {
    let model = build_pointwise_model(0.3, 4, 1.0, 0.3).unwrap();
    let n = 12;
    let table = LagTable::build(&model, 0.05, n).unwrap();
    let dim = 4;
    let mut sigma = DMatrix::zeros(n * dim, n * dim);
    for i in 0..n {
        for j in 0..n {
            for k in 0..dim {
                for l in 0..dim {
                    sigma[(i * dim + k, j * dim + l)] = if i >= j {
                        table.lag(i - j).get(k, l)
                    } else {
                        table.lag(j - i).get(l, k)
                    };
                }
            }
        }
    }
    assert!((&sigma - sigma.transpose()).norm() < 1e-12 * sigma.norm());
    let eig = sigma.symmetric_eigenvalues();
    assert!(eig.min() > -1e-8 * sigma.norm());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn hs_norm_bounded_by_trace(h in 0.1f64..0.9, t in 0.0f64..30.0, alpha in 0.2f64..3.0) {
        let model = build_distributed_model(1, 1, 6, alpha, h, None).unwrap();
        let r = autocov_matrix(&model, t).unwrap();
        prop_assert!(hs_norm(&r) <= trace_q(&model) * (1.0 + 1e-12));
    }

    #[test]
    fn cross_autocov_is_symmetric_at_lag_zero(h in 0.05f64..0.95, a_k in 0.1f64..50.0, a_l in 0.1f64..50.0) {
        let kl = spectral_cross_autocov(a_k, a_l, 1.0, 1.0, h, 0.0).unwrap();
        let lk = spectral_cross_autocov(a_l, a_k, 1.0, 1.0, h, 0.0).unwrap();
        prop_assert!((kl - lk).abs() <= 1e-10 * kl.abs());
    }
}
