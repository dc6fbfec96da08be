//! Cumulants of the normalized quadratic functional
//! `F_n = (Σ_i |Z(i·dt)|² − E) / √(n s_n)`, their bound shapes, the rate
//! function `ξ_H`, and distances of samples to the standard normal law.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::covariance::{s_n_from_norms, LagTable};
use crate::error::{invalid, Error, Result};
use crate::simulate::block_covariance;
use crate::special::{normal_cdf, normal_quantile};
use crate::spectral_model::{ModelConfig, NoiseKind};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CumulantReport {
    pub n: usize,
    pub kappa3_exact: f64,
    pub kappa4_exact: f64,
    pub kappa3_bound_shape: f64,
    pub kappa4_bound_shape: f64,
    /// `2 Tr Σ² / n`.
    pub s_n: f64,
}

/// Above this matrix size trace powers use matrix products instead of an
/// eigendecomposition.
pub const EIGEN_TRACE_LIMIT: usize = 4000;

/// Largest stacked dimension `n·N` accepted by [`exact_cumulants`].
pub const DENSE_CUMULANT_LIMIT: usize = 12_000;

/// `(Tr Σ², Tr Σ³, Tr Σ⁴)` of a symmetric matrix.
pub fn trace_powers(sigma: DMatrix<f64>) -> (f64, f64, f64) {
    if sigma.nrows() <= EIGEN_TRACE_LIMIT {
        let eig = SymmetricEigen::new(sigma).eigenvalues;
        let mut t = (0.0, 0.0, 0.0);
        for &l in eig.iter() {
            let l2 = l * l;
            t.0 += l2;
            t.1 += l2 * l;
            t.2 += l2 * l2;
        }
        t
    } else {
        let sq = &sigma * &sigma;
        let t2 = sigma.norm_squared();
        let t3 = sq.dot(&sigma);
        let t4 = sq.norm_squared();
        (t2, t3, t4)
    }
}

fn toeplitz(seq: &[f64]) -> DMatrix<f64> {
    let n = seq.len();
    DMatrix::from_fn(n, n, |i, j| seq[i.abs_diff(j)])
}

/// Exact `κ₃(F_n)`, `κ₄(F_n)` from `κ_p(zᵀz) = 2^{p−1}(p−1)! Tr Σ^p`, plus
/// the bound shapes for comparison.
pub fn exact_cumulants(model: &ModelConfig, n: usize, dt: f64) -> Result<CumulantReport> {
    let table = LagTable::build(model, dt, n.max(1))?;
    exact_cumulants_from_table(&table, n)
}

pub fn exact_cumulants_from_table(table: &LagTable, n: usize) -> Result<CumulantReport> {
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    if table.len() < n {
        return Err(invalid(format!("lag table holds {} lags, {n} needed", table.len())));
    }
    let model = table.model();
    let dim = model.modes();
    if n * dim > DENSE_CUMULANT_LIMIT {
        return Err(Error::Numerical(format!(
            "stacked covariance of size {} exceeds the dense limit {DENSE_CUMULANT_LIMIT}; use Monte Carlo k-statistics",
            n * dim
        )));
    }
    let (t2, t3, t4) = match model.noise_kind() {
        NoiseKind::Diagonal => {
            // Independent modes: Σ is block diagonal with Toeplitz blocks.
            let mut acc = (0.0, 0.0, 0.0);
            for k in 0..dim {
                let seq: Vec<f64> = (0..n).map(|i| table.lag(i).get(k, k)).collect();
                if seq[0] == 0.0 {
                    continue;
                }
                let (a, b, c) = trace_powers(toeplitz(&seq));
                acc = (acc.0 + a, acc.1 + b, acc.2 + c);
            }
            acc
        }
        NoiseKind::RankOne => trace_powers(block_covariance(table, n)),
    };
    if t2 <= 0.0 {
        return Err(invalid("the stacked covariance vanishes; cumulants are undefined"));
    }
    let norms: Vec<f64> = table.hs_norms()[..n].to_vec();
    let (b3, b4) = bound_shapes_from_norms(&norms, n);
    Ok(CumulantReport {
        n,
        kappa3_exact: 8.0 * t3 / (2.0 * t2).powf(1.5),
        kappa4_exact: 48.0 * t4 / (2.0 * t2).powi(2),
        kappa3_bound_shape: b3,
        kappa4_bound_shape: b4,
        s_n: 2.0 * t2 / n as f64,
    })
}

/// `B₃(n) = n^{−1/2} s_n^{−3/2} (Σ_{|i|<n} ‖Q(i)‖^{3/2})²` and
/// `B₄(n) = n^{−1} s_n^{−2} (Σ_{|i|<n} ‖Q(i)‖^{4/3})³` from the norms of
/// lags `0..n`.
pub fn bound_shapes_from_norms(norms: &[f64], n: usize) -> (f64, f64) {
    let s = s_n_from_norms(norms, n);
    let sym = |p: f64| norms[0].powf(p) + 2.0 * norms[1..n].iter().map(|x| x.powf(p)).sum::<f64>();
    let nf = n as f64;
    let b3 = nf.powf(-0.5) * s.powf(-1.5) * sym(1.5).powi(2);
    let b4 = nf.powi(-1) * s.powi(-2) * sym(4.0 / 3.0).powi(3);
    (b3, b4)
}

pub fn cumulant_bound_shapes(model: &ModelConfig, n: usize, dt: f64) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    let table = LagTable::build(model, dt, n)?;
    Ok(bound_shapes_from_norms(&table.hs_norms(), n))
}

/// `ξ_H(x) = x^{−1/2}` for `H ≤ 5/8` and `x^{4H−3}` for `5/8 < H < 3/4`.
pub fn xi_h(hurst: f64, x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(invalid(format!("rate argument must be positive, got {x}")));
    }
    if !(hurst > 0.0 && hurst < 0.75) {
        return Err(Error::UnsupportedHurst {
            hurst,
            reason: "no Berry–Esseen regime for H ≥ 3/4",
        });
    }
    Ok(if hurst <= 0.625 {
        x.powf(-0.5)
    } else {
        x.powf(4.0 * hurst - 3.0)
    })
}

/// Exponent of `ξ_H`: `−1/2` or `4H − 3`.
pub fn xi_exponent(hurst: f64) -> f64 {
    if hurst <= 0.625 {
        -0.5
    } else {
        4.0 * hurst - 3.0
    }
}

fn sorted(samples: &[f64]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(invalid("no samples"));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(invalid("samples must be finite"));
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(s)
}

/// Kolmogorov distance between the empirical law of `samples` and `cdf`,
/// with the supremum taken over sample points in `[−K, K]` when a
/// localization `K` is given.
pub fn ks_distance_to<F: Fn(f64) -> f64>(samples: &[f64], cdf: F, localize: Option<f64>) -> Result<f64> {
    let s = sorted(samples)?;
    let m = s.len() as f64;
    let mut d = 0.0f64;
    let mut i = 0;
    while i < s.len() {
        let x = s[i];
        let mut j = i;
        while j < s.len() && s[j] == x {
            j += 1;
        }
        if localize.map_or(true, |k| x.abs() <= k) {
            let f = cdf(x);
            d = d.max((f - i as f64 / m).abs()).max((j as f64 / m - f).abs());
        }
        i = j;
    }
    Ok(d)
}

/// Kolmogorov distance to `N(0, 1)`.
pub fn ks_distance(samples: &[f64], localize: Option<f64>) -> Result<f64> {
    ks_distance_to(samples, normal_cdf, localize)
}

/// Kolmogorov distance to the normal law with the sample mean and variance.
pub fn ks_distance_best_normal(samples: &[f64]) -> Result<f64> {
    let (mean, sd) = mean_sd(samples)?;
    if sd == 0.0 {
        return Err(invalid("samples have zero variance"));
    }
    ks_distance_to(samples, |x| normal_cdf((x - mean) / sd), None)
}

/// `W₁` between the empirical law of `samples` and `N(0, 1)`, computed
/// exactly as `∫ |F_m − Φ|` with `∫Φ = xΦ(x) + φ(x)`.
pub fn wasserstein1_distance(samples: &[f64]) -> Result<f64> {
    let s = sorted(samples)?;
    let m = s.len();
    let pdf = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let g = |x: f64| x * normal_cdf(x) + pdf(x);
    // lower tail ∫_{−∞}^{s₁} Φ and upper tail ∫_{s_m}^{∞} (1 − Φ)
    let mut total = g(s[0]) + (pdf(s[m - 1]) - s[m - 1] * normal_cdf(-s[m - 1]));
    for k in 1..m {
        let (a, b) = (s[k - 1], s[k]);
        if b == a {
            continue;
        }
        let p = k as f64 / m as f64;
        let c = normal_quantile(p).clamp(a, b);
        total += p * (c - a) - (g(c) - g(a)) + (g(b) - g(c)) - p * (b - c);
    }
    Ok(total)
}

/// `2 √(C d_W)` with `C = 1/√(2π)`, the largest Kolmogorov distance a
/// law with density bounded by `C` can have at Wasserstein distance `d_W`.
pub fn kolmogorov_from_wasserstein(dw: f64) -> f64 {
    2.0 * (dw / (2.0 * std::f64::consts::PI).sqrt()).sqrt()
}

/// Asymptotic p-value of a Kolmogorov distance `d` from `m` samples, with
/// Stephens' finite-sample correction.
pub fn ks_p_value(d: f64, m: usize) -> f64 {
    let sm = (m as f64).sqrt();
    let x = (sm + 0.12 + 0.11 / sm) * d;
    if x < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * x * x).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

pub fn mean_sd(samples: &[f64]) -> Result<(f64, f64)> {
    if samples.len() < 2 {
        return Err(invalid("at least two samples are required"));
    }
    let m = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / m;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
    Ok((mean, var.sqrt()))
}

/// Unbiased k-statistics `(k₂, k₃, k₄)`.
pub fn k_statistics(samples: &[f64]) -> Result<(f64, f64, f64)> {
    if samples.len() < 4 {
        return Err(invalid("at least four samples are required"));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for x in samples {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    let k2 = n * m2 / (n - 1.0);
    let k3 = n * n * m3 / ((n - 1.0) * (n - 2.0));
    let k4 = n * n * ((n + 1.0) * m4 - 3.0 * (n - 1.0) * m2 * m2) / ((n - 1.0) * (n - 2.0) * (n - 3.0));
    Ok((k2, k3, k4))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::s_n;
    use crate::rng::substream;
    use crate::spectral_model::{build_distributed_model, build_pointwise_model};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn white_model(q: f64) -> ModelConfig {
        // A huge drift makes lags ≥ 1 vanish to double precision.
        let a = 1e4;
        let phi = (q / stationary(a)).sqrt();
        ModelConfig::new(1.0, 0.5, vec![a], vec![phi], NoiseKind::Diagonal, "white").unwrap()
    }

    fn stationary(a: f64) -> f64 {
        1.0 / (2.0 * a)
    }

    #[test]
    fn chi_square_cumulants() {
        let r = exact_cumulants(&white_model(2.5), 1, 1.0).unwrap();
        assert_relative_eq!(r.kappa3_exact, 2.0 * 2f64.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(r.kappa4_exact, 12.0, max_relative = 1e-12);
        assert_relative_eq!(r.s_n, 2.0 * 2.5 * 2.5, max_relative = 1e-12);
    }

    #[test]
    fn white_sequences_scale_like_sums() {
        for &n in &[4usize, 16, 64, 256] {
            let r = exact_cumulants(&white_model(1.0), n, 1.0).unwrap();
            let nf = n as f64;
            assert_relative_eq!(r.kappa3_exact, 2.0 * 2f64.sqrt() / nf.sqrt(), max_relative = 1e-10);
            assert_relative_eq!(r.kappa4_exact, 12.0 / nf, max_relative = 1e-10);
        }
    }

    #[test]
    fn trace_route_matches_isserlis_route() {
        for model in [
            build_distributed_model(1, 1, 3, 0.1, 0.6, None).unwrap(),
            build_distributed_model(1, 1, 3, 0.1, 0.3, None).unwrap(),
            build_pointwise_model(0.3, 3, 0.2, 0.65).unwrap(),
        ] {
            for &n in &[1usize, 7, 40] {
                let r = exact_cumulants(&model, n, 1.0).unwrap();
                assert_relative_eq!(r.s_n, s_n(&model, n, 1.0).unwrap(), max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn product_route_matches_eigen_route() {
        let model = build_pointwise_model(0.3, 3, 0.2, 0.65).unwrap();
        let table = LagTable::build(&model, 1.0, 30).unwrap();
        let sigma = block_covariance(&table, 30);
        let (a2, a3, a4) = trace_powers(sigma.clone());
        let sq = &sigma * &sigma;
        assert_relative_eq!(a2, sigma.norm_squared(), max_relative = 1e-10);
        assert_relative_eq!(a3, sq.dot(&sigma), max_relative = 1e-10);
        assert_relative_eq!(a4, sq.norm_squared(), max_relative = 1e-10);
    }

    #[test]
    fn single_lag_bound_shapes() {
        for &n in &[1usize, 9, 100] {
            let mut norms = vec![0.0; n];
            norms[0] = 0.7;
            let (b3, _) = bound_shapes_from_norms(&norms, n);
            assert_relative_eq!(b3, (n as f64).powf(-0.5) / 2f64.powf(1.5), max_relative = 1e-12);
        }
    }

    #[test]
    fn bound_shapes_agree_between_entry_points() {
        let model = build_distributed_model(1, 1, 3, 0.1, 0.55, None).unwrap();
        for &n in &[32usize, 128] {
            let r = exact_cumulants(&model, n, 1.0).unwrap();
            assert!(r.kappa3_exact > 0.0 && r.kappa4_exact > 0.0);
            assert!(r.kappa3_bound_shape > 0.0 && r.kappa4_bound_shape > 0.0);
            let (b3, b4) = cumulant_bound_shapes(&model, n, 1.0).unwrap();
            assert_eq!((b3, b4), (r.kappa3_bound_shape, r.kappa4_bound_shape));
        }
    }

    #[test]
    fn xi_examples() {
        assert_relative_eq!(xi_h(0.5, 100.0).unwrap(), 0.1, max_relative = 1e-15);
        assert_relative_eq!(xi_h(0.625, 16.0).unwrap(), 0.25, max_relative = 1e-15);
        assert_relative_eq!(xi_h(0.7, 1e4).unwrap(), 10f64.powf(-0.8), max_relative = 1e-12);
        assert!(matches!(xi_h(0.75, 10.0), Err(Error::UnsupportedHurst { .. })));
        assert!(xi_h(0.8, 10.0).is_err());
    }

    fn normals(m: usize, seed: u64) -> Vec<f64> {
        let mut rng = substream(seed, 0, 0);
        (0..m).map(|_| rng.sample(StandardNormal)).collect()
    }

    #[test]
    fn ks_examples() {
        let x = normals(10_000, 1);
        let d = ks_distance(&x, None).unwrap();
        // DKW: P(d > 0.02) ≤ 2 exp(−2·10⁴·0.02²) ≈ 6.7e−4.
        assert!(d < 0.02);
        assert!(ks_distance(&x, Some(1.0)).unwrap() <= d);
        assert_eq!(ks_distance(&[0.0; 10], None).unwrap(), 0.5);
        assert!(ks_distance(&[], None).is_err());
    }

    #[test]
    fn ks_of_single_point_is_exact() {
        // F jumps from 0 to 1 at x = 1: distance max(Φ(1), 1 − Φ(1)).
        assert_relative_eq!(
            ks_distance(&[1.0], None).unwrap(),
            normal_cdf(1.0),
            max_relative = 1e-15
        );
    }

    #[test]
    fn wasserstein_of_a_point_mass() {
        // W₁(δ₀, N(0,1)) = E|Z| and W₁(δ_x, N(0,1)) = E|Z − x|
        assert_relative_eq!(
            wasserstein1_distance(&[0.0]).unwrap(),
            (2.0 / std::f64::consts::PI).sqrt(),
            max_relative = 1e-14
        );
        let x: f64 = 1.3;
        let expected =
            2.0 * (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt() + x * (2.0 * normal_cdf(x) - 1.0);
        assert_relative_eq!(wasserstein1_distance(&[x]).unwrap(), expected, max_relative = 1e-14);
    }

    proptest! {
        #[test]
        fn kolmogorov_never_exceeds_the_wasserstein_bound(v in proptest::collection::vec(-4.0f64..4.0, 1..40)) {
            let d = ks_distance(&v, None).unwrap();
            let w = wasserstein1_distance(&v).unwrap();
            prop_assert!(d <= kolmogorov_from_wasserstein(w) + 1e-12);
        }
    }

    #[test]
    fn wasserstein_examples() {
        let x = normals(10_000, 2);
        let w = wasserstein1_distance(&x).unwrap();
        assert!(w < 0.05);
        let shifted: Vec<f64> = x.iter().map(|v| v + 0.7).collect();
        let ws = wasserstein1_distance(&shifted).unwrap();
        assert!((ws - 0.7).abs() < 0.05);
        let d = ks_distance(&shifted, None).unwrap();
        assert!(d <= kolmogorov_from_wasserstein(ws));
    }

    #[test]
    fn best_normal_removes_location_and_scale() {
        let x: Vec<f64> = normals(5000, 3).iter().map(|v| 3.0 + 2.0 * v).collect();
        assert!(ks_distance_best_normal(&x).unwrap() < 0.03);
        assert!(ks_distance(&x, None).unwrap() > 0.5);
    }

    #[test]
    fn k_statistics_of_chi_square() {
        let mut rng = substream(9, 0, 0);
        let x: Vec<f64> = (0..200_000)
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                z * z
            })
            .collect();
        let (k2, k3, k4) = k_statistics(&x).unwrap();
        assert!((k2 - 2.0).abs() < 0.05);
        assert!((k3 - 8.0).abs() < 0.6);
        assert!((k4 - 48.0).abs() < 8.0);
        // Exactness on a tiny sample against the textbook formulas.
        let y = [1.0, 2.0, 4.0, 7.0, 11.0];
        let (k2, k3, _) = k_statistics(&y).unwrap();
        assert_relative_eq!(k2, 16.5, max_relative = 1e-14);
        assert_relative_eq!(k3, 55.0, max_relative = 1e-14);
    }
}
