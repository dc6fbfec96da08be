//! Special functions.

pub use libm::{erfc, lgamma as ln_gamma, tgamma as gamma};

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal quantile: rational initial guess followed by Halley steps.
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383_577_518_672_69e2,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    let tail = |q: f64| {
        let r = (-2.0 * q.ln()).sqrt();
        (((((C[0] * r + C[1]) * r + C[2]) * r + C[3]) * r + C[4]) * r + C[5])
            / ((((D[0] * r + D[1]) * r + D[2]) * r + D[3]) * r + 1.0)
    };
    let mut x = if p < 0.02425 {
        tail(p)
    } else if p > 1.0 - 0.02425 {
        -tail(1.0 - p)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };
    for _ in 0..2 {
        // Work with the smaller tail probability to keep the residual exact.
        let e = if x < 0.0 {
            normal_cdf(x) - p
        } else {
            (1.0 - p) - 0.5 * erfc(x / std::f64::consts::SQRT_2)
        };
        let u = e * (2.0 * std::f64::consts::PI).sqrt() * (0.5 * x * x).exp();
        x -= u / (1.0 + 0.5 * x * u);
    }
    x
}

/// `exp(x) * Γ(ν, x)` for `ν > 0`, `x ≥ 0`.
pub fn scaled_upper_gamma(nu: f64, x: f64) -> f64 {
    debug_assert!(nu > 0.0 && x >= 0.0);
    if x == 0.0 {
        return gamma(nu);
    }
    if x < 1.0 {
        // Γ(ν, x) = Γ(ν) - γ(ν, x) with the lower gamma as a power series.
        let mut term = 1.0 / nu;
        let mut sum = term;
        let mut k = 1.0;
        while term.abs() > 1e-17 * sum.abs() {
            term *= x / (nu + k);
            sum += term;
            k += 1.0;
            if k > 500.0 {
                break;
            }
        }
        x.exp() * gamma(nu) - x.powf(nu) * sum
    } else {
        // Modified Lentz on the Legendre continued fraction.
        let tiny = 1e-300;
        let mut b = x + 1.0 - nu;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let an = -(i as f64) * (i as f64 - nu);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        x.powf(nu) * h
    }
}

const BERNOULLI_OVER_FACTORIAL: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 720.0,
    1.0 / 30240.0,
    -1.0 / 1209600.0,
    1.0 / 47900160.0,
    -691.0 / 1307674368000.0,
    1.0 / 74724249600.0,
    -3617.0 / 10670622842880000.0,
];

/// Hurwitz zeta `Σ_{k≥0} (q + k)^{-s}` for `s > 1`, `q > 0`.
pub fn hurwitz_zeta(s: f64, q: f64) -> f64 {
    debug_assert!(s > 1.0 && q > 0.0);
    const N: usize = 12;
    let mut head = 0.0;
    for k in 0..N {
        head += (q + k as f64).powf(-s);
    }
    let a = q + N as f64;
    let mut tail = a.powf(1.0 - s) / (s - 1.0) + 0.5 * a.powf(-s);
    // Euler–Maclaurin corrections with rising factorial s(s+1)...(s+2j-2).
    let mut rising = s;
    let mut power = a.powf(-s - 1.0);
    for (j, c) in BERNOULLI_OVER_FACTORIAL.iter().enumerate() {
        tail += c * rising * power;
        let m = 2.0 * j as f64;
        rising *= (s + m + 1.0) * (s + m + 2.0);
        power /= a * a;
    }
    head + tail
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn zeta_reference_values() {
        assert_relative_eq!(
            hurwitz_zeta(2.0, 1.0),
            std::f64::consts::PI.powi(2) / 6.0,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            hurwitz_zeta(4.0, 1.0),
            std::f64::consts::PI.powi(4) / 90.0,
            max_relative = 1e-14
        );
        // ζ(2, 1/2) = 3ζ(2) = π²/2
        assert_relative_eq!(
            hurwitz_zeta(2.0, 0.5),
            std::f64::consts::PI.powi(2) / 2.0,
            max_relative = 1e-14
        );
    }

    #[test]
    fn upper_gamma_reference_values() {
        // Γ(1, x) = e^{-x}
        assert_relative_eq!(scaled_upper_gamma(1.0, 3.0), 1.0, max_relative = 1e-14);
        assert_relative_eq!(scaled_upper_gamma(1.0, 0.2), 1.0, max_relative = 1e-14);
        // Γ(1/2, x) = √π erfc(√x)
        for &x in &[0.01f64, 0.3, 1.0, 2.5, 10.0, 50.0] {
            let exact = std::f64::consts::PI.sqrt() * erfc(x.sqrt()) * x.exp();
            assert_relative_eq!(scaled_upper_gamma(0.5, x), exact, max_relative = 1e-12);
        }
        // Γ(2, x) = (1 + x) e^{-x}
        assert_relative_eq!(scaled_upper_gamma(2.0, 0.7), 1.7, max_relative = 1e-14);
        assert_relative_eq!(scaled_upper_gamma(2.0, 7.0), 8.0, max_relative = 1e-14);
    }

    #[test]
    fn normal_quantile_inverts_cdf() {
        for &p in &[1e-10, 0.001, 0.2, 0.5, 0.9, 0.999999] {
            assert_relative_eq!(normal_cdf(normal_quantile(p)), p, max_relative = 1e-12);
        }
        assert_relative_eq!(normal_cdf(1.959963984540054), 0.975, max_relative = 1e-14);
    }

    proptest! {
        #[test]
        fn zeta_shift_identity(s in 1.05f64..6.0, q in 0.05f64..40.0) {
            let lhs = hurwitz_zeta(s, q) - hurwitz_zeta(s, q + 1.0);
            prop_assert!((lhs - q.powf(-s)).abs() <= 1e-12 * hurwitz_zeta(s, q));
        }

        #[test]
        fn upper_gamma_recurrence(nu in 0.05f64..2.5, x in 0.0f64..60.0) {
            // Γ(ν+1, x) = ν Γ(ν, x) + x^ν e^{-x}
            let lhs = scaled_upper_gamma(nu + 1.0, x);
            let rhs = nu * scaled_upper_gamma(nu, x) + x.powf(nu);
            prop_assert!((lhs - rhs).abs() <= 1e-11 * lhs.abs().max(1.0));
        }
    }
}
