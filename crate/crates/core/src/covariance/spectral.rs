//! Frequency-domain evaluation of stationary fOU cross-autocovariances.
//!
//! Rotating the frequency integral onto the imaginary axis turns the
//! oscillatory integrand `e^{iωt}|ω|^{1-2H}/((a_k+iω)(a_l−iω))` into
//!
//! ```text
//! r_kl(t) = 2 φ_k φ_l c_H [ −cos(πH) · PV∫_0^∞ y^{1−2H} e^{−yt} / ((a_k − y)(a_l + y)) dy
//!                           + π a_k^{1−2H} sin(πH) e^{−a_k t} / (a_k + a_l) ]
//! ```
//!
//! with `c_H = Γ(2H+1) sin(πH) / (2π)`, valid for every `t ≥ 0` and
//! `H ∈ (0, 1)`. The principal value has a simple pole at `a_k`. For
//! `min(a_k, a_l)·t` large the integral is replaced by its Watson expansion,
//! whose truncation error is of order `e^{−min(a)·t}`.

use std::f64::consts::PI;

use crate::error::Result;
use crate::quad::{gauss_kronrod, semi_infinite, tanh_sinh, Tolerance};
use crate::special::gamma;

/// Beyond this value of `min(a)·t` the asymptotic series is used.
pub const WATSON_THRESHOLD: f64 = 40.0;

const REL_TOL: f64 = 1e-12;

pub(crate) fn c_h(hurst: f64) -> f64 {
    gamma(2.0 * hurst + 1.0) * (PI * hurst).sin() / (2.0 * PI)
}

/// `PV∫_0^∞ y^{s−1} e^{−yt} m(y) / (a − y) dy` for smooth positive `m`.
fn pv_integral<M: Fn(f64) -> f64>(a: f64, s: f64, t: f64, m: M) -> Result<f64> {
    let g = |y: f64| {
        if y <= 0.0 {
            return 0.0;
        }
        y.powf(s - 1.0) * (-y * t).exp() * m(y)
    };
    let half = 0.5 * a;
    let rel = Tolerance::new(0.0, REL_TOL);
    // Sign-definite pieces first: [0, a/2] and [3a/2, ∞).
    let near_zero = tanh_sinh(|y| g(y) / (a - y), 0.0, half, rel)?.value;
    let scale = a / (1.0 + a * t);
    let far = semi_infinite(|y| g(y) / (a - y), 1.5 * a, scale, rel)?.value;
    // Symmetric difference around the pole.
    let mag = near_zero.abs() + far.abs();
    let around = gauss_kronrod(
        |u| (g(a - u) - g(a + u)) / u,
        0.0,
        half,
        Tolerance::new(1e-15 * mag, REL_TOL),
    )?
    .value;
    Ok(near_zero + around + far)
}

/// `∫_0^∞ y^{s−1} e^{−yt} / (b + y) dy`.
fn plain_integral(b: f64, s: f64, t: f64) -> Result<f64> {
    let g = |y: f64| {
        if y <= 0.0 {
            return 0.0;
        }
        y.powf(s - 1.0) * (-y * t).exp() / (b + y)
    };
    let rel = Tolerance::new(0.0, REL_TOL);
    let head = tanh_sinh(g, 0.0, b, rel)?.value;
    let tail = semi_infinite(g, b, b / (1.0 + b * t), rel)?.value;
    Ok(head + tail)
}

/// Watson expansion `Σ_j (P_j + σ^j Q_j) / norm` with
/// `P_j = Γ(s+j) t^{−s−j} p^{−j−1}` and `Q_j` likewise in `q`, summed until
/// the terms reach their smallest magnitude. `p = ∞` drops the `P` terms.
fn watson_series(s: f64, t: f64, p: f64, q: Option<(f64, f64)>, norm: f64) -> f64 {
    let g0 = gamma(s) * t.powf(-s);
    let mut pj = g0 / p;
    let (mut qj, q_val, sign) = match q {
        Some((q, sign)) => (g0 / q, q, sign),
        None => (0.0, 1.0, 1.0),
    };
    let mut sum = 0.0;
    let mut prev_env = f64::INFINITY;
    for j in 0..5000 {
        let env = pj + qj.abs();
        if env > prev_env {
            break;
        }
        sum += pj + qj;
        if env < 1e-17 * sum.abs() {
            break;
        }
        prev_env = env;
        let step = (s + j as f64) / t;
        pj *= step / p;
        qj *= sign * step / q_val;
    }
    sum / norm
}

fn assemble(a_k: f64, a_l: f64, phi_kl: f64, hurst: f64, t: f64, pv: f64) -> f64 {
    let residue = PI * a_k.powf(1.0 - 2.0 * hurst) * (PI * hurst).sin() * (-a_k * t).exp() / (a_k + a_l);
    2.0 * phi_kl * c_h(hurst) * (-(PI * hurst).cos() * pv + residue)
}

/// Principal-value integral for the pair `(k, l)` with the pole at `a_k`.
pub(crate) fn pair_pv(a_k: f64, a_l: f64, hurst: f64, t: f64) -> Result<f64> {
    let s = 2.0 - 2.0 * hurst;
    if a_k.min(a_l) * t >= WATSON_THRESHOLD {
        return Ok(watson_series(s, t, a_k, Some((a_l, -1.0)), a_k + a_l));
    }
    pv_integral(a_k, s, t, |y| 1.0 / (a_l + y))
}

/// `r_kl(t) = E[x_k(t) x_l(0)]` for stationary fOU modes with drifts `a_k`,
/// `a_l` and loadings `φ_k`, `φ_l` driven by a common fBm.
pub fn spectral_cross_autocov(a_k: f64, a_l: f64, phi_k: f64, phi_l: f64, hurst: f64, t: f64) -> Result<f64> {
    let phi_kl = phi_k * phi_l;
    if phi_kl == 0.0 {
        return Ok(0.0);
    }
    let pv = pair_pv(a_k, a_l, hurst, t)?;
    Ok(assemble(a_k, a_l, phi_kl, hurst, t, pv))
}

/// Single-pole pieces for rank-one assembly at a fixed lag `t > 0`:
/// `U(a) = PV∫ y^{s−1}e^{−yt}/(a−y)` and `W(a) = ∫ y^{s−1}e^{−yt}/(a+y)`, so
/// that the pair integral is `(U(a_k) + W(a_l)) / (a_k + a_l)`.
pub(crate) fn single_pole_pieces(a: f64, hurst: f64, t: f64) -> Result<(f64, f64)> {
    let s = 2.0 - 2.0 * hurst;
    if a * t >= WATSON_THRESHOLD {
        let u = watson_series(s, t, a, None, 1.0);
        let w = watson_series(s, t, f64::INFINITY, Some((a, -1.0)), 1.0);
        return Ok((u, w));
    }
    Ok((pv_integral(a, s, t, |_| 1.0)?, plain_integral(a, s, t)?))
}

/// Full `N × N` matrix `R(t)` for rank-one noise, row-major.
pub(crate) fn rank_one_matrix(a: &[f64], phi: &[f64], hurst: f64, t: f64) -> Result<Vec<f64>> {
    let n = a.len();
    let mut out = vec![0.0; n * n];
    if t == 0.0 {
        for k in 0..n {
            for l in k..n {
                let v = spectral_cross_autocov(a[k], a[l], phi[k], phi[l], hurst, 0.0)?;
                out[k * n + l] = v;
                out[l * n + k] = v;
            }
        }
        return Ok(out);
    }
    let pieces: Vec<(f64, f64)> = a
        .iter()
        .map(|&ak| single_pole_pieces(ak, hurst, t))
        .collect::<Result<_>>()?;
    for k in 0..n {
        for l in 0..n {
            let phi_kl = phi[k] * phi[l];
            if phi_kl == 0.0 {
                continue;
            }
            let pv = if a[k].min(a[l]) * t >= WATSON_THRESHOLD {
                watson_series(2.0 - 2.0 * hurst, t, a[k], Some((a[l], -1.0)), a[k] + a[l])
            } else {
                (pieces[k].0 + pieces[l].1) / (a[k] + a[l])
            };
            out[k * n + l] = assemble(a[k], a[l], phi_kl, hurst, t, pv);
        }
    }
    Ok(out)
}
