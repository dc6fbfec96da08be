//! Time-domain evaluation of the cross-autocovariance for `H > 1/2` from the
//! fBm covariance kernel `H(2H−1)|s−r|^{2H−2}`:
//!
//! ```text
//! r_kl(t) = r_kl(0) e^{−a_k t}
//!         + φ_k φ_l H(2H−1) ∫_0^t ∫_{−∞}^0 e^{a_l r} e^{−a_k(t−s)} (s−r)^{2H−2} dr ds.
//! ```
//!
//! The inner integral equals `a_l^{1−2H} e^{a_l s} Γ(2H−1, a_l s)`; the outer
//! one is done by quadrature.

use super::stationary_cross_cov;
use crate::error::{Error, Result};
use crate::quad::{gauss_kronrod, tanh_sinh, Tolerance};
use crate::special::scaled_upper_gamma;

/// Independent evaluation of `r_kl(t)` for `1/2 < H < 1`.
pub fn kernel_autocov(a_k: f64, a_l: f64, phi_k: f64, phi_l: f64, hurst: f64, t: f64) -> Result<f64> {
    if !(hurst > 0.5 && hurst < 1.0) {
        return Err(Error::UnsupportedHurst {
            hurst,
            reason: "the kernel representation requires 1/2 < H < 1",
        });
    }
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!("lag must be nonnegative, got {t}")));
    }
    let r0 = stationary_cross_cov(a_k, a_l, phi_k, phi_l, hurst);
    if t == 0.0 {
        return Ok(r0);
    }
    let nu = 2.0 * hurst - 1.0;
    let inner = |s: f64| a_l.powf(-nu) * scaled_upper_gamma(nu, a_l * s);
    let outer = |s: f64| (-a_k * (t - s)).exp() * inner(s);
    let tol = Tolerance::new(0.0, 1e-12);
    // Positive integrand, so a purely relative tolerance is safe. The inner
    // factor has an s^{2H−1} cusp at zero, resolved separately.
    let split = t.min(1.0 / a_l);
    let head = tanh_sinh(outer, 0.0, split, tol)?.value;
    let mut body = 0.0;
    if split < t {
        // The kernel e^{−a_k(t−s)} concentrates within a few 1/a_k of s = t.
        let knee = (t - 50.0 / a_k).max(split);
        body += gauss_kronrod(outer, split, knee, tol)?.value;
        body += gauss_kronrod(outer, knee, t, tol)?.value;
    }
    let integral = head + body;
    Ok(r0 * (-a_k * t).exp() + phi_k * phi_l * hurst * nu * integral)
}
