//! Numerical integration: globally adaptive Gauss–Kronrod (21 points) for
//! smooth or interior-peaked integrands, and tanh-sinh for integrands with
//! integrable endpoint singularities.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Tolerance {
    pub const fn new(abs: f64, rel: f64) -> Self {
        Self { abs, rel }
    }

    fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self::new(1e-14, 1e-11)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub evals: usize,
}

const XGK: [f64; 11] = [
    0.995_657_163_025_808_1,
    0.973_906_528_517_171_7,
    0.930_157_491_355_708_2,
    0.865_063_366_688_984_5,
    0.780_817_726_586_416_9,
    0.679_409_568_299_024_4,
    0.562_757_134_668_604_7,
    0.433_395_394_129_247_2,
    0.294_392_862_701_460_2,
    0.148_874_338_981_631_22,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874,
    0.032_558_162_307_964_725,
    0.054_755_896_574_351_995,
    0.075_039_674_810_919_96,
    0.093_125_454_583_697_6,
    0.109_387_158_802_297_64,
    0.123_491_976_262_065_84,
    0.134_709_217_311_473_34,
    0.142_775_938_577_060_09,
    0.147_739_104_901_338_49,
    0.149_445_554_002_916_9,
];

// Gauss weights for XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066_671_344_308_688_14,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982_04,
    0.269_266_719_309_996_35,
    0.295_524_224_714_752_87,
];

struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod21<F: FnMut(f64) -> f64>(f: &mut F, lo: f64, hi: f64) -> Segment {
    let c = 0.5 * (lo + hi);
    let h = 0.5 * (hi - lo);
    let fc = f(c);
    let mut k = WGK[10] * fc;
    let mut g = 0.0;
    let mut abs_k = k.abs();
    let mut fv = [0.0f64; 21];
    fv[10] = fc;
    for j in 0..10 {
        let dx = h * XGK[j];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        fv[j] = f1;
        fv[20 - j] = f2;
        k += WGK[j] * (f1 + f2);
        abs_k += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * k;
    let mut asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        asc += WGK[j] * ((fv[j] - mean).abs() + (fv[20 - j] - mean).abs());
    }
    let value = k * h;
    let abs_k = abs_k * h.abs();
    let asc = asc * h.abs();
    let mut error = ((k - g) * h).abs();
    if asc != 0.0 && error != 0.0 {
        error = asc * (200.0 * error / asc).powf(1.5).min(1.0);
    }
    let round = 50.0 * f64::EPSILON * abs_k;
    if abs_k > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(round);
    }
    Segment { lo, hi, value, error }
}

/// Globally adaptive 21-point Gauss–Kronrod integration over a finite interval.
pub fn gauss_kronrod<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: Tolerance) -> Result<Estimate> {
    gauss_kronrod_limit(&mut f, lo, hi, tol, 2000)
}

pub fn gauss_kronrod_limit<F: FnMut(f64) -> f64>(
    f: &mut F,
    lo: f64,
    hi: f64,
    tol: Tolerance,
    max_segments: usize,
) -> Result<Estimate> {
    if lo == hi {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
            evals: 0,
        });
    }
    let mut heap = BinaryHeap::new();
    let first = kronrod21(f, lo, hi);
    let mut value = first.value;
    let mut error = first.error;
    let mut evals = 21;
    heap.push(first);
    while error > tol.target(value) {
        if heap.len() >= max_segments {
            let worst = heap.peek().expect("non-empty heap");
            return Err(Error::QuadratureFailure {
                lo: worst.lo,
                hi: worst.hi,
                value,
                error,
            });
        }
        let worst = heap.pop().expect("non-empty heap");
        let mid = 0.5 * (worst.lo + worst.hi);
        if !(mid > worst.lo.min(worst.hi) && mid < worst.lo.max(worst.hi)) {
            return Err(Error::QuadratureFailure {
                lo: worst.lo,
                hi: worst.hi,
                value,
                error,
            });
        }
        let left = kronrod21(f, worst.lo, mid);
        let right = kronrod21(f, mid, worst.hi);
        evals += 42;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        if !value.is_finite() {
            return Err(Error::Numerical(format!("non-finite integrand on [{lo}, {hi}]")));
        }
    }
    // Re-sum to shed the drift accumulated by incremental updates.
    let mut parts: Vec<Segment> = heap.into_vec();
    parts.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    let value = parts.iter().map(|s| s.value).sum();
    let error = parts.iter().map(|s| s.error).sum();
    Ok(Estimate { value, error, evals })
}

const TS_MAX_LEVEL: usize = 9;
const TS_T_MAX: f64 = 6.0;

/// Tanh-sinh on `[lo, hi]`; the integrand receives `(x, x - lo, hi - x)`
/// with both distances computed without cancellation.
fn tanh_sinh_core(
    f: &mut dyn FnMut(f64, f64, f64) -> f64,
    lo: f64,
    hi: f64,
    tol: Tolerance,
) -> std::result::Result<Estimate, Estimate> {
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (lo + hi);
    let mut evals = 0usize;
    let eval_at = |t: f64, f: &mut dyn FnMut(f64, f64, f64) -> f64| -> f64 {
        let u = std::f64::consts::FRAC_PI_2 * t.sinh();
        let cu = u.cosh();
        let w = std::f64::consts::FRAC_PI_2 * t.cosh() / (cu * cu);
        // 1 - tanh|u| = 2 / (exp(2|u|) + 1)
        let edge = 2.0 / ((2.0 * u.abs()).exp() + 1.0) * half;
        if edge <= 0.0 || w == 0.0 {
            return 0.0;
        }
        let (x, dl, dh) = if u < 0.0 {
            (lo + edge, edge, 2.0 * half - edge)
        } else {
            (hi - edge, 2.0 * half - edge, edge)
        };
        let x = if u == 0.0 { mid } else { x };
        let fx = f(x, dl, dh);
        if fx == 0.0 {
            0.0
        } else {
            w * half * fx
        }
    };
    let mut h = 1.0;
    let mut sum = eval_at(0.0, f);
    evals += 1;
    let mut k = 1;
    loop {
        let t = k as f64 * h;
        if t > TS_T_MAX {
            break;
        }
        sum += eval_at(t, f) + eval_at(-t, f);
        evals += 2;
        k += 1;
    }
    let mut estimate = sum * h;
    let mut prev_diff = f64::INFINITY;
    for _level in 1..=TS_MAX_LEVEL {
        h *= 0.5;
        let mut k = 1;
        loop {
            let t = k as f64 * h;
            if t > TS_T_MAX {
                break;
            }
            sum += eval_at(t, f) + eval_at(-t, f);
            evals += 2;
            k += 2;
        }
        let next = sum * h;
        let diff = (next - estimate).abs();
        estimate = next;
        if !estimate.is_finite() {
            return Err(Estimate {
                value: estimate,
                error: f64::INFINITY,
                evals,
            });
        }
        // Once the sweep is in its quadratic regime the next difference is
        // about diff^2 / |I|, so the current estimate is already that good.
        let scale = estimate.abs().max(f64::MIN_POSITIVE);
        let target = tol.target(estimate);
        let quadratic = prev_diff.is_finite() && diff < 0.1 * prev_diff && diff * diff / scale <= 0.1 * target;
        if diff <= target || quadratic {
            return Ok(Estimate {
                value: estimate,
                error: diff,
                evals,
            });
        }
        prev_diff = diff;
    }
    Err(Estimate {
        value: estimate,
        error: prev_diff,
        evals,
    })
}

fn tanh_sinh_adaptive(
    f: &mut dyn FnMut(f64, f64, f64) -> f64,
    lo: f64,
    hi: f64,
    tol: Tolerance,
    depth: usize,
) -> Result<Estimate> {
    match tanh_sinh_core(f, lo, hi, tol) {
        Ok(e) => Ok(e),
        Err(e) if depth == 0 => Err(Error::QuadratureFailure {
            lo,
            hi,
            value: e.value,
            error: e.error,
        }),
        Err(_) => {
            let mid = 0.5 * (lo + hi);
            let half_tol = Tolerance::new(0.5 * tol.abs, tol.rel);
            // Distances are re-expressed relative to the parent interval so
            // that singular endpoints keep their accuracy.
            let width = hi - lo;
            let mut left_f = |x: f64, dl: f64, _dh: f64| f(x, dl, width - dl);
            let left = tanh_sinh_adaptive(&mut left_f, lo, mid, half_tol, depth - 1)?;
            let mut right_f = |x: f64, _dl: f64, dh: f64| f(x, width - dh, dh);
            let right = tanh_sinh_adaptive(&mut right_f, mid, hi, half_tol, depth - 1)?;
            Ok(Estimate {
                value: left.value + right.value,
                error: left.error + right.error,
                evals: left.evals + right.evals,
            })
        }
    }
}

/// Tanh-sinh quadrature over `[lo, hi]`, bisecting when a level sweep does
/// not converge. Suited to integrable endpoint singularities.
pub fn tanh_sinh<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: Tolerance) -> Result<Estimate> {
    if lo == hi {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
            evals: 0,
        });
    }
    let mut g = |x: f64, _: f64, _: f64| if x <= lo || x >= hi { 0.0 } else { f(x) };
    tanh_sinh_adaptive(&mut g, lo, hi, tol, 6)
}

/// Like [`tanh_sinh`] but the integrand also receives the exact distances
/// `(x - lo, hi - x)`.
pub fn tanh_sinh_with_distances<F: FnMut(f64, f64, f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    tol: Tolerance,
) -> Result<Estimate> {
    if lo == hi {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
            evals: 0,
        });
    }
    tanh_sinh_adaptive(&mut f, lo, hi, tol, 6)
}

/// Integral over `[lo, ∞)` via `x = lo + scale·s/(1-s)`, `s ∈ [0, 1)`.
pub fn semi_infinite<F: FnMut(f64) -> f64>(mut f: F, lo: f64, scale: f64, tol: Tolerance) -> Result<Estimate> {
    if !(scale > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "semi-infinite scale must be positive, got {scale}"
        )));
    }
    let g = |_s: f64, s: f64, one_minus_s: f64| {
        if one_minus_s <= 0.0 {
            return 0.0;
        }
        let x = lo + scale * s / one_minus_s;
        let jac = scale / (one_minus_s * one_minus_s);
        if !jac.is_finite() {
            return 0.0;
        }
        let v = f(x);
        if v == 0.0 {
            0.0
        } else {
            v * jac
        }
    };
    tanh_sinh_with_distances(g, 0.0, 1.0, tol)
}
