//! Stationary covariance of the truncated solution: autocovariance matrices,
//! Hilbert–Schmidt norms, the series and integral limits `s_n`, `s_∞*`,
//! `u_∞*`, and the scalar autocovariance of one-dimensional projections.

mod kernel;
mod spectral;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quad::{gauss_kronrod, Tolerance};
use crate::special::{gamma, hurwitz_zeta};
use crate::spectral_model::{ModelConfig, NoiseKind, ProjectionVector};

pub use kernel::kernel_autocov;
pub use spectral::{spectral_cross_autocov, WATSON_THRESHOLD};

/// Stationary variance `φ² H Γ(2H) a^{−2H}` of a scalar fOU mode.
pub fn stationary_variance_mode(a: f64, phi: f64, hurst: f64) -> f64 {
    phi * phi * hurst * gamma(2.0 * hurst) * a.powf(-2.0 * hurst)
}

/// Lag-zero cross covariance `E[x_k(0) x_l(0)]` of two modes driven by the
/// same fBm.
pub fn stationary_cross_cov(a_k: f64, a_l: f64, phi_k: f64, phi_l: f64, hurst: f64) -> f64 {
    let e = 1.0 - 2.0 * hurst;
    phi_k * phi_l * hurst * gamma(2.0 * hurst) * (a_k.powf(e) + a_l.powf(e)) / (a_k + a_l)
}

#[derive(Clone, Debug, PartialEq)]
pub enum Entries {
    /// Diagonal noise: only `r_k(t)` is nonzero.
    Diagonal(Vec<f64>),
    Full(DMatrix<f64>),
}

/// `R(t)` with entries `r_kl(t) = E[x_k(t) x_l(0)]`.
#[derive(Clone, Debug, PartialEq)]
pub struct AutoCovMatrix {
    pub t: f64,
    pub entries: Entries,
}

impl AutoCovMatrix {
    pub fn dim(&self) -> usize {
        match &self.entries {
            Entries::Diagonal(d) => d.len(),
            Entries::Full(m) => m.nrows(),
        }
    }

    pub fn get(&self, k: usize, l: usize) -> f64 {
        match &self.entries {
            Entries::Diagonal(d) => {
                if k == l {
                    d[k]
                } else {
                    0.0
                }
            }
            Entries::Full(m) => m[(k, l)],
        }
    }

    pub fn trace(&self) -> f64 {
        match &self.entries {
            Entries::Diagonal(d) => d.iter().sum(),
            Entries::Full(m) => m.trace(),
        }
    }

    /// `wᵀ R w`.
    pub fn quad_form(&self, w: &[f64]) -> f64 {
        match &self.entries {
            Entries::Diagonal(d) => d.iter().zip(w).map(|(r, w)| r * w * w).sum(),
            Entries::Full(m) => {
                let v = DVector::from_column_slice(w);
                (v.transpose() * m * &v)[(0, 0)]
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match &self.entries {
            Entries::Diagonal(d) => DMatrix::from_diagonal(&DVector::from_column_slice(d)),
            Entries::Full(m) => m.clone(),
        }
    }
}

/// Hilbert–Schmidt (Frobenius) norm.
pub fn hs_norm(acm: &AutoCovMatrix) -> f64 {
    match &acm.entries {
        Entries::Diagonal(d) => d.iter().map(|x| x * x).sum::<f64>().sqrt(),
        Entries::Full(m) => m.norm(),
    }
}

/// `R(t)` for the model at its configured drift.
pub fn autocov_matrix(model: &ModelConfig, t: f64) -> Result<AutoCovMatrix> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(invalid(format!("lag must be finite and nonnegative, got {t}")));
    }
    let a = model.drifts();
    let phi = model.loadings();
    let h = model.hurst;
    let entries = match model.noise_kind() {
        NoiseKind::Diagonal => Entries::Diagonal(
            a.iter()
                .zip(phi)
                .map(|(&ak, &pk)| {
                    if t == 0.0 {
                        Ok(stationary_variance_mode(ak, pk, h))
                    } else {
                        spectral_cross_autocov(ak, ak, pk, pk, h, t)
                    }
                })
                .collect::<Result<_>>()?,
        ),
        NoiseKind::RankOne => {
            let n = a.len();
            let flat = if t == 0.0 {
                let mut m = vec![0.0; n * n];
                for k in 0..n {
                    for l in 0..n {
                        m[k * n + l] = stationary_cross_cov(a[k], a[l], phi[k], phi[l], h);
                    }
                }
                m
            } else {
                spectral::rank_one_matrix(&a, phi, h, t)?
            };
            Entries::Full(DMatrix::from_row_slice(n, n, &flat))
        }
    };
    Ok(AutoCovMatrix { t, entries })
}

/// `R(0)` evaluated by the frequency-domain quadrature rather than the closed
/// form; used to cross-check the two.
pub fn autocov_matrix_by_quadrature_at_zero(model: &ModelConfig) -> Result<AutoCovMatrix> {
    let a = model.drifts();
    let phi = model.loadings();
    let h = model.hurst;
    let n = a.len();
    let entries = match model.noise_kind() {
        NoiseKind::Diagonal => Entries::Diagonal(
            a.iter()
                .zip(phi)
                .map(|(&ak, &pk)| spectral_cross_autocov(ak, ak, pk, pk, h, 0.0))
                .collect::<Result<_>>()?,
        ),
        NoiseKind::RankOne => Entries::Full(DMatrix::from_row_slice(
            n,
            n,
            &spectral::rank_one_matrix(&a, phi, h, 0.0)?,
        )),
    };
    Ok(AutoCovMatrix { t: 0.0, entries })
}

/// `R(i·dt)` for `i = 0, 1, …`, grown on demand.
#[derive(Clone, Debug)]
pub struct LagTable {
    model: ModelConfig,
    dt: f64,
    lags: Vec<AutoCovMatrix>,
}

impl LagTable {
    pub fn new(model: &ModelConfig, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid(format!("time step must be positive, got {dt}")));
        }
        Ok(Self {
            model: model.clone(),
            dt,
            lags: Vec::new(),
        })
    }

    pub fn build(model: &ModelConfig, dt: f64, count: usize) -> Result<Self> {
        let mut t = Self::new(model, dt)?;
        t.ensure(count)?;
        Ok(t)
    }

    /// Makes lags `0..count` available.
    pub fn ensure(&mut self, count: usize) -> Result<()> {
        let start = self.lags.len();
        if count <= start {
            return Ok(());
        }
        let dt = self.dt;
        let model = &self.model;
        let fresh: Vec<AutoCovMatrix> = (start..count)
            .into_par_iter()
            .map(|i| autocov_matrix(model, i as f64 * dt))
            .collect::<Result<_>>()?;
        self.lags.extend(fresh);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.lags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lags.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn model(&self) -> &ModelConfig {
        &self.model
    }

    pub fn lag(&self, i: usize) -> &AutoCovMatrix {
        &self.lags[i]
    }

    /// Per-mode autocovariance sequence `r_kk(i·dt)` over the stored lags.
    pub fn mode_sequence(&self, k: usize) -> Vec<f64> {
        self.lags.iter().map(|r| r.get(k, k)).collect()
    }

    pub fn hs_norms(&self) -> Vec<f64> {
        self.lags.iter().map(hs_norm).collect()
    }
}

/// `s_n = 2 Σ_{|i|<n} (1 − |i|/n) ‖R(i·dt)‖²_HS` from precomputed norms.
pub fn s_n_from_norms(norms: &[f64], n: usize) -> f64 {
    assert!(n >= 1 && norms.len() >= n);
    let nf = n as f64;
    let mut acc = norms[0] * norms[0];
    for (i, h) in norms.iter().enumerate().take(n).skip(1) {
        acc += 2.0 * (1.0 - i as f64 / nf) * h * h;
    }
    2.0 * acc
}

pub fn s_n(model: &ModelConfig, n: usize, dt: f64) -> Result<f64> {
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    let table = LagTable::build(model, dt, n)?;
    Ok(s_n_from_norms(&table.hs_norms(), n))
}

/// A limit computed as a finite part plus a fitted power-law tail.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesLimit {
    pub value: f64,
    pub truncated: f64,
    pub tail: f64,
    /// Lag count (discrete) or time horizon (continuous) of the finite part.
    pub cutoff: f64,
    /// Constant `C` of the fitted decay `C·t^{2H−2}`.
    pub fit_constant: f64,
}

pub(crate) fn check_summable(hurst: f64) -> Result<()> {
    if hurst >= 0.75 {
        return Err(Error::UnsupportedHurst {
            hurst,
            reason: "non-summable regime: the limit diverges for H ≥ 3/4",
        });
    }
    Ok(())
}

/// Least-squares constant of `|f(x)| ≈ C x^{2H−2}` with the exponent fixed.
fn fit_decay_constant(points: &[(f64, f64)], hurst: f64) -> f64 {
    let logs: Vec<f64> = points
        .iter()
        .filter(|(_, v)| *v > 0.0 && v.is_finite())
        .map(|(x, v)| v.ln() - (2.0 * hurst - 2.0) * x.ln())
        .collect();
    if logs.is_empty() {
        return 0.0;
    }
    (logs.iter().sum::<f64>() / logs.len() as f64).exp()
}

const FIRST_CUTOFF: usize = 1 << 10;
const MAX_CUTOFF: usize = 1 << 16;
const TAIL_REL_TOL: f64 = 1e-6;

/// `2 Σ_{i∈ℤ} v(i)²` for a sequence of norms decaying like `i^{2H−2}`;
/// `norms` must return values for lags `0..count`.
pub fn discrete_square_sum_limit<F>(mut norms: F, hurst: f64) -> Result<SeriesLimit>
where
    F: FnMut(usize) -> Result<Vec<f64>>,
{
    check_summable(hurst)?;
    let mut cutoff = FIRST_CUTOFF;
    loop {
        let v = norms(cutoff + 1)?;
        let truncated = 2.0 * (v[0] * v[0] + 2.0 * v[1..=cutoff].iter().map(|x| x * x).sum::<f64>());
        let points: Vec<(f64, f64)> = (cutoff / 2..=cutoff).map(|i| (i as f64, v[i])).collect();
        let c = fit_decay_constant(&points, hurst);
        let tail = 4.0 * c * c * hurwitz_zeta(4.0 - 4.0 * hurst, cutoff as f64 + 1.0);
        let value = truncated + tail;
        if tail <= TAIL_REL_TOL * value || cutoff >= MAX_CUTOFF {
            return Ok(SeriesLimit {
                value,
                truncated,
                tail,
                cutoff: cutoff as f64,
                fit_constant: c,
            });
        }
        cutoff *= 2;
    }
}

/// `2 ∫_ℝ v(t)² dt = 4 ∫_0^∞ v(t)² dt` for `v` decaying like `t^{2H−2}`.
/// `fast` and `slow` are the largest and smallest relaxation rates.
pub fn continuous_square_integral_limit<F>(norm: F, hurst: f64, fast: f64, slow: f64) -> Result<SeriesLimit>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    check_summable(hurst)?;
    let horizon_target = 4000.0 / slow;
    let mut edges = vec![0.0, 0.25 / fast];
    while *edges.last().unwrap() < horizon_target {
        let last = *edges.last().unwrap();
        edges.push(2.0 * last);
    }
    let horizon = *edges.last().unwrap();
    let pieces: Vec<f64> = edges
        .par_windows(2)
        .map(|w| {
            let mut failure = None;
            let est = gauss_kronrod(
                |t| match norm(t) {
                    Ok(v) => v * v,
                    Err(e) => {
                        failure.get_or_insert(e);
                        0.0
                    }
                },
                w[0],
                w[1],
                Tolerance::new(0.0, 1e-10),
            );
            if let Some(e) = failure {
                return Err(e);
            }
            Ok(est?.value)
        })
        .collect::<Result<_>>()?;
    let truncated = 4.0 * pieces.iter().sum::<f64>();
    let points: Vec<(f64, f64)> = [0.5, 0.625, 0.75, 0.875, 1.0]
        .iter()
        .map(|f| {
            let t = f * horizon;
            norm(t).map(|v| (t, v.abs()))
        })
        .collect::<Result<_>>()?;
    let c = fit_decay_constant(&points, hurst);
    let tail = 4.0 * c * c * horizon.powf(4.0 * hurst - 3.0) / (3.0 - 4.0 * hurst);
    Ok(SeriesLimit {
        value: truncated + tail,
        truncated,
        tail,
        cutoff: horizon,
        fit_constant: c,
    })
}

/// `s_∞* = 2 Σ_{i∈ℤ} ‖R(i·dt)‖²_HS`.
pub fn s_infty_star(model: &ModelConfig, dt: f64) -> Result<SeriesLimit> {
    check_summable(model.hurst)?;
    let mut table = LagTable::new(model, dt)?;
    discrete_square_sum_limit(
        |count| {
            table.ensure(count)?;
            Ok(table.hs_norms())
        },
        model.hurst,
    )
}

/// `u_∞* = 2 ∫_ℝ ‖R(t)‖²_HS dt`.
pub fn u_infty_star(model: &ModelConfig) -> Result<SeriesLimit> {
    check_summable(model.hurst)?;
    let a = model.drifts();
    let fast = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let slow = a.iter().cloned().fold(f64::INFINITY, f64::min);
    continuous_square_integral_limit(
        |t| autocov_matrix(model, t).map(|r| hs_norm(&r)),
        model.hurst,
        fast,
        slow,
    )
}

fn check_projection(model: &ModelConfig, w: &ProjectionVector) -> Result<()> {
    if w.len() != model.modes() {
        return Err(invalid(format!(
            "projection has {} coefficients but the model has {} modes",
            w.len(),
            model.modes()
        )));
    }
    Ok(())
}

/// `r_z(t) = wᵀ R(t) w`.
pub fn r_z(model: &ModelConfig, w: &ProjectionVector, t: f64) -> Result<f64> {
    check_projection(model, w)?;
    Ok(autocov_matrix(model, t)?.quad_form(&w.coefficients))
}

/// `2 Σ_{i∈ℤ} r_z(i·dt)²`.
pub fn r_z_square_sum(model: &ModelConfig, w: &ProjectionVector, dt: f64) -> Result<SeriesLimit> {
    check_projection(model, w)?;
    let mut table = LagTable::new(model, dt)?;
    discrete_square_sum_limit(
        |count| {
            table.ensure(count)?;
            Ok((0..count)
                .map(|i| table.lag(i).quad_form(&w.coefficients).abs())
                .collect())
        },
        model.hurst,
    )
}

/// `2 ∫_ℝ r_z(t)² dt`.
pub fn r_z_square_integral(model: &ModelConfig, w: &ProjectionVector) -> Result<SeriesLimit> {
    check_projection(model, w)?;
    let a = model.drifts();
    let fast = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let slow = a.iter().cloned().fold(f64::INFINITY, f64::min);
    continuous_square_integral_limit(|t| r_z(model, w, t).map(f64::abs), model.hurst, fast, slow)
}

/// `Tr R(0)` at the model's drift (closed form per mode).
pub fn trace_q(model: &ModelConfig) -> f64 {
    model
        .drifts()
        .iter()
        .zip(model.loadings())
        .map(|(&a, &p)| stationary_variance_mode(a, p, model.hurst))
        .sum()
}

/// `wᵀ R(0) w` at the model's drift (closed form).
pub fn quad_form_q(model: &ModelConfig, w: &ProjectionVector) -> Result<f64> {
    check_projection(model, w)?;
    Ok(autocov_matrix(model, 0.0)?.quad_form(&w.coefficients))
}

#[cfg(test)]
mod tests;
