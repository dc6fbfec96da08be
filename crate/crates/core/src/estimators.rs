//! Minimum-contrast drift estimators and their asymptotic standardization.
//!
//! Each estimator inverts `(sample second moment) = α^{−2H} · q₁` for `α`,
//! where `q₁` is `Tr Q_∞` (norm estimators) or `⟨Q_∞ w, w⟩` (projection
//! estimators) at drift one.

use serde::{Deserialize, Serialize};

use crate::covariance::{
    autocov_matrix, check_summable, r_z_square_integral, r_z_square_sum, s_infty_star, stationary_variance_mode,
    u_infty_star, SeriesLimit,
};
use crate::error::{invalid, Error, Result};
use crate::spectral_model::{last_mode_ratio, ModelConfig, ProjectionVector};

/// Normalizers below this value are treated as zero.
pub const DEGENERACY_THRESHOLD: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    ContinuousNorm,
    DiscreteNorm,
    ContinuousProj,
    DiscreteProj,
}

impl EstimatorKind {
    pub fn is_projection(self) -> bool {
        matches!(self, EstimatorKind::ContinuousProj | EstimatorKind::DiscreteProj)
    }

    pub fn is_continuous(self) -> bool {
        matches!(self, EstimatorKind::ContinuousNorm | EstimatorKind::ContinuousProj)
    }
}

/// `Tr Q_∞` or `⟨Q_∞ w, w⟩` at drift one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub value: f64,
    /// Below [`DEGENERACY_THRESHOLD`]; estimators refuse it.
    pub degenerate: bool,
    /// Share of the last retained mode in the value.
    pub tail_ratio: f64,
}

impl Normalizer {
    fn new(value: f64, contributions: &[f64]) -> Self {
        let degenerate = !(value.abs() >= DEGENERACY_THRESHOLD);
        Self {
            value: if degenerate { 0.0 } else { value },
            degenerate,
            tail_ratio: if degenerate {
                0.0
            } else {
                last_mode_ratio(contributions)
            },
        }
    }
}

pub fn trace_q1(model: &ModelConfig) -> Normalizer {
    let parts: Vec<f64> = model
        .eigenvalues()
        .iter()
        .zip(model.loadings())
        .map(|(&l, &p)| stationary_variance_mode(l, p, model.hurst))
        .collect();
    Normalizer::new(parts.iter().sum(), &parts)
}

pub fn qww1(model: &ModelConfig, w: &ProjectionVector) -> Result<Normalizer> {
    if w.len() != model.modes() {
        return Err(invalid(format!(
            "projection has {} coefficients but the model has {} modes",
            w.len(),
            model.modes()
        )));
    }
    let q = autocov_matrix(&model.with_alpha(1.0)?, 0.0)?;
    let c = &w.coefficients;
    let parts: Vec<f64> = (0..c.len())
        .map(|k| c[k] * (0..c.len()).map(|l| q.get(k, l) * c[l]).sum::<f64>())
        .collect();
    Ok(Normalizer::new(parts.iter().sum(), &parts))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub kind: EstimatorKind,
    pub alpha_hat: f64,
    /// `n` for discrete estimators, `T` for continuous ones.
    pub sample_size: f64,
    /// The sample second moment that was inverted.
    pub moment: f64,
    pub normalizer: f64,
    pub normalizer_tail_ratio: f64,
    pub hurst: f64,
    pub sigma_asymptotic: Option<f64>,
    pub standardized_error: Option<f64>,
}

impl EstimateReport {
    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma_asymptotic = Some(sigma);
        self
    }

    /// Records the standardized error against a known drift; needs `σ`.
    pub fn with_truth(mut self, true_alpha: f64) -> Result<Self> {
        self.standardized_error = Some(standardize(&self, true_alpha)?);
        Ok(self)
    }
}

fn invert(
    kind: EstimatorKind,
    moment: f64,
    sample_size: f64,
    normalizer: &Normalizer,
    hurst: f64,
) -> Result<EstimateReport> {
    if normalizer.degenerate {
        return Err(Error::Degenerate {
            normalizer: if kind.is_projection() { "q_ww(1)" } else { "tr Q(1)" },
            value: normalizer.value,
        });
    }
    if !(hurst > 0.0 && hurst < 1.0) {
        return Err(Error::UnsupportedHurst {
            hurst,
            reason: "H must lie in (0, 1)",
        });
    }
    if !(moment > 0.0 && moment.is_finite()) {
        return Err(Error::UndefinedEstimate(format!("sample second moment is {moment}")));
    }
    Ok(EstimateReport {
        kind,
        alpha_hat: (moment / normalizer.value).powf(-0.5 / hurst),
        sample_size,
        moment,
        normalizer: normalizer.value,
        normalizer_tail_ratio: normalizer.tail_ratio,
        hurst,
        sigma_asymptotic: None,
        standardized_error: None,
    })
}

fn nonempty(values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(invalid("no observations"));
    }
    Ok(())
}

/// `(1/T) ∫_0^T f(t) dt` by the trapezoid rule on a uniform grid.
pub fn trapezoid_mean(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(invalid("a time average needs at least two grid points"));
    }
    let inner: f64 = values[1..values.len() - 1].iter().sum();
    let ends = 0.5 * (values[0] + values[values.len() - 1]);
    Ok((inner + ends) / (values.len() - 1) as f64)
}

/// `α̌_n` from `|X(i)|²`, `i = 1..=n`.
pub fn alpha_check_discrete(sq_norms: &[f64], trace_q1: &Normalizer, hurst: f64) -> Result<EstimateReport> {
    nonempty(sq_norms)?;
    let m = sq_norms.iter().sum::<f64>() / sq_norms.len() as f64;
    invert(EstimatorKind::DiscreteNorm, m, sq_norms.len() as f64, trace_q1, hurst)
}

/// `α̂_T` from `|X(t)|²` on the grid `0, dt, …, T`.
pub fn alpha_hat_continuous(sq_norms: &[f64], dt: f64, trace_q1: &Normalizer, hurst: f64) -> Result<EstimateReport> {
    let m = trapezoid_mean(sq_norms)?;
    let t = dt * (sq_norms.len() - 1) as f64;
    invert(EstimatorKind::ContinuousNorm, m, t, trace_q1, hurst)
}

/// `ᾱ_n` from `⟨X(i), w⟩`, `i = 1..=n`.
pub fn alpha_bar_discrete(projections: &[f64], qww1: &Normalizer, hurst: f64) -> Result<EstimateReport> {
    nonempty(projections)?;
    let m = projections.iter().map(|p| p * p).sum::<f64>() / projections.len() as f64;
    invert(EstimatorKind::DiscreteProj, m, projections.len() as f64, qww1, hurst)
}

/// `α̃_T` from `⟨X(t), w⟩` on the grid `0, dt, …, T`.
pub fn alpha_tilde_continuous(projections: &[f64], dt: f64, qww1: &Normalizer, hurst: f64) -> Result<EstimateReport> {
    let sq: Vec<f64> = projections.iter().map(|p| p * p).collect();
    let m = trapezoid_mean(&sq)?;
    let t = dt * (sq.len() - 1) as f64;
    invert(EstimatorKind::ContinuousProj, m, t, qww1, hurst)
}

/// `γ_α`, `δ_α` and the four asymptotic standard deviations at the model's
/// drift.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticConstants {
    pub alpha: f64,
    pub hurst: f64,
    pub dt: f64,
    pub gamma: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub s_infty_star: SeriesLimit,
    pub u_infty_star: SeriesLimit,
    pub delta: Option<f64>,
    pub sigma3: Option<f64>,
    pub sigma4: Option<f64>,
    pub r_z_sum: Option<SeriesLimit>,
    pub r_z_integral: Option<SeriesLimit>,
}

impl AsymptoticConstants {
    pub fn sigma(&self, kind: EstimatorKind) -> Option<f64> {
        match kind {
            EstimatorKind::DiscreteNorm => Some(self.sigma1),
            EstimatorKind::ContinuousNorm => Some(self.sigma2),
            EstimatorKind::DiscreteProj => self.sigma3,
            EstimatorKind::ContinuousProj => self.sigma4,
        }
    }
}

/// `γ_α = α^{1+2H} / (2H q₁)`.
pub fn delta_method_factor(alpha: f64, hurst: f64, q1: f64) -> f64 {
    alpha.powf(1.0 + 2.0 * hurst) / (2.0 * hurst * q1)
}

/// Constants at the model's drift `α`; discrete ones use observation step `dt`.
pub fn asymptotic_constants(model: &ModelConfig, w: Option<&ProjectionVector>, dt: f64) -> Result<AsymptoticConstants> {
    check_summable(model.hurst)?;
    let h = model.hurst;
    let alpha = model.alpha;
    let tq = trace_q1(model);
    if tq.degenerate {
        return Err(Error::Degenerate {
            normalizer: "tr Q(1)",
            value: tq.value,
        });
    }
    let gamma = delta_method_factor(alpha, h, tq.value);
    let s_star = s_infty_star(model, dt)?;
    let u_star = u_infty_star(model)?;
    let (mut delta, mut sigma3, mut sigma4, mut rs, mut ri) = (None, None, None, None, None);
    if let Some(w) = w {
        let q = qww1(model, w)?;
        if q.degenerate {
            return Err(Error::Degenerate {
                normalizer: "q_ww(1)",
                value: q.value,
            });
        }
        let d = delta_method_factor(alpha, h, q.value);
        let sum = r_z_square_sum(model, w, dt)?;
        let int = r_z_square_integral(model, w)?;
        delta = Some(d);
        sigma3 = Some(d * sum.value.sqrt());
        sigma4 = Some(d * int.value.sqrt());
        rs = Some(sum);
        ri = Some(int);
    }
    Ok(AsymptoticConstants {
        alpha,
        hurst: h,
        dt,
        gamma,
        sigma1: gamma * s_star.value.sqrt(),
        sigma2: gamma * u_star.value.sqrt(),
        s_infty_star: s_star,
        u_infty_star: u_star,
        delta,
        sigma3,
        sigma4,
        r_z_sum: rs,
        r_z_integral: ri,
    })
}

/// Constants evaluated at an estimated drift instead of the true one.
pub fn plug_in_constants(
    model: &ModelConfig,
    alpha_hat: f64,
    w: Option<&ProjectionVector>,
    dt: f64,
) -> Result<AsymptoticConstants> {
    asymptotic_constants(&model.with_alpha(alpha_hat)?, w, dt)
}

/// `√size · (α̂ − α) / σ`.
pub fn standardize(report: &EstimateReport, true_alpha: f64) -> Result<f64> {
    let sigma = report
        .sigma_asymptotic
        .ok_or_else(|| invalid("the report carries no asymptotic standard deviation"))?;
    if !(sigma > 0.0) {
        return Err(invalid(format!(
            "asymptotic standard deviation must be positive, got {sigma}"
        )));
    }
    Ok(report.sample_size.sqrt() * (report.alpha_hat - true_alpha) / sigma)
}
