//! Monte Carlo experiments: consistency, central limit behaviour of the
//! second moment and of the estimators, cumulants, the non-Gaussian regime
//! and degenerate projections.
//!
//! Replications are simulated in pairs from `substream(seed, stream, ·)` so
//! results do not depend on scheduling or thread count; all aggregation runs
//! sequentially over the ordered results.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chaos::{
    exact_cumulants_from_table, k_statistics, kolmogorov_from_wasserstein, ks_distance, ks_distance_best_normal,
    ks_p_value, mean_sd, wasserstein1_distance, xi_exponent,
};
use crate::config::{ModelSpec, ProjectionSpec};
use crate::covariance::{s_infty_star, trace_q, LagTable};
use crate::embedding::EmbeddingPolicy;
use crate::error::{invalid, Error, Result};
use crate::estimators::{
    alpha_bar_discrete, alpha_check_discrete, alpha_hat_continuous, alpha_tilde_continuous, asymptotic_constants, qww1,
    trace_q1, EstimatorKind,
};
use crate::io::format_f64;
use crate::rng::{substream, StreamRng};
use crate::simulate::{
    integrate_path, row_projections, row_sq_norms, ExactPathSampler, InitKind, Scheme, SimulationOptions,
    StationarySequenceSampler, TrajectoryGrid,
};
use crate::spectral_model::{projection_sine, ModelConfig, ProjectionVector};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Consistency,
    Clt,
    MomentClt,
    Cumulants,
    Rosenblatt,
    DegenerateProjection,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Consistency => "consistency",
            ExperimentKind::Clt => "clt",
            ExperimentKind::MomentClt => "moment_clt",
            ExperimentKind::Cumulants => "cumulants",
            ExperimentKind::Rosenblatt => "rosenblatt",
            ExperimentKind::DegenerateProjection => "degenerate_projection",
        }
    }
}

/// Pass/fail thresholds; unset fields take the documented defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    /// Largest median `|α̂ − α|` at the last grid point (default 0.05).
    pub consistency_median: Option<f64>,
    /// Largest localized Kolmogorov distance (default 0.06).
    pub ks_localized: Option<f64>,
    /// Localization `K` (default 3).
    pub localization: Option<f64>,
    /// Allowed excess of the fitted log-log slope over the rate exponent
    /// (default 0.2 for `H ≤ 5/8`, 0.25 above).
    pub slope_tolerance: Option<f64>,
    /// Smallest Kolmogorov distance to the best normal at the last grid
    /// point in the non-Gaussian regime (default 0.03).
    pub rosenblatt_floor: Option<f64>,
    /// Standard-error multiple for Monte Carlo comparisons (default 4).
    pub se_multiple: Option<f64>,
    /// Largest `n` with Monte Carlo cumulant estimates (default 64).
    pub cumulant_mc_max_n: Option<usize>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeSpec {
    #[default]
    Exact,
    ExponentialEuler,
}

fn default_dt() -> f64 {
    1.0
}

fn default_batches() -> usize {
    20
}

fn default_substeps() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub model: ModelSpec,
    /// Observation counts `n`; continuous estimators use `T = n·dt`.
    pub grid: Vec<usize>,
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub estimators: Vec<EstimatorKind>,
    #[serde(default)]
    pub projection: Option<ProjectionSpec>,
    /// Gaussian control model for the non-Gaussian regime.
    #[serde(default)]
    pub control: Option<ModelSpec>,
    #[serde(default)]
    pub scheme: SchemeSpec,
    #[serde(default = "default_substeps")]
    pub substeps: usize,
    #[serde(default = "default_batches")]
    pub batches: usize,
    #[serde(default)]
    pub thresholds: Thresholds,
    /// Keep per-replication statistics in the report.
    #[serde(default)]
    pub keep_raw: bool,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(invalid("replications must be at least 1"));
        }
        if self.kind != ExperimentKind::DegenerateProjection {
            if self.grid.is_empty() {
                return Err(invalid("grid must not be empty"));
            }
            if self.grid.windows(2).any(|w| w[0] >= w[1]) || self.grid[0] == 0 {
                return Err(invalid("grid must be positive and strictly increasing"));
            }
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if self.batches < 2 {
            return Err(invalid("at least two batches are required"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub grid_point: f64,
    pub statistic: String,
    pub estimator: String,
    pub value: f64,
    pub se: Option<f64>,
    pub replications: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub name: String,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub target_slope: Option<f64>,
    pub tolerance: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    /// `<`, `<=`, `>` or `==`, relating `value` to `threshold`.
    pub comparison: String,
    pub threshold: f64,
    pub note: String,
}

impl Check {
    fn new(name: impl Into<String>, value: f64, comparison: &str, threshold: f64, note: impl Into<String>) -> Self {
        let passed = match comparison {
            "<" => value < threshold,
            "<=" => value <= threshold,
            ">" => value > threshold,
            ">=" => value >= threshold,
            "==" => value == threshold,
            _ => false,
        };
        Self {
            name: name.into(),
            passed,
            value,
            comparison: comparison.into(),
            threshold,
            note: note.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawSeries {
    pub grid_point: f64,
    pub label: String,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub kind: ExperimentKind,
    pub seed: u64,
    pub replications: usize,
    pub batches: usize,
    pub spec: ExperimentSpec,
    pub rows: Vec<SummaryRow>,
    pub fits: Vec<RegressionFit>,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    pub raw: Vec<RawSeries>,
}

impl ExperimentReport {
    fn new(spec: &ExperimentSpec) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            kind: spec.kind,
            seed: spec.seed,
            replications: spec.replications,
            batches: spec.batches,
            spec: spec.clone(),
            rows: Vec::new(),
            fits: Vec::new(),
            checks: Vec::new(),
            notes: Vec::new(),
            raw: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn row(&mut self, grid_point: f64, statistic: &str, estimator: &str, value: f64, se: Option<f64>, reps: usize) {
        self.rows.push(SummaryRow {
            grid_point,
            statistic: statistic.into(),
            estimator: estimator.into(),
            value,
            se: se.filter(|s| s.is_finite()),
            replications: reps,
            seed: self.seed,
        });
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn value(&self, grid_point: f64, statistic: &str, estimator: &str) -> Option<&SummaryRow> {
        self.rows
            .iter()
            .find(|r| r.grid_point == grid_point && r.statistic == statistic && r.estimator == estimator)
    }

    /// One row per grid point per statistic.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "grid_point,statistic,estimator,value,se,replications,seed")?;
        for r in &self.rows {
            let se = r.se.map(format_f64).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                format_f64(r.grid_point),
                r.statistic,
                r.estimator,
                format_f64(r.value),
                se,
                r.replications,
                r.seed
            )?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Writes `<stem>.csv` and `<stem>.json` into `dir`.
    pub fn write_files(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut csv = Vec::new();
        self.write_csv(&mut csv)?;
        std::fs::write(dir.join(format!("{stem}.csv")), csv)?;
        std::fs::write(dir.join(format!("{stem}.json")), self.to_json()?)?;
        Ok(())
    }
}

/// Ordinary least squares of `y` on `x`.
pub fn linear_fit(name: &str, x: &[f64], y: &[f64]) -> RegressionFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    RegressionFit {
        name: name.into(),
        slope,
        intercept,
        r_squared,
        target_slope: None,
        tolerance: None,
    }
}

/// Standard error of `stat` from contiguous batches.
pub fn batch_se<F: Fn(&[f64]) -> f64>(values: &[f64], batches: usize, stat: F) -> f64 {
    if values.len() < 2 {
        return f64::NAN;
    }
    let b = batches.min(values.len()).max(2);
    let stats: Vec<f64> = (0..b)
        .map(|i| {
            let lo = i * values.len() / b;
            let hi = (i + 1) * values.len() / b;
            stat(&values[lo..hi])
        })
        .collect();
    let mean = stats.iter().sum::<f64>() / b as f64;
    let var = stats.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (b as f64 - 1.0);
    (var / b as f64).sqrt()
}

pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

/// Linear-interpolation sample quantile.
pub fn quantile(values: &[f64], p: f64) -> f64 {
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let pos = p * (s.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    s[lo] + (pos - lo as f64) * (s[hi] - s[lo])
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// 1% critical value of the Kolmogorov distance to a normal law with
/// estimated mean and variance.
pub fn lilliefors_critical_1pct(m: usize) -> f64 {
    1.031 / (m as f64).sqrt()
}

/// Runs `draw` once per replication pair and flattens the pairs in order;
/// an odd last replication drops the second member of its pair.
fn paired<T, F>(replications: usize, seed: u64, stream: u64, component: u64, draw: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut StreamRng) -> Result<(T, T)> + Sync,
{
    let pairs = replications.div_ceil(2);
    let drawn: Vec<(T, T)> = (0..pairs)
        .into_par_iter()
        .map(|p| {
            let mut rng = substream(seed, (stream << 32) | p as u64, component);
            draw(&mut rng)
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(2 * pairs);
    for (a, b) in drawn {
        out.push(a);
        out.push(b);
    }
    out.truncate(replications);
    Ok(out)
}

fn build(spec: &ExperimentSpec) -> Result<(ModelConfig, Option<ProjectionVector>)> {
    spec.validate()?;
    let model = spec.model.build()?;
    let w = match &spec.projection {
        Some(p) => Some(p.build(model.modes())?),
        None => None,
    };
    Ok((model, w))
}

fn require_identifiable(model: &ModelConfig) -> Result<()> {
    let t = trace_q1(model);
    if t.degenerate {
        return Err(Error::Degenerate {
            normalizer: "tr Q(1)",
            value: t.value,
        });
    }
    Ok(())
}

fn estimator_name(kind: EstimatorKind) -> &'static str {
    match kind {
        EstimatorKind::ContinuousNorm => "continuous_norm",
        EstimatorKind::DiscreteNorm => "discrete_norm",
        EstimatorKind::ContinuousProj => "continuous_proj",
        EstimatorKind::DiscreteProj => "discrete_proj",
    }
}

fn estimators_for(spec: &ExperimentSpec, w: &Option<ProjectionVector>) -> Result<Vec<EstimatorKind>> {
    let kinds = if spec.estimators.is_empty() {
        let mut k = vec![EstimatorKind::DiscreteNorm];
        if w.is_some() {
            k.push(EstimatorKind::DiscreteProj);
        }
        k
    } else {
        spec.estimators.clone()
    };
    if kinds.iter().any(|k| k.is_projection()) && w.is_none() {
        return Err(invalid("projection estimators need a projection"));
    }
    Ok(kinds)
}

/// All requested estimates from one path of `n + 1` points (`t_0..t_n`).
fn estimates(
    kinds: &[EstimatorKind],
    modes: &[f64],
    dim: usize,
    dt: f64,
    w: &Option<ProjectionVector>,
    tq: &crate::estimators::Normalizer,
    qw: &Option<crate::estimators::Normalizer>,
    hurst: f64,
) -> Result<Vec<f64>> {
    let sq = row_sq_norms(modes, dim);
    let proj = w.as_ref().map(|w| row_projections(modes, &w.coefficients));
    kinds
        .iter()
        .map(|k| {
            let r = match k {
                EstimatorKind::DiscreteNorm => alpha_check_discrete(&sq[1..], tq, hurst)?,
                EstimatorKind::ContinuousNorm => alpha_hat_continuous(&sq, dt, tq, hurst)?,
                EstimatorKind::DiscreteProj => {
                    alpha_bar_discrete(&proj.as_ref().unwrap()[1..], qw.as_ref().unwrap(), hurst)?
                }
                EstimatorKind::ContinuousProj => {
                    alpha_tilde_continuous(proj.as_ref().unwrap(), dt, qw.as_ref().unwrap(), hurst)?
                }
            };
            Ok(r.alpha_hat)
        })
        .collect()
}

struct PathSource {
    exact: Option<ExactPathSampler>,
    model: ModelConfig,
    grid: TrajectoryGrid,
    init: InitKind,
    substeps: usize,
}

impl PathSource {
    fn new(spec: &ExperimentSpec, model: &ModelConfig, n: usize, init: InitKind) -> Result<Self> {
        let grid = TrajectoryGrid::new(spec.dt, n)?.with_burn_in(TrajectoryGrid::default_burn_in(model, spec.dt));
        let exact = match spec.scheme {
            SchemeSpec::Exact => Some(ExactPathSampler::new(model, &grid, &init, EmbeddingPolicy::default())?),
            SchemeSpec::ExponentialEuler => None,
        };
        Ok(Self {
            exact,
            model: model.clone(),
            grid,
            init,
            substeps: spec.substeps,
        })
    }

    fn pair(&self, rng: &mut StreamRng) -> Result<(Vec<f64>, Vec<f64>)> {
        match &self.exact {
            Some(s) => Ok(s.sample_pair(rng)),
            None => {
                let opts = SimulationOptions {
                    scheme: Scheme::ExponentialEuler {
                        substeps: self.substeps,
                    },
                    keep_modes: true,
                    policy: EmbeddingPolicy::default(),
                };
                let s1: u64 = rand::Rng::random(rng);
                let a = integrate_path(&self.model, &self.grid, &self.init, &opts, s1, 0)?;
                let b = integrate_path(&self.model, &self.grid, &self.init, &opts, s1, 1)?;
                Ok((a.modes.unwrap(), b.modes.unwrap()))
            }
        }
    }
}

/// Median and IQR of `|α̂ − α|` per estimator and grid point.
pub fn run_consistency(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    let (model, w) = build(spec)?;
    require_identifiable(&model)?;
    let kinds = estimators_for(spec, &w)?;
    let tq = trace_q1(&model);
    let qw = match &w {
        Some(w) => Some(qww1(&model, w)?),
        None => None,
    };
    let mut report = ExperimentReport::new(spec);
    let threshold = spec.thresholds.consistency_median.unwrap_or(0.05);
    let mut medians: Vec<Vec<f64>> = vec![Vec::new(); kinds.len()];
    for (gi, &n) in spec.grid.iter().enumerate() {
        let source = PathSource::new(spec, &model, n, InitKind::BurnIn)?;
        let dim = model.modes();
        let est: Vec<Vec<f64>> = paired(spec.replications, spec.seed, gi as u64, 0, |rng| {
            let (a, b) = source.pair(rng)?;
            Ok((
                estimates(&kinds, &a, dim, spec.dt, &w, &tq, &qw, model.hurst)?,
                estimates(&kinds, &b, dim, spec.dt, &w, &tq, &qw, model.hurst)?,
            ))
        })?;
        for (ki, k) in kinds.iter().enumerate() {
            let name = estimator_name(*k);
            let vals: Vec<f64> = est.iter().map(|e| e[ki]).collect();
            let errs: Vec<f64> = vals.iter().map(|v| (v - model.alpha).abs()).collect();
            let med = median(&errs);
            let g = n as f64;
            report.row(
                g,
                "median_abs_error",
                name,
                med,
                Some(batch_se(&errs, spec.batches, median)),
                errs.len(),
            );
            report.row(
                g,
                "iqr_abs_error",
                name,
                quantile(&errs, 0.75) - quantile(&errs, 0.25),
                None,
                errs.len(),
            );
            report.row(
                g,
                "mean_estimate",
                name,
                mean(&vals),
                Some(batch_se(&vals, spec.batches, mean)),
                vals.len(),
            );
            medians[ki].push(med);
            if spec.keep_raw {
                report.raw.push(RawSeries {
                    grid_point: g,
                    label: format!("{name}/estimate"),
                    values: vals,
                });
            }
        }
    }
    for (ki, k) in kinds.iter().enumerate() {
        let name = estimator_name(*k);
        let m = &medians[ki];
        let violations = m.windows(2).filter(|p| p[1] >= p[0]).count();
        report.checks.push(Check::new(
            format!("{name}/median_strictly_decreasing"),
            violations as f64,
            "==",
            0.0,
            "number of grid steps where the median absolute error did not decrease",
        ));
        report.checks.push(Check::new(
            format!("{name}/median_at_largest_n"),
            *m.last().unwrap(),
            "<",
            threshold,
            "median |estimate − α| at the largest grid point",
        ));
    }
    report.notes.push(format!(
        "paths start from zero {} steps before the first observation ({:?} scheme)",
        TrajectoryGrid::default_burn_in(&model, spec.dt),
        spec.scheme
    ));
    Ok(report)
}

/// Distances of `√n(mean |Z|² − Tr Q_∞^α)/√s_∞*` to `N(0, 1)` and the
/// log-log slope of the Kolmogorov distance in `n`.
pub fn run_moment_clt(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    let (model, _) = build(spec)?;
    require_identifiable(&model)?;
    let s_star = s_infty_star(&model, spec.dt)?;
    let centre = trace_q(&model);
    let mut report = ExperimentReport::new(spec);
    report.notes.push(format!(
        "s_inf* = {} (fitted tail {}, cutoff {})",
        s_star.value, s_star.tail, s_star.cutoff
    ));
    let table = LagTable::build(&model, spec.dt, *spec.grid.last().unwrap())?;
    let norms = table.hs_norms();
    let mut logs = (Vec::new(), Vec::new());
    let mut bound_ok = 0usize;
    for (gi, &n) in spec.grid.iter().enumerate() {
        let sampler = StationarySequenceSampler::new(&model, n, spec.dt, EmbeddingPolicy::default())?;
        let dim = model.modes();
        let scale = (n as f64).sqrt() / s_star.value.sqrt();
        let stat = |z: &[f64]| scale * (row_sq_norms(z, dim).iter().sum::<f64>() / n as f64 - centre);
        let xs: Vec<f64> = paired(spec.replications, spec.seed, gi as u64, 0, |rng| {
            let mut a = vec![0.0; n * dim];
            let mut b = vec![0.0; n * dim];
            sampler.sample_pair(rng, &mut a, &mut b);
            Ok((stat(&a), stat(&b)))
        })?;
        let g = n as f64;
        let ks = ks_distance(&xs, None)?;
        let w1 = wasserstein1_distance(&xs)?;
        let s_n = crate::covariance::s_n_from_norms(&norms, n);
        report.row(
            g,
            "ks",
            "moment",
            ks,
            Some(batch_se(&xs, spec.batches, |b| {
                ks_distance(b, None).unwrap_or(f64::NAN)
            })),
            xs.len(),
        );
        report.row(
            g,
            "w1",
            "moment",
            w1,
            Some(batch_se(&xs, spec.batches, |b| {
                wasserstein1_distance(b).unwrap_or(f64::NAN)
            })),
            xs.len(),
        );
        let (m, sd) = mean_sd(&xs).unwrap_or((f64::NAN, f64::NAN));
        report.row(
            g,
            "mean",
            "moment",
            m,
            Some(batch_se(&xs, spec.batches, mean)),
            xs.len(),
        );
        report.row(g, "variance", "moment", sd * sd, None, xs.len());
        report.row(g, "variance_exact", "moment", s_n / s_star.value, None, xs.len());
        if ks <= kolmogorov_from_wasserstein(w1) {
            bound_ok += 1;
        }
        logs.0.push(g.ln());
        logs.1.push(ks.ln());
        if spec.keep_raw {
            report.raw.push(RawSeries {
                grid_point: g,
                label: "moment".into(),
                values: xs,
            });
        }
    }
    report.checks.push(Check::new(
        "kolmogorov_wasserstein_inequality",
        bound_ok as f64,
        "==",
        spec.grid.len() as f64,
        "grid points where d_Kol ≤ 2√(d_W/√(2π))",
    ));
    if spec.grid.len() >= 2 {
        let target = xi_exponent(model.hurst);
        let tol = spec
            .thresholds
            .slope_tolerance
            .unwrap_or(if model.hurst <= 0.625 { 0.2 } else { 0.25 });
        let mut fit = linear_fit("log_ks_vs_log_n", &logs.0, &logs.1);
        fit.target_slope = Some(target);
        fit.tolerance = Some(tol);
        report.checks.push(Check::new(
            "ks_slope",
            fit.slope,
            "<=",
            target + tol,
            "log-log slope of the Kolmogorov distance against n, bounded by the rate exponent plus tolerance",
        ));
        report.fits.push(fit);
    }
    Ok(report)
}

/// Standardized estimation errors `√n(α̂ − α)/σ` and their distances to
/// `N(0, 1)`.
pub fn run_estimator_clt(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    let (model, w) = build(spec)?;
    require_identifiable(&model)?;
    let kinds = estimators_for(spec, &w)?;
    let consts = asymptotic_constants(&model, w.as_ref(), spec.dt)?;
    let tq = trace_q1(&model);
    let qw = match &w {
        Some(w) => Some(qww1(&model, w)?),
        None => None,
    };
    let k_loc = spec.thresholds.localization.unwrap_or(3.0);
    let threshold = spec.thresholds.ks_localized.unwrap_or(0.06);
    let mut report = ExperimentReport::new(spec);
    report.notes.push(format!(
        "sigma1 = {}, sigma2 = {}, sigma3 = {:?}, sigma4 = {:?}",
        consts.sigma1, consts.sigma2, consts.sigma3, consts.sigma4
    ));
    for (gi, &n) in spec.grid.iter().enumerate() {
        // the integrator cannot start from the stationary law
        let init = match spec.scheme {
            SchemeSpec::Exact => InitKind::Stationary,
            SchemeSpec::ExponentialEuler => InitKind::BurnIn,
        };
        let source = PathSource::new(spec, &model, n, init)?;
        let dim = model.modes();
        let est: Vec<Vec<f64>> = paired(spec.replications, spec.seed, gi as u64, 0, |rng| {
            let (a, b) = source.pair(rng)?;
            Ok((
                estimates(&kinds, &a, dim, spec.dt, &w, &tq, &qw, model.hurst)?,
                estimates(&kinds, &b, dim, spec.dt, &w, &tq, &qw, model.hurst)?,
            ))
        })?;
        let g = n as f64;
        for (ki, &k) in kinds.iter().enumerate() {
            let name = estimator_name(k);
            let sigma = consts
                .sigma(k)
                .ok_or_else(|| invalid(format!("no asymptotic constant for {name}")))?;
            let size = if k.is_continuous() { g * spec.dt } else { g };
            let z: Vec<f64> = est
                .iter()
                .map(|e| size.sqrt() * (e[ki] - model.alpha) / sigma)
                .collect();
            let ks_loc = ks_distance(&z, Some(k_loc))?;
            let ks = ks_distance(&z, None)?;
            let w1 = wasserstein1_distance(&z)?;
            let reps = z.len();
            report.row(
                g,
                "ks_localized",
                name,
                ks_loc,
                Some(batch_se(&z, spec.batches, |b| {
                    ks_distance(b, Some(k_loc)).unwrap_or(f64::NAN)
                })),
                reps,
            );
            report.row(g, "ks", name, ks, None, reps);
            report.row(g, "ks_p_value", name, ks_p_value(ks, reps), None, reps);
            report.row(g, "w1", name, w1, None, reps);
            let (m, sd) = mean_sd(&z).unwrap_or((f64::NAN, f64::NAN));
            report.row(
                g,
                "mean_standardized",
                name,
                m,
                Some(batch_se(&z, spec.batches, mean)),
                reps,
            );
            report.row(g, "sd_standardized", name, sd, None, reps);
            report.checks.push(Check::new(
                format!("{name}/n={n}/ks_localized"),
                ks_loc,
                "<",
                threshold,
                format!("Kolmogorov distance on [−{k_loc}, {k_loc}] of the standardized error to N(0,1)"),
            ));
            report.checks.push(Check::new(
                format!("{name}/n={n}/kolmogorov_wasserstein_inequality"),
                ks,
                "<=",
                kolmogorov_from_wasserstein(w1),
                "d_Kol ≤ 2√(d_W/√(2π))",
            ));
            if spec.keep_raw {
                report.raw.push(RawSeries {
                    grid_point: g,
                    label: format!("{name}/standardized"),
                    values: z,
                });
            }
        }
    }
    Ok(report)
}

/// Exact cumulants against bound shapes and, for small `n`, Monte Carlo
/// k-statistics.
pub fn run_cumulants(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    let (model, _) = build(spec)?;
    require_identifiable(&model)?;
    let mut report = ExperimentReport::new(spec);
    let n_max = *spec.grid.last().unwrap();
    let table = LagTable::build(&model, spec.dt, n_max)?;
    let mut exact = Vec::new();
    for &n in &spec.grid {
        let c = exact_cumulants_from_table(&table, n)?;
        let g = n as f64;
        report.row(g, "kappa3_exact", "f_n", c.kappa3_exact, None, 0);
        report.row(g, "kappa4_exact", "f_n", c.kappa4_exact, None, 0);
        report.row(g, "kappa3_bound_shape", "f_n", c.kappa3_bound_shape, None, 0);
        report.row(g, "kappa4_bound_shape", "f_n", c.kappa4_bound_shape, None, 0);
        report.row(g, "s_n", "f_n", c.s_n, None, 0);
        exact.push(c);
    }
    let fits = bound_constant_checks(&exact);
    for (p, c, worst) in fits {
        report
            .notes
            .push(format!("kappa{p}: constant fitted on the first half of the grid = {c}"));
        report.checks.push(Check::new(
            format!("kappa{p}_bounded_by_fitted_shape"),
            worst,
            "<=",
            c,
            "largest κ/B ratio on the second half of the grid against the constant fitted on the first half",
        ));
    }
    let mc_max = spec.thresholds.cumulant_mc_max_n.unwrap_or(64);
    let mult = spec.thresholds.se_multiple.unwrap_or(4.0);
    for (gi, c) in exact.iter().enumerate() {
        let n = c.n;
        if n > mc_max {
            continue;
        }
        let sampler = StationarySequenceSampler::new(&model, n, spec.dt, EmbeddingPolicy::default())?;
        let dim = model.modes();
        let centre = trace_q(&model) * n as f64;
        let scale = 1.0 / (n as f64 * c.s_n).sqrt();
        let stat = |z: &[f64]| scale * (row_sq_norms(z, dim).iter().sum::<f64>() - centre);
        let xs: Vec<f64> = paired(spec.replications, spec.seed, gi as u64, 0, |rng| {
            let mut a = vec![0.0; n * dim];
            let mut b = vec![0.0; n * dim];
            sampler.sample_pair(rng, &mut a, &mut b);
            Ok((stat(&a), stat(&b)))
        })?;
        let (_, k3, k4) = k_statistics(&xs).unwrap_or((f64::NAN, f64::NAN, f64::NAN));
        let se3 = batch_se(&xs, spec.batches, |b| k_statistics(b).map_or(f64::NAN, |k| k.1));
        let se4 = batch_se(&xs, spec.batches, |b| k_statistics(b).map_or(f64::NAN, |k| k.2));
        let g = n as f64;
        report.row(g, "kappa3_monte_carlo", "f_n", k3, Some(se3), xs.len());
        report.row(g, "kappa4_monte_carlo", "f_n", k4, Some(se4), xs.len());
        report.checks.push(Check::new(
            format!("n={n}/kappa3_monte_carlo"),
            (k3 - c.kappa3_exact).abs() / se3,
            "<=",
            mult,
            "|k₃ − κ₃| in standard errors",
        ));
        report.checks.push(Check::new(
            format!("n={n}/kappa4_monte_carlo"),
            (k4 - c.kappa4_exact).abs() / se4,
            "<=",
            mult,
            "|k₄ − κ₄| in standard errors",
        ));
    }
    Ok(report)
}

/// For each order `p ∈ {3, 4}`: the constant `max κ_p/B_p` over the first
/// half of the reports, and the largest ratio over the second half.
pub fn bound_constant_checks(reports: &[crate::chaos::CumulantReport]) -> Vec<(u32, f64, f64)> {
    let split = reports.len().div_ceil(2);
    let ratio3: Vec<f64> = reports.iter().map(|c| c.kappa3_exact / c.kappa3_bound_shape).collect();
    let ratio4: Vec<f64> = reports.iter().map(|c| c.kappa4_exact / c.kappa4_bound_shape).collect();
    [(3, ratio3), (4, ratio4)]
        .into_iter()
        .map(|(p, r)| {
            let c = r[..split].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let worst = r[split..].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            (p, c, if worst.is_finite() { worst } else { c })
        })
        .collect()
}

/// `Σ_{i<n}(|Z(i)|² − Tr Q_∞^α) / n^{2H−1}` for `H > 3/4` and its distance
/// to the closest normal law.
pub fn run_rosenblatt(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    let (model, _) = build(spec)?;
    require_identifiable(&model)?;
    if model.hurst <= 0.75 {
        return Err(Error::UnsupportedHurst {
            hurst: model.hurst,
            reason: "the non-Gaussian regime needs H > 3/4",
        });
    }
    let floor = spec.thresholds.rosenblatt_floor.unwrap_or(0.03);
    let mut report = ExperimentReport::new(spec);
    let mut variances = Vec::new();
    let mut skews = Vec::new();
    let mut last_ks = 0.0;
    for (gi, &n) in spec.grid.iter().enumerate() {
        let xs = scaled_sums(&model, n, spec, gi as u64, 0, (n as f64).powf(2.0 * model.hurst - 1.0))?;
        let g = n as f64;
        let ks = ks_distance_best_normal(&xs).unwrap_or(f64::NAN);
        let (k2, k3, _) = k_statistics(&xs).unwrap_or((f64::NAN, f64::NAN, f64::NAN));
        let skew = k3 / k2.powf(1.5);
        report.row(
            g,
            "ks_best_normal",
            "scaled_sum",
            ks,
            Some(batch_se(&xs, spec.batches, |b| {
                ks_distance_best_normal(b).unwrap_or(f64::NAN)
            })),
            xs.len(),
        );
        report.row(
            g,
            "variance",
            "scaled_sum",
            k2,
            Some(batch_se(&xs, spec.batches, |b| {
                k_statistics(b).map_or(f64::NAN, |k| k.0)
            })),
            xs.len(),
        );
        report.row(
            g,
            "skewness",
            "scaled_sum",
            skew,
            Some(batch_se(&xs, spec.batches, |b| {
                let (a, c, _) = k_statistics(b).unwrap_or((f64::NAN, f64::NAN, f64::NAN));
                c / a.powf(1.5)
            })),
            xs.len(),
        );
        variances.push(k2);
        skews.push(skew);
        last_ks = ks;
        if spec.keep_raw {
            report.raw.push(RawSeries {
                grid_point: g,
                label: "scaled_sum".into(),
                values: xs,
            });
        }
    }
    report.checks.push(Check::new(
        "ks_best_normal_at_largest_n",
        last_ks,
        ">",
        floor,
        "Kolmogorov distance to the best-fitting normal stays above the floor",
    ));
    report.checks.push(Check::new(
        "positive_skewness",
        skews.iter().cloned().fold(f64::INFINITY, f64::min),
        ">",
        0.0,
        "smallest sample skewness over the grid",
    ));
    if variances.len() >= 2 {
        let r = variances[variances.len() - 1] / variances[variances.len() - 2];
        report.checks.push(Check::new(
            "variance_stabilizes",
            (r.ln()).abs(),
            "<",
            2f64.ln(),
            "|log| of the variance ratio between the last two grid points",
        ));
    }
    if let Some(control) = &spec.control {
        let cm = control.build()?;
        let n = *spec.grid.last().unwrap();
        let xs = scaled_sums(&cm, n, spec, spec.grid.len() as u64, 1, (n as f64).sqrt())?;
        let ks = ks_distance_best_normal(&xs).unwrap_or(f64::NAN);
        let crit = lilliefors_critical_1pct(xs.len());
        report.row(n as f64, "control_ks_best_normal", "scaled_sum", ks, None, xs.len());
        report.checks.push(Check::new(
            format!("control_h={}_is_normal", cm.hurst),
            ks,
            "<",
            crit,
            "Kolmogorov distance of the √n-scaled control to its best normal, against the 1% Lilliefors critical value",
        ));
    }
    Ok(report)
}

fn scaled_sums(
    model: &ModelConfig,
    n: usize,
    spec: &ExperimentSpec,
    stream: u64,
    salt: u64,
    norm: f64,
) -> Result<Vec<f64>> {
    let sampler = StationarySequenceSampler::new(model, n, spec.dt, EmbeddingPolicy::default())?;
    let dim = model.modes();
    let centre = trace_q(model) * n as f64;
    let stat = |z: &[f64]| (row_sq_norms(z, dim).iter().sum::<f64>() - centre) / norm;
    paired(spec.replications, spec.seed, stream, salt, |rng| {
        let mut a = vec![0.0; n * dim];
        let mut b = vec![0.0; n * dim];
        sampler.sample_pair(rng, &mut a, &mut b);
        Ok((stat(&a), stat(&b)))
    })
}

/// Normalizers of the degenerate sine projection and of a window.
pub fn run_degenerate_projection(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let model = spec.model.build()?;
    let mut report = ExperimentReport::new(spec);
    let sine = projection_sine(4.min(model.modes()), model.modes())?;
    let window = match &spec.projection {
        Some(p) => p.build(model.modes())?,
        None => crate::spectral_model::projection_indicator(0.0, 0.5, model.modes())?,
    };
    let qs = qww1(&model, &sine)?;
    let qw = qww1(&model, &window)?;
    report.row(0.0, "qww1", &sine.descriptor, qs.value, None, 0);
    report.row(0.0, "qww1", &window.descriptor, qw.value, None, 0);
    report.checks.push(Check::new(
        format!("{}/qww1_degenerate", sine.descriptor),
        if qs.degenerate { 1.0 } else { 0.0 },
        "==",
        1.0,
        "normalizer flagged below the identifiability threshold",
    ));
    let refused = matches!(
        alpha_bar_discrete(&[1.0, 1.0], &qs, model.hurst),
        Err(Error::Degenerate { .. })
    );
    report.checks.push(Check::new(
        format!("{}/estimator_refused", sine.descriptor),
        if refused { 1.0 } else { 0.0 },
        "==",
        1.0,
        "the projection estimator refuses a degenerate normalizer",
    ));
    report.checks.push(Check::new(
        format!("{}/qww1_positive", window.descriptor),
        qw.value,
        ">",
        0.0,
        "window projection normalizer",
    ));
    Ok(report)
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    match spec.kind {
        ExperimentKind::Consistency => run_consistency(spec),
        ExperimentKind::Clt => run_estimator_clt(spec),
        ExperimentKind::MomentClt => run_moment_clt(spec),
        ExperimentKind::Cumulants => run_cumulants(spec),
        ExperimentKind::Rosenblatt => run_rosenblatt(spec),
        ExperimentKind::DegenerateProjection => run_degenerate_projection(spec),
    }
}
