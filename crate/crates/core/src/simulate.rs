//! Trajectories of the truncated solution: exponential-Euler integration of
//! the mild form, exact stationary sampling, and exact mild paths built from
//! a stationary sample.

use std::cell::RefCell;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::covariance::LagTable;
use crate::embedding::{BlockStationarySampler, EmbeddingPolicy, StationarySampler};
use crate::error::{invalid, Result};
use crate::fgn::FgnSampler;
use crate::rng::substream;
use crate::spectral_model::{ModelConfig, NoiseKind, ProjectionVector};

/// Initial condition of a simulated path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    Zero,
    Given(Vec<f64>),
    /// Exactly stationary start (exact scheme only).
    Stationary,
    /// Start from zero `burn_in_steps · dt` before the first output.
    BurnIn,
}

impl InitKind {
    pub fn name(&self) -> &'static str {
        match self {
            InitKind::Zero => "zero",
            InitKind::Given(_) => "given",
            InitKind::Stationary => "stationary",
            InitKind::BurnIn => "burn_in",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryGrid {
    pub dt: f64,
    /// Output points are `t_i = i·dt` for `i = 0..=n_steps`.
    pub n_steps: usize,
    pub burn_in_steps: usize,
}

/// Relaxation times of the slowest mode covered by the default burn-in.
pub const BURN_IN_RELAXATIONS: f64 = 20.0;

impl TrajectoryGrid {
    pub fn new(dt: f64, n_steps: usize) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid(format!("time step must be positive, got {dt}")));
        }
        Ok(Self {
            dt,
            n_steps,
            burn_in_steps: 0,
        })
    }

    pub fn with_burn_in(mut self, steps: usize) -> Self {
        self.burn_in_steps = steps;
        self
    }

    /// `ceil(20 / (a_1·dt))` steps.
    pub fn default_burn_in(model: &ModelConfig, dt: f64) -> usize {
        let slow = model.drifts().into_iter().fold(f64::INFINITY, f64::min);
        (BURN_IN_RELAXATIONS / (slow * dt)).ceil() as usize
    }

    pub fn points(&self) -> usize {
        self.n_steps + 1
    }

    pub fn horizon(&self) -> f64 {
        self.n_steps as f64 * self.dt
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub grid: TrajectoryGrid,
    /// `|X(t_i)|²` for every output point.
    pub sq_norms: Vec<f64>,
    pub projections: Option<Vec<f64>>,
    /// Time-major `points × dim` mode coordinates, when kept.
    pub modes: Option<Vec<f64>>,
    pub dim: usize,
    pub init: InitKind,
}

impl Trajectory {
    fn from_modes(grid: TrajectoryGrid, modes: Vec<f64>, dim: usize, init: InitKind, keep: bool) -> Self {
        let sq_norms = row_sq_norms(&modes, dim);
        Self {
            grid,
            sq_norms,
            projections: None,
            modes: keep.then_some(modes),
            dim,
            init,
        }
    }

    pub fn len(&self) -> usize {
        self.sq_norms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sq_norms.is_empty()
    }

    /// Path of mode `k`, if modes were kept.
    pub fn mode_path(&self, k: usize) -> Option<Vec<f64>> {
        let m = self.modes.as_ref()?;
        Some(m.chunks(self.dim).map(|row| row[k]).collect())
    }
}

/// Squared Euclidean norm of every row of a time-major array.
pub fn row_sq_norms(modes: &[f64], dim: usize) -> Vec<f64> {
    modes.chunks(dim).map(|row| row.iter().map(|x| x * x).sum()).collect()
}

/// `Σ_k w_k x_k` for every row of a time-major array.
pub fn row_projections(modes: &[f64], w: &[f64]) -> Vec<f64> {
    modes
        .chunks(w.len())
        .map(|row| row.iter().zip(w).map(|(x, c)| x * c).sum())
        .collect()
}

/// Projections `⟨X(t_i), w⟩`; needs stored modes.
pub fn attach_projection(traj: &Trajectory, w: &ProjectionVector) -> Result<Trajectory> {
    if w.len() != traj.dim {
        return Err(invalid(format!(
            "projection has {} coefficients but the trajectory has {} modes",
            w.len(),
            traj.dim
        )));
    }
    let modes = traj
        .modes
        .as_ref()
        .ok_or_else(|| invalid("projection requires a trajectory with stored modes"))?;
    let mut out = traj.clone();
    out.projections = Some(row_projections(modes, &w.coefficients));
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// `x ← e^{−a h} x + φ ΔB` on `substeps` sub-intervals per output step.
    ExponentialEuler { substeps: usize },
    /// Stationary sample plus the semigroup correction of the initial state.
    Exact,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimulationOptions {
    pub scheme: Scheme,
    pub keep_modes: bool,
    pub policy: EmbeddingPolicy,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        Self {
            scheme: Scheme::ExponentialEuler { substeps: 1 },
            keep_modes: true,
            policy: EmbeddingPolicy::default(),
        }
    }
}

/// Exponential-Euler path of one scalar mode `dx = −a x dt + φ dB^H`,
/// returned on the `n_steps + 1` output points after burn-in.
pub fn integrate_mode<R: Rng + ?Sized>(
    a: f64,
    phi: f64,
    hurst: f64,
    grid: &TrajectoryGrid,
    x0: f64,
    substeps: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let substeps = substeps.max(1);
    let total = (grid.burn_in_steps + grid.n_steps) * substeps;
    let h = grid.dt / substeps as f64;
    let noise = if phi != 0.0 && total > 0 {
        FgnSampler::new(total, hurst)?.sample(rng, h)
    } else {
        vec![0.0; total]
    };
    Ok(euler_from_noise(a, phi, &noise, grid, x0, substeps))
}

fn euler_from_noise(a: f64, phi: f64, noise: &[f64], grid: &TrajectoryGrid, x0: f64, substeps: usize) -> Vec<f64> {
    let decay = (-a * grid.dt / substeps as f64).exp();
    let mut x = x0;
    let mut out = Vec::with_capacity(grid.points());
    let mut it = noise.chunks(substeps);
    for _ in 0..grid.burn_in_steps {
        for db in it.next().unwrap() {
            x = decay * x + phi * db;
        }
    }
    out.push(x);
    for _ in 0..grid.n_steps {
        for db in it.next().unwrap() {
            x = decay * x + phi * db;
        }
        out.push(x);
    }
    out
}

fn initial_state(model: &ModelConfig, init: &InitKind) -> Result<Vec<f64>> {
    let n = model.modes();
    match init {
        InitKind::Zero | InitKind::BurnIn => Ok(vec![0.0; n]),
        InitKind::Given(x) if x.len() == n => Ok(x.clone()),
        InitKind::Given(x) => Err(invalid(format!(
            "initial state has {} coordinates but the model has {n} modes",
            x.len()
        ))),
        InitKind::Stationary => Err(invalid("a stationary start requires the exact scheme")),
    }
}

/// Simulates the truncated solution on `grid`. Randomness comes from
/// `substream(seed, replication, ·)`: one component per mode for diagonal
/// noise, component 0 for the shared fBm of rank-one noise.
pub fn integrate_path(
    model: &ModelConfig,
    grid: &TrajectoryGrid,
    init: &InitKind,
    options: &SimulationOptions,
    seed: u64,
    replication: u64,
) -> Result<Trajectory> {
    let dim = model.modes();
    let grid = effective_grid(grid, init);
    match options.scheme {
        Scheme::ExponentialEuler { substeps } => {
            let x0 = initial_state(model, init)?;
            let a = model.drifts();
            let phi = model.loadings();
            let mut modes = vec![0.0; grid.points() * dim];
            let substeps = substeps.max(1);
            let shared = match model.noise_kind() {
                NoiseKind::RankOne => {
                    let total = (grid.burn_in_steps + grid.n_steps) * substeps;
                    let mut rng = substream(seed, replication, 0);
                    Some(if total > 0 {
                        FgnSampler::new(total, model.hurst)?.sample(&mut rng, grid.dt / substeps as f64)
                    } else {
                        Vec::new()
                    })
                }
                NoiseKind::Diagonal => None,
            };
            for k in 0..dim {
                let path = match &shared {
                    Some(noise) => euler_from_noise(a[k], phi[k], noise, &grid, x0[k], substeps),
                    None => {
                        let mut rng = substream(seed, replication, k as u64);
                        integrate_mode(a[k], phi[k], model.hurst, &grid, x0[k], substeps, &mut rng)?
                    }
                };
                for (i, x) in path.into_iter().enumerate() {
                    modes[i * dim + k] = x;
                }
            }
            Ok(Trajectory::from_modes(
                grid,
                modes,
                dim,
                init.clone(),
                options.keep_modes,
            ))
        }
        Scheme::Exact => {
            let sampler = ExactPathSampler::new(model, &grid, init, options.policy)?;
            let mut rng = substream(seed, replication, 0);
            let (a, _) = sampler.sample_pair(&mut rng);
            Ok(Trajectory::from_modes(grid, a, dim, init.clone(), options.keep_modes))
        }
    }
}

fn effective_grid(grid: &TrajectoryGrid, init: &InitKind) -> TrajectoryGrid {
    let mut g = *grid;
    if !matches!(init, InitKind::BurnIn) {
        g.burn_in_steps = 0;
    }
    g
}

enum SequenceKind {
    /// One scalar sampler per mode; `None` for modes without noise.
    PerMode(Vec<Option<StationarySampler>>),
    Block(BlockStationarySampler),
}

/// Exact sampler of the stationary mode vector `(x_k(i·dt))` for
/// `i = 0..n`, reusable across replications.
pub struct StationarySequenceSampler {
    n: usize,
    dim: usize,
    dt: f64,
    kind: SequenceKind,
}

impl std::fmt::Debug for StationarySequenceSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StationarySequenceSampler")
            .field("n", &self.n)
            .field("dim", &self.dim)
            .field("dt", &self.dt)
            .finish()
    }
}

impl StationarySequenceSampler {
    pub fn new(model: &ModelConfig, n: usize, dt: f64, policy: EmbeddingPolicy) -> Result<Self> {
        if n == 0 {
            return Err(invalid("sequence length must be positive"));
        }
        if model.is_noise_free() {
            return Err(invalid("the model has no noise; its stationary law is degenerate"));
        }
        let table = RefCell::new(LagTable::new(model, dt)?);
        let lag = |k: usize| -> Result<crate::covariance::AutoCovMatrix> {
            let mut t = table.borrow_mut();
            if t.len() <= k {
                t.ensure((k + 1).next_power_of_two())?;
            }
            Ok(t.lag(k).clone())
        };
        let dim = model.modes();
        let kind = match model.noise_kind() {
            NoiseKind::Diagonal => {
                let mut samplers = Vec::with_capacity(dim);
                for (k, &phi) in model.loadings().iter().enumerate() {
                    if phi == 0.0 {
                        samplers.push(None);
                        continue;
                    }
                    let s = StationarySampler::new(n, |i| lag(i).map(|r| r.get(k, k)), policy)?;
                    samplers.push(Some(s));
                }
                SequenceKind::PerMode(samplers)
            }
            NoiseKind::RankOne => {
                let s = BlockStationarySampler::new(n, dim, |i| lag(i).map(|r| r.to_dense()), policy)?;
                SequenceKind::Block(s)
            }
        };
        Ok(Self { n, dim, dt, kind })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Two independent draws, each a time-major `n × dim` array.
    pub fn sample_pair<R: Rng + ?Sized>(&self, rng: &mut R, a: &mut [f64], b: &mut [f64]) {
        let (n, dim) = (self.n, self.dim);
        assert!(a.len() >= n * dim && b.len() >= n * dim);
        match &self.kind {
            SequenceKind::PerMode(samplers) => {
                let mut xa = vec![0.0; n];
                let mut xb = vec![0.0; n];
                for (k, s) in samplers.iter().enumerate() {
                    match s {
                        Some(s) => s.sample_pair(rng, &mut xa, &mut xb),
                        None => {
                            xa.fill(0.0);
                            xb.fill(0.0);
                        }
                    }
                    for i in 0..n {
                        a[i * dim + k] = xa[i];
                        b[i * dim + k] = xb[i];
                    }
                }
            }
            SequenceKind::Block(s) => s.sample_pair(rng, a, b),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut a = vec![0.0; self.n * self.dim];
        let mut b = vec![0.0; self.n * self.dim];
        self.sample_pair(rng, &mut a, &mut b);
        a
    }
}

/// Exact draw of `n` stationary points spaced by `dt`, modes kept.
pub fn sample_stationary_sequence<R: Rng + ?Sized>(
    model: &ModelConfig,
    n: usize,
    dt: f64,
    rng: &mut R,
) -> Result<Trajectory> {
    let sampler = StationarySequenceSampler::new(model, n, dt, EmbeddingPolicy::default())?;
    let modes = sampler.sample(rng);
    let grid = TrajectoryGrid::new(dt, n - 1)?;
    Ok(Trajectory::from_modes(
        grid,
        modes,
        model.modes(),
        InitKind::Stationary,
        true,
    ))
}

/// Exact mild paths: with `Z` stationary and the same driving noise,
/// `X(t) = Z(t) + e^{−a(t−s)}(X(s) − Z(s))` for any start time `s`.
pub struct ExactPathSampler {
    seq: StationarySequenceSampler,
    drifts: Vec<f64>,
    grid: TrajectoryGrid,
    start: Option<Vec<f64>>,
    offset: usize,
}

impl std::fmt::Debug for ExactPathSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExactPathSampler")
            .field("grid", &self.grid)
            .field("offset", &self.offset)
            .finish()
    }
}

impl ExactPathSampler {
    pub fn new(model: &ModelConfig, grid: &TrajectoryGrid, init: &InitKind, policy: EmbeddingPolicy) -> Result<Self> {
        let grid = effective_grid(grid, init);
        let (start, offset) = match init {
            InitKind::Stationary => (None, 0),
            InitKind::BurnIn => (Some(vec![0.0; model.modes()]), grid.burn_in_steps),
            other => (Some(initial_state(model, other)?), 0),
        };
        let seq = StationarySequenceSampler::new(model, offset + grid.points(), grid.dt, policy)?;
        Ok(Self {
            seq,
            drifts: model.drifts(),
            grid,
            start,
            offset,
        })
    }

    pub fn grid(&self) -> &TrajectoryGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.drifts.len()
    }

    fn correct(&self, z: &[f64]) -> Vec<f64> {
        let dim = self.dim();
        let points = self.grid.points();
        let mut out = z[self.offset * dim..(self.offset + points) * dim].to_vec();
        if let Some(x0) = &self.start {
            let z0 = &z[..dim];
            for k in 0..dim {
                let gap = x0[k] - z0[k];
                let rate = (-self.drifts[k] * self.grid.dt).exp();
                let mut factor = rate.powi(self.offset as i32);
                for i in 0..points {
                    out[i * dim + k] += factor * gap;
                    factor *= rate;
                }
            }
        }
        out
    }

    /// Two independent paths, each a time-major `points × dim` array.
    pub fn sample_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
        let size = self.seq.len() * self.dim();
        let mut a = vec![0.0; size];
        let mut b = vec![0.0; size];
        self.seq.sample_pair(rng, &mut a, &mut b);
        (self.correct(&a), self.correct(&b))
    }
}

/// Dense covariance of the stacked stationary vector `(x(0), …, x(n−1))`,
/// time-major blocks `R(|i−j|·dt)`.
pub fn block_covariance(table: &LagTable, n: usize) -> DMatrix<f64> {
    let dim = table.model().modes();
    let total = n * dim;
    let mut cov = DMatrix::zeros(total, total);
    for i in 0..n {
        for j in 0..=i {
            let r = table.lag(i - j);
            for a in 0..dim {
                for b in 0..dim {
                    // E[x_a(i) x_b(j)] = r_ab((i−j)dt)
                    let v = r.get(a, b);
                    cov[(i * dim + a, j * dim + b)] = v;
                    cov[(j * dim + b, i * dim + a)] = v;
                }
            }
        }
    }
    cov
}
