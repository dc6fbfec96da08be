//! Exact sampling of stationary Gaussian sequences (scalar and vector valued)
//! by circulant embedding, with a dense Cholesky fallback.

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Controls for circulant embedding.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EmbeddingPolicy {
    /// Eigenvalues below `-tolerance * max_eigenvalue` reject the embedding.
    pub tolerance: f64,
    /// How many times the circulant size may be doubled before falling back.
    pub max_doublings: u32,
    /// Largest dense covariance dimension accepted for the Cholesky fallback.
    pub dense_limit: usize,
    /// Skip the embedding and factor the dense covariance directly.
    pub force_dense: bool,
}

impl Default for EmbeddingPolicy {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_doublings: 3,
            dense_limit: 20_000,
            force_dense: false,
        }
    }
}

#[derive(Clone)]
enum ScalarKind {
    Circulant { sqrt_eig: Vec<f64>, fft: Arc<dyn Fft<f64>> },
    Dense(DMatrix<f64>),
}

/// Sampler for a zero-mean stationary scalar sequence of length `n`.
#[derive(Clone)]
pub struct StationarySampler {
    n: usize,
    kind: ScalarKind,
    /// Smallest circulant eigenvalue seen (relative to the largest), for diagnostics.
    pub min_relative_eigenvalue: f64,
}

impl std::fmt::Debug for StationarySampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StationarySampler")
            .field("n", &self.n)
            .field("dense", &self.is_dense())
            .finish()
    }
}

impl StationarySampler {
    /// `autocov(k)` is the covariance at lag `k`.
    pub fn new<F>(n: usize, autocov: F, policy: EmbeddingPolicy) -> Result<Self>
    where
        F: Fn(usize) -> Result<f64>,
    {
        if n == 0 {
            return Err(Error::InvalidParameter("sequence length must be positive".into()));
        }
        let mut cache: Vec<f64> = Vec::new();
        let lag = |k: usize, cache: &mut Vec<f64>| -> Result<f64> {
            while cache.len() <= k {
                let v = autocov(cache.len())?;
                cache.push(v);
            }
            Ok(cache[k])
        };
        let mut worst = f64::NEG_INFINITY;
        if !policy.force_dense {
            let mut m = (n.max(2) - 1).next_power_of_two();
            for _ in 0..=policy.max_doublings {
                let size = 2 * m;
                let mut row = vec![Complex64::new(0.0, 0.0); size];
                for k in 0..=m {
                    row[k].re = lag(k, &mut cache)?;
                }
                for k in 1..m {
                    row[size - k].re = row[k].re;
                }
                let fft = FftPlanner::new().plan_fft_forward(size);
                fft.process(&mut row);
                let max = row.iter().map(|c| c.re).fold(f64::NEG_INFINITY, f64::max);
                let min = row.iter().map(|c| c.re).fold(f64::INFINITY, f64::min);
                let rel = if max > 0.0 { min / max } else { f64::NEG_INFINITY };
                worst = rel;
                if rel >= -policy.tolerance {
                    let scale = 1.0 / size as f64;
                    let sqrt_eig = row.iter().map(|c| (c.re.max(0.0) * scale).sqrt()).collect();
                    let inverse = FftPlanner::new().plan_fft_inverse(size);
                    return Ok(Self {
                        n,
                        kind: ScalarKind::Circulant { sqrt_eig, fft: inverse },
                        min_relative_eigenvalue: rel,
                    });
                }
                m *= 2;
            }
        }
        if n > policy.dense_limit {
            return Err(Error::EmbeddingFailure {
                min_eigenvalue: worst,
                size: n,
                limit: policy.dense_limit,
            });
        }
        let mut cov = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = lag(i - j, &mut cache)?;
                cov[(i, j)] = v;
                cov[(j, i)] = v;
            }
        }
        let chol = Cholesky::new(cov).ok_or(Error::NotPositiveDefinite)?;
        Ok(Self {
            n,
            kind: ScalarKind::Dense(chol.unpack()),
            min_relative_eigenvalue: worst,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.kind, ScalarKind::Dense(_))
    }

    /// Draws two independent sequences (the second may be ignored).
    pub fn sample_pair<R: Rng + ?Sized>(&self, rng: &mut R, a: &mut [f64], b: &mut [f64]) {
        assert!(a.len() >= self.n && b.len() >= self.n);
        match &self.kind {
            ScalarKind::Circulant { sqrt_eig, fft } => {
                let mut w: Vec<Complex64> = sqrt_eig
                    .iter()
                    .map(|&s| {
                        let re: f64 = rng.sample(StandardNormal);
                        let im: f64 = rng.sample(StandardNormal);
                        Complex64::new(s * re, s * im)
                    })
                    .collect();
                fft.process(&mut w);
                for i in 0..self.n {
                    a[i] = w[i].re;
                    b[i] = w[i].im;
                }
            }
            ScalarKind::Dense(l) => {
                for out in [a, b] {
                    let z = DVector::from_fn(self.n, |_, _| rng.sample::<f64, _>(StandardNormal));
                    let y = l * z;
                    out[..self.n].copy_from_slice(y.as_slice());
                }
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut a = vec![0.0; self.n];
        let mut b = vec![0.0; self.n];
        self.sample_pair(rng, &mut a, &mut b);
        a
    }
}

#[derive(Clone)]
enum BlockKind {
    Circulant {
        roots: Vec<DMatrix<Complex64>>,
        fft: Arc<dyn Fft<f64>>,
    },
    Dense(DMatrix<f64>),
}

/// Sampler for a zero-mean stationary `dim`-vector sequence of length `n`
/// with matrix autocovariance `R(k) = E[x(j + k) x(j)^T]`.
#[derive(Clone)]
pub struct BlockStationarySampler {
    n: usize,
    dim: usize,
    kind: BlockKind,
    pub min_relative_eigenvalue: f64,
}

impl BlockStationarySampler {
    pub fn new<F>(n: usize, dim: usize, autocov: F, policy: EmbeddingPolicy) -> Result<Self>
    where
        F: Fn(usize) -> Result<DMatrix<f64>>,
    {
        if n == 0 || dim == 0 {
            return Err(Error::InvalidParameter(
                "sequence length and dimension must be positive".into(),
            ));
        }
        let mut cache: Vec<DMatrix<f64>> = Vec::new();
        let fill = |k: usize, cache: &mut Vec<DMatrix<f64>>| -> Result<()> {
            while cache.len() <= k {
                let v = autocov(cache.len())?;
                if v.nrows() != dim || v.ncols() != dim {
                    return Err(Error::InvalidParameter("autocovariance has the wrong shape".into()));
                }
                cache.push(v);
            }
            Ok(())
        };
        let mut worst = f64::NEG_INFINITY;
        if !policy.force_dense {
            let mut m = (n.max(2) - 1).next_power_of_two();
            for _ in 0..=policy.max_doublings {
                let size = 2 * m;
                fill(m, &mut cache)?;
                let forward = FftPlanner::new().plan_fft_forward(size);
                // Λ_k = Σ_j C_j ω^{jk}, entry by entry.
                let mut lambda = vec![DMatrix::<Complex64>::zeros(dim, dim); size];
                let mut buf = vec![Complex64::new(0.0, 0.0); size];
                for r in 0..dim {
                    for c in 0..dim {
                        buf.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
                        for j in 0..=m {
                            buf[j].re = cache[j][(r, c)];
                        }
                        for j in 1..m {
                            buf[size - j].re = cache[j][(c, r)];
                        }
                        forward.process(&mut buf);
                        for k in 0..size {
                            lambda[k][(r, c)] = buf[k];
                        }
                    }
                }
                let mut roots = Vec::with_capacity(size);
                let mut min = f64::INFINITY;
                let mut max = f64::NEG_INFINITY;
                let mut eigs = Vec::with_capacity(size);
                for l in lambda {
                    let herm = (&l + l.adjoint()) * Complex64::new(0.5, 0.0);
                    let e = SymmetricEigen::new(herm);
                    for &v in e.eigenvalues.iter() {
                        min = min.min(v);
                        max = max.max(v);
                    }
                    eigs.push(e);
                }
                let rel = if max > 0.0 { min / max } else { f64::NEG_INFINITY };
                worst = rel;
                if rel >= -policy.tolerance {
                    let scale = 1.0 / size as f64;
                    for e in eigs {
                        let d = DMatrix::from_diagonal(
                            &e.eigenvalues.map(|v| Complex64::new((v.max(0.0) * scale).sqrt(), 0.0)),
                        );
                        roots.push(&e.eigenvectors * d * e.eigenvectors.adjoint());
                    }
                    return Ok(Self {
                        n,
                        dim,
                        kind: BlockKind::Circulant {
                            roots,
                            fft: FftPlanner::new().plan_fft_inverse(size),
                        },
                        min_relative_eigenvalue: rel,
                    });
                }
                m *= 2;
            }
        }
        let total = n * dim;
        if total > policy.dense_limit {
            return Err(Error::EmbeddingFailure {
                min_eigenvalue: worst,
                size: total,
                limit: policy.dense_limit,
            });
        }
        fill(n - 1, &mut cache)?;
        let mut cov = DMatrix::zeros(total, total);
        for i in 0..n {
            for j in 0..=i {
                let r = &cache[i - j];
                for a in 0..dim {
                    for b in 0..dim {
                        cov[(i * dim + a, j * dim + b)] = r[(a, b)];
                        cov[(j * dim + b, i * dim + a)] = r[(a, b)];
                    }
                }
            }
        }
        let chol = Cholesky::new(cov).ok_or(Error::NotPositiveDefinite)?;
        Ok(Self {
            n,
            dim,
            kind: BlockKind::Dense(chol.unpack()),
            min_relative_eigenvalue: worst,
        })
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

    pub fn is_dense(&self) -> bool {
        matches!(self.kind, BlockKind::Dense(_))
    }

    /// Two independent samples, each an `n × dim` row-major array (time-major).
    pub fn sample_pair<R: Rng + ?Sized>(&self, rng: &mut R, a: &mut [f64], b: &mut [f64]) {
        let (n, dim) = (self.n, self.dim);
        assert!(a.len() >= n * dim && b.len() >= n * dim);
        match &self.kind {
            BlockKind::Circulant { roots, fft } => {
                let size = roots.len();
                let mut cols = vec![vec![Complex64::new(0.0, 0.0); size]; dim];
                let mut xi = DVector::<Complex64>::zeros(dim);
                for (k, root) in roots.iter().enumerate() {
                    for v in xi.iter_mut() {
                        *v = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
                    }
                    let eta = root * &xi;
                    for c in 0..dim {
                        cols[c][k] = eta[c];
                    }
                }
                for (c, col) in cols.iter_mut().enumerate() {
                    fft.process(col);
                    for j in 0..n {
                        a[j * dim + c] = col[j].re;
                        b[j * dim + c] = col[j].im;
                    }
                }
            }
            BlockKind::Dense(l) => {
                for out in [a, b] {
                    let z = DVector::from_fn(n * dim, |_, _| rng.sample::<f64, _>(StandardNormal));
                    let y = l * z;
                    out[..n * dim].copy_from_slice(y.as_slice());
                }
            }
        }
    }
}
