//! Fractional Gaussian noise: autocovariance, exact sampling and fBm paths.

use rand::Rng;

use crate::embedding::{EmbeddingPolicy, StationarySampler};
use crate::error::{check_hurst_open, Result};

/// Autocovariance of unit-step fractional Gaussian noise at lag `k`.
pub fn fgn_autocov(hurst: f64, k: i64) -> f64 {
    let k = k.unsigned_abs() as f64;
    let h2 = 2.0 * hurst;
    0.5 * ((k + 1.0).powf(h2) - 2.0 * k.powf(h2) + (k - 1.0).abs().powf(h2))
}

/// Exact sampler of `n` consecutive unit-step fGN increments.
#[derive(Clone, Debug)]
pub struct FgnSampler {
    hurst: f64,
    inner: StationarySampler,
}

impl FgnSampler {
    pub fn new(n: usize, hurst: f64) -> Result<Self> {
        Self::with_policy(n, hurst, EmbeddingPolicy::default())
    }

    pub fn with_policy(n: usize, hurst: f64, policy: EmbeddingPolicy) -> Result<Self> {
        check_hurst_open(hurst)?;
        let inner = StationarySampler::new(n, |k| Ok(fgn_autocov(hurst, k as i64)), policy)?;
        Ok(Self { hurst, inner })
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    pub fn len(&self) -> usize {
        self.inner.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inner.is_empty()
    }

    pub fn uses_dense_fallback(&self) -> bool {
        self.inner.is_dense()
    }

    /// Two independent fGN sequences, each scaled to step `dt` (variance `dt^{2H}`).
    pub fn sample_pair<R: Rng + ?Sized>(&self, rng: &mut R, dt: f64, a: &mut [f64], b: &mut [f64]) {
        self.inner.sample_pair(rng, a, b);
        let s = dt.powf(self.hurst);
        if s != 1.0 {
            let n = self.len();
            a[..n].iter_mut().chain(b[..n].iter_mut()).for_each(|x| *x *= s);
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, dt: f64) -> Vec<f64> {
        let n = self.len();
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        self.sample_pair(rng, dt, &mut a, &mut b);
        a
    }
}

/// `n` fGN increments with unit step.
pub fn sample_fgn<R: Rng + ?Sized>(n: usize, hurst: f64, rng: &mut R) -> Result<Vec<f64>> {
    Ok(FgnSampler::new(n, hurst)?.sample(rng, 1.0))
}

/// fBm on the grid `0, dt, ..., n·dt` (length `n + 1`, starting at zero).
pub fn sample_fbm<R: Rng + ?Sized>(n: usize, hurst: f64, dt: f64, rng: &mut R) -> Result<Vec<f64>> {
    let incr = FgnSampler::new(n, hurst)?.sample(rng, dt);
    let mut path = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    path.push(acc);
    for x in incr {
        acc += x;
        path.push(acc);
    }
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use approx::assert_relative_eq;

    #[test]
    fn autocov_reference_values() {
        assert_relative_eq!(fgn_autocov(0.5, 0), 1.0);
        assert_relative_eq!(fgn_autocov(0.5, 3), 0.0);
        // H = 0.75, lag 1: (2^{1.5} - 2) / 2
        assert_relative_eq!(fgn_autocov(0.75, 1), (2f64.powf(1.5) - 2.0) / 2.0, max_relative = 1e-15);
        assert_relative_eq!(fgn_autocov(0.3, -4), fgn_autocov(0.3, 4));
        // Large-lag asymptote H(2H-1)k^{2H-2}.
        let k = 10_000i64;
        assert_relative_eq!(
            fgn_autocov(0.8, k),
            0.8 * 0.6 * (k as f64).powf(-0.4),
            max_relative = 1e-6
        );
    }

    #[test]
    fn fbm_variance_scaling() {
        // Var B(t) = t^{2H}; check at the end of the path over many draws.
        for &h in &[0.2, 0.5, 0.8] {
            let sampler = FgnSampler::new(64, h).unwrap();
            let mut rng = substream(11, 0, 0);
            let reps = 20_000;
            let mut acc = 0.0;
            for _ in 0..reps {
                let inc = sampler.sample(&mut rng, 0.25);
                let end: f64 = inc.iter().sum();
                acc += end * end;
            }
            let emp = acc / reps as f64;
            let target = 16f64.powf(2.0 * h);
            let se = target * (2.0f64 / reps as f64).sqrt();
            assert!((emp - target).abs() < 5.0 * se, "H={h}: {emp} vs {target}");
        }
    }

    #[test]
    fn dense_fallback_is_equivalent_in_law() {
        let policy = EmbeddingPolicy {
            force_dense: true,
            ..Default::default()
        };
        let s = FgnSampler::with_policy(8, 0.7, policy).unwrap();
        assert!(s.uses_dense_fallback());
        let mut rng = substream(3, 0, 0);
        let reps = 40_000;
        let mut lag1 = 0.0;
        for _ in 0..reps {
            let x = s.sample(&mut rng, 1.0);
            lag1 += x[4] * x[3];
        }
        let emp = lag1 / reps as f64;
        assert!((emp - fgn_autocov(0.7, 1)).abs() < 5.0 * (2.0f64 / reps as f64).sqrt());
    }

    #[test]
    fn rejects_bad_hurst() {
        assert!(FgnSampler::new(8, 1.0).is_err());
        assert!(FgnSampler::new(8, 0.0).is_err());
    }
}
