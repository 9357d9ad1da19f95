//! Monte-Carlo mass of a region under a sampling distribution.
//!
//! Samples are split into fixed-size shards, each drawn from its own
//! seeded stream. Shard counts are integers, so the total does not depend
//! on how shards are scheduled across threads.

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gmm::{FeatureTransform, GaussianMixture};
use crate::rng::{self, Rng};

pub const DEFAULT_MC_SAMPLES: usize = 1_000_000;
pub const DEFAULT_MC_SEED: u64 = 0x5eed;
const SHARD: usize = 1 << 14;

pub trait Region: Sync {
    fn contains(&self, z: &[f64]) -> bool;
}

/// Adapts a closure into a [`Region`].
pub struct Predicate<F>(pub F);

impl<F: Fn(&[f64]) -> bool + Sync> Region for Predicate<F> {
    fn contains(&self, z: &[f64]) -> bool {
        (self.0)(z)
    }
}

pub trait Sampler: Sync {
    fn dim(&self) -> usize;
    fn sample_into(&self, rng: &mut Rng, out: &mut [f64]);

    fn sample(&self, rng: &mut Rng) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.sample_into(rng, &mut out);
        out
    }
}

/// Fraction of `n` samples falling inside `region`.
pub fn mc_region_mass<R, S>(region: &R, sampler: &S, n: usize, seed: u64) -> Result<f64>
where
    R: Region + ?Sized,
    S: Sampler + ?Sized,
{
    if n == 0 {
        return Err(Error::InvalidParameter(
            "Monte-Carlo sample count must be >= 1".into(),
        ));
    }
    let shards = n.div_ceil(SHARD);
    let inside: u64 = (0..shards)
        .into_par_iter()
        .map(|s| {
            let count = SHARD.min(n - s * SHARD);
            let mut rng = rng::substream(seed, s as u64);
            let mut z = vec![0.0; sampler.dim()];
            let mut hits = 0u64;
            for _ in 0..count {
                sampler.sample_into(&mut rng, &mut z);
                hits += u64::from(region.contains(&z));
            }
            hits
        })
        .sum();
    Ok(inside as f64 / n as f64)
}

/// Draws from `Σ π_i N(μ_i, Σ_i)`.
#[derive(Debug, Clone)]
pub struct MixtureSampler {
    cumulative: Vec<f64>,
    means: Vec<Vec<f64>>,
    factors: Vec<DMatrix<f64>>,
}

impl MixtureSampler {
    pub fn new(weights: &[f64], means: &[Vec<f64>], covariances: &[DMatrix<f64>]) -> Result<Self> {
        if weights.is_empty() || weights.len() != means.len() || weights.len() != covariances.len()
        {
            return Err(Error::InvalidParameter(
                "mixture sampler needs matching non-empty parameter lists".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|w| !(*w >= 0.0)) || !(total > 0.0) {
            return Err(Error::InvalidParameter(
                "mixture sampler weights must be nonnegative".into(),
            ));
        }
        let mut acc = 0.0;
        let cumulative = weights
            .iter()
            .map(|w| {
                acc += w / total;
                acc
            })
            .collect();
        let factors = covariances
            .iter()
            .enumerate()
            .map(|(c, cov)| {
                cov.clone()
                    .cholesky()
                    .map(|ch| ch.l())
                    .ok_or(Error::SingularModel { component: c })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            cumulative,
            means: means.to_vec(),
            factors,
        })
    }

    /// Sampler for a mixture fitted on untransformed features.
    pub fn from_mixture(gmm: &GaussianMixture) -> Result<Self> {
        if gmm.transform() != FeatureTransform::Identity {
            return Err(Error::InvalidParameter(
                "sampling is only defined for mixtures on raw features".into(),
            ));
        }
        Self::new(gmm.weights(), gmm.means(), gmm.covariances())
    }

    /// Component index and sample.
    pub fn sample_labeled(&self, rng: &mut Rng, out: &mut [f64]) -> usize {
        let u: f64 = rng.random();
        let c = self
            .cumulative
            .iter()
            .position(|p| u < *p)
            .unwrap_or(self.cumulative.len() - 1);
        let h = out.len();
        let noise: Vec<f64> = (0..h).map(|_| StandardNormal.sample(rng)).collect();
        let l = &self.factors[c];
        for (r, o) in out.iter_mut().enumerate() {
            let mut v = self.means[c][r];
            for (k, nk) in noise.iter().enumerate().take(r + 1) {
                v += l[(r, k)] * nk;
            }
            *o = v;
        }
        c
    }
}

impl Sampler for MixtureSampler {
    fn dim(&self) -> usize {
        self.means[0].len()
    }

    fn sample_into(&self, rng: &mut Rng, out: &mut [f64]) {
        self.sample_labeled(rng, out);
    }
}

/// Uniform on an axis-aligned box.
#[derive(Debug, Clone)]
pub struct BoxSampler {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxSampler {
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Self {
        Self {
            lo: vec![lo; dim],
            hi: vec![hi; dim],
        }
    }
}

impl Sampler for BoxSampler {
    fn dim(&self) -> usize {
        self.lo.len()
    }

    fn sample_into(&self, rng: &mut Rng, out: &mut [f64]) {
        for ((o, lo), hi) in out.iter_mut().zip(&self.lo).zip(&self.hi) {
            *o = lo + (hi - lo) * rng.random::<f64>();
        }
    }
}

/// Uniform on the shell `inner <= ‖z - center‖ <= outer`.
#[derive(Debug, Clone)]
pub struct AnnulusSampler {
    pub center: Vec<f64>,
    pub inner: f64,
    pub outer: f64,
}

impl Sampler for AnnulusSampler {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn sample_into(&self, rng: &mut Rng, out: &mut [f64]) {
        let h = out.len();
        let mut norm = 0.0;
        while norm == 0.0 {
            for o in out.iter_mut() {
                *o = StandardNormal.sample(rng);
            }
            norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
        }
        let hf = h as f64;
        let u: f64 = rng.random();
        let r =
            (self.inner.powf(hf) + u * (self.outer.powf(hf) - self.inner.powf(hf))).powf(1.0 / hf);
        for (o, c) in out.iter_mut().zip(&self.center) {
            *o = c + *o / norm * r;
        }
    }
}
