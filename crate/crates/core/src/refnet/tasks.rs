//! Seeded synthetic inputs for the reference experiments.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, LabelVector};
use crate::geometry::{AnnulusSampler, BoxSampler, Sampler};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SyntheticTask {
    /// K isotropic blobs whose means form a regular polygon in the first
    /// two input coordinates, each mean `separation · sigma` from the
    /// origin. Extra `nuisance_dims` coordinates carry pure noise of scale
    /// `nuisance_sigma`.
    GaussianBlobs {
        k: usize,
        n_per_class: usize,
        separation: f64,
        sigma: f64,
        #[serde(default)]
        nuisance_dims: usize,
        #[serde(default)]
        nuisance_sigma: f64,
        seed: u64,
    },
    /// Three well-separated 2-D blobs for a shallow network.
    TwoDToy { n_per_class: usize, seed: u64 },
    /// Unlabelled points uniform on a shell of the first two coordinates
    /// around `center`; remaining coordinates carry Gaussian noise of scale
    /// `nuisance_sigma`.
    RingOod {
        n: usize,
        dim: usize,
        inner: f64,
        outer: f64,
        #[serde(default)]
        nuisance_sigma: f64,
        seed: u64,
    },
    /// Unlabelled points uniform on `[lo, hi]^dim`.
    UniformHypercubeOod {
        n: usize,
        dim: usize,
        lo: f64,
        hi: f64,
        seed: u64,
    },
    /// Binary `side × side` images: K random prototypes with each pixel
    /// flipped with probability `flip_prob`. With `uniform` set the pixels
    /// are fair coin flips and no labels are produced.
    BinaryGrid {
        k: usize,
        side: usize,
        n_per_class: usize,
        flip_prob: f64,
        #[serde(default)]
        uniform: bool,
        prototype_seed: u64,
        seed: u64,
    },
}

const TOY_SEPARATION: f64 = 8.0;
const TOY_SIGMA: f64 = 0.5;

impl SyntheticTask {
    pub fn seed(&self) -> u64 {
        match self {
            Self::GaussianBlobs { seed, .. }
            | Self::TwoDToy { seed, .. }
            | Self::RingOod { seed, .. }
            | Self::UniformHypercubeOod { seed, .. }
            | Self::BinaryGrid { seed, .. } => *seed,
        }
    }

    pub fn with_seed(&self, new_seed: u64) -> Self {
        let mut t = self.clone();
        match &mut t {
            Self::GaussianBlobs { seed, .. }
            | Self::TwoDToy { seed, .. }
            | Self::RingOod { seed, .. }
            | Self::UniformHypercubeOod { seed, .. }
            | Self::BinaryGrid { seed, .. } => *seed = new_seed,
        }
        t
    }

    pub fn with_count(&self, count: usize) -> Self {
        let mut t = self.clone();
        match &mut t {
            Self::GaussianBlobs { n_per_class, .. }
            | Self::TwoDToy { n_per_class, .. }
            | Self::BinaryGrid { n_per_class, .. } => *n_per_class = count,
            Self::RingOod { n, .. } | Self::UniformHypercubeOod { n, .. } => *n = count,
        }
        t
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Self::GaussianBlobs { nuisance_dims, .. } => 2 + nuisance_dims,
            Self::TwoDToy { .. } => 2,
            Self::RingOod { dim, .. } | Self::UniformHypercubeOod { dim, .. } => *dim,
            Self::BinaryGrid { side, .. } => side * side,
        }
    }

    /// Number of classes, or `None` for unlabelled samplers.
    pub fn classes(&self) -> Option<usize> {
        match self {
            Self::GaussianBlobs { k, .. } => Some(*k),
            Self::TwoDToy { .. } => Some(3),
            Self::BinaryGrid {
                k, uniform: false, ..
            } => Some(*k),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        match self {
            Self::GaussianBlobs {
                k,
                n_per_class,
                separation,
                sigma,
                nuisance_dims,
                nuisance_sigma,
                ..
            } => {
                if *k < 2 || *n_per_class == 0 {
                    return bad("gaussian_blobs needs k >= 2 and n_per_class >= 1");
                }
                if !(*separation > 0.0 && *sigma > 0.0)
                    || !separation.is_finite()
                    || !sigma.is_finite()
                {
                    return bad("gaussian_blobs needs positive separation and sigma");
                }
                if *nuisance_dims > 0 && !(*nuisance_sigma >= 0.0 && nuisance_sigma.is_finite()) {
                    return bad("nuisance_sigma must be >= 0");
                }
            }
            Self::TwoDToy { n_per_class, .. } => {
                if *n_per_class == 0 {
                    return bad("two_d_toy needs n_per_class >= 1");
                }
            }
            Self::RingOod {
                n,
                dim,
                inner,
                outer,
                nuisance_sigma,
                ..
            } => {
                if *n == 0 || *dim < 2 {
                    return bad("ring_ood needs n >= 1 and dim >= 2");
                }
                if !(*inner >= 0.0 && outer > inner && outer.is_finite()) {
                    return bad("ring_ood needs 0 <= inner < outer");
                }
                if !(*nuisance_sigma >= 0.0 && nuisance_sigma.is_finite()) {
                    return bad("nuisance_sigma must be >= 0");
                }
            }
            Self::UniformHypercubeOod { n, dim, lo, hi, .. } => {
                if *n == 0 || *dim == 0 || !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
                    return bad("uniform_hypercube_ood needs n, dim >= 1 and lo < hi");
                }
            }
            Self::BinaryGrid {
                k,
                side,
                n_per_class,
                flip_prob,
                ..
            } => {
                if *k < 2 || *side == 0 || *n_per_class == 0 {
                    return bad("binary_grid needs k >= 2, side >= 1, n_per_class >= 1");
                }
                if !(0.0..=0.5).contains(flip_prob) {
                    return bad("binary_grid flip_prob must lie in [0, 0.5]");
                }
            }
        }
        Ok(())
    }

    /// Class means of the blob tasks.
    pub fn blob_means(&self) -> Option<Vec<Vec<f64>>> {
        let (k, sep, sigma, nuis) = match self {
            Self::GaussianBlobs {
                k,
                separation,
                sigma,
                nuisance_dims,
                ..
            } => (*k, *separation, *sigma, *nuisance_dims),
            Self::TwoDToy { .. } => (3, TOY_SEPARATION, TOY_SIGMA, 0),
            _ => return None,
        };
        let radius = sep * sigma;
        Some(
            (0..k)
                .map(|c| {
                    let angle = 2.0 * std::f64::consts::PI * c as f64 / k as f64
                        + std::f64::consts::FRAC_PI_2;
                    let mut m = vec![radius * angle.cos(), radius * angle.sin()];
                    m.resize(2 + nuis, 0.0);
                    m
                })
                .collect(),
        )
    }

    fn prototypes(k: usize, side: usize, prototype_seed: u64) -> Vec<Vec<f64>> {
        let mut r = rng::seeded(prototype_seed);
        (0..k)
            .map(|_| {
                (0..side * side)
                    .map(|_| if r.random::<bool>() { 1.0 } else { 0.0 })
                    .collect()
            })
            .collect()
    }

    /// Draw one input with `r`, returning its class when the task is labelled.
    /// Class choice is uniform for labelled tasks.
    pub fn draw(&self, r: &mut Rng, out: &mut [f64]) -> Option<usize> {
        self.draw_with(r, out, None, None)
    }

    fn draw_with(
        &self,
        r: &mut Rng,
        out: &mut [f64],
        class: Option<usize>,
        protos: Option<&[Vec<f64>]>,
    ) -> Option<usize> {
        match self {
            Self::GaussianBlobs {
                k,
                sigma,
                nuisance_sigma,
                ..
            } => {
                let c = class.unwrap_or_else(|| r.random_range(0..*k));
                let means = self.blob_means().unwrap();
                for (j, o) in out.iter_mut().enumerate() {
                    let e: f64 = StandardNormal.sample(r);
                    *o = means[c][j] + if j < 2 { sigma * e } else { nuisance_sigma * e };
                }
                Some(c)
            }
            Self::TwoDToy { .. } => {
                let c = class.unwrap_or_else(|| r.random_range(0..3));
                let means = self.blob_means().unwrap();
                for (j, o) in out.iter_mut().enumerate() {
                    let e: f64 = StandardNormal.sample(r);
                    *o = means[c][j] + TOY_SIGMA * e;
                }
                Some(c)
            }
            Self::RingOod {
                inner,
                outer,
                nuisance_sigma,
                ..
            } => {
                let ring = AnnulusSampler {
                    center: vec![0.0; 2],
                    inner: *inner,
                    outer: *outer,
                };
                ring.sample_into(r, &mut out[..2]);
                for o in out[2..].iter_mut() {
                    let e: f64 = StandardNormal.sample(r);
                    *o = nuisance_sigma * e;
                }
                None
            }
            Self::UniformHypercubeOod { dim, lo, hi, .. } => {
                BoxSampler::cube(*dim, *lo, *hi).sample_into(r, out);
                None
            }
            Self::BinaryGrid {
                k,
                side,
                flip_prob,
                uniform,
                prototype_seed,
                ..
            } => {
                if *uniform {
                    out.iter_mut()
                        .for_each(|o| *o = if r.random::<bool>() { 1.0 } else { 0.0 });
                    return None;
                }
                let owned;
                let protos = match protos {
                    Some(p) => p,
                    None => {
                        owned = Self::prototypes(*k, *side, *prototype_seed);
                        &owned
                    }
                };
                let c = class.unwrap_or_else(|| r.random_range(0..*k));
                for (o, p) in out.iter_mut().zip(&protos[c]) {
                    let flip = r.random::<f64>() < *flip_prob;
                    *o = if flip { 1.0 - p } else { *p };
                }
                Some(c)
            }
        }
    }

    /// Inputs and, for labelled tasks, labels. Labelled tasks emit
    /// `n_per_class` rows per class in class order.
    pub fn generate(&self) -> Result<(FeatureMatrix, Option<LabelVector>)> {
        self.validate()?;
        let dim = self.input_dim();
        let mut r = rng::seeded(self.seed());
        let mut buf = vec![0.0; dim];
        let mut data = Vec::new();
        match self.classes() {
            Some(k) => {
                let per = match self {
                    Self::GaussianBlobs { n_per_class, .. }
                    | Self::TwoDToy { n_per_class, .. }
                    | Self::BinaryGrid { n_per_class, .. } => *n_per_class,
                    _ => unreachable!(),
                };
                let protos = match self {
                    Self::BinaryGrid {
                        k,
                        side,
                        prototype_seed,
                        ..
                    } => Some(Self::prototypes(*k, *side, *prototype_seed)),
                    _ => None,
                };
                let mut labels = Vec::with_capacity(k * per);
                for c in 0..k {
                    for _ in 0..per {
                        self.draw_with(&mut r, &mut buf, Some(c), protos.as_deref());
                        data.extend_from_slice(&buf);
                        labels.push(c);
                    }
                }
                Ok((
                    FeatureMatrix::new(k * per, dim, data)?,
                    Some(LabelVector::new(labels, k)?),
                ))
            }
            None => {
                let n = match self {
                    Self::RingOod { n, .. } | Self::UniformHypercubeOod { n, .. } => *n,
                    Self::BinaryGrid { k, n_per_class, .. } => k * n_per_class,
                    _ => unreachable!(),
                };
                for _ in 0..n {
                    self.draw_with(&mut r, &mut buf, None, None);
                    data.extend_from_slice(&buf);
                }
                Ok((FeatureMatrix::new(n, dim, data)?, None))
            }
        }
    }

    /// Prototype images of a labelled binary-grid task.
    pub fn binary_prototypes(&self) -> Option<Vec<Vec<f64>>> {
        match self {
            Self::BinaryGrid {
                k,
                side,
                prototype_seed,
                ..
            } => Some(Self::prototypes(*k, *side, *prototype_seed)),
            _ => None,
        }
    }
}
