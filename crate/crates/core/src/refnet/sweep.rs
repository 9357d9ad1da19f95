//! Brute-force search for the inputs a trained network is most confident
//! about, per predicted class.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::head::argmax;
use crate::rng;

use super::tasks::SyntheticTask;
use super::train::Model;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweptSample {
    pub input: Vec<f64>,
    pub confidence: f64,
}

impl Eq for SweptSample {}

impl Ord for SweptSample {
    /// Higher confidence ranks higher; ties go to the lexicographically
    /// smaller input so the kept set never depends on arrival order.
    fn cmp(&self, other: &Self) -> Ordering {
        self.confidence.total_cmp(&other.confidence).then_with(|| {
            for (a, b) in self.input.iter().zip(&other.input) {
                match b.total_cmp(a) {
                    Ordering::Equal => continue,
                    o => return o,
                }
            }
            other.input.len().cmp(&self.input.len())
        })
    }
}

impl PartialOrd for SweptSample {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub n_samples: usize,
    pub top_m: usize,
    /// Kept samples of each predicted class, most confident first.
    pub per_class: Vec<Vec<SweptSample>>,
    pub mean_confidence_all: f64,
    pub mean_confidence_kept: f64,
}

/// Keep the `top_m` most confident inputs per argmax class from a stream.
pub fn sweep_inputs<I>(model: &Model, inputs: I, top_m: usize) -> Result<SweepResult>
where
    I: IntoIterator<Item = Vec<f64>>,
{
    if top_m == 0 {
        return Err(Error::InvalidParameter("top_m must be >= 1".into()));
    }
    let k = model.net.spec().k;
    let mut heaps: Vec<BinaryHeap<Reverse<SweptSample>>> = (0..k)
        .map(|_| BinaryHeap::with_capacity(top_m + 1))
        .collect();
    let mut total = 0.0;
    let mut n = 0usize;
    for x in inputs {
        let p = model.probabilities(&x)?;
        let c = argmax(&p);
        let candidate = SweptSample {
            confidence: p[c],
            input: x,
        };
        total += candidate.confidence;
        n += 1;
        let heap = &mut heaps[c];
        if heap.len() < top_m {
            heap.push(Reverse(candidate));
        } else if heap.peek().is_some_and(|Reverse(min)| candidate > *min) {
            heap.pop();
            heap.push(Reverse(candidate));
        }
    }
    if n == 0 {
        return Err(Error::EmptyInput("sweep received no samples"));
    }
    let per_class: Vec<Vec<SweptSample>> = heaps
        .into_iter()
        .map(|h| {
            let mut v: Vec<SweptSample> = h.into_iter().map(|Reverse(s)| s).collect();
            v.sort_by(|a, b| b.cmp(a));
            v
        })
        .collect();
    let kept: Vec<f64> = per_class.iter().flatten().map(|s| s.confidence).collect();
    Ok(SweepResult {
        n_samples: n,
        top_m,
        mean_confidence_kept: kept.iter().sum::<f64>() / kept.len() as f64,
        mean_confidence_all: total / n as f64,
        per_class,
    })
}

/// Stream `n_samples` draws from `sampler`, seeded by the task's seed.
pub fn confidence_sweep(
    model: &Model,
    sampler: &SyntheticTask,
    n_samples: usize,
    top_m: usize,
) -> Result<SweepResult> {
    sampler.validate()?;
    let dim = sampler.input_dim();
    if dim != model.net.spec().input_dim() {
        return Err(Error::DimensionMismatch {
            context: "sweep sampler",
            expected: model.net.spec().input_dim(),
            got: dim,
        });
    }
    if n_samples < top_m * model.net.spec().k {
        return Err(Error::InvalidParameter(
            "n_samples must be >= top_m * K".into(),
        ));
    }
    let mut r = rng::seeded(sampler.seed());
    let stream = (0..n_samples).map(|_| {
        let mut x = vec![0.0; dim];
        sampler.draw(&mut r, &mut x);
        x
    });
    sweep_inputs(model, stream, top_m)
}
