//! Synthetic Gaussian-mixture datasets for desk-scale experiments.
//!
//! Class `k` draws inputs from `N(mu_k, sigma^2 I)` where `mu_k` is
//! `mean_scale` times a random unit vector. The balanced base is then
//! subsampled into an exponential long tail.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{build_longtailed, Example, LabeledSet, LongTailProfile, LongTailedDataset};
use crate::error::Result;
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub classes: usize,
    pub dim: usize,
    /// Per-class count of the balanced base before long-tail subsampling.
    pub n_max: usize,
    pub imbalance_ratio: f64,
    pub test_per_class: usize,
    pub mean_scale: f64,
    pub noise_sigma: f64,
}

fn unit_vector(dim: usize, rng: &mut impl Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-9 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn sample_class(mean: &[f64], sigma: f64, rng: &mut impl Rng) -> Vec<f64> {
    mean.iter()
        .map(|&m| {
            let z: f64 = StandardNormal.sample(rng);
            m + sigma * z
        })
        .collect()
}

/// Generate the long-tailed train set and a balanced test set.
pub fn generate(spec: &SyntheticSpec, seed: u64) -> Result<(LongTailedDataset, LabeledSet)> {
    let mut means_rng = rng::stream(seed, "data.means");
    let means: Vec<Vec<f64>> = (0..spec.classes)
        .map(|_| {
            unit_vector(spec.dim, &mut means_rng)
                .into_iter()
                .map(|x| x * spec.mean_scale)
                .collect()
        })
        .collect();

    let mut base_rng = rng::stream(seed, "data.base");
    let mut base_examples = Vec::with_capacity(spec.classes * spec.n_max);
    for (k, mean) in means.iter().enumerate() {
        for _ in 0..spec.n_max {
            base_examples.push(Example {
                input: sample_class(mean, spec.noise_sigma, &mut base_rng),
                label: k,
            });
        }
    }
    let base = LabeledSet {
        examples: base_examples,
        input_dims: vec![spec.dim],
        classes: spec.classes,
    };

    let mut lt_rng = rng::stream(seed, "data.longtail");
    let train = build_longtailed(&base, spec.imbalance_ratio, LongTailProfile::Exponential, &mut lt_rng)?;

    let mut test_rng = rng::stream(seed, "data.test");
    let mut test_examples = Vec::with_capacity(spec.classes * spec.test_per_class);
    for (k, mean) in means.iter().enumerate() {
        for _ in 0..spec.test_per_class {
            test_examples.push(Example {
                input: sample_class(mean, spec.noise_sigma, &mut test_rng),
                label: k,
            });
        }
    }
    let test = LabeledSet {
        examples: test_examples,
        input_dims: vec![spec.dim],
        classes: spec.classes,
    };
    Ok((train, test))
}
