//! Long-tailed dataset construction and batching.

pub mod augment;
pub mod batch;
pub mod cifar;
pub mod file;
pub mod sampler;
pub mod synthetic;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};

/// One labeled example. Labels are 0-indexed.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub input: Vec<f64>,
    pub label: usize,
}

/// A set of labeled examples with a common input shape.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    pub examples: Vec<Example>,
    /// Per-example input dims, e.g. `[3, 32, 32]` or `[32]`.
    pub input_dims: Vec<usize>,
    pub classes: usize,
}

impl LabeledSet {
    pub fn input_len(&self) -> usize {
        self.input_dims.iter().product()
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.classes];
        for e in &self.examples {
            counts[e.label] += 1;
        }
        counts
    }
}

/// Labeled examples plus their per-class counts; the imbalance profile
/// lives here.
#[derive(Debug, Clone, PartialEq)]
pub struct LongTailedDataset {
    pub set: LabeledSet,
    pub class_counts: Vec<usize>,
}

impl LongTailedDataset {
    /// Wrap a labeled set, counting classes. Every class must hold at
    /// least one example.
    pub fn from_set(set: LabeledSet) -> Result<LongTailedDataset> {
        if set.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let class_counts = set.class_counts();
        if let Some(k) = class_counts.iter().position(|&c| c == 0) {
            return Err(Error::invalid(format!("class {k} has no examples")));
        }
        for e in &set.examples {
            if e.label >= set.classes {
                return Err(Error::LabelOutOfRange {
                    label: e.label,
                    classes: set.classes,
                });
            }
        }
        Ok(LongTailedDataset { set, class_counts })
    }

    pub fn classes(&self) -> usize {
        self.set.classes
    }

    /// Max over min per-class count.
    pub fn imbalance_ratio(&self) -> f64 {
        let max = *self.class_counts.iter().max().unwrap() as f64;
        let min = *self.class_counts.iter().min().unwrap() as f64;
        max / min
    }
}

/// Long-tail count profile. Only the exponential profile from the CIFAR-LT
/// construction is supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LongTailProfile {
    Exponential,
}

/// Per-class targets `n_k = round(n_max * ratio^(-k / (K-1)))`.
pub fn exponential_counts(n_max: usize, classes: usize, ratio: f64) -> Result<Vec<usize>> {
    if ratio < 1.0 {
        return Err(Error::invalid(format!("imbalance ratio must be >= 1, got {ratio}")));
    }
    let mut counts = Vec::with_capacity(classes);
    for k in 0..classes {
        let exponent = if classes == 1 {
            0.0
        } else {
            -(k as f64) / (classes as f64 - 1.0)
        };
        let target = (n_max as f64 * ratio.powf(exponent)).round() as usize;
        if target == 0 {
            return Err(Error::InfeasibleImbalance {
                ratio,
                n_max,
                class: k,
            });
        }
        counts.push(target);
    }
    Ok(counts)
}

/// Subsample a class-balanced base set into an exponential long-tail.
///
/// Class `k` (0-indexed) keeps `round(n_max * ratio^(-k/(K-1)))` examples,
/// chosen by seeded shuffling without replacement. Deterministic for a
/// given `rng` state.
pub fn build_longtailed(
    base: &LabeledSet,
    imbalance_ratio: f64,
    profile: LongTailProfile,
    rng: &mut impl Rng,
) -> Result<LongTailedDataset> {
    let LongTailProfile::Exponential = profile;
    if base.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let counts = base.class_counts();
    let n_max = counts[0];
    if counts.iter().any(|&c| c != n_max) {
        return Err(Error::invalid(format!(
            "base set must be class-balanced, got counts {counts:?}"
        )));
    }
    let targets = exponential_counts(n_max, base.classes, imbalance_ratio)?;

    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); base.classes];
    for (i, e) in base.examples.iter().enumerate() {
        per_class[e.label].push(i);
    }

    let mut examples = Vec::new();
    for (k, indices) in per_class.iter_mut().enumerate() {
        indices.shuffle(rng);
        indices.truncate(targets[k]);
        indices.sort_unstable(); // keep base order inside each class
        for &i in indices.iter() {
            examples.push(base.examples[i].clone());
        }
    }

    LongTailedDataset::from_set(LabeledSet {
        examples,
        input_dims: base.input_dims.clone(),
        classes: base.classes,
    })
}
