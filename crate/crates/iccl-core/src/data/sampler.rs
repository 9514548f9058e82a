//! Class-agnostic and class-aware samplers, plus the Beta mixing weight.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Beta, Distribution};

use super::LongTailedDataset;
use crate::error::{Error, Result};

/// Class-sampling distribution `p(k) = (1/n_k)^gamma / sum_j (1/n_j)^gamma`.
///
/// `gamma = 0` is the class-balanced sampler, `gamma = 1` the reverse
/// sampler.
pub fn class_aware_probs(class_counts: &[usize], gamma: f64) -> Result<Vec<f64>> {
    if gamma < 0.0 {
        return Err(Error::invalid(format!("gamma must be >= 0, got {gamma}")));
    }
    if class_counts.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if let Some(k) = class_counts.iter().position(|&c| c == 0) {
        return Err(Error::invalid(format!("class {k} has count 0")));
    }
    let weights: Vec<f64> = class_counts
        .iter()
        .map(|&n| (1.0 / n as f64).powf(gamma))
        .collect();
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// Seeded permutation of `0..n`; one epoch of the class-agnostic sampler.
pub fn epoch_permutation(n: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order
}

/// With-replacement example stream for the class-aware branch.
///
/// Draws a class from [`class_aware_probs`], then an example of that class
/// uniformly with repetition. The `uniform` constructor instead draws
/// examples uniformly, for the "uniform second sampler" ablation.
pub struct ClassAwareSampler {
    cumulative: Vec<f64>,
    per_class: Vec<Vec<usize>>,
    uniform_over: Option<usize>,
}

impl ClassAwareSampler {
    pub fn class_aware(dataset: &LongTailedDataset, gamma: f64) -> Result<ClassAwareSampler> {
        let probs = class_aware_probs(&dataset.class_counts, gamma)?;
        let mut cumulative = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for p in probs {
            acc += p;
            cumulative.push(acc);
        }
        let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); dataset.classes()];
        for (i, e) in dataset.set.examples.iter().enumerate() {
            per_class[e.label].push(i);
        }
        Ok(ClassAwareSampler {
            cumulative,
            per_class,
            uniform_over: None,
        })
    }

    pub fn uniform(dataset: &LongTailedDataset) -> Result<ClassAwareSampler> {
        if dataset.set.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(ClassAwareSampler {
            cumulative: Vec::new(),
            per_class: Vec::new(),
            uniform_over: Some(dataset.set.len()),
        })
    }

    /// Draw one example index.
    pub fn draw(&self, rng: &mut impl Rng) -> usize {
        if let Some(n) = self.uniform_over {
            return rng.random_range(0..n);
        }
        let u: f64 = rng.random();
        let class = self
            .cumulative
            .partition_point(|&c| c <= u)
            .min(self.cumulative.len() - 1);
        let members = &self.per_class[class];
        members[rng.random_range(0..members.len())]
    }

    pub fn draw_batch(&self, batch: usize, rng: &mut impl Rng) -> Vec<usize> {
        (0..batch).map(|_| self.draw(rng)).collect()
    }
}

/// Mixing weight `lambda ~ Beta(alpha, beta)`. `Beta(1, 1)` is the uniform
/// distribution.
pub fn draw_lambda(alpha: f64, beta: f64, rng: &mut impl Rng) -> Result<f64> {
    if !(alpha > 0.0) || !(beta > 0.0) {
        return Err(Error::InvalidBetaParams { alpha, beta });
    }
    let dist = Beta::new(alpha, beta).map_err(|_| Error::InvalidBetaParams { alpha, beta })?;
    Ok(dist.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Example, LabeledSet};
    use crate::rng::stream;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn lt_with_counts(counts: &[usize]) -> LongTailedDataset {
        let mut examples = Vec::new();
        for (k, &n) in counts.iter().enumerate() {
            for i in 0..n {
                examples.push(Example {
                    input: vec![i as f64],
                    label: k,
                });
            }
        }
        LongTailedDataset::from_set(LabeledSet {
            examples,
            input_dims: vec![1],
            classes: counts.len(),
        })
        .unwrap()
    }

    fn empirical_class_mass(ds: &LongTailedDataset, sampler: &ClassAwareSampler, draws: usize) -> Vec<f64> {
        let mut rng = stream(42, "sampler.test");
        let mut hits = vec![0usize; ds.classes()];
        for _ in 0..draws {
            let idx = sampler.draw(&mut rng);
            hits[ds.set.examples[idx].label] += 1;
        }
        hits.iter().map(|&h| h as f64 / draws as f64).collect()
    }

    fn tv_distance(a: &[f64], b: &[f64]) -> f64 {
        0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
    }

    #[test]
    fn gamma_zero_is_class_balanced() {
        let p = class_aware_probs(&[100, 10, 1], 0.0).unwrap();
        for v in &p {
            assert_relative_eq!(*v, 1.0 / 3.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn gamma_one_is_reverse() {
        let p = class_aware_probs(&[100, 10, 1], 1.0).unwrap();
        assert_relative_eq!(p[0], 1.0 / 111.0, max_relative = 1e-12);
        assert_relative_eq!(p[1], 10.0 / 111.0, max_relative = 1e-12);
        assert_relative_eq!(p[2], 100.0 / 111.0, max_relative = 1e-12);
    }

    #[test]
    fn gamma_half_on_two_classes() {
        let p = class_aware_probs(&[4, 1], 0.5).unwrap();
        assert_relative_eq!(p[0], 1.0 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(p[1], 2.0 / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn zero_count_is_rejected() {
        assert!(class_aware_probs(&[3, 0], 1.0).is_err());
    }

    #[test]
    fn agnostic_mass_follows_counts() {
        let ds = lt_with_counts(&[100, 10, 1]);
        let sampler = ClassAwareSampler::uniform(&ds).unwrap();
        let mass = empirical_class_mass(&ds, &sampler, 100_000);
        let exact = [100.0 / 111.0, 10.0 / 111.0, 1.0 / 111.0];
        assert!(tv_distance(&mass, &exact) <= 0.01);
    }

    #[test]
    fn class_aware_mass_matches_probs() {
        let ds = lt_with_counts(&[100, 10, 1]);
        for gamma in [0.0, 0.5, 1.0] {
            let sampler = ClassAwareSampler::class_aware(&ds, gamma).unwrap();
            let mass = empirical_class_mass(&ds, &sampler, 100_000);
            let exact = class_aware_probs(&ds.class_counts, gamma).unwrap();
            assert!(
                tv_distance(&mass, &exact) <= 0.01,
                "gamma={gamma}: tv={}",
                tv_distance(&mass, &exact)
            );
        }
    }

    #[test]
    fn singleton_class_repeats_within_a_batch() {
        let ds = lt_with_counts(&[2, 1]);
        let sampler = ClassAwareSampler::class_aware(&ds, 1.0).unwrap();
        let mut rng = stream(3, "sampler.test");
        let batch = sampler.draw_batch(16, &mut rng);
        let singleton = ds
            .set
            .examples
            .iter()
            .position(|e| e.label == 1)
            .unwrap();
        let hits = batch.iter().filter(|&&i| i == singleton).count();
        assert!(hits >= 2, "singleton drawn {hits} times");
    }

    #[test]
    fn single_example_dataset_always_returns_it() {
        let ds = lt_with_counts(&[1]);
        let sampler = ClassAwareSampler::uniform(&ds).unwrap();
        let mut rng = stream(0, "sampler.test");
        assert_eq!(sampler.draw_batch(4, &mut rng), vec![0, 0, 0, 0]);
    }

    #[test]
    fn beta_moments_match_closed_form() {
        let cases = [
            (1.0, 1.0, 0.5, 1.0 / 12.0),
            (2.0, 2.0, 0.5, 0.05),
            (0.2, 1.0, 1.0 / 6.0, 0.2 / (1.2 * 1.2 * 2.2)),
        ];
        for (alpha, beta, mean, var) in cases {
            let mut rng = stream(9, "sampler.lambda");
            let n = 100_000;
            let draws: Vec<f64> = (0..n)
                .map(|_| draw_lambda(alpha, beta, &mut rng).unwrap())
                .collect();
            let m = draws.iter().sum::<f64>() / n as f64;
            let v = draws.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n as f64;
            assert!((m - mean).abs() <= 0.01, "Beta({alpha},{beta}) mean {m}");
            assert!(
                (v - var).abs() <= 0.05 * var,
                "Beta({alpha},{beta}) var {v} vs {var}"
            );
        }
    }

    #[test]
    fn nonpositive_beta_params_are_rejected() {
        let mut rng = stream(0, "sampler.lambda");
        assert!(draw_lambda(0.0, 1.0, &mut rng).is_err());
        assert!(draw_lambda(1.0, -2.0, &mut rng).is_err());
    }

    proptest! {
        #[test]
        fn probs_sum_to_one_and_are_permutation_equivariant(
            counts in proptest::collection::vec(1usize..10_000, 2..8),
            gamma in 0.0f64..3.0,
            swap in (0usize..8, 0usize..8),
        ) {
            let p = class_aware_probs(&counts, gamma).unwrap();
            let total: f64 = p.iter().sum();
            prop_assert!((total - 1.0).abs() <= 1e-12);

            let (i, j) = (swap.0 % counts.len(), swap.1 % counts.len());
            let mut permuted = counts.clone();
            permuted.swap(i, j);
            let q = class_aware_probs(&permuted, gamma).unwrap();
            let mut expected = p.clone();
            expected.swap(i, j);
            for (a, b) in q.iter().zip(&expected) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }

        #[test]
        fn probs_decrease_in_count_for_positive_gamma(
            mut counts in proptest::collection::vec(1usize..10_000, 2..8),
            gamma in 0.01f64..3.0,
        ) {
            counts.sort_unstable();
            counts.dedup();
            prop_assume!(counts.len() >= 2);
            let p = class_aware_probs(&counts, gamma).unwrap();
            for w in p.windows(2) {
                prop_assert!(w[0] > w[1]);
            }
        }
    }
}
