//! Accuracy splits and norm diagnostics.

use crate::data::LabeledSet;
use crate::error::{Error, Result};
use crate::model::centroid::CentroidBank;
use crate::model::{Dense, Model};
use crate::tensor::Tensor;

const EVAL_BATCH: usize = 256;

/// Class grouping by training frequency.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    /// more than 100 training images
    Many,
    /// 20 to 100 training images, inclusive on both ends
    Medium,
    /// fewer than 20 training images
    Few,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Many => "many",
            Split::Medium => "medium",
            Split::Few => "few",
        }
    }
}

/// Split assignment is a function of training counts only.
pub fn split_for_count(count: usize) -> Split {
    if count > 100 {
        Split::Many
    } else if count >= 20 {
        Split::Medium
    } else {
        Split::Few
    }
}

/// Top-1 accuracy overall and per split.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitReport {
    pub overall: f64,
    /// Absent (not zero) when no class falls in the split.
    pub many: Option<f64>,
    pub medium: Option<f64>,
    pub few: Option<f64>,
    pub per_class_accuracy: Vec<f64>,
    pub class_split: Vec<Split>,
    pub correct: usize,
    pub total: usize,
}

impl SplitReport {
    pub fn split_accuracy(&self, split: Split) -> Option<f64> {
        match split {
            Split::Many => self.many,
            Split::Medium => self.medium,
            Split::Few => self.few,
        }
    }
}

/// Argmax with ties broken toward the smaller class index.
pub fn predict(logit_row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in logit_row.iter().enumerate() {
        if v > logit_row[best] {
            best = i;
        }
    }
    best
}

/// Run the classifier over a balanced test set and report overall and
/// many/medium/few accuracies, with split thresholds taken from the
/// training counts.
pub fn evaluate(model: &Model, test: &LabeledSet, train_counts: &[usize]) -> Result<SplitReport> {
    if test.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if train_counts.len() != test.classes {
        return Err(Error::invalid(format!(
            "{} train counts for {} classes",
            train_counts.len(),
            test.classes
        )));
    }
    let classes = test.classes;
    let d = test.input_len();
    let mut class_correct = vec![0usize; classes];
    let mut class_total = vec![0usize; classes];

    for chunk in test.examples.chunks(EVAL_BATCH) {
        let mut values = Vec::with_capacity(chunk.len() * d);
        for e in chunk {
            values.extend_from_slice(&e.input);
        }
        let x = Tensor::new(&[chunk.len(), d], values)?;
        let logits = model.classify(&model.encode(&x)?)?;
        logits.with_values(|l| {
            for (i, e) in chunk.iter().enumerate() {
                let pred = predict(&l[i * classes..(i + 1) * classes]);
                class_total[e.label] += 1;
                if pred == e.label {
                    class_correct[e.label] += 1;
                }
            }
        });
    }

    let class_split: Vec<Split> = train_counts.iter().map(|&c| split_for_count(c)).collect();
    let per_class_accuracy: Vec<f64> = class_correct
        .iter()
        .zip(&class_total)
        .map(|(&c, &t)| if t == 0 { 0.0 } else { c as f64 / t as f64 })
        .collect();

    let mut split_correct = [0usize; 3];
    let mut split_total = [0usize; 3];
    for k in 0..classes {
        let s = match class_split[k] {
            Split::Many => 0,
            Split::Medium => 1,
            Split::Few => 2,
        };
        split_correct[s] += class_correct[k];
        split_total[s] += class_total[k];
    }
    let split_acc = |i: usize| -> Option<f64> {
        if split_total[i] == 0 {
            None
        } else {
            Some(split_correct[i] as f64 / split_total[i] as f64)
        }
    };

    let correct: usize = class_correct.iter().sum();
    let total: usize = class_total.iter().sum();
    Ok(SplitReport {
        overall: correct as f64 / total as f64,
        many: split_acc(0),
        medium: split_acc(1),
        few: split_acc(2),
        per_class_accuracy,
        class_split,
        correct,
        total,
    })
}

/// Summary statistics over a norm vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryStats {
    pub mean: f64,
    pub std: f64,
    pub max_min_ratio: f64,
}

impl SummaryStats {
    pub fn of(values: &[f64]) -> SummaryStats {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        SummaryStats {
            mean,
            std: var.sqrt(),
            max_min_ratio: max / min,
        }
    }
}

/// Per-class classifier weight norms and centroid norms.
#[derive(Debug, Clone, PartialEq)]
pub struct NormReport {
    pub weight_norms: Vec<f64>,
    pub centroid_norms: Vec<f64>,
    pub weight_stats: SummaryStats,
    pub centroid_stats: SummaryStats,
}

pub fn norm_report(classifier: &Dense, bank: &CentroidBank) -> NormReport {
    let weight_norms = classifier.row_norms();
    let centroid_norms = bank.norms();
    NormReport {
        weight_stats: SummaryStats::of(&weight_norms),
        centroid_stats: SummaryStats::of(&centroid_norms),
        weight_norms,
        centroid_norms,
    }
}

/// One evaluated run, as consumed by [`compare_runs`].
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub method: String,
    pub seed: u64,
    pub test_set_id: String,
    pub report: SplitReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub method: String,
    pub seeds: usize,
    pub overall: (f64, f64),
    pub many: Option<(f64, f64)>,
    pub medium: Option<(f64, f64)>,
    pub few: Option<(f64, f64)>,
}

/// Per-method mean and sample standard deviation (0 for a single seed) of
/// the overall and split accuracies. All runs must share one test set.
pub fn compare_runs(runs: &[RunSummary]) -> Result<Vec<ComparisonRow>> {
    if runs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let test_id = &runs[0].test_set_id;
    for r in runs {
        if &r.test_set_id != test_id {
            return Err(Error::TestSetMismatch {
                left: test_id.clone(),
                right: r.test_set_id.clone(),
            });
        }
    }

    let mean_std = |xs: &[f64]| -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let std = if xs.len() <= 1 {
            0.0
        } else {
            (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        (mean, std)
    };

    let mut methods: Vec<String> = Vec::new();
    for r in runs {
        if !methods.contains(&r.method) {
            methods.push(r.method.clone());
        }
    }

    let mut rows = Vec::new();
    for method in methods {
        let group: Vec<&RunSummary> = runs.iter().filter(|r| r.method == method).collect();
        let overall: Vec<f64> = group.iter().map(|r| r.report.overall).collect();
        let split_stats = |f: fn(&SplitReport) -> Option<f64>| -> Option<(f64, f64)> {
            let vals: Vec<f64> = group.iter().filter_map(|r| f(&r.report)).collect();
            if vals.len() == group.len() {
                Some(mean_std(&vals))
            } else {
                None
            }
        };
        rows.push(ComparisonRow {
            method,
            seeds: group.len(),
            overall: mean_std(&overall),
            many: split_stats(|r| r.many),
            medium: split_stats(|r| r.medium),
            few: split_stats(|r| r.few),
        });
    }
    Ok(rows)
}

/// Comparison table as CSV with a header row.
pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut out = String::from(
        "method,seeds,overall_mean,overall_std,many_mean,many_std,medium_mean,medium_std,few_mean,few_std\n",
    );
    let cell = |v: Option<(f64, f64)>| match v {
        Some((m, s)) => format!("{m:.6},{s:.6}"),
        None => ",".to_string(),
    };
    for r in rows {
        out.push_str(&format!(
            "{},{},{:.6},{:.6},{},{},{}\n",
            r.method,
            r.seeds,
            r.overall.0,
            r.overall.1,
            cell(r.many),
            cell(r.medium),
            cell(r.few),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ModelConfig;
    use crate::data::Example;
    use crate::rng::stream;

    fn balanced_test(classes: usize, per_class: usize, dim: usize) -> LabeledSet {
        let mut examples = Vec::new();
        for k in 0..classes {
            for i in 0..per_class {
                let mut input = vec![0.0; dim];
                input[k % dim] = 1.0 + i as f64 * 0.01;
                examples.push(Example { input, label: k });
            }
        }
        LabeledSet {
            examples,
            input_dims: vec![dim],
            classes,
        }
    }

    fn model_with_constant_prediction(classes: usize, dim: usize, class: usize) -> Model {
        let cfg = ModelConfig {
            hidden: vec![4],
            feature_dim: 3,
            embed_dim: 2,
            tau: 0.07,
            centroid_momentum: 0.99,
            renormalize_centroids: true,
        };
        let m = Model::init(&cfg, dim, classes, &mut stream(0, "init")).unwrap();
        for (_, p) in m.named_parameters() {
            p.set_values(&vec![0.0; p.len()]);
        }
        let mut bias = vec![0.0; classes];
        bias[class] = 10.0;
        m.classifier.bias.set_values(&bias);
        m
    }

    #[test]
    fn constant_predictor_scores_chance_on_balanced_test() {
        let test = balanced_test(10, 7, 4);
        let model = model_with_constant_prediction(10, 4, 0);
        let report = evaluate(&model, &test, &[200; 10]).unwrap();
        assert!((report.overall - 0.1).abs() < 1e-12);
        assert_eq!(report.correct, 7);
    }

    #[test]
    fn splits_follow_training_counts() {
        let test = balanced_test(3, 2, 4);
        let model = model_with_constant_prediction(3, 4, 1);
        let report = evaluate(&model, &test, &[150, 50, 5]).unwrap();
        assert_eq!(report.class_split, vec![Split::Many, Split::Medium, Split::Few]);
        assert_eq!(report.many, Some(0.0));
        assert_eq!(report.medium, Some(1.0));
        assert_eq!(report.few, Some(0.0));
        // boundary counts: 100 and 20 are both medium
        assert_eq!(split_for_count(100), Split::Medium);
        assert_eq!(split_for_count(20), Split::Medium);
        assert_eq!(split_for_count(101), Split::Many);
        assert_eq!(split_for_count(19), Split::Few);
    }

    #[test]
    fn empty_split_is_absent_not_zero() {
        let test = balanced_test(2, 3, 4);
        let model = model_with_constant_prediction(2, 4, 0);
        let report = evaluate(&model, &test, &[500, 300]).unwrap();
        assert!(report.many.is_some());
        assert_eq!(report.medium, None);
        assert_eq!(report.few, None);
    }

    #[test]
    fn overall_is_recount_not_split_mean() {
        // 2 test items of class 0 (many), 4 of class 1 (few)
        let mut examples = Vec::new();
        for _ in 0..2 {
            examples.push(Example { input: vec![1.0, 0.0, 0.0, 0.0], label: 0 });
        }
        for _ in 0..4 {
            examples.push(Example { input: vec![0.0, 1.0, 0.0, 0.0], label: 1 });
        }
        let test = LabeledSet { examples, input_dims: vec![4], classes: 2 };
        let model = model_with_constant_prediction(2, 4, 1);
        let report = evaluate(&model, &test, &[500, 5]).unwrap();
        // brute-force recount: the constant class-1 predictor gets the 4
        // class-1 items right
        assert_eq!(report.correct, 4);
        assert_eq!(report.many, Some(0.0));
        assert_eq!(report.few, Some(1.0));
        // mean of split accuracies would be 0.5; overall is 4/6
        assert!((report.overall - 4.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn tie_breaks_toward_smaller_index() {
        assert_eq!(predict(&[1.0, 1.0, 0.5]), 0);
        assert_eq!(predict(&[0.5, 1.0, 1.0]), 1);
    }

    #[test]
    fn norm_report_identical_rows_have_zero_std() {
        let cfg = ModelConfig {
            hidden: vec![4],
            feature_dim: 3,
            embed_dim: 2,
            tau: 0.07,
            centroid_momentum: 0.99,
            renormalize_centroids: true,
        };
        let m = Model::init(&cfg, 4, 3, &mut stream(0, "init")).unwrap();
        m.classifier
            .weight
            .set_values(&[1.0, 2.0, 2.0, 1.0, 2.0, 2.0, 1.0, 2.0, 2.0]);
        let bank =
            crate::model::centroid::CentroidBank::random_unit(3, 2, 0.99, true, &mut stream(1, "c"))
                .unwrap();
        let report = norm_report(&m.classifier, &bank);
        assert!(report.weight_stats.std < 1e-12);
        for n in &report.centroid_norms {
            assert!((n - 1.0).abs() <= 1e-6);
        }
    }

    #[test]
    fn compare_runs_rejects_mismatched_test_sets_and_zeroes_single_seed_std() {
        let report = SplitReport {
            overall: 0.5,
            many: Some(0.6),
            medium: Some(0.5),
            few: Some(0.4),
            per_class_accuracy: vec![0.5],
            class_split: vec![Split::Many],
            correct: 1,
            total: 2,
        };
        let a = RunSummary {
            method: "ce".into(),
            seed: 0,
            test_set_id: "t1".into(),
            report: report.clone(),
        };
        let rows = compare_runs(&[a.clone()]).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].overall, (0.5, 0.0));

        let rows = compare_runs(&[a.clone(), a.clone()]).unwrap();
        assert_eq!(rows[0].overall.1, 0.0);

        let mut b = a.clone();
        b.test_set_id = "t2".into();
        assert!(matches!(
            compare_runs(&[a, b]),
            Err(Error::TestSetMismatch { .. })
        ));
    }

    #[test]
    fn report_is_invariant_under_consistent_relabeling() {
        let test = balanced_test(3, 4, 4);
        let model = model_with_constant_prediction(3, 4, 1);
        let counts = [150, 50, 5];
        let base = evaluate(&model, &test, &counts).unwrap();

        // permutation pi: 0->1, 1->2, 2->0 applied to labels, classifier rows and counts
        let pi = [1usize, 2, 0];
        let mut relabeled = test.clone();
        for e in &mut relabeled.examples {
            e.label = pi[e.label];
        }
        let permuted_model = model_with_constant_prediction(3, 4, pi[1]);
        let mut permuted_counts = [0usize; 3];
        for (k, &c) in counts.iter().enumerate() {
            permuted_counts[pi[k]] = c;
        }
        let permuted = evaluate(&permuted_model, &relabeled, &permuted_counts).unwrap();
        assert_eq!(base.overall, permuted.overall);
        for k in 0..3 {
            assert_eq!(base.per_class_accuracy[k], permuted.per_class_accuracy[pi[k]]);
            assert_eq!(base.class_split[k], permuted.class_split[pi[k]]);
        }
    }
}
