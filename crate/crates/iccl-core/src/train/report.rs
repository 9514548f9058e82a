//! Per-run reporting: loss terms per epoch plus final metrics.

use sha2::{Digest, Sha256};

use crate::data::LabeledSet;
use crate::eval::SplitReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Representation,
    Rebalance,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Representation => "stage1",
            Stage::Rebalance => "stage2",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub wall_secs: f64,
    /// Mean value of each loss term over the epoch, in insertion order.
    /// Interpolative terms are absent (not zero) during warm-up.
    pub terms: Vec<(String, f64)>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub stage: Stage,
    pub seed: u64,
    pub config_hash: String,
    pub test_set_id: Option<String>,
    pub epochs: Vec<EpochRecord>,
    pub final_eval: Option<SplitReport>,
}

impl RunReport {
    pub fn new(stage: Stage, seed: u64, config_hash: String) -> RunReport {
        RunReport {
            stage,
            seed,
            config_hash,
            test_set_id: None,
            epochs: Vec::new(),
            final_eval: None,
        }
    }

    /// Line-oriented CSV: one row per (epoch, term, value).
    pub fn csv(&self) -> String {
        let mut out = String::from("epoch,term,value\n");
        for rec in &self.epochs {
            for (term, value) in &rec.terms {
                out.push_str(&format!("{},{},{}\n", rec.epoch, term, value));
            }
            out.push_str(&format!("{},lr,{}\n", rec.epoch, rec.lr));
            out.push_str(&format!("{},wall_secs,{}\n", rec.epoch, rec.wall_secs));
        }
        out
    }

    /// Key/value summary with the config hash and final metrics.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("key,value\n");
        out.push_str(&format!("stage,{}\n", self.stage.name()));
        out.push_str(&format!("seed,{}\n", self.seed));
        out.push_str(&format!("config_hash,{}\n", self.config_hash));
        if let Some(id) = &self.test_set_id {
            out.push_str(&format!("test_set_id,{id}\n"));
        }
        if let Some(eval) = &self.final_eval {
            out.push_str(&format!("overall,{}\n", eval.overall));
            for (name, v) in [("many", eval.many), ("medium", eval.medium), ("few", eval.few)] {
                if let Some(v) = v {
                    out.push_str(&format!("{name},{v}\n"));
                }
            }
        }
        out
    }
}

/// Accumulates per-step term values into epoch means, keeping first-seen
/// order.
#[derive(Default)]
pub struct TermAccumulator {
    entries: Vec<(String, f64, usize)>,
}

impl TermAccumulator {
    pub fn new() -> TermAccumulator {
        TermAccumulator::default()
    }

    pub fn add(&mut self, name: &str, value: f64) {
        if let Some(e) = self.entries.iter_mut().find(|(n, _, _)| n == name) {
            e.1 += value;
            e.2 += 1;
        } else {
            self.entries.push((name.to_string(), value, 1));
        }
    }

    pub fn means(&self) -> Vec<(String, f64)> {
        self.entries
            .iter()
            .map(|(n, sum, count)| (n.clone(), sum / *count as f64))
            .collect()
    }
}

/// Content hash identifying a test set, used to refuse cross-test-set
/// comparisons.
pub fn test_set_id(set: &LabeledSet) -> String {
    let mut hasher = Sha256::new();
    hasher.update((set.classes as u64).to_le_bytes());
    for &d in &set.input_dims {
        hasher.update((d as u64).to_le_bytes());
    }
    for e in &set.examples {
        hasher.update((e.label as u64).to_le_bytes());
        for v in &e.input {
            hasher.update(v.to_le_bytes());
        }
    }
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Example;

    #[test]
    fn csv_has_header_and_term_rows() {
        let mut report = RunReport::new(Stage::Representation, 3, "abc".into());
        report.epochs.push(EpochRecord {
            epoch: 0,
            lr: 0.1,
            wall_secs: 0.5,
            terms: vec![("ce".into(), 1.25)],
        });
        let csv = report.csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("epoch,term,value"));
        assert_eq!(lines.next(), Some("0,ce,1.25"));
        assert!(csv.contains("0,lr,0.1"));
    }

    #[test]
    fn term_accumulator_means() {
        let mut acc = TermAccumulator::new();
        acc.add("ce", 1.0);
        acc.add("ce", 3.0);
        acc.add("cc", 0.5);
        assert_eq!(acc.means(), vec![("ce".into(), 2.0), ("cc".into(), 0.5)]);
    }

    #[test]
    fn test_set_id_tracks_content() {
        let mut set = LabeledSet {
            examples: vec![Example {
                input: vec![1.0, 2.0],
                label: 0,
            }],
            input_dims: vec![2],
            classes: 2,
        };
        let a = test_set_id(&set);
        assert_eq!(a, test_set_id(&set));
        set.examples[0].input[0] = 1.5;
        assert_ne!(a, test_set_id(&set));
    }
}
