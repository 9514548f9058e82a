//! Encoder, projection head and linear classifier.
//!
//! The encoder is an MLP: hidden layers with ReLU, then a linear map to the
//! feature space. The projection head follows the SimCLR shape (one hidden
//! layer of the feature width, ReLU, then a linear map to the embedding
//! space) and its output is L2-normalized. The classifier is a single
//! linear layer over features.

pub mod centroid;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::tensor::checkpoint::Entry;
use crate::tensor::Tensor;

/// Linear layer with row-major `[out, in]` weights.
pub struct Dense {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Dense {
    pub fn new(weight: Tensor, bias: Tensor) -> Dense {
        Dense { weight, bias }
    }

    /// Copy with fresh tensors; `trainable` decides whether the copies are
    /// parameters or constants.
    pub fn copy(&self, trainable: bool) -> Result<Dense> {
        let make = |t: &Tensor| -> Result<Tensor> {
            if trainable {
                Tensor::parameter(&t.shape(), t.to_vec())
            } else {
                Tensor::new(&t.shape(), t.to_vec())
            }
        };
        Ok(Dense {
            weight: make(&self.weight)?,
            bias: make(&self.bias)?,
        })
    }

    fn init(out_dim: usize, in_dim: usize, gain: f64, rng: &mut impl Rng) -> Result<Dense> {
        let std = (gain / in_dim as f64).sqrt();
        let values: Vec<f64> = (0..out_dim * in_dim)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                std * z
            })
            .collect();
        Ok(Dense {
            weight: Tensor::parameter(&[out_dim, in_dim], values)?,
            bias: Tensor::parameter(&[out_dim], vec![0.0; out_dim])?,
        })
    }

    fn from_values(weight: (Vec<usize>, Vec<f64>), bias: (Vec<usize>, Vec<f64>)) -> Result<Dense> {
        Ok(Dense {
            weight: Tensor::parameter(&weight.0, weight.1)?,
            bias: Tensor::parameter(&bias.0, bias.1)?,
        })
    }

    pub fn out_dim(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn in_dim(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        x.matmul_nt(&self.weight)?.add_bias(&self.bias)
    }

    /// Row-wise L2 norms of the weight matrix.
    pub fn row_norms(&self) -> Vec<f64> {
        let (out, inp) = (self.out_dim(), self.in_dim());
        self.weight.with_values(|w| {
            (0..out)
                .map(|i| w[i * inp..(i + 1) * inp].iter().map(|v| v * v).sum::<f64>().sqrt())
                .collect()
        })
    }
}

/// Stack of dense layers with ReLU between them (no activation after the
/// last layer).
pub struct Mlp {
    pub layers: Vec<Dense>,
}

impl Mlp {
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut h = self.layers[0].forward(x)?;
        for layer in &self.layers[1..] {
            h = layer.forward(&h.relu())?;
        }
        Ok(h)
    }
}

/// Projection head: `Dense(d_g, d_g) -> ReLU -> Dense(d_z, d_g)`, with the
/// final L2 normalization applied by [`Model::project`].
pub struct ProjectionHead {
    pub hidden: Dense,
    pub output: Dense,
}

/// The shared-parameter network: encoder, optional projection head (absent
/// after classifier rebalancing discards it) and linear classifier.
pub struct Model {
    pub encoder: Mlp,
    pub projection: Option<ProjectionHead>,
    pub classifier: Dense,
    pub input_dim: usize,
    pub feature_dim: usize,
    pub embed_dim: usize,
    pub classes: usize,
}

impl Model {
    /// Fresh model with seeded He-style initialization. Layers are drawn in
    /// a fixed order so a seed pins every weight.
    pub fn init(cfg: &ModelConfig, input_dim: usize, classes: usize, rng: &mut impl Rng) -> Result<Model> {
        if cfg.hidden.is_empty() {
            return Err(Error::invalid("encoder needs at least one hidden layer"));
        }
        let mut layers = Vec::new();
        let mut in_dim = input_dim;
        for &h in &cfg.hidden {
            layers.push(Dense::init(h, in_dim, 2.0, rng)?);
            in_dim = h;
        }
        layers.push(Dense::init(cfg.feature_dim, in_dim, 1.0, rng)?);
        let projection = ProjectionHead {
            hidden: Dense::init(cfg.feature_dim, cfg.feature_dim, 2.0, rng)?,
            output: Dense::init(cfg.embed_dim, cfg.feature_dim, 1.0, rng)?,
        };
        let classifier = Dense::init(classes, cfg.feature_dim, 1.0, rng)?;
        Ok(Model {
            encoder: Mlp { layers },
            projection: Some(projection),
            classifier,
            input_dim,
            feature_dim: cfg.feature_dim,
            embed_dim: cfg.embed_dim,
            classes,
        })
    }

    /// Feature vectors `g` for a `[batch, input_dim]` batch.
    pub fn encode(&self, x: &Tensor) -> Result<Tensor> {
        let shape = x.shape();
        if shape.len() != 2 || shape[1] != self.input_dim {
            return Err(Error::ShapeMismatch {
                op: "encode",
                lhs: shape,
                rhs: vec![0, self.input_dim],
            });
        }
        self.encoder.forward(x)
    }

    /// Unit-norm embeddings `z` from features `g`.
    pub fn project(&self, g: &Tensor) -> Result<Tensor> {
        let head = self.projection.as_ref().ok_or_else(|| {
            Error::invalid("projection head was discarded; stage-2 models cannot project")
        })?;
        let h = head.hidden.forward(g)?.relu();
        Ok(head.output.forward(&h)?.l2_normalize())
    }

    /// Class logits from features `g`.
    pub fn classify(&self, g: &Tensor) -> Result<Tensor> {
        self.classifier.forward(g)
    }

    /// Named trainable parameters in a fixed order.
    pub fn named_parameters(&self) -> Vec<(String, Tensor)> {
        let mut params = Vec::new();
        for (i, layer) in self.encoder.layers.iter().enumerate() {
            params.push((format!("encoder/{i}/weight"), layer.weight.clone()));
            params.push((format!("encoder/{i}/bias"), layer.bias.clone()));
        }
        if let Some(head) = &self.projection {
            params.push(("proj/0/weight".to_string(), head.hidden.weight.clone()));
            params.push(("proj/0/bias".to_string(), head.hidden.bias.clone()));
            params.push(("proj/1/weight".to_string(), head.output.weight.clone()));
            params.push(("proj/1/bias".to_string(), head.output.bias.clone()));
        }
        params.push(("cls/weight".to_string(), self.classifier.weight.clone()));
        params.push(("cls/bias".to_string(), self.classifier.bias.clone()));
        params
    }

    /// Deep copy with freshly allocated parameter tensors.
    pub fn clone_parameters(&self) -> Result<Model> {
        let entries = self.to_entries();
        Model::from_entries(&entries)
    }

    /// Copy with per-part trainability, used for the stage-2 teacher
    /// (everything constant) and student (classifier trainable, encoder
    /// optionally frozen, projection head discarded).
    pub fn copy_with(
        &self,
        encoder_trainable: bool,
        classifier_trainable: bool,
        keep_projection: bool,
    ) -> Result<Model> {
        let layers = self
            .encoder
            .layers
            .iter()
            .map(|l| l.copy(encoder_trainable))
            .collect::<Result<Vec<_>>>()?;
        let projection = if keep_projection {
            match &self.projection {
                Some(p) => Some(ProjectionHead {
                    hidden: p.hidden.copy(encoder_trainable)?,
                    output: p.output.copy(encoder_trainable)?,
                }),
                None => None,
            }
        } else {
            None
        };
        Ok(Model {
            encoder: Mlp { layers },
            projection,
            classifier: self.classifier.copy(classifier_trainable)?,
            input_dim: self.input_dim,
            feature_dim: self.feature_dim,
            embed_dim: self.embed_dim,
            classes: self.classes,
        })
    }

    pub fn to_entries(&self) -> Vec<Entry> {
        self.named_parameters()
            .into_iter()
            .map(|(name, t)| Entry::new(name, t.shape(), t.to_vec()))
            .collect()
    }

    /// Rebuild a model from checkpoint entries, inferring the architecture
    /// from parameter names and shapes.
    pub fn from_entries(entries: &[Entry]) -> Result<Model> {
        let find = |name: &str| -> Result<(Vec<usize>, Vec<f64>)> {
            entries
                .iter()
                .find(|e| e.name == name)
                .map(|e| (e.shape.clone(), e.values.clone()))
                .ok_or_else(|| Error::Checkpoint(format!("{name}: missing from checkpoint")))
        };

        let mut layers = Vec::new();
        let mut i = 0;
        while entries.iter().any(|e| e.name == format!("encoder/{i}/weight")) {
            let w = find(&format!("encoder/{i}/weight"))?;
            let b = find(&format!("encoder/{i}/bias"))?;
            layers.push(Dense::from_values(w, b)?);
            i += 1;
        }
        if layers.len() < 2 {
            return Err(Error::Checkpoint(format!(
                "encoder needs at least two layers, found {}",
                layers.len()
            )));
        }
        let input_dim = layers[0].in_dim();
        let feature_dim = layers.last().unwrap().out_dim();

        let projection = if entries.iter().any(|e| e.name == "proj/0/weight") {
            Some(ProjectionHead {
                hidden: Dense::from_values(find("proj/0/weight")?, find("proj/0/bias")?)?,
                output: Dense::from_values(find("proj/1/weight")?, find("proj/1/bias")?)?,
            })
        } else {
            None
        };
        let embed_dim = projection.as_ref().map(|p| p.output.out_dim()).unwrap_or(0);

        let classifier = Dense::from_values(find("cls/weight")?, find("cls/bias")?)?;
        let classes = classifier.out_dim();
        if classifier.in_dim() != feature_dim {
            return Err(Error::Checkpoint(format!(
                "cls/weight: expects {} input features, encoder produces {}",
                classifier.in_dim(),
                feature_dim
            )));
        }

        Ok(Model {
            encoder: Mlp { layers },
            projection,
            classifier,
            input_dim,
            feature_dim,
            embed_dim,
            classes,
        })
    }

    /// Check checkpoint entries against the architecture this config would
    /// build; errors name the offending field.
    pub fn validate_entries(
        entries: &[Entry],
        cfg: &ModelConfig,
        input_dim: usize,
        classes: usize,
    ) -> Result<()> {
        let mut expected: Vec<(String, Vec<usize>)> = Vec::new();
        let mut in_dim = input_dim;
        for (i, &h) in cfg.hidden.iter().enumerate() {
            expected.push((format!("encoder/{i}/weight"), vec![h, in_dim]));
            expected.push((format!("encoder/{i}/bias"), vec![h]));
            in_dim = h;
        }
        let last = cfg.hidden.len();
        expected.push((format!("encoder/{last}/weight"), vec![cfg.feature_dim, in_dim]));
        expected.push((format!("encoder/{last}/bias"), vec![cfg.feature_dim]));
        expected.push(("cls/weight".to_string(), vec![classes, cfg.feature_dim]));
        expected.push(("cls/bias".to_string(), vec![classes]));
        for (name, shape) in expected {
            let entry = entries
                .iter()
                .find(|e| e.name == name)
                .ok_or_else(|| Error::Checkpoint(format!("{name}: missing from checkpoint")))?;
            if entry.shape != shape {
                return Err(Error::Checkpoint(format!(
                    "{name}: expected shape {shape:?}, checkpoint has {:?}",
                    entry.shape
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use approx::assert_relative_eq;

    fn cfg() -> ModelConfig {
        ModelConfig {
            hidden: vec![6],
            feature_dim: 5,
            embed_dim: 4,
            tau: 0.07,
            centroid_momentum: 0.99,
            renormalize_centroids: true,
        }
    }

    fn batch(rows: usize, cols: usize, seed: u64) -> Tensor {
        use rand::Rng;
        let mut rng = stream(seed, "test.batch");
        let v: Vec<f64> = (0..rows * cols).map(|_| rng.random::<f64>() - 0.5).collect();
        Tensor::new(&[rows, cols], v).unwrap()
    }

    #[test]
    fn zero_weights_encode_to_zero() {
        let mut m = Model::init(&cfg(), 3, 2, &mut stream(0, "init")).unwrap();
        for (_, p) in m.named_parameters() {
            p.set_values(&vec![0.0; p.len()]);
        }
        m.projection = None;
        let g = m.encode(&batch(2, 3, 1)).unwrap();
        assert!(g.to_vec().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_layers_pass_nonnegative_input_through() {
        // hidden and output both 3x3 identity: relu(x) = x for x >= 0
        let mut m = Model::init(
            &ModelConfig {
                hidden: vec![3],
                feature_dim: 3,
                embed_dim: 2,
                ..cfg()
            },
            3,
            2,
            &mut stream(0, "init"),
        )
        .unwrap();
        let eye = vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        m.encoder.layers[0].weight.set_values(&eye);
        m.encoder.layers[0].bias.set_values(&[0.0; 3]);
        m.encoder.layers[1].weight.set_values(&eye);
        m.encoder.layers[1].bias.set_values(&[0.0; 3]);
        let x = Tensor::new(&[1, 3], vec![0.5, 0.0, 2.0]).unwrap();
        assert_eq!(m.encode(&x).unwrap().to_vec(), vec![0.5, 0.0, 2.0]);
    }

    #[test]
    fn init_is_reproducible_per_seed() {
        let a = Model::init(&cfg(), 3, 2, &mut stream(7, "init")).unwrap();
        let b = Model::init(&cfg(), 3, 2, &mut stream(7, "init")).unwrap();
        for ((_, pa), (_, pb)) in a.named_parameters().iter().zip(b.named_parameters()) {
            assert_eq!(pa.to_vec(), pb.to_vec());
        }
        let x = batch(3, 3, 2);
        let ga = a.encode(&x).unwrap().to_vec();
        let gb = b.encode(&x).unwrap().to_vec();
        assert!(ga.iter().zip(&gb).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn projections_are_unit_norm() {
        let m = Model::init(&cfg(), 3, 2, &mut stream(3, "init")).unwrap();
        let z = m.project(&m.encode(&batch(4, 3, 5)).unwrap()).unwrap();
        let zv = z.to_vec();
        for row in zv.chunks(4) {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert_relative_eq!(norm, 1.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn classify_matches_softmax_contracts() {
        let m = Model::init(&cfg(), 3, 4, &mut stream(4, "init")).unwrap();
        let g = m.encode(&batch(2, 3, 6)).unwrap();

        // zero classifier -> uniform probabilities
        m.classifier.weight.set_values(&vec![0.0; m.classifier.weight.len()]);
        m.classifier.bias.set_values(&vec![0.0; 4]);
        let p = m.classify(&g).unwrap().softmax();
        for &v in &p.to_vec() {
            assert_relative_eq!(v, 0.25, max_relative = 1e-12);
        }
    }

    #[test]
    fn softmax_is_shift_invariant_and_argmax_stable() {
        let logits = Tensor::new(&[1, 3], vec![0.3, -1.2, 2.0]).unwrap();
        let shifted = Tensor::new(&[1, 3], vec![100.3, 98.8, 102.0]).unwrap();
        let p = logits.softmax().to_vec();
        let q = shifted.softmax().to_vec();
        for (a, b) in p.iter().zip(&q) {
            assert!((a - b).abs() <= 1e-12);
        }
        let argmax_p = p
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(argmax_p, 2);
    }

    #[test]
    fn entries_roundtrip_preserves_forward() {
        let m = Model::init(&cfg(), 3, 2, &mut stream(9, "init")).unwrap();
        let rebuilt = Model::from_entries(&m.to_entries()).unwrap();
        let x = batch(2, 3, 7);
        let a = m.project(&m.encode(&x).unwrap()).unwrap().to_vec();
        let b = rebuilt.project(&rebuilt.encode(&x).unwrap()).unwrap().to_vec();
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn validate_entries_names_bad_field() {
        let m = Model::init(&cfg(), 3, 2, &mut stream(9, "init")).unwrap();
        let mut entries = m.to_entries();
        entries.retain(|e| e.name != "cls/bias");
        let err = Model::validate_entries(&entries, &cfg(), 3, 2).unwrap_err();
        assert!(err.to_string().contains("cls/bias"), "{err}");
    }
}
