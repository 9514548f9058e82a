//! EMA class-centroid bank and contrastive retrieval.

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::{kernels, Tensor, NORM_EPS};

/// Per-class unit-norm centroids in the embedding space, maintained as an
/// exponential moving average of sample embeddings:
///
/// ```text
/// c_k <- m * c_k + (1 - m) * z_i
/// ```
///
/// applied per sample in batch order, followed by renormalization when the
/// flag is on. Updates never touch model parameters; callers pass detached
/// embedding values.
pub struct CentroidBank {
    classes: usize,
    dim: usize,
    pub momentum: f64,
    pub renormalize: bool,
    data: Vec<f64>,
}

impl CentroidBank {
    /// Random unit-vector centroids from the seeded stream.
    pub fn random_unit(
        classes: usize,
        dim: usize,
        momentum: f64,
        renormalize: bool,
        rng: &mut impl Rng,
    ) -> Result<CentroidBank> {
        if !(0.0..=1.0).contains(&momentum) {
            return Err(Error::invalid(format!(
                "centroid momentum must be in [0, 1], got {momentum}"
            )));
        }
        let mut data = vec![0.0; classes * dim];
        for k in 0..classes {
            random_unit_row(&mut data[k * dim..(k + 1) * dim], rng);
        }
        Ok(CentroidBank {
            classes,
            dim,
            momentum,
            renormalize,
            data,
        })
    }

    pub fn from_values(
        classes: usize,
        dim: usize,
        momentum: f64,
        renormalize: bool,
        data: Vec<f64>,
    ) -> Result<CentroidBank> {
        if data.len() != classes * dim {
            return Err(Error::InvalidShape {
                shape: vec![classes, dim],
                len: data.len(),
            });
        }
        Ok(CentroidBank {
            classes,
            dim,
            momentum,
            renormalize,
            data,
        })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn centroid(&self, class: usize) -> &[f64] {
        &self.data[class * self.dim..(class + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    /// Constant `[K, d_z]` tensor; gradients never flow into the bank.
    pub fn as_tensor(&self) -> Tensor {
        Tensor::new(&[self.classes, self.dim], self.data.clone()).expect("bank shape is valid")
    }

    pub fn norms(&self) -> Vec<f64> {
        (0..self.classes)
            .map(|k| {
                let c = self.centroid(k);
                kernels::dot(c, c).sqrt()
            })
            .collect()
    }

    /// EMA update from a batch of embedding rows, applied per sample in
    /// batch order. `m == 1` freezes the bank exactly (no renormalization
    /// drift). Classes absent from the batch are untouched.
    pub fn update(&mut self, z_rows: &[f64], labels: &[usize]) -> Result<()> {
        if z_rows.len() != labels.len() * self.dim {
            return Err(Error::InvalidShape {
                shape: vec![labels.len(), self.dim],
                len: z_rows.len(),
            });
        }
        for &label in labels {
            if label >= self.classes {
                return Err(Error::LabelOutOfRange {
                    label,
                    classes: self.classes,
                });
            }
        }
        if self.momentum == 1.0 {
            return Ok(());
        }
        let m = self.momentum;
        for (i, &label) in labels.iter().enumerate() {
            let z = &z_rows[i * self.dim..(i + 1) * self.dim];
            let c = &mut self.data[label * self.dim..(label + 1) * self.dim];
            for (cj, &zj) in c.iter_mut().zip(z) {
                *cj = m * *cj + (1.0 - m) * zj;
            }
            if self.renormalize {
                let norm = kernels::dot(c, c).sqrt().max(NORM_EPS);
                for cj in c.iter_mut() {
                    *cj /= norm;
                }
            }
        }
        Ok(())
    }

    /// Replace every centroid with the unit-normalized mean embedding of its
    /// class. Classes absent from `labels` fall back to seeded random unit
    /// vectors (cannot happen on a full pass over a long-tailed dataset,
    /// where every class holds at least one example).
    pub fn reset_from_embeddings(
        &mut self,
        z_rows: &[f64],
        labels: &[usize],
        rng: &mut impl Rng,
    ) -> Result<()> {
        if z_rows.len() != labels.len() * self.dim {
            return Err(Error::InvalidShape {
                shape: vec![labels.len(), self.dim],
                len: z_rows.len(),
            });
        }
        let mut sums = vec![0.0; self.classes * self.dim];
        let mut counts = vec![0usize; self.classes];
        for (i, &label) in labels.iter().enumerate() {
            if label >= self.classes {
                return Err(Error::LabelOutOfRange {
                    label,
                    classes: self.classes,
                });
            }
            counts[label] += 1;
            let z = &z_rows[i * self.dim..(i + 1) * self.dim];
            let s = &mut sums[label * self.dim..(label + 1) * self.dim];
            for (sj, &zj) in s.iter_mut().zip(z) {
                *sj += zj;
            }
        }
        for k in 0..self.classes {
            let c = &mut self.data[k * self.dim..(k + 1) * self.dim];
            if counts[k] == 0 {
                random_unit_row(c, rng);
                continue;
            }
            let s = &sums[k * self.dim..(k + 1) * self.dim];
            let norm = kernels::dot(s, s).sqrt().max(NORM_EPS);
            for (cj, &sj) in c.iter_mut().zip(s) {
                *cj = sj / norm;
            }
        }
        Ok(())
    }
}

fn random_unit_row(row: &mut [f64], rng: &mut impl Rng) {
    use rand_distr::{Distribution, StandardNormal};
    loop {
        for v in row.iter_mut() {
            *v = StandardNormal.sample(rng);
        }
        let norm = kernels::dot(row, row).sqrt();
        if norm > 1e-9 {
            for v in row.iter_mut() {
                *v /= norm;
            }
            return;
        }
    }
}

/// Retrieval distribution over centroids: softmax of `z . c_k / tau`.
pub fn retrieval_probs(z: &Tensor, bank: &CentroidBank, tau: f64) -> Result<Tensor> {
    Ok(retrieval_logits(z, bank, tau)?.softmax())
}

/// Temperature-scaled similarities `z . c_k / tau`, the logits of Eq. 4's
/// non-parametric classifier. Centroids enter as constants.
pub fn retrieval_logits(z: &Tensor, bank: &CentroidBank, tau: f64) -> Result<Tensor> {
    if tau <= 0.0 {
        return Err(Error::NonPositiveTemperature(tau));
    }
    let centroids = bank.as_tensor();
    Ok(z.matmul_nt(&centroids)?.scale(1.0 / tau))
}
