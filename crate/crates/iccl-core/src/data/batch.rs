//! Batch assembly and mixup-style interpolation.

use rand::Rng;

use super::augment::{augment, AugmentSpec};
use super::LabeledSet;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Gather the indexed examples into a `[batch, input_len]` constant tensor
/// plus labels, applying the augmentation policy per example.
pub fn assemble_batch(
    set: &LabeledSet,
    indices: &[usize],
    spec: &AugmentSpec,
    rng: &mut impl Rng,
) -> Result<(Tensor, Vec<usize>)> {
    if indices.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let d = set.input_len();
    let mut values = Vec::with_capacity(indices.len() * d);
    let mut labels = Vec::with_capacity(indices.len());
    for &i in indices {
        let e = &set.examples[i];
        values.extend_from_slice(&augment(&e.input, &set.input_dims, spec, rng));
        labels.push(e.label);
    }
    Ok((Tensor::new(&[indices.len(), d], values)?, labels))
}

/// Paired head/tail samples, the mixing weights, and the fused inputs.
#[derive(Debug, Clone)]
pub struct InterpolativeBatch {
    pub x_h: Tensor,
    pub y_h: Vec<usize>,
    pub x_t: Tensor,
    pub y_t: Vec<usize>,
    /// One weight per row; a shared per-batch weight is simply repeated.
    pub lambdas: Vec<f64>,
    pub x_f: Tensor,
}

/// Fuse a head batch and a tail batch: `x_f = lambda * x_h + (1 - lambda) * x_t`
/// row-wise. The endpoints `lambda = 1` and `lambda = 0` copy the source row
/// exactly.
pub fn make_interpolative_batch(
    x_h: Tensor,
    y_h: Vec<usize>,
    x_t: Tensor,
    y_t: Vec<usize>,
    lambdas: Vec<f64>,
) -> Result<InterpolativeBatch> {
    if x_h.shape() != x_t.shape() {
        return Err(Error::ShapeMismatch {
            op: "make_interpolative_batch",
            lhs: x_h.shape(),
            rhs: x_t.shape(),
        });
    }
    let shape = x_h.shape();
    let (batch, d) = (shape[0], shape[1]);
    if y_h.len() != batch || y_t.len() != batch || lambdas.len() != batch {
        return Err(Error::invalid(format!(
            "interpolative batch misaligned: {} inputs, {}/{} labels, {} lambdas",
            batch,
            y_h.len(),
            y_t.len(),
            lambdas.len()
        )));
    }
    for &l in &lambdas {
        if !(0.0..=1.0).contains(&l) {
            return Err(Error::invalid(format!("lambda {l} outside [0, 1]")));
        }
    }

    let fused = x_h.with_values(|h| {
        x_t.with_values(|t| {
            let mut out = vec![0.0; h.len()];
            for (i, &lam) in lambdas.iter().enumerate() {
                let row = i * d;
                if lam == 1.0 {
                    out[row..row + d].copy_from_slice(&h[row..row + d]);
                } else if lam == 0.0 {
                    out[row..row + d].copy_from_slice(&t[row..row + d]);
                } else {
                    for j in 0..d {
                        out[row + j] = lam * h[row + j] + (1.0 - lam) * t[row + j];
                    }
                }
            }
            out
        })
    });
    let x_f = Tensor::new(&shape, fused)?;
    Ok(InterpolativeBatch {
        x_h,
        y_h,
        x_t,
        y_t,
        lambdas,
        x_f,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t(rows: usize, cols: usize, values: Vec<f64>) -> Tensor {
        Tensor::new(&[rows, cols], values).unwrap()
    }

    #[test]
    fn endpoints_copy_sources_exactly() {
        let h = t(1, 2, vec![0.25, -1.5]);
        let tl = t(1, 2, vec![3.0, 4.0]);
        let b1 =
            make_interpolative_batch(h.clone(), vec![0], tl.clone(), vec![1], vec![1.0]).unwrap();
        assert_eq!(b1.x_f.to_vec(), h.to_vec());
        let b0 = make_interpolative_batch(h, vec![0], tl.clone(), vec![1], vec![0.0]).unwrap();
        assert_eq!(b0.x_f.to_vec(), tl.to_vec());
    }

    #[test]
    fn midpoint_mix() {
        let h = t(1, 2, vec![0.0, 2.0]);
        let tl = t(1, 2, vec![2.0, 0.0]);
        let b = make_interpolative_batch(h, vec![0], tl, vec![1], vec![0.5]).unwrap();
        assert_eq!(b.x_f.to_vec(), vec![1.0, 1.0]);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let h = t(1, 2, vec![0.0, 2.0]);
        let tl = t(1, 3, vec![2.0, 0.0, 1.0]);
        assert!(make_interpolative_batch(h, vec![0], tl, vec![1], vec![0.5]).is_err());
    }

    proptest! {
        #[test]
        fn fused_inputs_are_convex_combinations(
            rows in 1usize..4,
            cols in 1usize..5,
            lam in 0.0f64..=1.0,
            seed in 0u64..1000,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let hv: Vec<f64> = (0..rows * cols).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
            let tv: Vec<f64> = (0..rows * cols).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
            let b = make_interpolative_batch(
                t(rows, cols, hv.clone()),
                vec![0; rows],
                t(rows, cols, tv.clone()),
                vec![0; rows],
                vec![lam; rows],
            ).unwrap();
            for ((f, h), tl) in b.x_f.to_vec().iter().zip(&hv).zip(&tv) {
                let lo = h.min(*tl) - 1e-12;
                let hi = h.max(*tl) + 1e-12;
                prop_assert!(*f >= lo && *f <= hi);
            }
        }
    }
}
