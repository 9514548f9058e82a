//! Training objectives.
//!
//! Every cross-entropy-style term is computed from logits through
//! log-softmax (log-sum-exp); probabilities are never materialized inside a
//! loss. Batch reduction is the mean, so loss magnitudes are batch-size
//! invariant.
//!
//! The single-label and interpolative variants share the same gather /
//! negate / mean code path, which makes the endpoint reductions
//! (`lambda` in {0, 1}) and the equal-label collapse exact, bit for bit.

use crate::error::{Error, Result};
use crate::model::centroid::{retrieval_logits, CentroidBank};
use crate::tensor::Tensor;

/// Branch and distillation weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub omega_u: f64,
    pub omega_it: f64,
    pub omega_d: f64,
    pub tau_d: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            omega_u: 1.0,
            omega_it: 1.0,
            omega_d: 0.5,
            tau_d: 10.0,
        }
    }
}

/// Standard cross entropy over logits, batch-averaged.
pub fn ce_loss(logits: &Tensor, labels: &[usize]) -> Result<Tensor> {
    Ok(logits.log_softmax().gather(labels)?.neg().mean_all())
}

/// Classification loss for interpolative samples:
/// `-lambda * log p(y_h | x_f) - (1 - lambda) * log p(y_t | x_f)`,
/// batch-averaged, with one weight per row.
pub fn interpolative_ce(
    logits: &Tensor,
    y_h: &[usize],
    y_t: &[usize],
    lambdas: &[f64],
) -> Result<Tensor> {
    Ok(logits
        .log_softmax()
        .gather_pair(y_h, y_t, lambdas)?
        .neg()
        .mean_all())
}

/// Warm-up centroid contrastive loss: `-log p(c_y | x)` under the
/// retrieval distribution, batch-averaged.
pub fn centroid_contrastive(
    z: &Tensor,
    labels: &[usize],
    bank: &CentroidBank,
    tau: f64,
) -> Result<Tensor> {
    Ok(retrieval_logits(z, bank, tau)?
        .log_softmax()
        .gather(labels)?
        .neg()
        .mean_all())
}

/// Interpolative centroid contrastive loss:
/// `-lambda * log p(c_{y_h} | x_f) - (1 - lambda) * log p(c_{y_t} | x_f)`,
/// batch-averaged.
pub fn interpolative_cc(
    z_f: &Tensor,
    y_h: &[usize],
    y_t: &[usize],
    lambdas: &[f64],
    bank: &CentroidBank,
    tau: f64,
) -> Result<Tensor> {
    Ok(retrieval_logits(z_f, bank, tau)?
        .log_softmax()
        .gather_pair(y_h, y_t, lambdas)?
        .neg()
        .mean_all())
}

/// Joint objective: `omega_u * L_ce + omega_it * (L_ce_it + L_cc_it)`.
/// Absent terms are skipped, which realizes the ablation switches
/// (`omega_it = 0` is the CE baseline; dropping `L_cc_it` with
/// `omega_u = 0` is Mixup).
pub fn total_loss(
    weights: &LossWeights,
    l_ce: Option<&Tensor>,
    l_ce_it: Option<&Tensor>,
    l_cc_it: Option<&Tensor>,
) -> Result<Tensor> {
    let mut total: Option<Tensor> = None;
    let mut push = |term: Tensor| -> Result<()> {
        total = Some(match total.take() {
            Some(t) => t.add(&term)?,
            None => term,
        });
        Ok(())
    };
    if let Some(ce) = l_ce {
        if weights.omega_u != 0.0 {
            push(ce.scale(weights.omega_u))?;
        }
    }
    if weights.omega_it != 0.0 {
        if let Some(t) = l_ce_it {
            push(t.scale(weights.omega_it))?;
        }
        if let Some(t) = l_cc_it {
            push(t.scale(weights.omega_it))?;
        }
    }
    total.ok_or_else(|| Error::invalid("no active loss terms"))
}

/// Rebalancing loss pieces; `total` is the graph node to differentiate,
/// the scalar fields are raw per-term values for reporting.
pub struct RebalanceLoss {
    pub total: Tensor,
    pub ce_value: f64,
    pub kl_value: f64,
}

/// Classifier-rebalancing objective:
/// `(1 - omega_d) * CE(student, y) + omega_d * tau_d^2 * KL(softmax(teacher / tau_d) || softmax(student / tau_d))`.
///
/// The teacher logits enter as constants; gradients flow into the student
/// only.
pub fn rebalance_loss(
    student_logits: &Tensor,
    teacher_logits: &Tensor,
    labels: &[usize],
    weights: &LossWeights,
) -> Result<RebalanceLoss> {
    if weights.tau_d <= 0.0 {
        return Err(Error::NonPositiveTemperature(weights.tau_d));
    }
    if student_logits.shape() != teacher_logits.shape() {
        return Err(Error::ShapeMismatch {
            op: "rebalance_loss",
            lhs: student_logits.shape(),
            rhs: teacher_logits.shape(),
        });
    }
    let shape = student_logits.shape();
    let batch = shape[0];
    let tau_d = weights.tau_d;

    let ce = ce_loss(student_logits, labels)?;

    // Teacher side is constant: soft targets and their logs, computed once
    // on values.
    let teacher_scaled = teacher_logits.detach().scale(1.0 / tau_d);
    let t_log = teacher_scaled.log_softmax().detach();
    let t_probs = {
        let v: Vec<f64> = t_log.to_vec().iter().map(|&x| x.exp()).collect();
        Tensor::new(&shape, v)?
    };

    let student_log = student_logits.scale(1.0 / tau_d).log_softmax();
    // KL(t || s) = sum t * (log t - log s), batch-averaged
    let kl = t_probs
        .mul(&t_log.sub(&student_log)?)?
        .sum_all()
        .scale(1.0 / batch as f64);

    let ce_value = ce.item();
    let kl_value = kl.item();
    let total = ce
        .scale(1.0 - weights.omega_d)
        .add(&kl.scale(weights.omega_d * tau_d * tau_d))?;
    Ok(RebalanceLoss {
        total,
        ce_value,
        kl_value,
    })
}
