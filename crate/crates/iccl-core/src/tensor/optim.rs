//! SGD with momentum and learning-rate schedules.
//!
//! The momentum variant is fixed as
//!
//! ```text
//! v <- mu * v + (grad + wd * w)
//! w <- w - lr * v
//! ```
//!
//! with zero-initialized velocity buffers, so parameter trajectories are
//! reproducible across runs.

use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrKind {
    /// Multiply by `decay` at each passed milestone epoch.
    Step,
    /// Half-cosine from `base_lr` toward 0 over `total_epochs`.
    Cosine,
}

/// Epoch-indexed learning-rate schedule with optional linear warm-up.
#[derive(Debug, Clone, PartialEq)]
pub struct LrSchedule {
    pub kind: LrKind,
    pub base_lr: f64,
    pub warmup_epochs: usize,
    pub total_epochs: usize,
    /// Step kind only.
    pub milestones: Vec<usize>,
    /// Step kind only.
    pub decay: f64,
}

impl LrSchedule {
    pub fn cosine(base_lr: f64, warmup_epochs: usize, total_epochs: usize) -> LrSchedule {
        LrSchedule {
            kind: LrKind::Cosine,
            base_lr,
            warmup_epochs,
            total_epochs,
            milestones: Vec::new(),
            decay: 1.0,
        }
    }

    pub fn step(
        base_lr: f64,
        warmup_epochs: usize,
        total_epochs: usize,
        milestones: Vec<usize>,
        decay: f64,
    ) -> LrSchedule {
        LrSchedule {
            kind: LrKind::Step,
            base_lr,
            warmup_epochs,
            total_epochs,
            milestones,
            decay,
        }
    }

    /// Learning rate at `epoch`. Linear warm-up ramps from
    /// `base_lr / warmup_epochs` up to `base_lr`, then the schedule applies.
    pub fn lr_at(&self, epoch: usize) -> Result<f64> {
        if epoch >= self.total_epochs {
            return Err(Error::EpochOutOfRange {
                epoch,
                total: self.total_epochs,
            });
        }
        if epoch < self.warmup_epochs {
            return Ok(self.base_lr * (epoch + 1) as f64 / self.warmup_epochs as f64);
        }
        match self.kind {
            LrKind::Step => {
                let passed = self.milestones.iter().filter(|&&m| epoch >= m).count();
                Ok(self.base_lr * self.decay.powi(passed as i32))
            }
            LrKind::Cosine => {
                let frac = epoch as f64 / self.total_epochs as f64;
                Ok(self.base_lr * 0.5 * (1.0 + (std::f64::consts::PI * frac).cos()))
            }
        }
    }
}

struct Slot {
    name: String,
    param: Tensor,
    velocity: Vec<f64>,
    lr_scale: f64,
}

/// SGD-momentum optimizer over named parameters.
pub struct SgdMomentum {
    pub momentum: f64,
    pub weight_decay: f64,
    slots: Vec<Slot>,
}

impl SgdMomentum {
    pub fn new(params: Vec<(String, Tensor)>, momentum: f64, weight_decay: f64) -> SgdMomentum {
        let slots = params
            .into_iter()
            .map(|(name, param)| Slot {
                velocity: vec![0.0; param.len()],
                name,
                param,
                lr_scale: 1.0,
            })
            .collect();
        SgdMomentum {
            momentum,
            weight_decay,
            slots,
        }
    }

    /// Apply a per-parameter learning-rate multiplier (used for the
    /// reduced-rate encoder fine-tuning in stage 2).
    pub fn set_lr_scale(&mut self, name_prefix: &str, scale: f64) {
        for slot in &mut self.slots {
            if slot.name.starts_with(name_prefix) {
                slot.lr_scale = scale;
            }
        }
    }

    /// One update step. Every parameter must carry a gradient.
    pub fn step(&mut self, lr: f64) -> Result<()> {
        for slot in &mut self.slots {
            let grad = slot.param.grad().ok_or_else(|| Error::MissingGrad {
                name: slot.name.clone(),
            })?;
            let mut w = slot.param.to_vec();
            let mu = self.momentum;
            let wd = self.weight_decay;
            let step_lr = lr * slot.lr_scale;
            for ((v, g), wi) in slot.velocity.iter_mut().zip(&grad).zip(w.iter_mut()) {
                *v = mu * *v + (*g + wd * *wi);
                *wi -= step_lr * *v;
            }
            slot.param.set_values(&w);
        }
        Ok(())
    }

    pub fn zero_grad(&self) {
        for slot in &self.slots {
            slot.param.zero_grad();
        }
    }

    /// Velocity buffers, for checkpointing under the `opt/` prefix.
    pub fn velocities(&self) -> Vec<(String, Vec<usize>, Vec<f64>)> {
        self.slots
            .iter()
            .map(|s| (s.name.clone(), s.param.shape(), s.velocity.clone()))
            .collect()
    }

    pub fn load_velocity(&mut self, name: &str, values: &[f64]) -> Result<()> {
        let slot = self
            .slots
            .iter_mut()
            .find(|s| s.name == name)
            .ok_or_else(|| Error::Checkpoint(format!("opt/{name}: no such parameter")))?;
        if slot.velocity.len() != values.len() {
            return Err(Error::Checkpoint(format!(
                "opt/{name}: velocity has {} values, parameter has {}",
                values.len(),
                slot.velocity.len()
            )));
        }
        slot.velocity.copy_from_slice(values);
        Ok(())
    }
}
