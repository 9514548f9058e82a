//! Desk-scale training laboratory for interpolative centroid contrastive
//! learning (ICCL) on long-tailed classification problems.
//!
//! The crate is organised around the training pipeline:
//!
//! - [`tensor`]: a minimal reverse-mode differentiable tensor engine with an
//!   SGD-momentum optimizer, learning-rate schedules and a binary checkpoint
//!   container.
//! - [`data`]: long-tailed dataset construction, the class-agnostic and
//!   class-aware samplers, mixup-style interpolation and CIFAR/synthetic
//!   ingestion.
//! - [`model`]: MLP encoder, projection head, linear classifier and the
//!   EMA class-centroid bank with contrastive retrieval.
//! - [`loss`]: classification, centroid contrastive and distillation losses.
//! - [`train`]: the two-stage orchestrator (representation learning, then
//!   classifier rebalancing).
//! - [`eval`]: overall/many/medium/few accuracy splits and weight-norm
//!   diagnostics.
//! - [`config`]: the TOML experiment configuration with paper defaults.

pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod loss;
pub mod model;
pub mod rng;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use tensor::Tensor;
