//! Forward-Forward training with adaptive multi-scale goodness.
//!
//! Layers learn without backpropagation: each one is trained to give high
//! goodness (squared-activation energy) to images overlaid with their true
//! label and low goodness to images overlaid with a wrong one. On top of
//! plain FF this crate provides:
//!
//! - [`goodness`]: local, grouped and batch-level goodness mixed by depth;
//! - [`curriculum`]: three-stage mining of wrong-label negatives;
//! - [`schedules`]: per-layer thresholds rising with depth and progress, and
//!   a warm-up + cosine learning rate;
//! - [`engine`]: layers, loss, gradients, the training loop and prediction;
//! - [`data`]: IDX loading and label overlay;
//! - [`numerics`]: the dense kernels underneath.
//!
//! Each addition can be switched off ([`engine::Toggles`]) to recover
//! baseline FF.

pub mod curriculum;
pub mod data;
pub mod engine;
pub mod error;
pub mod goodness;
pub mod numerics;
pub mod schedules;

pub use error::{Error, Result};
