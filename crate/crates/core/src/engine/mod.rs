//! Forward-Forward layers, the local loss and its analytic gradient, the
//! training loop and label-overlay prediction.
//!
//! Each batch is trained layer by layer. A layer sees the positives (images
//! overlaid with their own label) and the negatives (wrong labels, optionally
//! mined), pushes goodness above its threshold for the former and below for the
//! latter, and hands its pre-update activations, length-normalized by default,
//! to the next layer. No gradient crosses a layer boundary.

mod layer;
mod predict;
mod train;

pub use layer::{ff_loss, sigmoid, softplus, FFLayer, LayerGrads, LossAndGrad, StepOutput, GRAD_CLIP_NORM};
pub use predict::{accuracy, predict, PredictConfig, Prediction};
pub use train::{train, LayerRecord, MiningScoring, Network, Toggles, TrainConfig, TrainRecord, Trainer};
