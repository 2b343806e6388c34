//! Layer/progress-dependent threshold and the warm-up + cosine learning rate.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::goodness::normalized_depth;

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleConfig {
    pub theta0: f64,
    pub eta0: f64,
    pub warmup_frac: f64,
    pub eta_min_ratio: f64,
    pub total_epochs: usize,
    pub depth_gain: f64,
    pub progress_gain: f64,
}

impl ScheduleConfig {
    pub fn new(theta0: f64, eta0: f64, total_epochs: usize) -> Self {
        Self {
            theta0,
            eta0,
            warmup_frac: 0.1,
            eta_min_ratio: 0.1,
            total_epochs,
            depth_gain: 0.15,
            progress_gain: 0.3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.theta0 > 0.0
            && self.eta0 > 0.0
            && self.warmup_frac > 0.0
            && self.warmup_frac < 1.0
            && self.eta_min_ratio > 0.0
            && self.eta_min_ratio < 1.0
            && self.total_epochs >= 1
            && self.depth_gain >= 0.0
            && self.progress_gain >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::domain("schedule config", format!("{self:?}")))
        }
    }

    pub fn eta_min(&self) -> f64 {
        self.eta_min_ratio * self.eta0
    }

    /// `θ₀ · (1 + depth_gain·d) · (1 + progress_gain·p)`.
    pub fn threshold(&self, layer_index: usize, num_layers: usize, progress: f64) -> Result<f64> {
        check_progress(progress)?;
        let d = normalized_depth(layer_index, num_layers)?;
        Ok(self.theta0 * (1.0 + self.depth_gain * d) * (1.0 + self.progress_gain * progress))
    }

    /// Learning rate for 1-based epoch `epoch`.
    pub fn learning_rate(&self, epoch: usize) -> Result<f64> {
        let total = self.total_epochs;
        if epoch == 0 || epoch > total {
            return Err(Error::domain(
                "learning_rate",
                format!("epoch {epoch} outside 1..={total}"),
            ));
        }
        let e = epoch as f64;
        let warmup = self.warmup_frac * total as f64;
        if e <= warmup {
            return Ok(self.eta0 * e / warmup);
        }
        let anneal = (1.0 - self.warmup_frac) * total as f64;
        let eta_min = self.eta_min();
        Ok(eta_min + 0.5 * (self.eta0 - eta_min) * (1.0 + (PI * (e - warmup) / anneal).cos()))
    }
}

fn check_progress(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::domain("progress", format!("{p} outside [0, 1]")))
    }
}

/// Training progress `e / E` for 1-based epoch `e`.
pub fn progress(epoch: usize, total_epochs: usize) -> f64 {
    epoch as f64 / total_epochs as f64
}

/// Threshold with the default gains (`0.15` per depth, `0.3` per progress).
pub fn adaptive_threshold(layer_index: usize, num_layers: usize, progress: f64, theta0: f64) -> Result<f64> {
    ScheduleConfig::new(theta0, 1.0, 1).threshold(layer_index, num_layers, progress)
}

pub fn learning_rate(epoch: usize, cfg: &ScheduleConfig) -> Result<f64> {
    cfg.learning_rate(epoch)
}
