//! Multi-scale goodness.
//!
//! Three squared-activation means are combined per layer:
//!
//! - local: per sample, the mean of `h²` over the layer's `D` units;
//! - intermediate: per sample, units are split into `K = min(8, ⌊D/10⌋)`
//!   contiguous groups (larger groups first) and the group means of `h²` are
//!   averaged; with `K = 0` it equals the local measure;
//! - global: one scalar, the mean of `h²` over the whole batch, broadcast to
//!   every sample.
//!
//! The mix shifts from local to global with depth. Depth is normalized as
//! `d = l / (L − 1)` for 0-based layer `l` of `L` (`d = 0` when `L = 1`), so
//! the first layer weighs `[0.40, 0.35, 0.25]` and the last `[0.25, 0.35, 0.40]`.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Real};

pub const INTERMEDIATE_WEIGHT: f64 = 0.35;
const MAX_GROUPS: usize = 8;
const UNITS_PER_GROUP: usize = 10;

/// Position of a layer in `[0, 1]`, first layer at 0 and last at 1.
pub fn normalized_depth(layer_index: usize, num_layers: usize) -> Result<f64> {
    if layer_index >= num_layers {
        return Err(Error::Index {
            what: "layer index",
            index: layer_index,
            len: num_layers,
        });
    }
    if num_layers == 1 {
        Ok(0.0)
    } else {
        Ok(layer_index as f64 / (num_layers - 1) as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoodnessWeights {
    pub local: f64,
    pub inter: f64,
    pub global: f64,
}

pub fn depth_weights(layer_index: usize, num_layers: usize) -> Result<GoodnessWeights> {
    let d = normalized_depth(layer_index, num_layers)?;
    Ok(GoodnessWeights {
        local: 0.4 - 0.15 * d,
        inter: INTERMEDIATE_WEIGHT,
        global: 0.25 + 0.15 * d,
    })
}

/// Number of unit groups for a layer of width `width`.
pub fn group_count(width: usize) -> usize {
    MAX_GROUPS.min(width / UNITS_PER_GROUP)
}

/// Contiguous unit groups, sizes differing by at most one, larger first.
/// Empty when the layer is too narrow to group.
pub fn unit_groups(width: usize) -> Vec<Range<usize>> {
    let k = group_count(width);
    if k == 0 {
        return Vec::new();
    }
    let base = width / k;
    let extra = width % k;
    let mut start = 0;
    (0..k)
        .map(|g| {
            let len = base + usize::from(g < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect()
}

// Accumulated in f64 so that 32-bit scores are correctly rounded and the
// grouped and ungrouped means agree when the groups are equal.
fn mean_square_f64<T: Real>(xs: &[T]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().map(|&x| x.as_f64() * x.as_f64()).sum::<f64>() / xs.len() as f64
}

pub fn local_goodness<T: Real>(h: &Matrix<T>) -> Vec<T> {
    h.row_iter()
        .map(|row| T::from_f64_lossy(mean_square_f64(row)))
        .collect()
}

pub fn intermediate_goodness<T: Real>(h: &Matrix<T>) -> Vec<T> {
    let groups = unit_groups(h.cols());
    if groups.is_empty() {
        return local_goodness(h);
    }
    let k = groups.len() as f64;
    h.row_iter()
        .map(|row| {
            let s: f64 = groups.iter().map(|g| mean_square_f64(&row[g.clone()])).sum();
            T::from_f64_lossy(s / k)
        })
        .collect()
}

pub fn global_goodness<T: Real>(h: &Matrix<T>) -> T {
    if h.is_empty() {
        return T::zero();
    }
    // mean of row means keeps the accumulation short for large batches
    let rows = local_goodness(h);
    rows.iter().copied().sum::<T>() / T::from_usize(rows.len()).unwrap()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoodnessBreakdown<T: Real = f32> {
    pub local: Vec<T>,
    pub inter: Vec<T>,
    pub global_scalar: T,
    pub aggregate: Vec<T>,
    pub weights: GoodnessWeights,
}

/// All three measures for one layer's activations and their depth-weighted sum.
pub fn aggregate_goodness<T: Real>(
    h: &Matrix<T>,
    layer_index: usize,
    num_layers: usize,
) -> Result<GoodnessBreakdown<T>> {
    let weights = depth_weights(layer_index, num_layers)?;
    let local = local_goodness(h);
    let inter = intermediate_goodness(h);
    let global_scalar = global_goodness(h);
    let (wl, wi, wg) = (
        T::from_f64_lossy(weights.local),
        T::from_f64_lossy(weights.inter),
        T::from_f64_lossy(weights.global),
    );
    let aggregate = local
        .iter()
        .zip(&inter)
        .map(|(&l, &i)| wl * l + wi * i + wg * global_scalar)
        .collect();
    Ok(GoodnessBreakdown {
        local,
        inter,
        global_scalar,
        aggregate,
        weights,
    })
}

/// Which goodness a layer optimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GoodnessKind {
    /// Depth-weighted local/intermediate/global mix.
    MultiScale,
    /// Plain sum of squared activations.
    SumOfSquares,
}

/// A layer's goodness in the form the trainer differentiates:
///
/// `g_i = Σ_j coeff_j · h_ij² + global_weight · mean_{a,j} h_aj²`
///
/// Both goodness kinds fit this shape. The batch mean couples samples.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGoodness<T: Real = f32> {
    coeffs: Vec<T>,
    global_weight: T,
}

impl<T: Real> LayerGoodness<T> {
    pub fn new(kind: GoodnessKind, layer_index: usize, num_layers: usize, width: usize) -> Result<Self> {
        match kind {
            GoodnessKind::SumOfSquares => {
                normalized_depth(layer_index, num_layers)?;
                Ok(Self {
                    coeffs: vec![T::one(); width],
                    global_weight: T::zero(),
                })
            }
            GoodnessKind::MultiScale => {
                let w = depth_weights(layer_index, num_layers)?;
                let d = width as f64;
                let groups = unit_groups(width);
                let mut coeffs = vec![0.0f64; width];
                if groups.is_empty() {
                    coeffs.fill((w.local + w.inter) / d);
                } else {
                    let k = groups.len() as f64;
                    for g in &groups {
                        let c = w.local / d + w.inter / (k * g.len() as f64);
                        coeffs[g.clone()].fill(c);
                    }
                }
                Ok(Self {
                    coeffs: coeffs.into_iter().map(T::from_f64_lossy).collect(),
                    global_weight: T::from_f64_lossy(w.global),
                })
            }
        }
    }

    pub fn width(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn global_weight(&self) -> T {
        self.global_weight
    }

    fn weighted_rows(&self, h: &Matrix<T>) -> Vec<T> {
        debug_assert_eq!(h.cols(), self.coeffs.len());
        h.row_iter()
            .map(|row| row.iter().zip(&self.coeffs).map(|(&x, &c)| c * x * x).sum())
            .collect()
    }

    /// Training-time goodness: the global term is shared across the batch.
    pub fn batch_scores(&self, h: &Matrix<T>) -> Vec<T> {
        let mut g = self.weighted_rows(h);
        if self.global_weight != T::zero() {
            let global = self.global_weight * global_goodness(h);
            for x in &mut g {
                *x = *x + global;
            }
        }
        g
    }

    /// Inference-time goodness: each sample is its own batch of one, so a
    /// score never depends on what else is in the batch.
    pub fn sample_scores(&self, h: &Matrix<T>) -> Vec<T> {
        let mut g = self.weighted_rows(h);
        if self.global_weight != T::zero() {
            for (x, own) in g.iter_mut().zip(local_goodness(h)) {
                *x = *x + self.global_weight * own;
            }
        }
        g
    }
}
