use crate::data::{overlay_class, LabeledDataset};
use crate::engine::layer::sigmoid;
use crate::engine::train::Network;
use crate::error::{Error, Result};
use crate::goodness::{GoodnessKind, LayerGoodness};
use crate::numerics::{Matrix, Real};
use crate::schedules::adaptive_threshold;

/// Samples scored per overlay pass; bounds memory for large evaluation sets.
const PREDICT_CHUNK: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct PredictConfig {
    pub num_classes: usize,
    pub goodness: GoodnessKind,
    /// Leave the first layer out of the class score. Ignored for one-layer
    /// networks.
    pub skip_first_layer: bool,
    pub normalize_between_layers: bool,
    pub theta0: f64,
    /// Use the end-of-training threshold `θ(l, 1)` for the per-layer
    /// probabilities; otherwise `θ₀`.
    pub adaptive_threshold: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub labels: Vec<usize>,
    /// Summed goodness over the scoring layers, `(samples, classes)`.
    pub class_goodness: Matrix<f64>,
    /// `σ(g_l − θ_l)` of the predicted class, `(samples, layers)`.
    pub positive_probability: Matrix<f64>,
}

fn scoring_layers(num_layers: usize, cfg: &PredictConfig) -> std::ops::Range<usize> {
    if cfg.skip_first_layer && num_layers > 1 {
        1..num_layers
    } else {
        0..num_layers
    }
}

/// Per-layer goodness of every sample for one overlaid input, with batch-of-one
/// semantics for the global term.
fn layer_scores<T: Real>(
    network: &Network<T>,
    goodness: &[LayerGoodness<T>],
    x: &Matrix<T>,
    cfg: &PredictConfig,
) -> Result<Vec<Vec<T>>> {
    let mut out = Vec::with_capacity(network.layers.len());
    let mut h = x.clone();
    for (l, (layer, g)) in network.layers.iter().zip(goodness).enumerate() {
        if l > 0 && cfg.normalize_between_layers {
            h.normalize_rows_in_place();
        }
        h = layer.forward(&h)?;
        out.push(g.sample_scores(&h));
    }
    Ok(out)
}

/// Scores every class by overlaying it on the input and summing goodness over
/// the scoring layers; the highest total wins, ties going to the lower class.
pub fn predict<T: Real>(network: &Network<T>, x: &Matrix<T>, cfg: &PredictConfig) -> Result<Prediction> {
    let num_layers = network.layers.len();
    if num_layers == 0 {
        return Err(Error::State("cannot predict with an empty network".into()));
    }
    if Some(x.cols()) != network.input_width() {
        return Err(Error::Dimension {
            op: "predict",
            left: x.shape(),
            right: (network.input_width().unwrap_or(0), network.layers[0].out_dim()),
        });
    }
    let goodness = network
        .layers
        .iter()
        .enumerate()
        .map(|(l, layer)| LayerGoodness::new(cfg.goodness, l, num_layers, layer.out_dim()))
        .collect::<Result<Vec<_>>>()?;
    let thresholds = (0..num_layers)
        .map(|l| {
            if cfg.adaptive_threshold {
                adaptive_threshold(l, num_layers, 1.0, cfg.theta0)
            } else {
                Ok(cfg.theta0)
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    let scoring = scoring_layers(num_layers, cfg);
    let classes = cfg.num_classes;
    let n = x.rows();

    let mut labels = Vec::with_capacity(n);
    let mut class_goodness = Matrix::zeros(n, classes);
    let mut positive_probability = Matrix::zeros(n, num_layers);
    let all: Vec<usize> = (0..n).collect();
    for chunk in all.chunks(PREDICT_CHUNK) {
        let xc = x.select_rows(chunk)?;
        // per class, per layer, per sample
        let per_class = (0..classes)
            .map(|c| layer_scores(network, &goodness, &overlay_class(&xc, c, classes), cfg))
            .collect::<Result<Vec<_>>>()?;
        for (k, &row) in chunk.iter().enumerate() {
            let mut best = (0usize, f64::NEG_INFINITY);
            for (c, scores) in per_class.iter().enumerate() {
                let total: f64 = scores[scoring.clone()].iter().map(|s| s[k].as_f64()).sum();
                class_goodness.set(row, c, total);
                if total > best.1 {
                    best = (c, total);
                }
            }
            labels.push(best.0);
            for (l, s) in per_class[best.0].iter().enumerate() {
                let p: f64 = sigmoid(s[k].as_f64() - thresholds[l]);
                positive_probability.set(row, l, p);
            }
        }
    }
    Ok(Prediction {
        labels,
        class_goodness,
        positive_probability,
    })
}

/// Fraction of `data` whose predicted label matches, in `[0, 1]`.
pub fn accuracy<T: Real>(network: &Network<T>, data: &LabeledDataset, cfg: &PredictConfig) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::State("cannot measure accuracy on an empty set".into()));
    }
    let x: Matrix<T> = data.images().cast();
    let pred = predict(network, &x, cfg)?;
    let hits = pred
        .labels
        .iter()
        .zip(data.labels())
        .filter(|(a, b)| a == b)
        .count();
    Ok(hits as f64 / data.len() as f64)
}
