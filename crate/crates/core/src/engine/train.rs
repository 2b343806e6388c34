use std::time::Instant;

use rand::seq::SliceRandom;

use crate::curriculum::{mine_negatives, CurriculumConfig, Stage};
use crate::data::{overlay_labels, wrong_labels, LabeledDataset};
use crate::engine::layer::FFLayer;
use crate::engine::predict::{accuracy, PredictConfig};
use crate::error::{Error, Result};
use crate::goodness::{GoodnessKind, LayerGoodness};
use crate::numerics::{stream_rng, Matrix, Real, RngStream, SeededRng};
use crate::schedules::{progress, ScheduleConfig};

/// Switches for the four additions over plain Forward-Forward. With all four
/// off, training is baseline FF: sum-of-squares goodness, every wrong-label
/// candidate used as a negative, threshold fixed at `θ₀`, constant `η₀`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Toggles {
    pub multiscale: bool,
    pub curriculum: bool,
    pub adaptive_threshold: bool,
    pub lr_schedule: bool,
}

impl Toggles {
    pub const ALL: Toggles = Toggles {
        multiscale: true,
        curriculum: true,
        adaptive_threshold: true,
        lr_schedule: true,
    };
    pub const NONE: Toggles = Toggles {
        multiscale: false,
        curriculum: false,
        adaptive_threshold: false,
        lr_schedule: false,
    };

    pub fn goodness_kind(self) -> GoodnessKind {
        if self.multiscale {
            GoodnessKind::MultiScale
        } else {
            GoodnessKind::SumOfSquares
        }
    }
}

/// How candidate negatives are scored for mining.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MiningScoring {
    /// Goodness of the first layer's current activations.
    FirstLayer,
    /// Mean goodness over all layers, inputs normalized between layers as in
    /// training.
    AllLayers,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Layer widths, input first.
    pub architecture: Vec<usize>,
    pub num_classes: usize,
    pub schedule: ScheduleConfig,
    pub curriculum: CurriculumConfig,
    pub batch_size: usize,
    pub seed: u64,
    pub toggles: Toggles,
    pub normalize_between_layers: bool,
    pub mining_scoring: MiningScoring,
    pub prediction_skip_first_layer: bool,
    /// Accuracy is measured every `eval_every` epochs and after the last one.
    pub eval_every: usize,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.architecture.len() < 2 || self.architecture.contains(&0) {
            return Err(Error::domain(
                "architecture",
                format!(
                    "{:?}: need an input width and at least one layer, all > 0",
                    self.architecture
                ),
            ));
        }
        if self.num_classes < 2 || self.num_classes > self.architecture[0] {
            return Err(Error::domain(
                "num_classes",
                format!(
                    "{} classes cannot be overlaid on {} inputs",
                    self.num_classes, self.architecture[0]
                ),
            ));
        }
        if self.batch_size == 0 || self.eval_every == 0 {
            return Err(Error::domain("batch_size/eval_every", "must be >= 1"));
        }
        self.schedule.validate()?;
        self.curriculum.validate()
    }

    pub fn num_layers(&self) -> usize {
        self.architecture.len() - 1
    }

    pub fn predict_config(&self) -> PredictConfig {
        PredictConfig {
            num_classes: self.num_classes,
            goodness: self.toggles.goodness_kind(),
            skip_first_layer: self.prediction_skip_first_layer,
            normalize_between_layers: self.normalize_between_layers,
            theta0: self.schedule.theta0,
            adaptive_threshold: self.toggles.adaptive_threshold,
        }
    }

    /// Threshold used by layer `l` at progress `p`.
    pub fn threshold(&self, layer: usize, p: f64) -> Result<f64> {
        if self.toggles.adaptive_threshold {
            self.schedule.threshold(layer, self.num_layers(), p)
        } else {
            Ok(self.schedule.theta0)
        }
    }

    pub fn learning_rate(&self, epoch: usize) -> Result<f64> {
        if self.toggles.lr_schedule {
            self.schedule.learning_rate(epoch)
        } else {
            Ok(self.schedule.eta0)
        }
    }
}

/// A stack of FF layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T: Real = f32> {
    pub layers: Vec<FFLayer<T>>,
}

impl<T: Real> Network<T> {
    /// Kaiming-initialized layers for `architecture` (input width first),
    /// drawn in layer order from `rng`.
    pub fn new(architecture: &[usize], rng: &mut SeededRng) -> Result<Self> {
        let layers = architecture
            .windows(2)
            .enumerate()
            .map(|(i, w)| FFLayer::new(w[0], w[1], i, rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { layers })
    }

    pub fn input_width(&self) -> Option<usize> {
        self.layers.first().map(|l| l.in_dim())
    }

    pub fn architecture(&self) -> Vec<usize> {
        let mut arch: Vec<usize> = self.layers.first().map(|l| l.in_dim()).into_iter().collect();
        arch.extend(self.layers.iter().map(|l| l.out_dim()));
        arch
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerRecord {
    pub threshold: f64,
    pub loss: f64,
    pub mean_g_pos: f64,
    pub mean_g_neg: f64,
}

/// Metrics of one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainRecord {
    pub epoch: usize,
    pub lr: f64,
    /// `None` when curriculum mining is off.
    pub stage: Option<Stage>,
    /// Negatives used over candidates offered, across the epoch.
    pub selected_fraction: f64,
    pub guarantee_applied: bool,
    pub layers: Vec<LayerRecord>,
    pub train_acc: Option<f64>,
    pub test_acc: Option<f64>,
    /// Training time of the epoch, excluding accuracy evaluation.
    pub wall_seconds: f64,
}

/// Stateful trainer: the network plus the random streams that drive shuffling,
/// negative labels and mining.
pub struct Trainer<T: Real = f32> {
    config: TrainConfig,
    network: Network<T>,
    goodness: Vec<LayerGoodness<T>>,
    shuffle_rng: SeededRng,
    label_rng: SeededRng,
    mining_rng: SeededRng,
}

impl<T: Real> Trainer<T> {
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let network = Network::new(
            &config.architecture,
            &mut stream_rng(config.seed, RngStream::Init),
        )?;
        Self::with_network(config, network)
    }

    pub fn with_network(config: TrainConfig, network: Network<T>) -> Result<Self> {
        config.validate()?;
        if network.architecture() != config.architecture {
            return Err(Error::State(format!(
                "network {:?} does not match configured architecture {:?}",
                network.architecture(),
                config.architecture
            )));
        }
        let num_layers = config.num_layers();
        let goodness = (0..num_layers)
            .map(|l| {
                LayerGoodness::new(
                    config.toggles.goodness_kind(),
                    l,
                    num_layers,
                    config.architecture[l + 1],
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let seed = config.seed;
        Ok(Self {
            config,
            network,
            goodness,
            shuffle_rng: stream_rng(seed, RngStream::Shuffle),
            label_rng: stream_rng(seed, RngStream::NegativeLabels),
            mining_rng: stream_rng(seed, RngStream::Mining),
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn network(&self) -> &Network<T> {
        &self.network
    }

    pub fn network_mut(&mut self) -> &mut Network<T> {
        &mut self.network
    }

    pub fn into_network(self) -> Network<T> {
        self.network
    }

    /// Trains one epoch (1-based) over `data`, shuffled into mini-batches.
    /// Accuracy fields of the returned record are left empty.
    pub fn run_epoch(&mut self, epoch: usize, data: &LabeledDataset) -> Result<TrainRecord> {
        let start = Instant::now();
        let cfg = &self.config;
        if data.input_width() != cfg.architecture[0] || data.num_classes() != cfg.num_classes {
            return Err(Error::Dimension {
                op: "training data",
                left: (data.len(), data.input_width()),
                right: (cfg.num_classes, cfg.architecture[0]),
            });
        }
        if data.is_empty() {
            return Err(Error::State("training set is empty".into()));
        }
        let p = progress(epoch, cfg.schedule.total_epochs);
        let lr = cfg.learning_rate(epoch)?;
        let num_layers = cfg.num_layers();
        let thresholds = (0..num_layers)
            .map(|l| cfg.threshold(l, p))
            .collect::<Result<Vec<f64>>>()?;

        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut self.shuffle_rng);

        let mut sums = vec![[0.0f64; 3]; num_layers];
        let mut batches = 0usize;
        let (mut offered, mut used) = (0usize, 0usize);
        let mut guarantee_applied = false;

        for chunk in order.chunks(cfg.batch_size) {
            let images: Matrix<T> = data.images().select_rows(chunk)?.cast();
            let labels: Vec<usize> = chunk.iter().map(|&i| data.labels()[i]).collect();
            let mut x_pos = overlay_labels(&images, &labels, cfg.num_classes);
            let neg_labels = wrong_labels(&labels, cfg.num_classes, &mut self.label_rng)?;
            let candidates = overlay_labels(&images, &neg_labels, cfg.num_classes);
            drop(images);

            let (mut x_neg, mut h_neg_first) = if cfg.toggles.curriculum {
                let (scores, h_first) = self.score_candidates(&candidates)?;
                let mined = mine_negatives(
                    &scores,
                    p,
                    cfg.schedule.theta0,
                    &cfg.curriculum,
                    &mut self.mining_rng,
                )?;
                guarantee_applied |= mined.guarantee_applied;
                let sel = &mined.selected_indices;
                (candidates.select_rows(sel)?, Some(h_first.select_rows(sel)?))
            } else {
                (candidates, None)
            };
            offered += chunk.len();
            used += x_neg.rows();

            for (l, layer) in self.network.layers.iter_mut().enumerate() {
                let theta = T::from_f64_lossy(thresholds[l]);
                let out = layer
                    .train_step(
                        &x_pos,
                        &x_neg,
                        h_neg_first.take().as_ref(),
                        theta,
                        lr,
                        &self.goodness[l],
                    )
                    .map_err(|e| with_epoch(e, epoch))?;
                sums[l][0] += out.loss.as_f64();
                sums[l][1] += out.mean_g_pos.as_f64();
                sums[l][2] += out.mean_g_neg.as_f64();
                x_pos = out.h_pos;
                x_neg = out.h_neg;
                if cfg.normalize_between_layers {
                    x_pos.normalize_rows_in_place();
                    x_neg.normalize_rows_in_place();
                }
            }
            batches += 1;
        }

        let nb = batches as f64;
        Ok(TrainRecord {
            epoch,
            lr,
            stage: cfg.toggles.curriculum.then(|| cfg.curriculum.stage(p)),
            selected_fraction: used as f64 / offered as f64,
            guarantee_applied,
            layers: sums
                .iter()
                .zip(&thresholds)
                .map(|(s, &threshold)| LayerRecord {
                    threshold,
                    loss: s[0] / nb,
                    mean_g_pos: s[1] / nb,
                    mean_g_neg: s[2] / nb,
                })
                .collect(),
            train_acc: None,
            test_acc: None,
            wall_seconds: start.elapsed().as_secs_f64(),
        })
    }

    /// Mining scores for the candidates and the first layer's activations on
    /// them (reused by the first layer's update, whose parameters are unchanged
    /// at that point).
    fn score_candidates(&self, candidates: &Matrix<T>) -> Result<(Vec<T>, Matrix<T>)> {
        let first = &self.network.layers[0];
        let h_first = first.forward(candidates)?;
        let scores = match self.config.mining_scoring {
            MiningScoring::FirstLayer => self.goodness[0].batch_scores(&h_first),
            MiningScoring::AllLayers => {
                let mut total = self.goodness[0].batch_scores(&h_first);
                let mut x = h_first.clone();
                for (layer, goodness) in self.network.layers.iter().zip(&self.goodness).skip(1) {
                    if self.config.normalize_between_layers {
                        x.normalize_rows_in_place();
                    }
                    x = layer.forward(&x)?;
                    for (t, g) in total.iter_mut().zip(goodness.batch_scores(&x)) {
                        *t = *t + g;
                    }
                }
                let n = T::from_usize(self.network.layers.len()).unwrap();
                total.into_iter().map(|t| t / n).collect()
            }
        };
        Ok((scores, h_first))
    }
}

fn with_epoch(e: Error, epoch: usize) -> Error {
    match e {
        Error::NonFinite { layer, detail, .. } => Error::NonFinite { epoch, layer, detail },
        other => other,
    }
}

/// Runs every epoch of `config`, evaluating accuracy on the configured
/// cadence. `on_epoch` sees each record as soon as it is complete.
pub fn train(
    config: &TrainConfig,
    train_set: &LabeledDataset,
    test_set: Option<&LabeledDataset>,
    mut on_epoch: impl FnMut(&TrainRecord),
) -> Result<(Network<f32>, Vec<TrainRecord>)> {
    let mut trainer = Trainer::<f32>::new(config.clone())?;
    let predict_cfg = config.predict_config();
    let total = config.schedule.total_epochs;
    let mut records = Vec::with_capacity(total);
    for epoch in 1..=total {
        let mut rec = trainer.run_epoch(epoch, train_set)?;
        if epoch % config.eval_every == 0 || epoch == total {
            rec.train_acc = Some(accuracy(trainer.network(), train_set, &predict_cfg)?);
            if let Some(test) = test_set {
                rec.test_acc = Some(accuracy(trainer.network(), test, &predict_cfg)?);
            }
        }
        on_epoch(&rec);
        records.push(rec);
    }
    Ok((trainer.into_network(), records))
}
