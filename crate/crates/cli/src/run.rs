//! The `train`, `eval` and `ablate` subcommands.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use amga::data::{load_split, LabeledDataset, Split, NUM_CLASSES};
use amga::engine::{predict, train, Network, PredictConfig, Toggles, TrainRecord};
use amga::goodness::GoodnessKind;

use crate::checkpoint::{load_checkpoint, save_checkpoint};
use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::metrics::MetricsWriter;

pub const METRICS_FILE: &str = "metrics.csv";
pub const CHECKPOINT_FILE: &str = "model.amga";
pub const ABLATION_FILE: &str = "ablation.csv";

/// Full AMGA and each single component switched off.
pub const ABLATIONS: [(&str, Toggles); 5] = [
    ("full", Toggles::ALL),
    (
        "no_multiscale",
        Toggles {
            multiscale: false,
            ..Toggles::ALL
        },
    ),
    (
        "no_curriculum",
        Toggles {
            curriculum: false,
            ..Toggles::ALL
        },
    ),
    (
        "no_adaptive_threshold",
        Toggles {
            adaptive_threshold: false,
            ..Toggles::ALL
        },
    ),
    (
        "no_lr_schedule",
        Toggles {
            lr_schedule: false,
            ..Toggles::ALL
        },
    ),
];

#[derive(Debug)]
pub struct TrainOutcome {
    pub network: Network<f32>,
    pub records: Vec<TrainRecord>,
    pub metrics_path: PathBuf,
    pub checkpoint_path: PathBuf,
}

impl TrainOutcome {
    pub fn final_test_acc(&self) -> Option<f64> {
        self.records.last().and_then(|r| r.test_acc)
    }

    /// Median training time per epoch in seconds.
    pub fn median_epoch_seconds(&self) -> f64 {
        median(self.records.iter().map(|r| r.wall_seconds).collect())
    }
}

pub fn median(mut xs: Vec<f64>) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        0.5 * (xs[m - 1] + xs[m])
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))
}

/// Loads the configured data and trains; see [`train_on`].
pub fn run_train(cfg: &ExperimentConfig, out_dir: &Path, verbose: bool) -> Result<TrainOutcome> {
    let (train_set, test_set) = cfg.load_data()?;
    train_on(cfg, &train_set, &test_set, out_dir, verbose)
}

/// Trains on already loaded data, streaming `metrics.csv` into `out_dir` and
/// writing `model.amga` when done. A diverging run leaves the metrics of the
/// epochs it completed.
pub fn train_on(
    cfg: &ExperimentConfig,
    train_set: &LabeledDataset,
    test_set: &LabeledDataset,
    out_dir: &Path,
    verbose: bool,
) -> Result<TrainOutcome> {
    create_dir(out_dir)?;
    let metrics_path = out_dir.join(METRICS_FILE);
    let file = File::create(&metrics_path)
        .map_err(|e| CliError::io(format!("creating {}", metrics_path.display()), e))?;
    let mut writer = MetricsWriter::new(BufWriter::new(file), cfg.train.num_layers())?;
    let mut write_error = None;
    let total = cfg.train.schedule.total_epochs;

    let (network, records) = train(&cfg.train, train_set, Some(test_set), |rec| {
        if write_error.is_none() {
            write_error = writer.write(rec).err();
        }
        if verbose {
            report_epoch(rec, total);
        }
    })?;
    if let Some(e) = write_error {
        return Err(e);
    }

    let checkpoint_path = out_dir.join(CHECKPOINT_FILE);
    save_checkpoint(&network, &checkpoint_path)?;
    Ok(TrainOutcome {
        network,
        records,
        metrics_path,
        checkpoint_path,
    })
}

fn report_epoch(rec: &TrainRecord, total: usize) {
    let last = rec.layers.last().map_or(f64::NAN, |l| l.loss);
    let mut line = format!(
        "epoch {:>5}/{total}  lr {:.5}  loss(last) {last:.4}  neg {:.3}  {:.2}s",
        rec.epoch, rec.lr, rec.selected_fraction, rec.wall_seconds
    );
    if let (Some(tr), Some(te)) = (rec.train_acc, rec.test_acc) {
        line.push_str(&format!("  train {:.2}%  test {:.2}%", 100.0 * tr, 100.0 * te));
    } else if !rec.epoch.is_multiple_of(10) {
        return;
    }
    eprintln!("{line}");
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub samples: usize,
    pub accuracy: f64,
    /// Mean over samples of each layer's `σ(g − θ)` for the predicted class.
    pub mean_positive_probability: Vec<f64>,
}

/// Scoring used when `eval` gets no experiment file: the defaults of a full
/// AMGA run.
pub fn default_predict_config() -> PredictConfig {
    PredictConfig {
        num_classes: NUM_CLASSES,
        goodness: GoodnessKind::MultiScale,
        skip_first_layer: true,
        normalize_between_layers: true,
        theta0: 2.0,
        adaptive_threshold: true,
    }
}

/// Scores a checkpoint on one split of `data_dir`. Only reads files.
pub fn run_eval(
    checkpoint: &Path,
    data_dir: &Path,
    split: Split,
    scoring: &PredictConfig,
) -> Result<EvalReport> {
    let network = load_checkpoint(checkpoint)?;
    let data = load_split(data_dir, split)?;
    evaluate(&network, &data, scoring)
}

pub fn evaluate(
    network: &Network<f32>,
    data: &LabeledDataset,
    scoring: &PredictConfig,
) -> Result<EvalReport> {
    let pred = predict(network, data.images(), scoring)?;
    let hits = pred
        .labels
        .iter()
        .zip(data.labels())
        .filter(|(a, b)| a == b)
        .count();
    let n = data.len().max(1) as f64;
    let layers = pred.positive_probability.cols();
    let mean_positive_probability = (0..layers)
        .map(|l| {
            (0..data.len())
                .map(|i| pred.positive_probability.get(i, l))
                .sum::<f64>()
                / n
        })
        .collect();
    Ok(EvalReport {
        samples: data.len(),
        accuracy: hits as f64 / n,
        mean_positive_probability,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub variant: &'static str,
    pub test_acc: f64,
    /// Full-run accuracy minus this variant's.
    pub delta: f64,
}

/// Trains the five [`ABLATIONS`] on the same seed, each into its own
/// subdirectory, and writes `ablation.csv` with final test accuracies.
pub fn run_ablate(cfg: &ExperimentConfig, out_dir: &Path, verbose: bool) -> Result<Vec<AblationRow>> {
    let (train_set, test_set) = cfg.load_data()?;
    let mut accs = Vec::with_capacity(ABLATIONS.len());
    for (name, toggles) in ABLATIONS {
        if verbose {
            eprintln!("== {name}");
        }
        let outcome = train_on(
            &cfg.with_toggles(toggles),
            &train_set,
            &test_set,
            &out_dir.join(name),
            verbose,
        )?;
        let acc = outcome.final_test_acc().ok_or_else(|| {
            CliError::Engine(amga::Error::State("run ended without a test accuracy".into()))
        })?;
        accs.push((name, acc));
    }
    let full = accs[0].1;
    let rows: Vec<AblationRow> = accs
        .into_iter()
        .map(|(variant, test_acc)| AblationRow {
            variant,
            test_acc,
            delta: full - test_acc,
        })
        .collect();
    write_ablation(&rows, &out_dir.join(ABLATION_FILE))?;
    Ok(rows)
}

pub fn write_ablation(rows: &[AblationRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["variant", "test_acc", "delta"])?;
    for r in rows {
        w.write_record([r.variant.to_string(), r.test_acc.to_string(), r.delta.to_string()])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_odd_and_even() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(vec![]).is_nan());
    }

    #[test]
    fn ablations_switch_off_one_component_each() {
        assert_eq!(ABLATIONS[0].1, Toggles::ALL);
        for (_, t) in &ABLATIONS[1..] {
            let off = [
                !t.multiscale,
                !t.curriculum,
                !t.adaptive_threshold,
                !t.lr_schedule,
            ];
            assert_eq!(off.iter().filter(|&&b| b).count(), 1);
        }
    }
}
