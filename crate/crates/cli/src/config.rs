//! Experiment files.
//!
//! ```toml
//! dataset = "mnist"            # or "fashion_mnist"
//! data_dir = "../data/mnist"   # relative to this file
//! train_subset = 10000         # optional: first N training images
//! architecture = [784, 200, 200]
//! epochs = 200
//! batch_size = 5000
//! seed = 1
//!
//! [toggles]
//! multiscale = true
//! curriculum = true
//! adaptive_threshold = true
//! lr_schedule = true
//! ```
//!
//! Anything left out takes the dataset's published setting: MNIST uses
//! `θ₀ = 2.0`, `η₀ = 0.04`, `[784, 600, 600, 500]` and 1500 epochs;
//! Fashion-MNIST uses `θ₀ = 2.5`, `η₀ = 0.05`, `[784, 700, 700, 600]` and
//! 2500 epochs. Both default to batches of 50 000.

use std::path::{Path, PathBuf};

use amga::curriculum::CurriculumConfig;
use amga::data::{load_split, LabeledDataset, Split, NUM_CLASSES};
use amga::engine::{MiningScoring, Toggles, TrainConfig};
use amga::schedules::ScheduleConfig;
use serde::Deserialize;

use crate::error::{CliError, Result};

/// Environment variable that replaces the configured seed.
pub const SEED_ENV: &str = "AMGA_SEED";

const INPUT_WIDTH: usize = 784;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dataset {
    Mnist,
    FashionMnist,
}

impl Dataset {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Mnist => "mnist",
            Self::FashionMnist => "fashion_mnist",
        }
    }

    fn defaults(self) -> Defaults {
        match self {
            Self::Mnist => Defaults {
                theta0: 2.0,
                eta0: 0.04,
                architecture: &[784, 600, 600, 500],
                epochs: 1500,
            },
            Self::FashionMnist => Defaults {
                theta0: 2.5,
                eta0: 0.05,
                architecture: &[784, 700, 700, 600],
                epochs: 2500,
            },
        }
    }
}

struct Defaults {
    theta0: f64,
    eta0: f64,
    architecture: &'static [usize],
    epochs: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    dataset: Dataset,
    data_dir: PathBuf,
    train_subset: Option<usize>,
    architecture: Option<Vec<usize>>,
    theta0: Option<f64>,
    eta0: Option<f64>,
    epochs: Option<usize>,
    batch_size: Option<usize>,
    seed: Option<u64>,
    eval_every: Option<usize>,
    normalize_between_layers: Option<bool>,
    prediction_skip_first_layer: Option<bool>,
    mining_scoring: Option<ScoringName>,
    #[serde(default)]
    toggles: RawToggles,
    #[serde(default)]
    curriculum: RawCurriculum,
    #[serde(default)]
    schedule: RawSchedule,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ScoringName {
    FirstLayer,
    AllLayers,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawToggles {
    multiscale: Option<bool>,
    curriculum: Option<bool>,
    adaptive_threshold: Option<bool>,
    lr_schedule: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCurriculum {
    early_end: Option<f64>,
    late_start: Option<f64>,
    mid_hard_rate: Option<f64>,
    late_hard_rate: Option<f64>,
    min_fill: Option<f64>,
    hard_margin: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSchedule {
    warmup_frac: Option<f64>,
    eta_min_ratio: Option<f64>,
    depth_gain: Option<f64>,
    progress_gain: Option<f64>,
}

/// A validated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: Dataset,
    /// Directory holding the four IDX files, already resolved.
    pub data_dir: PathBuf,
    /// Train on the first `n` training images only.
    pub train_subset: Option<usize>,
    pub train: TrainConfig,
}

/// Reads and validates an experiment file. Relative `data_dir` paths are taken
/// from the file's own directory.
pub fn parse_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let source =
        std::fs::read_to_string(path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
    let base = path.parent().unwrap_or(Path::new(""));
    ExperimentConfig::from_toml(&source, path, base)
}

impl ExperimentConfig {
    /// Parses `source`; `file` labels errors and `base` anchors `data_dir`.
    pub fn from_toml(source: &str, file: &Path, base: &Path) -> Result<Self> {
        let err = |key: &str, detail: String| CliError::Config {
            file: file.to_path_buf(),
            key: key.to_string(),
            line: line_of(source, key),
            detail,
        };
        let raw: RawConfig = toml::from_str(source).map_err(|e| parse_error(source, file, &e))?;
        let d = raw.dataset.defaults();

        let architecture = raw.architecture.unwrap_or_else(|| d.architecture.to_vec());
        if architecture.len() < 2 {
            return Err(err(
                "architecture",
                format!("{architecture:?}: need the input width and at least one layer"),
            ));
        }
        if architecture[0] != INPUT_WIDTH {
            return Err(err(
                "architecture",
                format!(
                    "input width is {}, images have {INPUT_WIDTH} pixels",
                    architecture[0]
                ),
            ));
        }
        if architecture.contains(&0) {
            return Err(err(
                "architecture",
                format!("{architecture:?}: widths must be >= 1"),
            ));
        }
        for (key, v) in [
            ("epochs", raw.epochs),
            ("batch_size", raw.batch_size),
            ("eval_every", raw.eval_every),
            ("train_subset", raw.train_subset),
        ] {
            if v == Some(0) {
                return Err(err(key, "must be >= 1".into()));
            }
        }
        let theta0 = raw.theta0.unwrap_or(d.theta0);
        let eta0 = raw.eta0.unwrap_or(d.eta0);
        for (key, v) in [("theta0", theta0), ("eta0", eta0)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(err(key, format!("{v} must be a positive number")));
            }
        }

        let mut schedule = ScheduleConfig::new(theta0, eta0, raw.epochs.unwrap_or(d.epochs));
        let s = &raw.schedule;
        schedule.warmup_frac = s.warmup_frac.unwrap_or(schedule.warmup_frac);
        schedule.eta_min_ratio = s.eta_min_ratio.unwrap_or(schedule.eta_min_ratio);
        schedule.depth_gain = s.depth_gain.unwrap_or(schedule.depth_gain);
        schedule.progress_gain = s.progress_gain.unwrap_or(schedule.progress_gain);
        schedule.validate().map_err(|e| err("schedule", e.to_string()))?;

        let mut curriculum = CurriculumConfig::default();
        let c = &raw.curriculum;
        curriculum.early_end = c.early_end.unwrap_or(curriculum.early_end);
        curriculum.late_start = c.late_start.unwrap_or(curriculum.late_start);
        curriculum.mid_hard_rate = c.mid_hard_rate.unwrap_or(curriculum.mid_hard_rate);
        curriculum.late_hard_rate = c.late_hard_rate.unwrap_or(curriculum.late_hard_rate);
        curriculum.min_fill = c.min_fill.unwrap_or(curriculum.min_fill);
        curriculum.hard_margin = c.hard_margin.unwrap_or(curriculum.hard_margin);
        curriculum
            .validate()
            .map_err(|e| err("curriculum", e.to_string()))?;

        let t = &raw.toggles;
        let toggles = Toggles {
            multiscale: t.multiscale.unwrap_or(true),
            curriculum: t.curriculum.unwrap_or(true),
            adaptive_threshold: t.adaptive_threshold.unwrap_or(true),
            lr_schedule: t.lr_schedule.unwrap_or(true),
        };

        let train = TrainConfig {
            architecture,
            num_classes: NUM_CLASSES,
            schedule,
            curriculum,
            batch_size: raw.batch_size.unwrap_or(50_000),
            seed: raw.seed.unwrap_or(0),
            toggles,
            normalize_between_layers: raw.normalize_between_layers.unwrap_or(true),
            mining_scoring: match raw.mining_scoring.unwrap_or(ScoringName::FirstLayer) {
                ScoringName::FirstLayer => MiningScoring::FirstLayer,
                ScoringName::AllLayers => MiningScoring::AllLayers,
            },
            prediction_skip_first_layer: raw.prediction_skip_first_layer.unwrap_or(true),
            eval_every: raw.eval_every.unwrap_or(50),
        };
        train.validate().map_err(|e| err("architecture", e.to_string()))?;

        Ok(Self {
            dataset: raw.dataset,
            data_dir: base.join(raw.data_dir),
            train_subset: raw.train_subset,
            train,
        })
    }

    /// Replaces the seed with `value` (the content of [`SEED_ENV`]) if given.
    pub fn override_seed(&mut self, value: Option<&str>) -> Result<()> {
        if let Some(v) = value {
            self.train.seed = v.trim().parse().map_err(|_| CliError::Config {
                file: PathBuf::from(format!("${SEED_ENV}")),
                key: SEED_ENV.into(),
                line: 0,
                detail: format!("{v:?} is not an unsigned 64-bit integer"),
            })?;
        }
        Ok(())
    }

    /// Same experiment with different toggles.
    pub fn with_toggles(&self, toggles: Toggles) -> Self {
        let mut out = self.clone();
        out.train.toggles = toggles;
        out
    }

    /// Training images (optionally truncated) and the full test set.
    pub fn load_data(&self) -> Result<(LabeledDataset, LabeledDataset)> {
        let mut train = load_split(&self.data_dir, Split::Train)?;
        if let Some(n) = self.train_subset {
            train = train.take(n);
        }
        let test = load_split(&self.data_dir, Split::Test)?;
        Ok((train, test))
    }
}

/// 1-based line on which `key` (last dotted segment) is assigned, or 0.
fn line_of(source: &str, key: &str) -> usize {
    let leaf = key.rsplit('.').next().unwrap_or(key);
    source
        .lines()
        .position(|l| {
            l.trim_start()
                .strip_prefix(leaf)
                .is_some_and(|rest| rest.trim_start().starts_with('='))
        })
        .map_or(0, |i| i + 1)
}

fn parse_error(source: &str, file: &Path, e: &toml::de::Error) -> CliError {
    let message = e.message().to_string();
    let (line, line_text) = match e.span() {
        Some(span) => {
            let line = source[..span.start.min(source.len())].matches('\n').count();
            (line + 1, source.lines().nth(line).unwrap_or(""))
        }
        None => (0, ""),
    };
    // serde names unknown and missing fields in backticks; otherwise use the
    // left-hand side of the offending line
    let key = message
        .split('`')
        .nth(1)
        .filter(|_| message.contains("field"))
        .map(str::to_string)
        .or_else(|| line_text.split_once('=').map(|(k, _)| k.trim().to_string()))
        .unwrap_or_default();
    let line = if message.starts_with("missing field") {
        0
    } else {
        line
    };
    CliError::Config {
        file: file.to_path_buf(),
        key,
        line,
        detail: message,
    }
}
