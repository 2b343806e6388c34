//! Three-stage curriculum negative mining.
//!
//! Candidates are scored by goodness `g` against a threshold `θ`. Every stage
//! keeps the band `|g − θ| ≤ r(p)` whose radius grows with progress `p`
//! (0.3 → 0.5 early, 0.5 → 1.0 middle, 1.0 → 1.5 late). The middle stage also
//! admits each very hard candidate (`g > θ + margin`) with probability 0.4. The
//! late stage admits each candidate with `g > θ` with probability 0.5. If the
//! result holds fewer than `⌈0.6·N⌉` candidates, the highest-goodness rejects
//! are added (lower index wins ties) until it holds exactly that many.
//!
//! Random draws: one `U ~ Uniform[0, 1)` per hard-set candidate, taken in
//! ascending index order, and none in the early stage.

use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::{Real, SeededRng};

const RADIUS_START: f64 = 0.3;
const RADIUS_EARLY_END: f64 = 0.5;
const RADIUS_LATE_START: f64 = 1.0;
const RADIUS_END: f64 = 1.5;

#[derive(Debug, Clone, PartialEq)]
pub struct CurriculumConfig {
    pub early_end: f64,
    pub late_start: f64,
    pub mid_hard_rate: f64,
    pub late_hard_rate: f64,
    pub min_fill: f64,
    pub hard_margin: f64,
}

impl Default for CurriculumConfig {
    fn default() -> Self {
        Self {
            early_end: 0.3,
            late_start: 0.7,
            mid_hard_rate: 0.4,
            late_hard_rate: 0.5,
            min_fill: 0.6,
            hard_margin: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Early,
    Middle,
    Late,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Early => "early",
            Stage::Middle => "middle",
            Stage::Late => "late",
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MiningResult {
    /// Selected candidate indices, ascending.
    pub selected_indices: Vec<usize>,
    pub band_radius: f64,
    pub stage: Stage,
    pub guarantee_applied: bool,
    /// How many indices the minimum-fill guarantee added.
    pub fill_count: usize,
}

impl MiningResult {
    pub fn selected_fraction(&self, candidates: usize) -> f64 {
        self.selected_indices.len() as f64 / candidates as f64
    }
}

impl CurriculumConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| x > 0.0 && x <= 1.0;
        let ok = self.early_end > 0.0
            && self.early_end <= self.late_start
            && self.late_start < 1.0
            && unit(self.mid_hard_rate)
            && unit(self.late_hard_rate)
            && unit(self.min_fill)
            && self.hard_margin.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::domain("curriculum config", format!("{self:?}")))
        }
    }

    pub fn stage(&self, p: f64) -> Stage {
        if p < self.early_end {
            Stage::Early
        } else if p < self.late_start {
            Stage::Middle
        } else {
            Stage::Late
        }
    }

    pub fn band_radius(&self, p: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::domain(
                "band_radius",
                format!("progress {p} outside [0, 1]"),
            ));
        }
        Ok(match self.stage(p) {
            Stage::Early => RADIUS_START + (RADIUS_EARLY_END - RADIUS_START) * p / self.early_end,
            Stage::Middle => {
                RADIUS_EARLY_END
                    + (RADIUS_LATE_START - RADIUS_EARLY_END) * (p - self.early_end)
                        / (self.late_start - self.early_end)
            }
            Stage::Late => {
                RADIUS_LATE_START
                    + (RADIUS_END - RADIUS_LATE_START) * (p - self.late_start) / (1.0 - self.late_start)
            }
        })
    }

    /// `⌈min_fill · n⌉`, clamped to `[1, n]`.
    pub fn min_selected(&self, n: usize) -> usize {
        // the epsilon absorbs representation error, e.g. 0.6·5 = 3.0000000000000004
        let target = (self.min_fill * n as f64 - 1e-9).ceil() as usize;
        target.clamp(1, n)
    }
}

/// Band radius with the default stage boundaries.
pub fn band_radius(p: f64) -> Result<f64> {
    CurriculumConfig::default().band_radius(p)
}

pub fn mine_negatives<T: Real>(
    g_neg: &[T],
    p: f64,
    theta: f64,
    cfg: &CurriculumConfig,
    rng: &mut SeededRng,
) -> Result<MiningResult> {
    let n = g_neg.len();
    if n == 0 {
        return Err(Error::domain("mine_negatives", "no candidate negatives"));
    }
    if !theta.is_finite() {
        return Err(Error::domain(
            "mine_negatives",
            format!("threshold {theta} is not finite"),
        ));
    }
    let radius = cfg.band_radius(p)?;
    let stage = cfg.stage(p);
    let hard = match stage {
        Stage::Early => None,
        Stage::Middle => Some((theta + cfg.hard_margin, cfg.mid_hard_rate)),
        Stage::Late => Some((theta, cfg.late_hard_rate)),
    };

    let mut selected = vec![false; n];
    for (i, &g) in g_neg.iter().enumerate() {
        let g = g.as_f64();
        let in_band = (g - theta).abs() <= radius;
        let admitted = match hard {
            Some((floor, rate)) if g > floor => rng.random::<f64>() < rate,
            _ => false,
        };
        selected[i] = in_band || admitted;
    }

    let mut count = selected.iter().filter(|&&s| s).count();
    let target = cfg.min_selected(n);
    let mut fill_count = 0;
    if count < target {
        let mut rest: Vec<usize> = (0..n).filter(|&i| !selected[i]).collect();
        // `+ 0.0` folds -0.0 into 0.0 so equal scores tie on index
        rest.sort_by(|&a, &b| {
            (g_neg[b].as_f64() + 0.0)
                .total_cmp(&(g_neg[a].as_f64() + 0.0))
                .then(a.cmp(&b))
        });
        for &i in rest.iter().take(target - count) {
            selected[i] = true;
            fill_count += 1;
        }
        count = target;
    }

    let selected_indices: Vec<usize> = (0..n).filter(|&i| selected[i]).collect();
    debug_assert_eq!(selected_indices.len(), count);
    Ok(MiningResult {
        selected_indices,
        band_radius: radius,
        stage,
        guarantee_applied: fill_count > 0,
        fill_count,
    })
}
