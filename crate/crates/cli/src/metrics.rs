//! Per-epoch metrics as CSV.
//!
//! The column set depends only on the number of layers: `epoch, lr, stage,
//! selected_fraction`, then `theta_l{i}`, `loss_l{i}`, `g_pos_l{i}` and
//! `g_neg_l{i}` for each layer `i` (0-based), then `train_acc, test_acc` and
//! finally `wall_seconds`. Accuracy cells are empty on epochs without an
//! evaluation; `stage` is `off` when mining is disabled. Floats use the
//! shortest representation that reads back exactly, so identical runs give
//! identical files apart from the last column.

use std::io::Write;

use amga::engine::TrainRecord;

use crate::error::Result;

pub const WALL_SECONDS: &str = "wall_seconds";

pub fn header(num_layers: usize) -> Vec<String> {
    let mut cols: Vec<String> = ["epoch", "lr", "stage", "selected_fraction"]
        .map(String::from)
        .to_vec();
    for prefix in ["theta", "loss", "g_pos", "g_neg"] {
        cols.extend((0..num_layers).map(|l| format!("{prefix}_l{l}")));
    }
    cols.extend(["train_acc", "test_acc", WALL_SECONDS].map(String::from));
    cols
}

pub fn row(rec: &TrainRecord) -> Vec<String> {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut cells = vec![
        rec.epoch.to_string(),
        rec.lr.to_string(),
        rec.stage.map_or("off", |s| s.as_str()).to_string(),
        rec.selected_fraction.to_string(),
    ];
    cells.extend(rec.layers.iter().map(|l| l.threshold.to_string()));
    cells.extend(rec.layers.iter().map(|l| l.loss.to_string()));
    cells.extend(rec.layers.iter().map(|l| l.mean_g_pos.to_string()));
    cells.extend(rec.layers.iter().map(|l| l.mean_g_neg.to_string()));
    cells.push(opt(rec.train_acc));
    cells.push(opt(rec.test_acc));
    cells.push(rec.wall_seconds.to_string());
    cells
}

/// Streams records to CSV, flushing after each one so partial runs stay
/// readable.
pub struct MetricsWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> MetricsWriter<W> {
    pub fn new(out: W, num_layers: usize) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(out);
        inner.write_record(header(num_layers))?;
        inner.flush().map_err(csv::Error::from)?;
        Ok(Self { inner })
    }

    pub fn write(&mut self, rec: &TrainRecord) -> Result<()> {
        self.inner.write_record(row(rec))?;
        self.inner.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}
