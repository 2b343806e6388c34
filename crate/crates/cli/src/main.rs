use std::path::{Path, PathBuf};
use std::process::ExitCode;

use amga::data::Split;
use amga_cli::config::{parse_config, ExperimentConfig, SEED_ENV};
use amga_cli::run::{default_predict_config, run_ablate, run_eval, run_train};
use amga_cli::Result;
use clap::{Parser, Subcommand, ValueEnum};

/// Train, evaluate and ablate multi-scale Forward-Forward networks.
#[derive(Debug, Parser)]
#[command(name = "amga", version)]
struct Cli {
    /// Only print errors and final results.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train from an experiment file, writing metrics.csv and model.amga.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Defaults to runs/<config file stem>.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Report the accuracy of a checkpoint on a dataset directory.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Directory with the four IDX files.
        #[arg(long)]
        data: PathBuf,
        /// Experiment file whose scoring settings to use (goodness kind,
        /// normalization, skipped layer, threshold).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = SplitArg::Test)]
        split: SplitArg,
    },
    /// Train full AMGA and each single-component ablation on the same seed.
    Ablate {
        #[arg(long)]
        config: PathBuf,
        /// Defaults to runs/<config file stem>_ablation.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Test,
}

fn load(path: &Path) -> Result<ExperimentConfig> {
    let mut cfg = parse_config(path)?;
    cfg.override_seed(std::env::var(SEED_ENV).ok().as_deref())?;
    Ok(cfg)
}

fn default_out(config: &Path, suffix: &str) -> PathBuf {
    let stem = config
        .file_stem()
        .map_or("run".into(), |s| s.to_string_lossy().into_owned());
    Path::new("runs").join(format!("{stem}{suffix}"))
}

fn run(cli: Cli) -> Result<()> {
    let verbose = !cli.quiet;
    match cli.command {
        Command::Train { config, out_dir } => {
            let cfg = load(&config)?;
            let out = out_dir.unwrap_or_else(|| default_out(&config, ""));
            let outcome = run_train(&cfg, &out, verbose)?;
            if let Some(acc) = outcome.final_test_acc() {
                println!("test accuracy {:.2}%", 100.0 * acc);
            }
            println!("median epoch time {:.3}s", outcome.median_epoch_seconds());
            println!("metrics {}", outcome.metrics_path.display());
            println!("checkpoint {}", outcome.checkpoint_path.display());
        }
        Command::Eval {
            checkpoint,
            data,
            config,
            split,
        } => {
            let scoring = match config {
                Some(path) => load(&path)?.train.predict_config(),
                None => default_predict_config(),
            };
            let split = match split {
                SplitArg::Train => Split::Train,
                SplitArg::Test => Split::Test,
            };
            let report = run_eval(&checkpoint, &data, split, &scoring)?;
            println!("samples {}", report.samples);
            println!("accuracy {:.2}%", 100.0 * report.accuracy);
            for (l, p) in report.mean_positive_probability.iter().enumerate() {
                println!("layer {l} mean p(positive) {p:.4}");
            }
        }
        Command::Ablate { config, out_dir } => {
            let cfg = load(&config)?;
            let out = out_dir.unwrap_or_else(|| default_out(&config, "_ablation"));
            let rows = run_ablate(&cfg, &out, verbose)?;
            println!("{:<24}{:>10}{:>10}", "variant", "test_acc", "delta");
            for r in rows {
                println!(
                    "{:<24}{:>9.2}%{:>9.2}",
                    r.variant,
                    100.0 * r.test_acc,
                    100.0 * r.delta
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
