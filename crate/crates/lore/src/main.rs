//! Command-line front end: single training runs, grid and axis sweeps,
//! the multiplicative-vs-additive gap experiment, random hyperparameter
//! search, expressivity self-checks, and metric recomputation.

use clap::{Args, Parser, Subcommand, ValueEnum};
use lore::harness::{
    expressivity_check, export_results, run_gap_experiment, run_grid, run_hpo, run_single,
    DatasetRef, ExperimentConfig, ExportFormat, GridResult, HpoSpace, SweepAxis,
};
use lore::metrics::diversity_report;
use lore::Error;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "lore",
    version,
    about = "Low-rank multiplicative ensembles for tabular data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment config JSON; built-in defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV data file; replaces the config's dataset (needs --schema).
    #[arg(long, requires = "schema")]
    data: Option<PathBuf>,
    /// Dataset schema JSON describing the columns of --data.
    #[arg(long, requires = "data")]
    schema: Option<PathBuf>,
    /// Comma-separated run seeds; replaces the config's seed list.
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    /// Output directory for result files.
    #[arg(long, default_value = "results")]
    out: PathBuf,
}

impl CommonArgs {
    fn resolve(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_json_file(path)?,
            None => ExperimentConfig::default(),
        };
        if let (Some(data), Some(schema)) = (&self.data, &self.schema) {
            cfg.dataset = DatasetRef::Csv {
                data: data.clone(),
                schema: schema.clone(),
                split: None,
            };
        }
        if !self.seeds.is_empty() {
            cfg.seeds = self.seeds.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    JsonLines,
}

impl From<FormatArg> for ExportFormat {
    fn from(f: FormatArg) -> ExportFormat {
        match f {
            FormatArg::Csv => ExportFormat::Csv,
            FormatArg::JsonLines => ExportFormat::JsonLines,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisChoice {
    /// Adapter rank 1..16 at init scale 1.0.
    Rank,
    /// Init scale 0.1..2 at rank 16.
    Sigma,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model; save its checkpoint, epoch history, and metrics.
    Train {
        #[command(flatten)]
        common: CommonArgs,
        /// Checkpoint path (default `<out>/checkpoint.json`).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Run the full (rank, sigma, seed) grid and export records,
    /// per-cell aggregates, and heatmap pivots.
    Grid {
        #[command(flatten)]
        common: CommonArgs,
        /// Worker threads for independent runs.
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Record file encoding.
        #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
        format: FormatArg,
        /// File-name stem of the exported set.
        #[arg(long, default_value = "grid")]
        stem: String,
    },
    /// Sweep a single axis with the other held at its reference value.
    AxisSweep {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum)]
        axis: AxisChoice,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
        format: FormatArg,
    },
    /// Trace ensemble diversity over training for the multiplicative and
    /// additive variants under an identical backbone and seeds.
    Gap {
        #[command(flatten)]
        common: CommonArgs,
        /// File-name stem of the trace file.
        #[arg(long, default_value = "gap")]
        stem: String,
    },
    /// Seeded random hyperparameter search on the validation metric.
    Hpo {
        #[command(flatten)]
        common: CommonArgs,
        /// Number of sampled configurations.
        #[arg(long, default_value_t = 30)]
        budget: usize,
        /// Seed of the sampler (independent of run seeds).
        #[arg(long, default_value_t = 0)]
        hpo_seed: u64,
        /// Search-space JSON; the published tuning space when omitted.
        #[arg(long)]
        space: Option<PathBuf>,
    },
    /// Verify the constructive expressivity results on random instances
    /// and print one JSON verdict per check.
    ExpressivityCheck {
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Recompute the diversity report from a saved prediction dump.
    Metrics {
        /// JSON file holding one per-member prediction object.
        #[arg(long)]
        preds: PathBuf,
    },
}

fn default_grid_axes() -> Vec<SweepAxis> {
    vec![
        SweepAxis {
            param: "r".into(),
            values: vec![1.0, 2.0, 4.0, 8.0, 16.0],
        },
        SweepAxis {
            param: "sigma".into(),
            values: vec![0.1, 0.3, 0.5, 1.0, 2.0, 3.0],
        },
    ]
}

fn export_and_list(
    result: &GridResult,
    out: &Path,
    stem: &str,
    format: ExportFormat,
) -> Result<(), Error> {
    let written = export_results(result, out, stem, format)?;
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn run() -> Result<(), Error> {
    match Cli::parse().command {
        Command::Train { common, checkpoint } => {
            let cfg = common.resolve()?;
            let dataset = cfg.dataset.load()?;
            let cell = lore::harness::CellSettings {
                model: cfg.model.clone(),
                train: cfg.train.clone(),
            };
            let (record, model, report) =
                run_single(&dataset, cfg.variants[0], &cell, cfg.seeds[0])?;
            std::fs::create_dir_all(&common.out)?;
            let ckpt = checkpoint.unwrap_or_else(|| common.out.join("checkpoint.json"));
            model.save_checkpoint(&ckpt)?;
            println!("wrote {}", ckpt.display());
            let history = common.out.join("history.jsonl");
            report.save_jsonl(&history)?;
            println!("wrote {}", history.display());
            let summary = serde_json::json!({
                "dataset": record.dataset,
                "variant": record.variant,
                "best_epoch": report.best_epoch,
                "best_val_metric": report.best_val_metric,
                "epochs_run": report.epochs_run(),
                "wall_time_s": report.wall_time_s,
                "test_metrics": record.metrics,
            });
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        Command::Grid {
            common,
            workers,
            format,
            stem,
        } => {
            let mut cfg = common.resolve()?;
            if cfg.axes.is_empty() {
                cfg.axes = default_grid_axes();
            }
            let result = run_grid(&cfg, workers)?;
            export_and_list(&result, &common.out, &stem, format.into())?;
        }
        Command::AxisSweep {
            common,
            axis,
            workers,
            format,
        } => {
            let mut cfg = common.resolve()?;
            let stem = match axis {
                AxisChoice::Rank => {
                    cfg.model.sigma_init = 1.0;
                    cfg.axes = vec![SweepAxis {
                        param: "r".into(),
                        values: vec![1.0, 2.0, 4.0, 8.0, 16.0],
                    }];
                    "axis_rank"
                }
                AxisChoice::Sigma => {
                    cfg.model.rank = 16;
                    cfg.axes = vec![SweepAxis {
                        param: "sigma".into(),
                        values: vec![0.1, 0.3, 0.5, 1.0, 2.0],
                    }];
                    "axis_sigma"
                }
            };
            let result = run_grid(&cfg, workers)?;
            export_and_list(&result, &common.out, stem, format.into())?;
        }
        Command::Gap { common, stem } => {
            let cfg = common.resolve()?;
            let traces = run_gap_experiment(&cfg)?;
            std::fs::create_dir_all(&common.out)?;
            let path = common.out.join(format!("{stem}.jsonl"));
            let mut text = String::new();
            for trace in &traces {
                text.push_str(&serde_json::to_string(trace)?);
                text.push('\n');
            }
            std::fs::write(&path, text)?;
            println!("wrote {}", path.display());
            for variant in [
                lore::layers::AdapterKind::MultiplicativeLowRank,
                lore::layers::AdapterKind::AdditiveLowRank,
            ] {
                let finals: Vec<f64> = traces
                    .iter()
                    .filter(|t| t.variant == variant)
                    .map(|t| t.final_kl)
                    .collect();
                let mean = finals.iter().sum::<f64>() / finals.len().max(1) as f64;
                println!(
                    "{}: mean final pairwise KL over {} seeds = {mean}",
                    variant.as_str(),
                    finals.len()
                );
            }
        }
        Command::Hpo {
            common,
            budget,
            hpo_seed,
            space,
        } => {
            let cfg = common.resolve()?;
            let space = match space {
                Some(path) => {
                    let text = std::fs::read_to_string(path)?;
                    serde_json::from_str::<HpoSpace>(&text)?
                }
                None => HpoSpace::published_default(),
            };
            let result = run_hpo(&cfg, &space, budget, hpo_seed)?;
            std::fs::create_dir_all(&common.out)?;
            let path = common.out.join("hpo_trials.jsonl");
            let mut text = String::new();
            for trial in &result.trials {
                text.push_str(&serde_json::to_string(trial)?);
                text.push('\n');
            }
            std::fs::write(&path, text)?;
            println!("wrote {}", path.display());
            println!("{}", serde_json::to_string_pretty(result.best())?);
        }
        Command::ExpressivityCheck { trials, seed } => {
            print!("{}", expressivity_check(trials, seed)?);
        }
        Command::Metrics { preds } => {
            let text = std::fs::read_to_string(preds)?;
            let preds: lore::metrics::MemberPredictions = serde_json::from_str(&text)?;
            let report = diversity_report(&preds)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
