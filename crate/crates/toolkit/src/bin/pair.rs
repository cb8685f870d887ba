use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use pair_core::metrics::{self, GoldRule};
use pair_core::pair::{apply_pair, Normalization};
use pair_core::simulation::{build_suite, Task};
use pair_core::trainer::{self, predict, Hyper};
use pair_toolkit::config::ExperimentConfig;
use pair_toolkit::experiment::{self, reference_from_annotations, Study};
use pair_toolkit::formats;
use pair_toolkit::report::{self, Metric};

#[derive(Parser)]
#[command(
    name = "pair",
    version,
    about = "Simulate, rebalance and evaluate annotation pools"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the gold table and the representative, nonrep1 and nonrep2 pools
    /// for one bias value.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        beta: f64,
    },
    /// Replicate a dataset's annotations toward a population benchmark.
    Adjust {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        benchmark: PathBuf,
        /// Explicit normalizing constant instead of min-to-one.
        #[arg(long)]
        k: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        /// Where to write the weight table (default: next to `--out`).
        #[arg(long)]
        weights: Option<PathBuf>,
    },
    /// Train the logistic model on a dataset.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        /// Gold table providing item texts.
        #[arg(long)]
        gold: PathBuf,
        /// Development dataset for epoch selection.
        #[arg(long)]
        dev: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        epochs: Option<u32>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        hash_dim: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a model against a gold table.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        /// Dataset whose annotation majority is the F1 reference; without it
        /// the gold majority is used.
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
    },
    /// Run every (recipe, beta, seed) cell of a configuration.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Pivot a sweep report into a beta-by-recipe table.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "acb")]
        metric: String,
        #[arg(long)]
        task: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// TOML experiment configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// Run a single seed instead of the configured list.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(out) = &self.out {
            config.output_dir = out.clone();
        }
        if let Some(w) = self.workers {
            config.workers = w;
        }
        if let Some(s) = self.seed {
            config.seeds = vec![s];
        }
        config.validate()?;
        Ok(config)
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Simulate { common, beta } => simulate(&common, beta),
        Command::Adjust {
            dataset,
            benchmark,
            k,
            out,
            weights,
        } => {
            let data = formats::load_dataset(&dataset)?;
            let bench = formats::load_benchmark(&benchmark)?;
            let policy = k.map_or(Normalization::MinToOne, Normalization::Explicit);
            let (adjusted, table) = apply_pair(&data, &bench, policy)?;
            formats::save_dataset(&adjusted, &out)?;
            let weights = weights.unwrap_or_else(|| out.with_extension("weights.json"));
            formats::save_weights(&table, &weights)?;
            println!(
                "{} records -> {} records; weights in {}",
                data.len(),
                adjusted.len(),
                weights.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Train {
            dataset,
            gold,
            dev,
            seed,
            epochs,
            learning_rate,
            hash_dim,
            out,
        } => {
            let defaults = Hyper::default();
            let hyper = Hyper {
                epochs: epochs.unwrap_or(defaults.epochs),
                learning_rate: learning_rate.unwrap_or(defaults.learning_rate),
                hash_dim: hash_dim.unwrap_or(defaults.hash_dim),
            };
            let data = formats::load_dataset(&dataset)?;
            let texts = formats::load_gold(&gold)?;
            let dev = dev.as_deref().map(formats::load_dataset).transpose()?;
            let model = trainer::train(&data, &texts, hyper, seed, dev.as_ref())?;
            formats::save_model(&model, &out)?;
            println!(
                "selected epoch {} of {}",
                model.selected_epoch, hyper.epochs
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Evaluate {
            model,
            gold,
            dataset,
            threshold,
        } => {
            let model = formats::load_model(&model)?;
            let gold = formats::load_gold(&gold)?;
            let preds = predict(&model, &gold);
            let acb = metrics::acb(&preds, &gold)?;
            let (reference, positive_proportion) = match dataset {
                Some(path) => {
                    let data = formats::load_dataset(&path)?;
                    (
                        reference_from_annotations(&data, &gold)?,
                        Some(metrics::positive_proportion(&data)),
                    )
                }
                None => (gold.clone(), None),
            };
            let f1 = metrics::f1(&preds, &reference, threshold, GoldRule::Majority)?;
            if f1.degenerate {
                eprintln!("warning: no positive predictions or references; F1 reported as 0");
            }
            let summary = serde_json::json!({
                "n_items": gold.len(),
                "acb": acb,
                "f1": f1.f1,
                "precision": f1.precision,
                "recall": f1.recall,
                "positive_proportion": positive_proportion,
            });
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep { common } => {
            let config = common.config()?;
            let dir = config.output_dir.clone();
            let outcome = experiment::sweep(config)?;
            report::save_outcome(&outcome, &dir)?;
            println!(
                "{} cells, {} failed; report in {}",
                outcome.rows.len() + outcome.failures.len(),
                outcome.failures.len(),
                dir.join("report.csv").display()
            );
            for f in &outcome.failures {
                eprintln!("failed: {}", f.message);
            }
            Ok(if outcome.failures.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Report {
            input,
            metric,
            task,
            out,
        } => {
            let metric: Metric = metric.parse()?;
            let lines = report::read_report(&input)?;
            match out {
                Some(path) => {
                    let file = std::fs::File::create(&path)
                        .with_context(|| format!("creating {}", path.display()))?;
                    report::pivot(&lines, metric, task.as_deref(), file)?
                }
                None => report::pivot(&lines, metric, task.as_deref(), std::io::stdout())?,
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn simulate(common: &Common, beta: f64) -> Result<ExitCode> {
    if !(0.0..=0.5).contains(&beta) {
        bail!("beta {beta} outside [0, 0.5]");
    }
    let config = common.config()?;
    let seed = common.seed.unwrap_or(config.data_seed);
    let task: Task = config.task;
    let dir: &Path = &config.output_dir;
    let study = Study::new(config.clone())?;
    let suite = build_suite(&study.gold, task, beta, seed)?;
    formats::save_gold(&study.gold, &dir.join("gold.jsonl"))?;
    for (name, data) in [
        ("representative", &suite.representative),
        ("nonrep1", &suite.nonrep1),
        ("nonrep2", &suite.nonrep2),
    ] {
        formats::save_dataset(data, &dir.join(format!("{name}.jsonl")))?;
    }
    formats::save_benchmark(&config.benchmark()?, &dir.join("benchmark.json"))?;
    println!(
        "{} items, beta {beta}, seed {seed}; files in {}",
        study.gold.len(),
        dir.display()
    );
    Ok(ExitCode::SUCCESS)
}
