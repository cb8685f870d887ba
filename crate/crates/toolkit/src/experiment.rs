//! The simulation study: one model per (recipe, beta, seed) cell.
//!
//! For each bias value the suite is sampled once from `data_seed` and split
//! at the item level; the model seeds only change SGD order. The adjusted
//! recipe is PAIR applied to the full `nonrep1` pool before splitting.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use pair_core::metrics::{self, AggregateReport, GoldRule, MetricsReport, RunConfig};
use pair_core::pair::{apply_pair, Normalization, WeightTable};
use pair_core::simulation::{
    build_suite, filter_difficult, synth_gold, synth_text, Dataset, GoldEntry, GoldTable, Recipe,
    Task,
};
use pair_core::split::{split_items, Split, SplitCounts};
use pair_core::trainer::{self, predict, proportion_oracle};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, F1Reference, GoldSource};
use crate::ingest::ingest_external;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub task: Task,
    pub recipe: Recipe,
    pub beta: f64,
    pub seed: u64,
    pub acb: f64,
    pub f1: f64,
    pub positive_proportion: f64,
    pub n_items: usize,
    pub wall_time_ms: u128,
}

impl ResultRow {
    pub fn metrics(&self) -> MetricsReport {
        MetricsReport {
            config: RunConfig {
                task: self.task,
                recipe: self.recipe,
                beta: self.beta,
            },
            seed: self.seed,
            acb: self.acb,
            f1: self.f1,
            positive_proportion: self.positive_proportion,
            n_items: self.n_items,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellFailure {
    pub task: Task,
    pub recipe: Recipe,
    pub beta: f64,
    pub seed: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub rows: Vec<ResultRow>,
    pub aggregates: Vec<AggregateReport>,
    pub failures: Vec<CellFailure>,
}

type CellKey = (Task, Recipe, f64, u64);

fn cmp_cells(a: CellKey, b: CellKey) -> Ordering {
    (a.0, a.1)
        .cmp(&(b.0, b.1))
        .then(a.2.total_cmp(&b.2))
        .then(a.3.cmp(&b.3))
}

/// Gold table (with texts) and item split shared by every cell.
#[derive(Debug, Clone)]
pub struct Study {
    pub config: ExperimentConfig,
    pub gold: GoldTable,
    pub split: Split,
    pub split_counts: SplitCounts,
}

/// The four training pools for one bias value, over all items.
#[derive(Debug, Clone)]
pub struct BetaData {
    pub beta: f64,
    pub datasets: BTreeMap<Recipe, Dataset>,
    pub weights: WeightTable,
}

pub fn load_gold(config: &ExperimentConfig) -> Result<GoldTable> {
    match &config.gold {
        GoldSource::Synthetic {
            n,
            shape,
            vocab_size,
            tokens_per_item,
            seed,
        } => {
            let gold = synth_gold(*n, *shape, *seed)?;
            Ok(synth_text(&gold, *vocab_size, *tokens_per_item, *seed)?)
        }
        GoldSource::File {
            path,
            subsample,
            seed,
        } => {
            let sub = pair_core::simulation::Subsample {
                size: *subsample,
                seed: *seed,
            };
            let ingested = ingest_external(path, sub)?;
            if !ingested.malformed.is_empty() {
                eprintln!(
                    "warning: skipped {} malformed row(s) in {} (lines {:?})",
                    ingested.malformed.len(),
                    path.display(),
                    ingested.malformed
                );
            }
            Ok(ingested.gold(config.task).clone())
        }
    }
}

impl Study {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let gold = load_gold(&config)?;
        Self::with_gold(config, gold)
    }

    /// Uses `gold` as is (it must carry texts). In difficult mode the table is
    /// filtered first and the split rescaled to the surviving items.
    pub fn with_gold(config: ExperimentConfig, gold: GoldTable) -> Result<Self> {
        config.validate()?;
        let (gold, split_counts) = match config.difficult {
            Some(band) => {
                let kept = filter_difficult(&gold, band.lo, band.hi);
                let counts = config.split.scaled_to(kept.len());
                (kept, counts)
            }
            None => (gold, config.split),
        };
        if split_counts.total() != gold.len() {
            return Err(Error::Config(format!(
                "split counts sum to {} but the gold table has {} items",
                split_counts.total(),
                gold.len()
            )));
        }
        let split = split_items(&gold, split_counts, config.data_seed)?;
        Ok(Study {
            config,
            gold,
            split,
            split_counts,
        })
    }

    pub fn beta_data(&self, beta: f64) -> Result<BetaData> {
        let suite = build_suite(&self.gold, self.config.task, beta, self.config.data_seed)?;
        let (adjusted, weights) = apply_pair(
            suite.adjusted_input(),
            &self.config.benchmark()?,
            Normalization::MinToOne,
        )?;
        let datasets = BTreeMap::from([
            (Recipe::Representative, suite.representative),
            (Recipe::Nonrep1, suite.nonrep1),
            (Recipe::Nonrep2, suite.nonrep2),
            (Recipe::Adjusted, adjusted),
        ]);
        Ok(BetaData {
            beta,
            datasets,
            weights,
        })
    }

    fn ids(table: &GoldTable) -> BTreeSet<&str> {
        table.entries().iter().map(|e| e.item_id.as_str()).collect()
    }

    /// Training dataset of one recipe restricted to the train split.
    pub fn train_dataset(&self, data: &BetaData, recipe: Recipe) -> Dataset {
        data.datasets[&recipe].restrict(&Self::ids(&self.split.train))
    }

    pub fn evaluate(&self, data: &BetaData, recipe: Recipe, seed: u64) -> Result<ResultRow> {
        let started = Instant::now();
        let full = data
            .datasets
            .get(&recipe)
            .ok_or_else(|| Error::Config(format!("recipe {recipe} is not buildable")))?;
        let train = full.restrict(&Self::ids(&self.split.train));
        let dev = full.restrict(&Self::ids(&self.split.dev));
        let model = trainer::train(&train, &self.gold, self.config.hyper, seed, Some(&dev))?;

        let test = &self.split.test;
        let preds = predict(&model, test);
        let acb = metrics::acb(&preds, test)?;
        let reference = match self.config.f1_reference {
            F1Reference::GoldMajority => test.clone(),
            F1Reference::DatasetMajority => {
                let test_records = full.restrict(&Self::ids(test));
                reference_from_annotations(&test_records, test)?
            }
        };
        let f1 = metrics::f1(
            &preds,
            &reference,
            self.config.f1_threshold,
            GoldRule::Majority,
        )?;
        Ok(ResultRow {
            task: self.config.task,
            recipe,
            beta: data.beta,
            seed,
            acb,
            f1: f1.f1,
            positive_proportion: metrics::positive_proportion(&train),
            n_items: test.len(),
            wall_time_ms: started.elapsed().as_millis(),
        })
    }

    /// Builds everything a single cell needs and evaluates it.
    pub fn run_cell(&self, beta: f64, seed: u64, recipe: Recipe) -> Result<ResultRow> {
        self.beta_data(beta)
            .and_then(|data| self.evaluate(&data, recipe, seed))
            .map_err(|e| self.cell_error(recipe, beta, seed, e))
    }

    fn cell_error(&self, recipe: Recipe, beta: f64, seed: u64, e: Error) -> Error {
        Error::Cell {
            task: self.config.task.to_string(),
            recipe: recipe.to_string(),
            beta,
            seed,
            source: Box::new(e),
        }
    }

    fn sweep_inner(&self) -> SweepOutcome {
        let cfg = &self.config;
        let per_beta: Vec<(f64, std::result::Result<BetaData, String>)> = cfg
            .betas
            .par_iter()
            .map(|&b| (b, self.beta_data(b).map_err(|e| e.to_string())))
            .collect();

        let mut cells = Vec::new();
        for (beta, data) in &per_beta {
            for &recipe in &cfg.recipes {
                for &seed in &cfg.seeds {
                    cells.push((*beta, data, recipe, seed));
                }
            }
        }
        let results: Vec<std::result::Result<ResultRow, CellFailure>> = cells
            .par_iter()
            .map(|&(beta, data, recipe, seed)| {
                let fail = |message: String| CellFailure {
                    task: cfg.task,
                    recipe,
                    beta,
                    seed,
                    message,
                };
                match data {
                    Ok(data) => self
                        .evaluate(data, recipe, seed)
                        .map_err(|e| fail(self.cell_error(recipe, beta, seed, e).to_string())),
                    Err(e) => Err(fail(e.clone())),
                }
            })
            .collect();

        let mut rows = Vec::new();
        let mut failures = Vec::new();
        for r in results {
            match r {
                Ok(row) => rows.push(row),
                Err(f) => failures.push(f),
            }
        }
        rows.sort_by(|a, b| {
            cmp_cells(
                (a.task, a.recipe, a.beta, a.seed),
                (b.task, b.recipe, b.beta, b.seed),
            )
        });
        failures.sort_by(|a, b| {
            cmp_cells(
                (a.task, a.recipe, a.beta, a.seed),
                (b.task, b.recipe, b.beta, b.seed),
            )
        });
        let aggregates = aggregate_rows(&rows);
        SweepOutcome {
            rows,
            aggregates,
            failures,
        }
    }

    /// Runs every (recipe, beta, seed) cell on up to `config.workers` threads.
    /// Failed cells are reported, not fatal.
    pub fn sweep(&self) -> Result<SweepOutcome> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.config.workers)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(pool.install(|| self.sweep_inner()))
    }
}

/// Binary reference from the annotations of each item: majority positive,
/// ties positive.
pub fn reference_from_annotations(records: &Dataset, items: &GoldTable) -> Result<GoldTable> {
    let oracle = proportion_oracle(records);
    let entries = items
        .entries()
        .iter()
        .map(|e| GoldEntry {
            p_gold: oracle.get(&e.item_id).copied().unwrap_or(e.p_gold),
            ..e.clone()
        })
        .collect();
    Ok(GoldTable::new(entries)?)
}

/// One aggregate per (task, recipe, beta), in row order.
pub fn aggregate_rows(rows: &[ResultRow]) -> Vec<AggregateReport> {
    let mut groups: Vec<Vec<MetricsReport>> = Vec::new();
    for row in rows {
        let m = row.metrics();
        match groups.last_mut() {
            Some(g) if g[0].config == m.config => g.push(m),
            _ => groups.push(vec![m]),
        }
    }
    groups
        .iter()
        .map(|g| metrics::aggregate(g).expect("non-empty group of one configuration"))
        .collect()
}

pub fn sweep(config: ExperimentConfig) -> Result<SweepOutcome> {
    Study::new(config)?.sweep()
}
