//! Population-aligned instance replication.
//!
//! Each stratum `s` gets the post-stratification weight `P_s / S_s`, where
//! `P_s` is its population share and `S_s` its share of the annotation pool.
//! Weights are scaled by a constant `K` (by default so the smallest weight is
//! exactly one), rounded half away from zero, and every annotation of stratum
//! `s` is then replicated `round(w_s * K) - 1` times.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::simulation::{AnnotationRecord, Dataset, Recipe, Source, Stratum};
use crate::{Error, Result};

const SHARE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<Stratum, f64>", into = "BTreeMap<Stratum, f64>")]
pub struct PopulationBenchmark {
    shares: BTreeMap<Stratum, f64>,
}

impl PopulationBenchmark {
    pub fn new<S: Into<Stratum>>(shares: impl IntoIterator<Item = (S, f64)>) -> Result<Self> {
        let shares: BTreeMap<Stratum, f64> =
            shares.into_iter().map(|(s, p)| (s.into(), p)).collect();
        if shares.is_empty() {
            return Err(Error::InvalidBenchmark("no strata".into()));
        }
        if let Some((s, p)) = shares.iter().find(|(_, &p)| !(p > 0.0 && p <= 1.0)) {
            return Err(Error::InvalidBenchmark(format!("share of `{s}` is {p}")));
        }
        let total: f64 = shares.values().sum();
        if (total - 1.0).abs() > SHARE_TOLERANCE {
            return Err(Error::InvalidBenchmark(format!("shares sum to {total}")));
        }
        Ok(PopulationBenchmark { shares })
    }

    /// Equal shares across the two study strata.
    pub fn balanced_two_type() -> Self {
        Self::new([("A", 0.5), ("B", 0.5)]).expect("valid benchmark")
    }

    pub fn shares(&self) -> &BTreeMap<Stratum, f64> {
        &self.shares
    }
}

impl TryFrom<BTreeMap<Stratum, f64>> for PopulationBenchmark {
    type Error = Error;

    fn try_from(shares: BTreeMap<Stratum, f64>) -> Result<Self> {
        Self::new(shares)
    }
}

impl From<PopulationBenchmark> for BTreeMap<Stratum, f64> {
    fn from(b: PopulationBenchmark) -> Self {
        b.shares
    }
}

/// Annotation shares of each stratum in a pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolShares {
    pub counts: BTreeMap<Stratum, usize>,
    pub total: usize,
}

impl PoolShares {
    pub fn share(&self, stratum: &Stratum) -> f64 {
        self.counts.get(stratum).copied().unwrap_or(0) as f64 / self.total as f64
    }

    pub fn shares(&self) -> BTreeMap<Stratum, f64> {
        self.counts
            .keys()
            .map(|s| (s.clone(), self.share(s)))
            .collect()
    }
}

pub fn pool_shares(dataset: &Dataset) -> Result<PoolShares> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut counts = BTreeMap::new();
    for r in &dataset.records {
        *counts.entry(r.stratum_id.clone()).or_insert(0) += 1;
    }
    Ok(PoolShares {
        counts,
        total: dataset.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumWeight {
    pub population_share: f64,
    pub pool_share: f64,
    pub raw: f64,
    pub normalized: Option<f64>,
    pub replicas: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightTable {
    pub k: Option<f64>,
    pub strata: BTreeMap<Stratum, StratumWeight>,
}

impl WeightTable {
    /// Multiplies every raw weight by `factor` and clears later stages.
    pub fn scale_raw(&self, factor: f64) -> WeightTable {
        WeightTable {
            k: None,
            strata: self
                .strata
                .iter()
                .map(|(s, w)| {
                    (
                        s.clone(),
                        StratumWeight {
                            raw: w.raw * factor,
                            normalized: None,
                            replicas: None,
                            ..w.clone()
                        },
                    )
                })
                .collect(),
        }
    }

    pub fn replicas(&self, stratum: &Stratum) -> Option<u32> {
        self.strata.get(stratum).and_then(|w| w.replicas)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "policy", content = "k", rename_all = "snake_case")]
pub enum Normalization {
    /// `K = 1 / min(raw)`, so the smallest normalized weight is one.
    #[default]
    MinToOne,
    Explicit(f64),
}

/// `P_s / S_s` for every benchmark stratum.
pub fn raw_weights(benchmark: &PopulationBenchmark, pool: &PoolShares) -> Result<WeightTable> {
    if let Some(s) = pool
        .counts
        .keys()
        .find(|s| !benchmark.shares().contains_key(*s))
    {
        return Err(Error::UnknownStratum(s.0.clone()));
    }
    let mut strata = BTreeMap::new();
    for (stratum, &population_share) in benchmark.shares() {
        let pool_share = pool.share(stratum);
        if pool_share <= 0.0 {
            return Err(Error::AbsentStratum(stratum.0.clone()));
        }
        strata.insert(
            stratum.clone(),
            StratumWeight {
                population_share,
                pool_share,
                raw: population_share / pool_share,
                normalized: None,
                replicas: None,
            },
        );
    }
    Ok(WeightTable { k: None, strata })
}

pub fn normalize(weights: &WeightTable, policy: Normalization) -> Result<WeightTable> {
    let k = match policy {
        Normalization::MinToOne => {
            let min = weights
                .strata
                .values()
                .map(|w| w.raw)
                .fold(f64::INFINITY, f64::min);
            1.0 / min
        }
        Normalization::Explicit(k) => k,
    };
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::NonPositiveConstant(k));
    }
    let strata = weights
        .strata
        .iter()
        .map(|(s, w)| {
            (
                s.clone(),
                StratumWeight {
                    normalized: Some(w.raw * k),
                    replicas: None,
                    ..w.clone()
                },
            )
        })
        .collect();
    Ok(WeightTable { k: Some(k), strata })
}

pub fn replication_counts(weights: &WeightTable) -> Result<WeightTable> {
    let mut strata = BTreeMap::new();
    for (s, w) in &weights.strata {
        let normalized = w.normalized.ok_or(Error::NotNormalized)?;
        // libm::round rounds half away from zero.
        let count = libm::round(normalized) as i64 - 1;
        if count < 0 {
            return Err(Error::NegativeReplication {
                stratum: s.0.clone(),
                count,
            });
        }
        strata.insert(
            s.clone(),
            StratumWeight {
                replicas: Some(count as u32),
                ..w.clone()
            },
        );
    }
    Ok(WeightTable {
        k: weights.k,
        strata,
    })
}

/// Full weight pipeline for a dataset: shares, raw weights, normalization and
/// replication counts.
pub fn weight_table(
    dataset: &Dataset,
    benchmark: &PopulationBenchmark,
    policy: Normalization,
) -> Result<WeightTable> {
    let pool = pool_shares(dataset)?;
    let raw = raw_weights(benchmark, &pool)?;
    replication_counts(&normalize(&raw, policy)?)
}

/// Writes each record followed by its replicas. Replicas point at the root
/// original even when the input already contains replicas.
pub fn replicate(dataset: &Dataset, weights: &WeightTable) -> Result<Dataset> {
    let mut records = Vec::with_capacity(dataset.len());
    for r in &dataset.records {
        let copies = weights
            .replicas(&r.stratum_id)
            .ok_or_else(|| Error::UnknownStratum(r.stratum_id.0.clone()))?;
        records.push(r.clone());
        let root: &String = r.replica_of.as_ref().unwrap_or(&r.annotation_id);
        for k in 1..=copies {
            records.push(AnnotationRecord {
                annotation_id: format!("{}+r{k}", r.annotation_id),
                source: Source::Replica,
                replica_of: Some(root.clone()),
                ..r.clone()
            });
        }
    }
    let mut meta = dataset.meta.clone();
    meta.recipe = Recipe::Adjusted;
    Ok(Dataset::new(meta, records))
}

pub fn apply_pair(
    dataset: &Dataset,
    benchmark: &PopulationBenchmark,
    policy: Normalization,
) -> Result<(Dataset, WeightTable)> {
    let weights = weight_table(dataset, benchmark, policy)?;
    let adjusted = replicate(dataset, &weights)?;
    Ok((adjusted, weights))
}
