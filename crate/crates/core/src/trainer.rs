//! Hashed bag-of-words logistic regression trained on annotation records.
//!
//! Every annotation record is one training instance, replicas included, so a
//! stratum replicated `n` times contributes `n + 1` gradient steps per epoch.
//! Tokens are hashed into `hash_dim` buckets and features are token counts
//! divided by document length. Training runs plain SGD over a per-epoch
//! shuffle, with the step size decaying linearly to zero over the run, and
//! keeps the epoch with the lowest development loss.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::rng::{fnv1a, Stream};
use crate::simulation::{Dataset, GoldEntry, GoldTable, Stratum};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    pub epochs: u32,
    pub learning_rate: f64,
    pub hash_dim: usize,
}

impl Default for Hyper {
    fn default() -> Self {
        Hyper {
            epochs: 10,
            learning_rate: 0.5,
            hash_dim: 1 << 14,
        }
    }
}

impl Hyper {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::InvalidHyper("epochs must be at least 1".into()));
        }
        if self.hash_dim < 2 {
            return Err(Error::InvalidHyper("hash_dim must be at least 2".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidHyper(format!(
                "learning rate {} must be positive",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// Sparse feature vector sorted by bucket index.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Features {
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl Features {
    pub fn dot(&self, weights: &[f64]) -> f64 {
        self.indices
            .iter()
            .zip(&self.values)
            .map(|(&i, &v)| weights[i as usize] * v)
            .sum()
    }
}

pub fn bucket(token: &str, hash_dim: usize) -> u32 {
    (fnv1a(token.as_bytes()) % hash_dim as u64) as u32
}

pub fn featurize(tokens: &[String], hash_dim: usize) -> Features {
    if tokens.is_empty() {
        return Features::default();
    }
    let mut counts: BTreeMap<u32, u32> = BTreeMap::new();
    for t in tokens {
        *counts.entry(bucket(t, hash_dim)).or_insert(0) += 1;
    }
    let scale = 1.0 / tokens.len() as f64;
    let (indices, values) = counts
        .into_iter()
        .map(|(i, c)| (i, f64::from(c) * scale))
        .unzip();
    Features { indices, values }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + libm::log1p(libm::exp(-z))
    } else {
        libm::log1p(libm::exp(z))
    }
}

/// Weighted binary cross-entropy of one instance.
pub fn instance_loss(weights: &[f64], bias: f64, x: &Features, label: f64, multiplier: f64) -> f64 {
    let z = x.dot(weights) + bias;
    multiplier * (softplus(z) - label * z)
}

/// Gradient of [`instance_loss`]: one entry per feature of `x`, then the bias.
pub fn instance_gradient(
    weights: &[f64],
    bias: f64,
    x: &Features,
    label: f64,
    multiplier: f64,
) -> (Vec<f64>, f64) {
    let residual = multiplier * (sigmoid(x.dot(weights) + bias) - label);
    (x.values.iter().map(|v| residual * v).collect(), residual)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: u32,
    /// Mean loss of each instance just before its update during the epoch.
    pub running_loss: f64,
    /// Mean loss over the training set after the epoch.
    pub train_loss: f64,
    pub dev_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub hyper: Hyper,
    pub seed: u64,
    pub bias: f64,
    pub weights: Vec<f64>,
    /// Epoch (1-based) whose parameters were kept.
    pub selected_epoch: u32,
    pub history: Vec<EpochStats>,
}

impl Model {
    pub fn zero(hyper: Hyper) -> Self {
        Model {
            hyper,
            seed: 0,
            bias: 0.0,
            weights: alloc::vec![0.0; hyper.hash_dim],
            selected_epoch: 0,
            history: Vec::new(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.bias.is_finite() && self.weights.iter().all(|w| w.is_finite())
    }

    pub fn predict_tokens(&self, tokens: &[String]) -> f64 {
        let x = featurize(tokens, self.hyper.hash_dim);
        sigmoid(x.dot(&self.weights) + self.bias)
    }
}

/// Item id to predicted positive probability.
pub type PredictionSet = BTreeMap<String, f64>;

struct Instance {
    item: usize,
    label: f64,
    multiplier: f64,
}

struct Corpus {
    features: Vec<Features>,
    instances: Vec<Instance>,
}

fn corpus(
    dataset: &Dataset,
    texts: &GoldTable,
    hash_dim: usize,
    multipliers: Option<&BTreeMap<Stratum, f64>>,
) -> Result<Corpus> {
    let by_id: BTreeMap<&str, &GoldEntry> = texts
        .entries()
        .iter()
        .map(|e| (e.item_id.as_str(), e))
        .collect();
    let mut slot: BTreeMap<&str, usize> = BTreeMap::new();
    let mut features = Vec::new();
    let mut missing = Vec::new();
    for id in dataset.item_ids() {
        match by_id.get(id) {
            Some(e) if !e.text.is_empty() => {
                slot.insert(id, features.len());
                features.push(featurize(&e.text, hash_dim));
            }
            _ => missing.push(String::from(id)),
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingText(missing));
    }
    let instances = dataset
        .records
        .iter()
        .map(|r| Instance {
            item: slot[r.item_id.as_str()],
            label: f64::from(r.label),
            multiplier: multipliers
                .and_then(|m| m.get(&r.stratum_id).copied())
                .unwrap_or(1.0),
        })
        .collect();
    Ok(Corpus {
        features,
        instances,
    })
}

fn mean_loss(corpus: &Corpus, weights: &[f64], bias: f64) -> f64 {
    let total: f64 = corpus
        .instances
        .iter()
        .map(|i| {
            instance_loss(
                weights,
                bias,
                &corpus.features[i.item],
                i.label,
                i.multiplier,
            )
        })
        .sum();
    let mass: f64 = corpus.instances.iter().map(|i| i.multiplier).sum();
    total / mass
}

/// Fits the model on `dataset`, one instance per record.
///
/// `texts` supplies tokens for every item of `dataset` and of `dev`. With a
/// development set, the parameters after the epoch with the lowest dev loss
/// are returned; otherwise the last epoch wins.
pub fn train(
    dataset: &Dataset,
    texts: &GoldTable,
    hyper: Hyper,
    seed: u64,
    dev: Option<&Dataset>,
) -> Result<Model> {
    fit(dataset, texts, hyper, seed, dev, None)
}

/// Like [`train`], with each record's loss multiplied by the factor of its
/// stratum (1 for strata not listed).
pub fn train_weighted(
    dataset: &Dataset,
    texts: &GoldTable,
    hyper: Hyper,
    seed: u64,
    dev: Option<&Dataset>,
    multipliers: &BTreeMap<Stratum, f64>,
) -> Result<Model> {
    fit(dataset, texts, hyper, seed, dev, Some(multipliers))
}

fn fit(
    dataset: &Dataset,
    texts: &GoldTable,
    hyper: Hyper,
    seed: u64,
    dev: Option<&Dataset>,
    multipliers: Option<&BTreeMap<Stratum, f64>>,
) -> Result<Model> {
    hyper.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let train_set = corpus(dataset, texts, hyper.hash_dim, multipliers)?;
    let dev_set = match dev {
        Some(d) if !d.is_empty() => Some(corpus(d, texts, hyper.hash_dim, None)?),
        _ => None,
    };

    let mut weights = alloc::vec![0.0; hyper.hash_dim];
    let mut bias = 0.0;
    let mut order: Vec<usize> = (0..train_set.instances.len()).collect();
    let mut history = Vec::with_capacity(hyper.epochs as usize);
    let mut best: Option<(f64, u32, f64, Vec<f64>)> = None;

    let mass: f64 = train_set.instances.iter().map(|i| i.multiplier).sum();
    let total_steps = (order.len() as f64) * f64::from(hyper.epochs);
    let mut step = 0.0;
    for epoch in 1..=hyper.epochs {
        Stream::new(seed, "train/shuffle", u64::from(epoch), 0).shuffle(&mut order);
        let mut running = 0.0;
        for &k in &order {
            let rate = hyper.learning_rate * (1.0 - step / total_steps);
            step += 1.0;
            let inst = &train_set.instances[k];
            let x = &train_set.features[inst.item];
            let z = x.dot(&weights) + bias;
            running += inst.multiplier * (softplus(z) - inst.label * z);
            let residual = inst.multiplier * (sigmoid(z) - inst.label);
            for (&i, &v) in x.indices.iter().zip(&x.values) {
                weights[i as usize] -= rate * residual * v;
            }
            bias -= rate * residual;
        }
        let train_loss = mean_loss(&train_set, &weights, bias);
        let dev_loss = dev_set.as_ref().map(|d| mean_loss(d, &weights, bias));
        history.push(EpochStats {
            epoch,
            running_loss: running / mass,
            train_loss,
            dev_loss,
        });
        let score = dev_loss.unwrap_or(f64::NEG_INFINITY);
        if best
            .as_ref()
            .is_none_or(|(b, ..)| score < *b || dev_loss.is_none())
        {
            best = Some((score, epoch, bias, weights.clone()));
        }
    }

    let (_, selected_epoch, bias, weights) = best.expect("at least one epoch");
    let model = Model {
        hyper,
        seed,
        bias,
        weights,
        selected_epoch,
        history,
    };
    if !model.is_finite() {
        return Err(Error::InvalidHyper(format!(
            "training diverged with learning rate {}",
            hyper.learning_rate
        )));
    }
    Ok(model)
}

/// Predicted probability for every entry of `items`.
pub fn predict(model: &Model, items: &GoldTable) -> PredictionSet {
    items
        .entries()
        .iter()
        .map(|e| (e.item_id.clone(), model.predict_tokens(&e.text)))
        .collect()
}

/// Per item, the fraction of its records (replicas included) labelled 1.
pub fn proportion_oracle(dataset: &Dataset) -> PredictionSet {
    let mut tally: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for r in &dataset.records {
        let t = tally.entry(r.item_id.as_str()).or_insert((0, 0));
        t.0 += usize::from(r.label);
        t.1 += 1;
    }
    tally
        .into_iter()
        .map(|(id, (pos, n))| (String::from(id), pos as f64 / n as f64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulation::{AnnotationRecord, DatasetMeta, Recipe, Source, Task};
    use alloc::string::ToString;
    use alloc::vec;

    fn tokens(words: &[&str]) -> Vec<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn zero_model_predicts_half() {
        let m = Model::zero(Hyper::default());
        assert_eq!(m.predict_tokens(&tokens(&["a", "b"])), 0.5);
        assert_eq!(m.predict_tokens(&[]), 0.5);
    }

    #[test]
    fn featurize_is_order_free() {
        let a = featurize(&tokens(&["x", "y", "x", "z"]), 64);
        let b = featurize(&tokens(&["z", "x", "y", "x"]), 64);
        assert_eq!(a, b);
        let total: f64 = a.values.iter().sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(800.0) <= 1.0 && sigmoid(-800.0) >= 0.0);
        assert!(softplus(800.0).is_finite());
        assert!((softplus(0.0) - core::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn invalid_hyper() {
        let h = Hyper {
            epochs: 0,
            ..Hyper::default()
        };
        assert!(h.validate().is_err());
        let h = Hyper {
            hash_dim: 1,
            ..Hyper::default()
        };
        assert!(h.validate().is_err());
    }

    #[test]
    fn oracle_counts_replicas() {
        let rec = |id: &str, item: &str, label: u8, source| AnnotationRecord {
            annotation_id: id.into(),
            item_id: item.into(),
            stratum_id: "A".into(),
            label,
            source,
            replica_of: None,
        };
        let d = Dataset::new(
            DatasetMeta {
                task: Task::OL,
                recipe: Recipe::Custom,
                beta: 0.0,
                seed: 0,
            },
            vec![
                rec("1", "x", 1, Source::Original),
                rec("2", "x", 1, Source::Original),
                rec("3", "x", 0, Source::Original),
                rec("4", "y", 1, Source::Original),
                rec("4+r1", "y", 1, Source::Replica),
                rec("5", "y", 0, Source::Original),
            ],
        );
        let p = proportion_oracle(&d);
        assert!((p["x"] - 2.0 / 3.0).abs() < 1e-15);
        assert!((p["y"] - 2.0 / 3.0).abs() < 1e-15);
    }
}
