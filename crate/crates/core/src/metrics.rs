//! Calibration and accuracy metrics.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::simulation::{Dataset, GoldTable, Recipe, Task};
use crate::trainer::PredictionSet;
use crate::{Error, Result};

fn check_items(preds: &PredictionSet, gold: &GoldTable) -> Result<()> {
    let gold_ids: BTreeSet<&str> = gold.entries().iter().map(|e| e.item_id.as_str()).collect();
    let pred_ids: BTreeSet<&str> = preds.keys().map(String::as_str).collect();
    if gold_ids != pred_ids || gold_ids.len() != gold.len() {
        let diff: Vec<String> = gold_ids
            .symmetric_difference(&pred_ids)
            .map(|s| String::from(*s))
            .collect();
        return Err(Error::ItemMismatch(diff));
    }
    Ok(())
}

/// Absolute calibration bias: mean `|prediction - p_gold|` over items.
pub fn acb(preds: &PredictionSet, gold: &GoldTable) -> Result<f64> {
    check_items(preds, gold)?;
    if gold.is_empty() {
        return Err(Error::EmptyGold);
    }
    let total: f64 = gold
        .entries()
        .iter()
        .map(|e| (preds[&e.item_id] - e.p_gold).abs())
        .sum();
    Ok(total / gold.len() as f64)
}

/// How an item's gold proportion becomes a binary reference label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoldRule {
    /// `p_gold >= 0.5` is positive; ties count as positive.
    #[default]
    Majority,
    /// `p_gold > 0.5` is positive.
    StrictMajority,
}

impl GoldRule {
    pub fn is_positive(self, p: f64) -> bool {
        match self {
            GoldRule::Majority => p >= 0.5,
            GoldRule::StrictMajority => p > 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F1Score {
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    /// No positive predictions and no positive references; `f1` is 0 by convention.
    pub degenerate: bool,
}

/// Item-level F1 of `pred >= threshold` against the gold rule.
pub fn f1(
    preds: &PredictionSet,
    gold: &GoldTable,
    threshold: f64,
    rule: GoldRule,
) -> Result<F1Score> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidThreshold(threshold));
    }
    check_items(preds, gold)?;
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for e in gold.entries() {
        let predicted = preds[&e.item_id] >= threshold;
        let actual = rule.is_positive(e.p_gold);
        match (predicted, actual) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let ratio = |num: usize, den: usize| {
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = ratio(2 * tp, 2 * tp + fp + fn_);
    Ok(F1Score {
        f1,
        precision,
        recall,
        degenerate: tp + fp == 0 && tp + fn_ == 0,
    })
}

/// Fraction of records (replicas included) labelled 1; 0 for an empty dataset.
pub fn positive_proportion(dataset: &Dataset) -> f64 {
    if dataset.is_empty() {
        return 0.0;
    }
    let positives = dataset.records.iter().filter(|r| r.label == 1).count();
    positives as f64 / dataset.len() as f64
}

/// Identifies the experimental cell a run belongs to, apart from its seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub task: Task,
    pub recipe: Recipe,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub config: RunConfig,
    pub seed: u64,
    pub acb: f64,
    pub f1: f64,
    pub positive_proportion: f64,
    pub n_items: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let shift = values.first().copied().unwrap_or(0.0);
        let (s1, s2) = values.iter().fold((0.0, 0.0), |(s1, s2), v| {
            let d = v - shift;
            (s1 + d, s2 + d * d)
        });
        let var = ((s2 - s1 * s1 / n) / n).max(0.0);
        Summary {
            mean,
            std: libm::sqrt(var),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub config: RunConfig,
    pub acb: Summary,
    pub f1: Summary,
    pub positive_proportion: Summary,
    pub n_items: usize,
    pub seeds: Vec<u64>,
}

pub fn aggregate(runs: &[MetricsReport]) -> Result<AggregateReport> {
    let first = runs.first().ok_or(Error::NoRuns)?;
    if runs.iter().any(|r| r.config != first.config) {
        return Err(Error::MixedConfigurations);
    }
    let column = |f: fn(&MetricsReport) -> f64| -> Vec<f64> { runs.iter().map(f).collect() };
    Ok(AggregateReport {
        config: first.config,
        acb: Summary::of(&column(|r| r.acb)),
        f1: Summary::of(&column(|r| r.f1)),
        positive_proportion: Summary::of(&column(|r| r.positive_proportion)),
        n_items: first.n_items,
        seeds: runs.iter().map(|r| r.seed).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulation::GoldEntry;
    use alloc::format;
    use alloc::vec;

    fn gold(ps: &[f64]) -> GoldTable {
        GoldTable::new(
            ps.iter()
                .enumerate()
                .map(|(i, &p)| GoldEntry {
                    item_id: format!("i{i}"),
                    text: vec![],
                    p_gold: p,
                    k_reference: 12,
                })
                .collect(),
        )
        .unwrap()
    }

    fn preds(ps: &[f64]) -> PredictionSet {
        ps.iter()
            .enumerate()
            .map(|(i, &p)| (format!("i{i}"), p))
            .collect()
    }

    #[test]
    fn acb_examples() {
        let g = gold(&[0.1, 0.5, 0.9]);
        assert_eq!(acb(&preds(&[0.1, 0.5, 0.9]), &g).unwrap(), 0.0);
        assert_eq!(
            acb(&preds(&[0.5, 0.5]), &gold(&[0.25, 0.75])).unwrap(),
            0.25
        );
    }

    #[test]
    fn acb_mismatch_lists_difference() {
        let g = gold(&[0.1, 0.5]);
        let mut p = preds(&[0.1]);
        p.insert("extra".into(), 0.3);
        match acb(&p, &g) {
            Err(Error::ItemMismatch(d)) => assert_eq!(d, vec!["extra".to_string(), "i1".into()]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn f1_examples() {
        let g = gold(&[1.0, 0.0, 1.0]);
        let perfect = f1(&preds(&[0.9, 0.1, 0.8]), &g, 0.5, GoldRule::Majority).unwrap();
        assert_eq!(perfect.f1, 1.0);
        let none = f1(&preds(&[0.1, 0.1, 0.1]), &g, 0.5, GoldRule::Majority).unwrap();
        assert_eq!(none.f1, 0.0);
        assert!(!none.degenerate);
        // TP = 1 (item 0), FP = 1 (item 1), FN = 1 (item 2)
        let s = f1(&preds(&[0.9, 0.9, 0.1]), &g, 0.5, GoldRule::Majority).unwrap();
        assert_eq!((s.precision, s.recall, s.f1), (0.5, 0.5, 0.5));
    }

    #[test]
    fn f1_degenerate_and_ties() {
        let s = f1(
            &preds(&[0.1, 0.2]),
            &gold(&[0.0, 0.25]),
            0.5,
            GoldRule::Majority,
        )
        .unwrap();
        assert_eq!(s.f1, 0.0);
        assert!(s.degenerate);
        let tie = gold(&[0.5]);
        assert_eq!(
            f1(&preds(&[0.7]), &tie, 0.5, GoldRule::Majority)
                .unwrap()
                .f1,
            1.0
        );
        assert!(
            !f1(&preds(&[0.7]), &tie, 0.5, GoldRule::StrictMajority)
                .unwrap()
                .degenerate
        );
        assert!(f1(&preds(&[0.7]), &tie, 0.0, GoldRule::Majority).is_err());
        assert!(f1(&preds(&[0.7]), &tie, 1.0, GoldRule::Majority).is_err());
    }

    fn report(seed: u64, acb: f64, recipe: Recipe) -> MetricsReport {
        MetricsReport {
            config: RunConfig {
                task: Task::OL,
                recipe,
                beta: 0.1,
            },
            seed,
            acb,
            f1: acb,
            positive_proportion: 0.5,
            n_items: 10,
        }
    }

    #[test]
    fn aggregate_examples() {
        let runs: Vec<_> = [1.0, 2.0, 3.0]
            .iter()
            .enumerate()
            .map(|(i, &v)| report(i as u64, v, Recipe::Nonrep1))
            .collect();
        let a = aggregate(&runs).unwrap();
        assert_eq!(a.acb.mean, 2.0);
        assert!((a.acb.std - libm::sqrt(2.0 / 3.0)).abs() < 1e-15);
        assert_eq!(a.seeds, vec![0, 1, 2]);

        let single = aggregate(&runs[..1]).unwrap();
        assert_eq!(single.acb.std, 0.0);

        let same: Vec<_> = (0..5).map(|s| report(s, 0.125, Recipe::Adjusted)).collect();
        let a = aggregate(&same).unwrap();
        assert_eq!((a.acb.mean, a.acb.std), (0.125, 0.0));

        assert_eq!(aggregate(&[]), Err(Error::NoRuns));
        let mixed = [
            report(0, 1.0, Recipe::Nonrep1),
            report(1, 1.0, Recipe::Nonrep2),
        ];
        assert_eq!(aggregate(&mixed), Err(Error::MixedConfigurations));
    }
}
