//! Item-level train/dev/test partition.

use alloc::vec::Vec;

use crate::rng::Stream;
use crate::simulation::GoldTable;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub dev: usize,
    pub test: usize,
}

impl SplitCounts {
    pub fn total(&self) -> usize {
        self.train + self.dev + self.test
    }

    /// Rescales the counts to `n` items, rounding the train and dev shares and
    /// giving the remainder to test.
    pub fn scaled_to(&self, n: usize) -> SplitCounts {
        let total = self.total().max(1) as f64;
        let scale = |c: usize| libm::round(c as f64 * n as f64 / total) as usize;
        let train = scale(self.train).min(n);
        let dev = scale(self.dev).min(n - train);
        SplitCounts {
            train,
            dev,
            test: n - train - dev,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: GoldTable,
    pub dev: GoldTable,
    pub test: GoldTable,
}

/// Uniform random partition of the items. Each part keeps table order.
pub fn split_items(gold: &GoldTable, counts: SplitCounts, seed: u64) -> Result<Split> {
    if counts.total() != gold.len() {
        return Err(Error::SplitMismatch {
            requested: counts.total(),
            available: gold.len(),
        });
    }
    let mut order: Vec<usize> = (0..gold.len()).collect();
    Stream::new(seed, "split", 0, 0).shuffle(&mut order);
    let mut part = alloc::vec![0u8; gold.len()];
    for &i in &order[counts.train..counts.train + counts.dev] {
        part[i] = 1;
    }
    for &i in &order[counts.train + counts.dev..] {
        part[i] = 2;
    }
    let pick = |which: u8| {
        GoldTable::new(
            gold.entries()
                .iter()
                .zip(&part)
                .filter(|(_, &p)| p == which)
                .map(|(e, _)| e.clone())
                .collect(),
        )
    };
    Ok(Split {
        train: pick(0)?,
        dev: pick(1)?,
        test: pick(2)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulation::{synth_gold, GoldShape};
    use alloc::collections::BTreeSet;

    #[test]
    fn study_sized_split() {
        let gold = synth_gold(3000, GoldShape::Uniform { lo: 0.0, hi: 1.0 }, 1).unwrap();
        let counts = SplitCounts {
            train: 2000,
            dev: 500,
            test: 500,
        };
        let s = split_items(&gold, counts, 10).unwrap();
        assert_eq!((s.train.len(), s.dev.len(), s.test.len()), (2000, 500, 500));
        let ids = |t: &GoldTable| -> BTreeSet<String> {
            t.entries().iter().map(|e| e.item_id.clone()).collect()
        };
        let (a, b, c) = (ids(&s.train), ids(&s.dev), ids(&s.test));
        assert!(a.is_disjoint(&b) && a.is_disjoint(&c) && b.is_disjoint(&c));
        assert_eq!(a.len() + b.len() + c.len(), 3000);
        assert_eq!(split_items(&gold, counts, 10).unwrap(), s);
        assert_ne!(split_items(&gold, counts, 11).unwrap(), s);
    }

    use alloc::string::String;

    #[test]
    fn identity_and_mismatch() {
        let gold = synth_gold(20, GoldShape::Uniform { lo: 0.0, hi: 1.0 }, 1).unwrap();
        let s = split_items(
            &gold,
            SplitCounts {
                train: 20,
                dev: 0,
                test: 0,
            },
            3,
        )
        .unwrap();
        assert_eq!(s.train, gold);
        assert!(s.dev.is_empty() && s.test.is_empty());
        assert!(matches!(
            split_items(
                &gold,
                SplitCounts {
                    train: 10,
                    dev: 5,
                    test: 4
                },
                3
            ),
            Err(Error::SplitMismatch {
                requested: 19,
                available: 20
            })
        ));
    }

    #[test]
    fn scaling() {
        let c = SplitCounts {
            train: 2000,
            dev: 500,
            test: 500,
        };
        assert_eq!(
            c.scaled_to(267),
            SplitCounts {
                train: 178,
                dev: 45,
                test: 44
            }
        );
        assert_eq!(c.scaled_to(3000), c);
        assert_eq!(c.scaled_to(1).total(), 1);
    }
}
