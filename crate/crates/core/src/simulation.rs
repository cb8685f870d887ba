//! Gold tables, annotator bias and simulated annotation pools.
//!
//! A [`GoldTable`] holds the reference agreement proportion of every item.
//! Annotators of each stratum label an item positive with that proportion
//! shifted by `beta` (down for [`Direction::Minus`], up for
//! [`Direction::Plus`], clamped to `[0, 1]`). [`build_suite`] produces the
//! representative pool (6 A + 6 B per item) and the two skewed pools derived
//! from it.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::rng::Stream;
use crate::{Error, Result};

/// Stratum of the annotator type less likely to label positive.
pub const STRATUM_A: &str = "A";
/// Stratum of the annotator type more likely to label positive.
pub const STRATUM_B: &str = "B";

/// Reference panel size used for synthetic gold proportions.
pub const REFERENCE_PANEL: u32 = 12;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Stratum(pub String);

impl Stratum {
    pub fn new(id: impl Into<String>) -> Self {
        Stratum(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Stratum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Stratum {
    fn from(s: &str) -> Self {
        Stratum(s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Task {
    /// Offensive language.
    OL,
    /// Hate speech.
    HS,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::OL => "OL",
            Task::HS => "HS",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Recipe {
    Representative,
    Nonrep1,
    Nonrep2,
    Adjusted,
    Custom,
}

impl Recipe {
    pub const STUDY: [Recipe; 4] = [
        Recipe::Representative,
        Recipe::Nonrep1,
        Recipe::Nonrep2,
        Recipe::Adjusted,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Recipe::Representative => "representative",
            Recipe::Nonrep1 => "nonrep1",
            Recipe::Nonrep2 => "nonrep2",
            Recipe::Adjusted => "adjusted",
            Recipe::Custom => "custom",
        }
    }
}

impl fmt::Display for Recipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldEntry {
    pub item_id: String,
    #[serde(default)]
    pub text: Vec<String>,
    pub p_gold: f64,
    pub k_reference: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GoldTable {
    entries: Vec<GoldEntry>,
}

impl GoldTable {
    /// Validates proportions, reference counts and item-id uniqueness.
    pub fn new(entries: Vec<GoldEntry>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for e in &entries {
            if !(0.0..=1.0).contains(&e.p_gold) {
                return Err(Error::InvalidShape(format!(
                    "item `{}` has p_gold {} outside [0, 1]",
                    e.item_id, e.p_gold
                )));
            }
            if e.k_reference == 0 {
                return Err(Error::NoAnnotations(e.item_id.clone()));
            }
            if !seen.insert(e.item_id.as_str()) {
                return Err(Error::DuplicateItem(e.item_id.clone()));
            }
        }
        Ok(GoldTable { entries })
    }

    pub fn entries(&self) -> &[GoldEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, item_id: &str) -> Option<&GoldEntry> {
        self.entries.iter().find(|e| e.item_id == item_id)
    }

    /// Map from item id to gold proportion.
    pub fn proportions(&self) -> BTreeMap<&str, f64> {
        self.entries
            .iter()
            .map(|e| (e.item_id.as_str(), e.p_gold))
            .collect()
    }

    pub fn mean_p_gold(&self) -> f64 {
        if self.entries.is_empty() {
            return 0.0;
        }
        self.entries.iter().map(|e| e.p_gold).sum::<f64>() / self.entries.len() as f64
    }

    /// Keeps the entries whose ids are in `ids`, preserving table order.
    pub fn subset(&self, ids: &BTreeSet<&str>) -> GoldTable {
        GoldTable {
            entries: self
                .entries
                .iter()
                .filter(|e| ids.contains(e.item_id.as_str()))
                .cloned()
                .collect(),
        }
    }

    pub fn into_entries(self) -> Vec<GoldEntry> {
        self.entries
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Minus,
    Plus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasSpec {
    pub beta: f64,
    pub directions: BTreeMap<Stratum, Direction>,
}

impl BiasSpec {
    pub fn new(beta: f64, directions: BTreeMap<Stratum, Direction>) -> Result<Self> {
        if !(0.0..=0.5).contains(&beta) {
            return Err(Error::BetaOutOfRange(beta));
        }
        Ok(BiasSpec { beta, directions })
    }

    /// A shifted down, B shifted up.
    pub fn two_type(beta: f64) -> Result<Self> {
        let mut directions = BTreeMap::new();
        directions.insert(Stratum::from(STRATUM_A), Direction::Minus);
        directions.insert(Stratum::from(STRATUM_B), Direction::Plus);
        Self::new(beta, directions)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolComposition {
    pub counts: BTreeMap<Stratum, u32>,
}

impl PoolComposition {
    pub fn new<S: Into<Stratum>>(counts: impl IntoIterator<Item = (S, u32)>) -> Result<Self> {
        let counts: BTreeMap<Stratum, u32> =
            counts.into_iter().map(|(s, c)| (s.into(), c)).collect();
        if counts.values().sum::<u32>() == 0 {
            return Err(Error::EmptyComposition);
        }
        Ok(PoolComposition { counts })
    }

    pub fn per_item(&self) -> u32 {
        self.counts.values().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Original,
    Replica,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub annotation_id: String,
    pub item_id: String,
    pub stratum_id: Stratum,
    pub label: u8,
    pub source: Source,
    pub replica_of: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub task: Task,
    pub recipe: Recipe,
    pub beta: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub records: Vec<AnnotationRecord>,
}

impl Dataset {
    pub fn new(meta: DatasetMeta, records: Vec<AnnotationRecord>) -> Self {
        Dataset { meta, records }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Distinct item ids in first-appearance order.
    pub fn item_ids(&self) -> Vec<&str> {
        let mut seen = BTreeSet::new();
        self.records
            .iter()
            .filter(|r| seen.insert(r.item_id.as_str()))
            .map(|r| r.item_id.as_str())
            .collect()
    }

    /// Per-item record counts broken down by stratum.
    pub fn counts_per_item(&self) -> BTreeMap<&str, BTreeMap<&Stratum, usize>> {
        let mut out: BTreeMap<&str, BTreeMap<&Stratum, usize>> = BTreeMap::new();
        for r in &self.records {
            *out.entry(r.item_id.as_str())
                .or_default()
                .entry(&r.stratum_id)
                .or_default() += 1;
        }
        out
    }

    /// Records whose item is in `ids`, order preserved.
    pub fn restrict(&self, ids: &BTreeSet<&str>) -> Dataset {
        Dataset {
            meta: self.meta.clone(),
            records: self
                .records
                .iter()
                .filter(|r| ids.contains(r.item_id.as_str()))
                .cloned()
                .collect(),
        }
    }

    /// Checks label range, id uniqueness and replica provenance.
    pub fn validate(&self) -> Result<()> {
        let mut originals: BTreeMap<&str, &AnnotationRecord> = BTreeMap::new();
        let mut ids = BTreeSet::new();
        for r in &self.records {
            if r.label > 1 {
                return Err(Error::NonBinaryLabel {
                    item: r.item_id.clone(),
                    label: i64::from(r.label),
                });
            }
            if !ids.insert(r.annotation_id.as_str()) {
                return Err(Error::DuplicateItem(r.annotation_id.clone()));
            }
            if r.source == Source::Original {
                originals.insert(r.annotation_id.as_str(), r);
            }
        }
        for r in &self.records {
            if r.source == Source::Replica {
                let ok = r
                    .replica_of
                    .as_deref()
                    .and_then(|id| originals.get(id))
                    .is_some_and(|o| {
                        o.item_id == r.item_id && o.stratum_id == r.stratum_id && o.label == r.label
                    });
                if !ok {
                    return Err(Error::InvalidShape(format!(
                        "replica `{}` does not match an original record",
                        r.annotation_id
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One item's raw annotations, before reduction to a gold proportion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawItem {
    pub item_id: String,
    pub text: Vec<String>,
    pub labels: Vec<i64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Subsample {
    pub size: usize,
    pub seed: u64,
}

/// Reduces raw annotations to gold proportions.
///
/// With a [`Subsample`], exactly `size` annotations per item are kept, drawn
/// uniformly without replacement from a stream keyed by the item's position.
/// The key does not depend on the task, so OL and HS label vectors of the same
/// item keep the same annotator positions.
pub fn derive_gold(raw: &[RawItem], subsample: Option<Subsample>) -> Result<GoldTable> {
    let mut entries = Vec::with_capacity(raw.len());
    for (index, item) in raw.iter().enumerate() {
        if item.labels.is_empty() {
            return Err(Error::NoAnnotations(item.item_id.clone()));
        }
        if let Some(&label) = item.labels.iter().find(|&&l| l != 0 && l != 1) {
            return Err(Error::NonBinaryLabel {
                item: item.item_id.clone(),
                label,
            });
        }
        let kept: Vec<i64> = match subsample {
            None => item.labels.clone(),
            Some(Subsample { size, seed }) => {
                if size == 0 || size > item.labels.len() {
                    return Err(Error::InsufficientAnnotations {
                        item: item.item_id.clone(),
                        available: item.labels.len(),
                        requested: size,
                    });
                }
                let mut stream = Stream::new(seed, "gold/subsample", index as u64, 0);
                stream
                    .choose_indices(item.labels.len(), size)
                    .into_iter()
                    .map(|i| item.labels[i])
                    .collect()
            }
        };
        let positives = kept.iter().filter(|&&l| l == 1).count();
        entries.push(GoldEntry {
            item_id: item.item_id.clone(),
            text: item.text.clone(),
            p_gold: positives as f64 / kept.len() as f64,
            k_reference: kept.len() as u32,
        });
    }
    GoldTable::new(entries)
}

pub fn shift_probability(p: f64, beta: f64, direction: Direction) -> f64 {
    match direction {
        Direction::Minus => (p - beta).max(0.0),
        Direction::Plus => (p + beta).min(1.0),
    }
}

fn draw_record(
    seed: u64,
    task: Task,
    item_index: usize,
    entry: &GoldEntry,
    stratum: &Stratum,
    slot: u32,
    probability: f64,
) -> AnnotationRecord {
    let stage = format!("sample/{task}/{stratum}");
    let mut stream = Stream::new(seed, &stage, item_index as u64, u64::from(slot));
    AnnotationRecord {
        annotation_id: format!("{}:{}:{}", entry.item_id, stratum, slot),
        item_id: entry.item_id.clone(),
        stratum_id: stratum.clone(),
        label: u8::from(stream.bernoulli(probability)),
        source: Source::Original,
        replica_of: None,
    }
}

/// Draws `comp.counts[s]` Bernoulli annotations per item and stratum.
///
/// Slot `j` of stratum `s` on item `i` always uses the same stream, so a pool
/// with more slots extends a smaller one instead of redrawing it.
pub fn sample_pool(
    gold: &GoldTable,
    comp: &PoolComposition,
    bias: &BiasSpec,
    task: Task,
    seed: u64,
) -> Result<Dataset> {
    if gold.is_empty() {
        return Err(Error::EmptyGold);
    }
    if comp.per_item() == 0 {
        return Err(Error::EmptyComposition);
    }
    let mut shifts = Vec::with_capacity(comp.counts.len());
    for (stratum, &count) in &comp.counts {
        let direction = *bias
            .directions
            .get(stratum)
            .ok_or_else(|| Error::MissingDirection(stratum.0.clone()))?;
        shifts.push((stratum, count, direction));
    }
    let mut records = Vec::with_capacity(gold.len() * comp.per_item() as usize);
    for (index, entry) in gold.entries().iter().enumerate() {
        for &(stratum, count, direction) in &shifts {
            let p = shift_probability(entry.p_gold, bias.beta, direction);
            for slot in 0..count {
                records.push(draw_record(seed, task, index, entry, stratum, slot, p));
            }
        }
    }
    Ok(Dataset::new(
        DatasetMeta {
            task,
            recipe: Recipe::Custom,
            beta: bias.beta,
            seed,
        },
        records,
    ))
}

/// The three sampled training pools. The adjusted pool is obtained by applying
/// [`crate::pair::apply_pair`] to [`Suite::adjusted_input`].
#[derive(Debug, Clone, PartialEq)]
pub struct Suite {
    pub representative: Dataset,
    pub nonrep1: Dataset,
    pub nonrep2: Dataset,
}

impl Suite {
    pub fn adjusted_input(&self) -> &Dataset {
        &self.nonrep1
    }
}

const REPRESENTATIVE_PER_STRATUM: u32 = 6;
const DELETED_B: usize = 3;
const EXTRA_A: u32 = 3;

/// Builds the representative pool (6 A + 6 B per item), removes three B
/// annotations per item uniformly at random for `nonrep1`, then adds three
/// fresh A draws per item for `nonrep2`.
pub fn build_suite(gold: &GoldTable, task: Task, beta: f64, seed: u64) -> Result<Suite> {
    let bias = BiasSpec::two_type(beta)?;
    let comp = PoolComposition::new([
        (STRATUM_A, REPRESENTATIVE_PER_STRATUM),
        (STRATUM_B, REPRESENTATIVE_PER_STRATUM),
    ])?;
    let mut representative = sample_pool(gold, &comp, &bias, task, seed)?;
    representative.meta.recipe = Recipe::Representative;

    let a = Stratum::from(STRATUM_A);
    let b = Stratum::from(STRATUM_B);
    let per_item = comp.per_item() as usize;
    let delete_stage = format!("delete/{task}");
    let mut nonrep1_records = Vec::with_capacity(gold.len() * (per_item - DELETED_B));
    let mut nonrep2_records = Vec::with_capacity(gold.len() * per_item);
    for (index, (entry, chunk)) in gold
        .entries()
        .iter()
        .zip(representative.records.chunks(per_item))
        .enumerate()
    {
        let b_positions: Vec<usize> = chunk
            .iter()
            .enumerate()
            .filter(|(_, r)| r.stratum_id == b)
            .map(|(i, _)| i)
            .collect();
        let mut stream = Stream::new(seed, &delete_stage, index as u64, 0);
        let deleted: BTreeSet<usize> = stream
            .choose_indices(b_positions.len(), DELETED_B)
            .into_iter()
            .map(|k| b_positions[k])
            .collect();
        let survivors = chunk
            .iter()
            .enumerate()
            .filter(|(i, _)| !deleted.contains(i))
            .map(|(_, r)| r.clone());

        let p_a = shift_probability(entry.p_gold, beta, Direction::Minus);
        let extra = (REPRESENTATIVE_PER_STRATUM..REPRESENTATIVE_PER_STRATUM + EXTRA_A)
            .map(|slot| draw_record(seed, task, index, entry, &a, slot, p_a));

        let kept: Vec<AnnotationRecord> = survivors.collect();
        let (kept_a, kept_b): (Vec<_>, Vec<_>) =
            kept.iter().cloned().partition(|r| r.stratum_id == a);
        nonrep2_records.extend(kept_a);
        nonrep2_records.extend(extra);
        nonrep2_records.extend(kept_b);
        nonrep1_records.extend(kept);
    }

    let meta = |recipe| DatasetMeta {
        task,
        recipe,
        beta,
        seed,
    };
    Ok(Suite {
        nonrep1: Dataset::new(meta(Recipe::Nonrep1), nonrep1_records),
        nonrep2: Dataset::new(meta(Recipe::Nonrep2), nonrep2_records),
        representative,
    })
}

/// Keeps entries with `lo <= p_gold <= hi`.
pub fn filter_difficult(gold: &GoldTable, lo: f64, hi: f64) -> GoldTable {
    GoldTable {
        entries: gold
            .entries()
            .iter()
            .filter(|e| lo <= e.p_gold && e.p_gold <= hi)
            .cloned()
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GoldShape {
    /// Uniform over the twelfths lying in `[lo, hi]`.
    Uniform { lo: f64, hi: f64 },
    /// Rate drawn from Beta(1, 1/mean - 1), then a 12-annotator binomial
    /// proportion. Mass piles up near zero, as for a rare class.
    Rare { mean: f64 },
}

/// Synthetic gold proportions on the grid `k / 12`.
pub fn synth_gold(n: usize, shape: GoldShape, seed: u64) -> Result<GoldTable> {
    if n == 0 {
        return Err(Error::InvalidShape("n must be at least 1".into()));
    }
    let panel = f64::from(REFERENCE_PANEL);
    let mut entries = Vec::with_capacity(n);
    match shape {
        GoldShape::Uniform { lo, hi } => {
            if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
                return Err(Error::InvalidShape(format!("uniform({lo}, {hi})")));
            }
            let first = libm::ceil(lo * panel - 1e-9) as u32;
            let last = libm::floor(hi * panel + 1e-9) as u32;
            if first > last {
                return Err(Error::InvalidShape(format!(
                    "uniform({lo}, {hi}) contains no multiple of 1/{REFERENCE_PANEL}"
                )));
            }
            for i in 0..n {
                let mut stream = Stream::new(seed, "gold/synth", i as u64, 0);
                let k = first + stream.next_below(u64::from(last - first + 1)) as u32;
                entries.push(synth_entry(i, k));
            }
        }
        GoldShape::Rare { mean } => {
            if !(mean > 0.0 && mean < 0.5) {
                return Err(Error::InvalidShape(format!(
                    "rare({mean}) needs 0 < mean < 0.5"
                )));
            }
            let shape_b = 1.0 / mean - 1.0;
            for i in 0..n {
                let mut stream = Stream::new(seed, "gold/synth", i as u64, 0);
                let rate = 1.0 - libm::pow(1.0 - stream.next_f64(), 1.0 / shape_b);
                let k = (0..REFERENCE_PANEL)
                    .filter(|_| stream.bernoulli(rate))
                    .count() as u32;
                entries.push(synth_entry(i, k));
            }
        }
    }
    GoldTable::new(entries)
}

fn synth_entry(index: usize, positives: u32) -> GoldEntry {
    GoldEntry {
        item_id: format!("item{index:05}"),
        text: Vec::new(),
        p_gold: f64::from(positives) / f64::from(REFERENCE_PANEL),
        k_reference: REFERENCE_PANEL,
    }
}

pub const TOXIC_PREFIX: &str = "tox";
pub const BENIGN_PREFIX: &str = "ben";

/// Fills every item's text with `tokens_per_item` tokens. Each token comes
/// from the toxic-indicative half of the vocabulary with probability `p_gold`
/// and from the benign-indicative half otherwise.
pub fn synth_text(
    gold: &GoldTable,
    vocab_size: usize,
    tokens_per_item: usize,
    seed: u64,
) -> Result<GoldTable> {
    if tokens_per_item < 1 {
        return Err(Error::NoTokens);
    }
    if vocab_size < 2 || !vocab_size.is_multiple_of(2) {
        return Err(Error::InvalidVocabulary(vocab_size));
    }
    let half = (vocab_size / 2) as u64;
    let entries = gold
        .entries()
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let mut stream = Stream::new(seed, "text", i as u64, 0);
            let text = (0..tokens_per_item)
                .map(|_| {
                    let prefix = if stream.bernoulli(e.p_gold) {
                        TOXIC_PREFIX
                    } else {
                        BENIGN_PREFIX
                    };
                    format!("{prefix}{}", stream.next_below(half))
                })
                .collect();
            GoldEntry { text, ..e.clone() }
        })
        .collect();
    Ok(GoldTable { entries })
}
