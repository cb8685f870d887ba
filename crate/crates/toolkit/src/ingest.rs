//! Ingestion of a real multi-annotator file.
//!
//! The input is line-delimited JSON with one item per line:
//!
//! ```text
//! {"item_id": "t1", "text": "raw text", "ol": [0, 1, ...], "hs": [0, 0, ...]}
//! ```
//!
//! Rows that fail to parse, carry non-binary labels, or have fewer labels
//! than the subsample size are skipped and counted. The same annotator
//! positions are drawn for OL and HS of an item.

use std::io::BufRead;
use std::path::Path;

use pair_core::simulation::{derive_gold, GoldTable, RawItem, Subsample, Task};
use serde::Deserialize;

use crate::{Error, Result};

#[derive(Debug, Deserialize)]
struct Row {
    item_id: String,
    text: String,
    ol: Vec<i64>,
    hs: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub ol: GoldTable,
    pub hs: GoldTable,
    pub raw_ol: Vec<RawItem>,
    pub raw_hs: Vec<RawItem>,
    /// 1-based line numbers of skipped rows.
    pub malformed: Vec<usize>,
}

impl Ingested {
    pub fn gold(&self, task: Task) -> &GoldTable {
        match task {
            Task::OL => &self.ol,
            Task::HS => &self.hs,
        }
    }
}

/// Lowercased alphanumeric runs; `#` and `@` stay attached to their word.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '#' || c == '@' || c == '\''))
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

pub fn read_external(input: impl BufRead, path: &Path, subsample: Subsample) -> Result<Ingested> {
    let mut raw_ol = Vec::new();
    let mut raw_hs = Vec::new();
    let mut malformed = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for (n, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: Row = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(_) => {
                malformed.push(n + 1);
                continue;
            }
        };
        let binary = |v: &[i64]| v.iter().all(|&l| l == 0 || l == 1);
        let usable = binary(&row.ol)
            && binary(&row.hs)
            && row.ol.len() >= subsample.size
            && row.hs.len() >= subsample.size
            && !seen.contains(&row.item_id);
        if !usable {
            malformed.push(n + 1);
            continue;
        }
        seen.insert(row.item_id.clone());
        let text = tokenize(&row.text);
        raw_ol.push(RawItem {
            item_id: row.item_id.clone(),
            text: text.clone(),
            labels: row.ol,
        });
        raw_hs.push(RawItem {
            item_id: row.item_id,
            text,
            labels: row.hs,
        });
    }
    if raw_ol.is_empty() {
        return Err(Error::NoValidRows {
            path: path.to_path_buf(),
            malformed: malformed.len(),
        });
    }
    Ok(Ingested {
        ol: derive_gold(&raw_ol, Some(subsample))?,
        hs: derive_gold(&raw_hs, Some(subsample))?,
        raw_ol,
        raw_hs,
        malformed,
    })
}

pub fn ingest_external(path: &Path, subsample: Subsample) -> Result<Ingested> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_external(std::io::BufReader::new(file), path, subsample)
}
