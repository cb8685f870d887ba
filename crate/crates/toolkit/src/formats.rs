//! Line-delimited JSON files for gold tables and datasets, JSON for
//! benchmarks, weight tables and models.
//!
//! * Gold table: one `{"item_id", "text", "p_gold", "k_reference"}` object per
//!   line.
//! * Dataset: a header line `{"task", "recipe", "beta", "seed"}` followed by
//!   one annotation record per line.
//! * Benchmark: `{"<stratum>": share, ...}`.
//! * Model: `{"format": "pair-model", "version": 1, ...}`. Floats are written
//!   in shortest round-trip form, so a reload is bit-exact.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use pair_core::pair::{PopulationBenchmark, WeightTable};
use pair_core::simulation::{AnnotationRecord, Dataset, DatasetMeta, GoldEntry, GoldTable};
use pair_core::trainer::Model;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const MODEL_FORMAT: &str = "pair-model";
pub const MODEL_VERSION: u32 = 1;

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

fn json_line<T: Serialize>(out: &mut impl Write, value: &T) -> std::io::Result<()> {
    serde_json::to_writer(&mut *out, value)?;
    out.write_all(b"\n")
}

fn parse_err(path: &Path, line: usize, e: impl std::fmt::Display) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: e.to_string(),
    }
}

pub fn write_gold(gold: &GoldTable, out: &mut impl Write) -> std::io::Result<()> {
    for e in gold.entries() {
        json_line(out, e)?;
    }
    Ok(())
}

pub fn save_gold(gold: &GoldTable, path: &Path) -> Result<()> {
    let mut out = create(path)?;
    write_gold(gold, &mut out)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn load_gold(path: &Path) -> Result<GoldTable> {
    let mut entries = Vec::new();
    for (n, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: GoldEntry =
            serde_json::from_str(&line).map_err(|e| parse_err(path, n + 1, e))?;
        entries.push(entry);
    }
    Ok(GoldTable::new(entries)?)
}

pub fn write_dataset(dataset: &Dataset, out: &mut impl Write) -> std::io::Result<()> {
    json_line(out, &dataset.meta)?;
    for r in &dataset.records {
        json_line(out, r)?;
    }
    Ok(())
}

pub fn save_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut out = create(path)?;
    write_dataset(dataset, &mut out)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn read_dataset(input: impl BufRead, path: &Path) -> Result<Dataset> {
    let mut lines = input
        .lines()
        .enumerate()
        .filter(|(_, l)| l.as_ref().map_or(true, |l| !l.trim().is_empty()));
    let meta: DatasetMeta = match lines.next() {
        Some((n, line)) => {
            let line = line.map_err(|e| Error::io(path, e))?;
            serde_json::from_str(&line).map_err(|e| parse_err(path, n + 1, e))?
        }
        None => return Err(parse_err(path, 1, "missing dataset header")),
    };
    let mut records = Vec::new();
    for (n, line) in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        let record: AnnotationRecord =
            serde_json::from_str(&line).map_err(|e| parse_err(path, n + 1, e))?;
        records.push(record);
    }
    let dataset = Dataset::new(meta, records);
    dataset.validate()?;
    Ok(dataset)
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    read_dataset(open(path)?, path)
}

pub fn load_benchmark(path: &Path) -> Result<PopulationBenchmark> {
    serde_json::from_reader(open(path)?).map_err(|e| parse_err(path, e.line(), e))
}

pub fn save_benchmark(benchmark: &PopulationBenchmark, path: &Path) -> Result<()> {
    save_json(benchmark, path)
}

pub fn save_weights(weights: &WeightTable, path: &Path) -> Result<()> {
    save_json(weights, path)
}

pub fn load_weights(path: &Path) -> Result<WeightTable> {
    serde_json::from_reader(open(path)?).map_err(|e| parse_err(path, e.line(), e))
}

pub fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| Error::Format(e.to_string()))?;
    out.write_all(b"\n")
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    #[serde(flatten)]
    model: Model,
}

pub fn model_to_string(model: &Model) -> String {
    let file = ModelFile {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        model: model.clone(),
    };
    serde_json::to_string(&file).expect("model serializes")
}

pub fn model_from_str(text: &str) -> Result<Model> {
    let file: ModelFile =
        serde_json::from_str(text).map_err(|e| Error::Format(format!("model file: {e}")))?;
    if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
        return Err(Error::Format(format!(
            "unsupported model format {} v{}",
            file.format, file.version
        )));
    }
    if file.model.weights.len() != file.model.hyper.hash_dim {
        return Err(Error::Format(format!(
            "model has {} weights for hash_dim {}",
            file.model.weights.len(),
            file.model.hyper.hash_dim
        )));
    }
    Ok(file.model)
}

pub fn save_model(model: &Model, path: &Path) -> Result<()> {
    let mut out = create(path)?;
    out.write_all(model_to_string(model).as_bytes())
        .and_then(|_| out.write_all(b"\n"))
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<Model> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_str(&text)
}
