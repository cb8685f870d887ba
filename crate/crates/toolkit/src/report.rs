//! Flat CSV report: one `run` row per cell followed by one `mean` row per
//! (task, recipe, beta). Wall times go to a separate file so that the report
//! itself is reproducible byte for byte.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use pair_core::metrics::AggregateReport;
use serde::{Deserialize, Serialize};

use crate::experiment::{CellFailure, ResultRow, SweepOutcome};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportLine {
    pub kind: String,
    pub task: String,
    pub recipe: String,
    pub beta: f64,
    pub seed: String,
    pub n_items: usize,
    pub acb: f64,
    pub f1: f64,
    pub positive_proportion: f64,
    pub acb_std: Option<f64>,
    pub f1_std: Option<f64>,
    pub positive_proportion_std: Option<f64>,
}

impl From<&ResultRow> for ReportLine {
    fn from(r: &ResultRow) -> Self {
        ReportLine {
            kind: "run".into(),
            task: r.task.to_string(),
            recipe: r.recipe.to_string(),
            beta: r.beta,
            seed: r.seed.to_string(),
            n_items: r.n_items,
            acb: r.acb,
            f1: r.f1,
            positive_proportion: r.positive_proportion,
            acb_std: None,
            f1_std: None,
            positive_proportion_std: None,
        }
    }
}

impl From<&AggregateReport> for ReportLine {
    fn from(a: &AggregateReport) -> Self {
        let seeds: Vec<String> = a.seeds.iter().map(u64::to_string).collect();
        ReportLine {
            kind: "mean".into(),
            task: a.config.task.to_string(),
            recipe: a.config.recipe.to_string(),
            beta: a.config.beta,
            seed: seeds.join(";"),
            n_items: a.n_items,
            acb: a.acb.mean,
            f1: a.f1.mean,
            positive_proportion: a.positive_proportion.mean,
            acb_std: Some(a.acb.std),
            f1_std: Some(a.f1.std),
            positive_proportion_std: Some(a.positive_proportion.std),
        }
    }
}

pub fn write_report(outcome: &SweepOutcome, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in &outcome.rows {
        w.serialize(ReportLine::from(row))?;
    }
    for agg in &outcome.aggregates {
        w.serialize(ReportLine::from(agg))?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))?;
    Ok(())
}

pub fn write_timings(rows: &[ResultRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["task", "recipe", "beta", "seed", "wall_time_ms"])?;
    for r in rows {
        w.write_record([
            r.task.to_string(),
            r.recipe.to_string(),
            r.beta.to_string(),
            r.seed.to_string(),
            r.wall_time_ms.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))?;
    Ok(())
}

pub fn write_failures(failures: &[CellFailure], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["task", "recipe", "beta", "seed", "error"])?;
    for f in failures {
        w.write_record([
            f.task.to_string(),
            f.recipe.to_string(),
            f.beta.to_string(),
            f.seed.to_string(),
            f.message.clone(),
        ])?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))?;
    Ok(())
}

/// Writes `report.csv`, `timings.csv` and, when cells failed, `failures.csv`.
pub fn save_outcome(outcome: &SweepOutcome, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let file = |name: &str| {
        let path = dir.join(name);
        std::fs::File::create(&path).map_err(|e| Error::io(&path, e))
    };
    write_report(outcome, file("report.csv")?)?;
    write_timings(&outcome.rows, file("timings.csv")?)?;
    let failures = dir.join("failures.csv");
    if outcome.failures.is_empty() {
        if failures.exists() {
            std::fs::remove_file(&failures).map_err(|e| Error::io(&failures, e))?;
        }
    } else {
        write_failures(&outcome.failures, file("failures.csv")?)?;
    }
    Ok(())
}

pub fn read_report(path: &Path) -> Result<Vec<ReportLine>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Acb,
    F1,
    PositiveProportion,
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "acb" => Ok(Metric::Acb),
            "f1" => Ok(Metric::F1),
            "positive_proportion" | "pp" => Ok(Metric::PositiveProportion),
            other => Err(Error::Format(format!("unknown metric `{other}`"))),
        }
    }
}

/// Beta-by-recipe table of seed means for one task and metric, as CSV.
pub fn pivot(
    lines: &[ReportLine],
    metric: Metric,
    task: Option<&str>,
    out: impl Write,
) -> Result<()> {
    let mut recipes: Vec<String> = Vec::new();
    let mut table: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    let mut betas: Vec<f64> = Vec::new();
    for l in lines.iter().filter(|l| l.kind == "mean") {
        if task.is_some_and(|t| t != l.task) {
            continue;
        }
        if !recipes.contains(&l.recipe) {
            recipes.push(l.recipe.clone());
        }
        if !betas.contains(&l.beta) {
            betas.push(l.beta);
        }
        let value = match metric {
            Metric::Acb => l.acb,
            Metric::F1 => l.f1,
            Metric::PositiveProportion => l.positive_proportion,
        };
        table
            .entry(l.beta.to_string())
            .or_default()
            .insert(l.recipe.clone(), value);
    }
    betas.sort_by(f64::total_cmp);
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["beta".to_string()];
    header.extend(recipes.iter().cloned());
    w.write_record(&header)?;
    for beta in betas {
        let key = beta.to_string();
        let mut record = vec![key.clone()];
        for r in &recipes {
            record.push(
                table[&key]
                    .get(r)
                    .map(|v| format!("{v:.4}"))
                    .unwrap_or_default(),
            );
        }
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::aggregate_rows;
    use pair_core::simulation::{Recipe, Task};

    fn row(recipe: Recipe, beta: f64, seed: u64, acb: f64) -> ResultRow {
        ResultRow {
            task: Task::OL,
            recipe,
            beta,
            seed,
            acb,
            f1: 0.8,
            positive_proportion: 0.5,
            n_items: 10,
            wall_time_ms: seed as u128,
        }
    }

    fn outcome() -> SweepOutcome {
        let rows = vec![
            row(Recipe::Representative, 0.1, 1, 0.1),
            row(Recipe::Representative, 0.1, 2, 0.3),
            row(Recipe::Nonrep2, 0.1, 1, 0.5),
        ];
        SweepOutcome {
            aggregates: aggregate_rows(&rows),
            rows,
            failures: vec![],
        }
    }

    #[test]
    fn report_has_runs_then_means() {
        let mut buf = Vec::new();
        write_report(&outcome(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            "kind,task,recipe,beta,seed,n_items,acb,f1,positive_proportion,acb_std,f1_std,positive_proportion_std"
        );
        assert_eq!(lines.len(), 1 + 3 + 2);
        assert!(lines[4].starts_with("mean,OL,representative,0.1,1;2,10,0.2,"));
        assert!(!text.contains("wall"));
    }

    #[test]
    fn pivot_reads_means() {
        let dir = tempfile::tempdir().unwrap();
        save_outcome(&outcome(), dir.path()).unwrap();
        let lines = read_report(&dir.path().join("report.csv")).unwrap();
        assert_eq!(lines.len(), 5);
        let mut buf = Vec::new();
        pivot(&lines, Metric::Acb, Some("OL"), &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "beta,representative,nonrep2\n0.1,0.2000,0.5000\n"
        );
        assert!(!dir.path().join("failures.csv").exists());
    }
}
