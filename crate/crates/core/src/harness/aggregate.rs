//! Percentile summaries and adaptive selection frequencies.

use std::fmt;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::{HarnessError, ReplicationResult};
use crate::models::MethodKind;
use crate::spline::{quantile_sorted, sorted_copy};

/// Percentile levels reported per metric.
pub const QUANTILES: [f64; 5] = [0.025, 0.25, 0.5, 0.75, 0.975];

pub const AGGREGATE_HEADER: [&str; 10] = [
    "scenario_id",
    "method",
    "metric",
    "n",
    "failures",
    "q025",
    "q25",
    "q50",
    "q75",
    "q975",
];

pub const SELECTION_HEADER: [&str; 4] = ["scenario_id", "model", "count", "frequency"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    Rmse,
    CForBenefit,
    IciBenefit,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Self::Rmse, Self::CForBenefit, Self::IciBenefit];

    pub fn label(self) -> &'static str {
        match self {
            Self::Rmse => "rmse",
            Self::CForBenefit => "c_for_benefit",
            Self::IciBenefit => "ici_benefit",
        }
    }

    pub fn value(self, r: &ReplicationResult) -> Option<f64> {
        match self {
            Self::Rmse => r.rmse,
            Self::CForBenefit => r.c_for_benefit,
            Self::IciBenefit => r.ici_benefit,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|m| m.label() == s)
            .ok_or_else(|| format!("unknown metric `{s}`"))
    }
}

/// Distribution of one metric for one (scenario, method).
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub scenario_id: u32,
    pub method: MethodKind,
    pub metric: Metric,
    /// Replications with a value.
    pub n: usize,
    /// Replications where the method failed.
    pub failures: usize,
    /// Values at [`QUANTILES`]; `None` when `n == 0`.
    pub quantiles: Option<[f64; 5]>,
}

impl AggregateRow {
    pub fn median(&self) -> Option<f64> {
        self.quantiles.map(|q| q[2])
    }
}

/// How often the adaptive approach chose each candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionRow {
    pub scenario_id: u32,
    pub model: MethodKind,
    pub count: usize,
    /// Share among non-failed adaptive replications.
    pub frequency: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Summary {
    pub rows: Vec<AggregateRow>,
    pub selection: Vec<SelectionRow>,
}

impl Summary {
    pub fn get(&self, scenario_id: u32, method: MethodKind, metric: Metric) -> Option<&AggregateRow> {
        self.rows
            .iter()
            .find(|r| r.scenario_id == scenario_id && r.method == method && r.metric == metric)
    }

    pub fn median(&self, scenario_id: u32, method: MethodKind, metric: Metric) -> Option<f64> {
        self.get(scenario_id, method, metric).and_then(AggregateRow::median)
    }

    pub fn selection_frequency(&self, scenario_id: u32, model: MethodKind) -> Option<f64> {
        self.selection
            .iter()
            .find(|s| s.scenario_id == scenario_id && s.model == model)
            .map(|s| s.frequency)
    }

    pub fn scenario_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = Vec::new();
        for r in &self.rows {
            if !ids.contains(&r.scenario_id) {
                ids.push(r.scenario_id);
            }
        }
        ids
    }
}

fn quantiles(values: &[f64]) -> Option<[f64; 5]> {
    if values.is_empty() {
        return None;
    }
    let sorted = sorted_copy(values);
    Some(QUANTILES.map(|p| quantile_sorted(&sorted, p)))
}

/// Summarizes results per (scenario, method, metric) in first-seen scenario
/// order and [`MethodKind::ALL`] order.
pub fn aggregate(results: &[ReplicationResult]) -> Summary {
    let mut scenario_ids: Vec<u32> = Vec::new();
    for r in results {
        if !scenario_ids.contains(&r.scenario_id) {
            scenario_ids.push(r.scenario_id);
        }
    }
    let mut summary = Summary::default();
    for &id in &scenario_ids {
        let of_scenario: Vec<&ReplicationResult> = results.iter().filter(|r| r.scenario_id == id).collect();
        for method in MethodKind::ALL {
            let rows: Vec<&ReplicationResult> = of_scenario.iter().copied().filter(|r| r.method == method).collect();
            if rows.is_empty() {
                continue;
            }
            let failures = rows.iter().filter(|r| r.is_failed()).count();
            for metric in Metric::ALL {
                let values: Vec<f64> = rows.iter().filter_map(|r| metric.value(r)).collect();
                summary.rows.push(AggregateRow {
                    scenario_id: id,
                    method,
                    metric,
                    n: values.len(),
                    failures,
                    quantiles: quantiles(&values),
                });
            }
        }
        let chosen: Vec<MethodKind> = of_scenario
            .iter()
            .filter(|r| r.method == MethodKind::Adaptive && !r.is_failed())
            .filter_map(|r| r.selected_model)
            .collect();
        if !chosen.is_empty() {
            for model in MethodKind::CANDIDATES {
                let count = chosen.iter().filter(|&&k| k == model).count();
                summary.selection.push(SelectionRow {
                    scenario_id: id,
                    model,
                    count,
                    frequency: count as f64 / chosen.len() as f64,
                });
            }
        }
    }
    summary
}

/// Sidecar path for the selection table: `<stem>_selection.csv` next to `path`.
pub fn selection_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}_selection.csv"))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_aggregate<W: Write>(writer: W, summary: &Summary) -> Result<(), HarnessError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(AGGREGATE_HEADER)?;
    for r in &summary.rows {
        let mut rec = vec![
            r.scenario_id.to_string(),
            r.method.to_string(),
            r.metric.to_string(),
            r.n.to_string(),
            r.failures.to_string(),
        ];
        rec.extend((0..5).map(|i| opt(r.quantiles.map(|q| q[i]))));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_selection<W: Write>(writer: W, summary: &Summary) -> Result<(), HarnessError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(SELECTION_HEADER)?;
    for s in &summary.selection {
        wtr.write_record([
            s.scenario_id.to_string(),
            s.model.to_string(),
            s.count.to_string(),
            s.frequency.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Writes the aggregate file at `path` and the selection sidecar next to it.
pub fn save_summary(path: &Path, summary: &Summary) -> Result<(), HarnessError> {
    write_aggregate(std::fs::File::create(path)?, summary)?;
    write_selection(std::fs::File::create(selection_path(path))?, summary)
}

/// Reads an aggregate file and, when present, its selection sidecar.
pub fn load_summary(path: &Path) -> Result<Summary, HarnessError> {
    let mut summary = read_aggregate(std::fs::File::open(path)?)?;
    let side = selection_path(path);
    if side.exists() {
        summary.selection = read_selection(std::fs::File::open(side)?)?;
    }
    Ok(summary)
}

fn parse_err(line: usize, message: String) -> HarnessError {
    HarnessError::Parse { line, message }
}

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, expected: &[&str]) -> Result<(), HarnessError> {
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != expected {
        return Err(parse_err(1, format!("unexpected header; expected `{}`", expected.join(","))));
    }
    Ok(())
}

fn parse_field<T: FromStr>(record: &csv::StringRecord, i: usize, name: &str) -> Result<T, HarnessError> {
    let line = record.position().map_or(0, |p| p.line() as usize);
    let raw = record.get(i).unwrap_or("");
    raw.parse().map_err(|_| parse_err(line, format!("invalid {name} `{raw}`")))
}

pub fn read_aggregate<R: Read>(reader: R) -> Result<Summary, HarnessError> {
    let mut rdr = csv::Reader::from_reader(reader);
    check_header(&mut rdr, &AGGREGATE_HEADER)?;
    let mut summary = Summary::default();
    for record in rdr.records() {
        let record = record?;
        let n: usize = parse_field(&record, 3, "n")?;
        let quantiles = if n == 0 {
            None
        } else {
            let mut q = [0.0; 5];
            for (i, v) in q.iter_mut().enumerate() {
                *v = parse_field(&record, 5 + i, AGGREGATE_HEADER[5 + i])?;
            }
            Some(q)
        };
        summary.rows.push(AggregateRow {
            scenario_id: parse_field(&record, 0, "scenario_id")?,
            method: parse_field(&record, 1, "method")?,
            metric: parse_field(&record, 2, "metric")?,
            n,
            failures: parse_field(&record, 4, "failures")?,
            quantiles,
        });
    }
    Ok(summary)
}

pub fn read_selection<R: Read>(reader: R) -> Result<Vec<SelectionRow>, HarnessError> {
    let mut rdr = csv::Reader::from_reader(reader);
    check_header(&mut rdr, &SELECTION_HEADER)?;
    rdr.records()
        .map(|record| {
            let record = record?;
            Ok(SelectionRow {
                scenario_id: parse_field(&record, 0, "scenario_id")?,
                model: parse_field(&record, 1, "model")?,
                count: parse_field(&record, 2, "count")?,
                frequency: parse_field(&record, 3, "frequency")?,
            })
        })
        .collect()
}
