//! Per-replication results files.

use std::io::{Read, Write};

use super::{HarnessError, ReplicationResult};
use crate::models::MethodKind;

pub const RESULTS_HEADER: [&str; 9] = [
    "scenario_id",
    "replication",
    "method",
    "rmse",
    "c_for_benefit",
    "ici_benefit",
    "selected_model",
    "failed",
    "failure_reason",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes results with [`RESULTS_HEADER`]. Missing metrics are empty fields;
/// numbers use the shortest round-trip representation, so output is
/// byte-identical for identical results.
pub fn write_results<W: Write>(writer: W, results: &[ReplicationResult]) -> Result<(), HarnessError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(RESULTS_HEADER)?;
    for r in results {
        wtr.write_record([
            r.scenario_id.to_string(),
            r.replication.to_string(),
            r.method.to_string(),
            opt(r.rmse),
            opt(r.c_for_benefit),
            opt(r.ici_benefit),
            r.selected_model.map(|k| k.to_string()).unwrap_or_default(),
            u8::from(r.is_failed()).to_string(),
            r.failure.clone().unwrap_or_default(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_results<R: Read>(reader: R) -> Result<Vec<ReplicationResult>, HarnessError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != RESULTS_HEADER {
        return Err(HarnessError::Parse {
            line: 1,
            message: format!("unexpected header; expected `{}`", RESULTS_HEADER.join(",")),
        });
    }
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let bad = |field: &str, value: &str| HarnessError::Parse {
            line,
            message: format!("invalid {field} `{value}`"),
        };
        let get = |i: usize| record.get(i).unwrap_or("");
        let num = |i: usize| -> Result<Option<f64>, HarnessError> {
            match get(i) {
                "" => Ok(None),
                s => s.parse().map(Some).map_err(|_| bad(RESULTS_HEADER[i], s)),
            }
        };
        let method: MethodKind = get(2).parse().map_err(|_| bad("method", get(2)))?;
        let selected_model = match get(6) {
            "" => None,
            s => Some(s.parse().map_err(|_| bad("selected_model", s))?),
        };
        let failed = match get(7) {
            "0" => false,
            "1" => true,
            s => return Err(bad("failed", s)),
        };
        out.push(ReplicationResult {
            scenario_id: get(0).parse().map_err(|_| bad("scenario_id", get(0)))?,
            replication: get(1).parse().map_err(|_| bad("replication", get(1)))?,
            method,
            rmse: num(3)?,
            c_for_benefit: num(4)?,
            ici_benefit: num(5)?,
            selected_model,
            failure: failed.then(|| get(8).to_string()),
        });
    }
    Ok(out)
}
