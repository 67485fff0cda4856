//! Delimited-text encoding of the scenario grid.

use std::io::{Read, Write};
use std::path::Path;

use super::{
    DeviationShape, EffectSize, HarmLabel, Scenario, ScenarioError, TreatmentEffect, GRID_AUCS,
    N_COVARIATES,
};

pub const SCENARIO_HEADER: [&str; 29] = [
    "id",
    "shape",
    "effect",
    "n",
    "target_auc",
    "harm_label",
    "b0",
    "b1",
    "b2",
    "b3",
    "b4",
    "b5",
    "b6",
    "b7",
    "b8",
    "g0",
    "g1",
    "g2",
    "c",
    "theta1",
    "theta2",
    "theta3",
    "theta4",
    "theta5",
    "theta6",
    "theta7",
    "theta8",
    "benefit_before",
    "benefit_after",
];

const COL_B0: usize = 6;
const COL_G0: usize = 15;
const COL_THETA1: usize = 19;
const COL_BEFORE: usize = 27;

/// Reads a scenario file. An empty file yields an empty list.
pub fn load_scenarios(path: impl AsRef<Path>) -> Result<Vec<Scenario>, ScenarioError> {
    let file = std::fs::File::open(path.as_ref())
        .map_err(|e| ScenarioError::Io(format!("{}: {e}", path.as_ref().display())))?;
    parse_scenarios(file)
}

pub fn parse_scenarios<R: Read>(reader: R) -> Result<Vec<Scenario>, ScenarioError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    let mut saw_header = false;
    for result in rdr.records() {
        let record = result.map_err(|e| ScenarioError::Parse {
            row: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let row = record.position().map_or(0, |p| p.line() as usize);
        if !saw_header {
            saw_header = true;
            let header: Vec<&str> = record.iter().collect();
            if header != SCENARIO_HEADER {
                return Err(ScenarioError::Parse {
                    row,
                    message: format!("unexpected header; expected `{}`", SCENARIO_HEADER.join(",")),
                });
            }
            continue;
        }
        if record.iter().all(str::is_empty) {
            continue;
        }
        if record.len() != SCENARIO_HEADER.len() {
            return Err(ScenarioError::Parse {
                row,
                message: format!("expected {} fields, found {}", SCENARIO_HEADER.len(), record.len()),
            });
        }
        out.push(parse_row(&record, row)?);
    }
    Ok(out)
}

fn field(record: &csv::StringRecord, col: usize) -> &str {
    record.get(col).unwrap_or("")
}

fn number(record: &csv::StringRecord, col: usize, row: usize) -> Result<f64, ScenarioError> {
    let raw = field(record, col);
    let v: f64 = raw.parse().map_err(|_| ScenarioError::Invalid {
        row,
        field: SCENARIO_HEADER[col],
        message: format!("`{raw}` is not a number"),
    })?;
    if !v.is_finite() {
        return Err(ScenarioError::Invalid {
            row,
            field: SCENARIO_HEADER[col],
            message: "must be finite".into(),
        });
    }
    Ok(v)
}

fn optional_number(record: &csv::StringRecord, col: usize, row: usize) -> Result<Option<f64>, ScenarioError> {
    if field(record, col).is_empty() {
        Ok(None)
    } else {
        number(record, col, row).map(Some)
    }
}

fn parse_label<T: std::str::FromStr<Err = String>>(
    record: &csv::StringRecord,
    col: usize,
    row: usize,
) -> Result<T, ScenarioError> {
    field(record, col).parse().map_err(|message| ScenarioError::Invalid {
        row,
        field: SCENARIO_HEADER[col],
        message,
    })
}

fn parse_row(record: &csv::StringRecord, row: usize) -> Result<Scenario, ScenarioError> {
    let id: u32 = field(record, 0).parse().map_err(|_| ScenarioError::Invalid {
        row,
        field: "id",
        message: format!("`{}` is not a non-negative integer", field(record, 0)),
    })?;
    let shape: DeviationShape = parse_label(record, 1, row)?;
    let effect: EffectSize = parse_label(record, 2, row)?;
    let n: usize = field(record, 3).replace('_', "").parse().map_err(|_| ScenarioError::Invalid {
        row,
        field: "n",
        message: format!("`{}` is not a count", field(record, 3)),
    })?;
    if n < 2 {
        return Err(ScenarioError::Invalid {
            row,
            field: "n",
            message: "a trial needs at least two patients".into(),
        });
    }
    let target_auc = number(record, 4, row)?;
    if !GRID_AUCS.iter().any(|a| (a - target_auc).abs() < 1e-9) {
        return Err(ScenarioError::Invalid {
            row,
            field: "target_auc",
            message: format!("{target_auc} is not one of 0.65, 0.75, 0.85"),
        });
    }
    let harm_label: HarmLabel = parse_label(record, 5, row)?;

    let mut beta = [0.0; N_COVARIATES + 1];
    for (j, b) in beta.iter_mut().enumerate() {
        *b = number(record, COL_B0 + j, row)?;
    }

    let g0 = number(record, COL_G0, row)?;
    let gamma_rest: Vec<Option<f64>> = (COL_G0 + 1..COL_THETA1)
        .map(|c| optional_number(record, c, row))
        .collect::<Result<_, _>>()?;
    let theta: Vec<Option<f64>> = (COL_THETA1..COL_THETA1 + N_COVARIATES)
        .map(|c| optional_number(record, c, row))
        .collect::<Result<_, _>>()?;

    let gamma_mode = gamma_rest.iter().all(Option::is_some);
    let theta_mode = theta.iter().all(Option::is_some);
    let theta_blank = theta.iter().all(Option::is_none);
    let gamma_blank = gamma_rest.iter().all(Option::is_none);
    let effect_model = match (gamma_mode && theta_blank, theta_mode && gamma_blank) {
        (true, false) => TreatmentEffect::Gamma {
            g0,
            g1: gamma_rest[0].unwrap_or_default(),
            g2: gamma_rest[1].unwrap_or_default(),
            c: gamma_rest[2].unwrap_or_default(),
        },
        (false, true) => {
            let mut t = [0.0; N_COVARIATES];
            for (dst, src) in t.iter_mut().zip(&theta) {
                *dst = src.unwrap_or_default();
            }
            TreatmentEffect::Interaction { g0, theta: t }
        }
        _ => {
            return Err(ScenarioError::Invalid {
                row,
                field: "theta1",
                message: "exactly one of (g1, g2, c) or theta1..theta8 must be given".into(),
            })
        }
    };
    if matches!(shape, DeviationShape::Interaction(_)) != matches!(effect_model, TreatmentEffect::Interaction { .. }) {
        return Err(ScenarioError::Invalid {
            row,
            field: "shape",
            message: "interaction shapes require theta columns and vice versa".into(),
        });
    }

    Ok(Scenario {
        id,
        shape,
        effect,
        n,
        target_auc,
        harm_label,
        beta,
        effect_model,
        harm_value: None,
        benefit_before: optional_number(record, COL_BEFORE, row)?,
        benefit_after: optional_number(record, COL_BEFORE + 1, row)?,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes scenarios with [`SCENARIO_HEADER`]; numbers use the shortest
/// representation that parses back to the same `f64`.
pub fn write_scenarios<W: Write>(writer: W, scenarios: &[Scenario]) -> Result<(), ScenarioError> {
    let io_err = |e: csv::Error| ScenarioError::Io(e.to_string());
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(SCENARIO_HEADER).map_err(io_err)?;
    for s in scenarios {
        let mut rec: Vec<String> = vec![
            s.id.to_string(),
            s.shape.to_string(),
            s.effect.to_string(),
            s.n.to_string(),
            s.target_auc.to_string(),
            s.harm_label.to_string(),
        ];
        rec.extend(s.beta.iter().map(f64::to_string));
        match s.effect_model {
            TreatmentEffect::Gamma { g0, g1, g2, c } => {
                rec.extend([g0, g1, g2, c].iter().map(f64::to_string));
                rec.extend(std::iter::repeat_n(String::new(), N_COVARIATES));
            }
            TreatmentEffect::Interaction { g0, theta } => {
                rec.push(g0.to_string());
                rec.extend(std::iter::repeat_n(String::new(), 3));
                rec.extend(theta.iter().map(f64::to_string));
            }
        }
        rec.push(fmt_opt(s.benefit_before));
        rec.push(fmt_opt(s.benefit_after));
        wtr.write_record(&rec).map_err(io_err)?;
    }
    wtr.flush().map_err(|e| ScenarioError::Io(e.to_string()))?;
    Ok(())
}
