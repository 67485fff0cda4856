//! Two-stage benefit modelling on an external trial file.

use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;

use super::HarnessError;
use crate::metrics::{c_for_benefit, ici_for_benefit, match_pairs, MatchedPairSet};
use crate::models::{fit_all_methods, fit_method, fit_risk_model, BenefitModel, MethodKind, TrialView};
use crate::scenario::{stream, Population, StreamPurpose};

/// Columns and settings of an external analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct ApplySpec {
    pub outcome: String,
    pub treatment: String,
    pub covariates: Vec<String>,
    pub method: MethodKind,
    pub folds: usize,
    pub seed: u64,
    pub n_strata: usize,
}

impl ApplySpec {
    pub fn new(outcome: &str, treatment: &str, covariates: &[&str], method: MethodKind) -> Self {
        Self {
            outcome: outcome.to_string(),
            treatment: treatment.to_string(),
            covariates: covariates.iter().map(|c| c.to_string()).collect(),
            method,
            folds: 5,
            seed: 1,
            n_strata: 4,
        }
    }
}

/// Parsed trial with categorical covariates dummy-coded.
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalTrial {
    /// Design column names; dummies are named `column=level`.
    pub columns: Vec<String>,
    /// Row-major covariates.
    pub covariates: Vec<f64>,
    pub treated: Vec<bool>,
    pub outcome: Vec<bool>,
}

impl ExternalTrial {
    pub fn len(&self) -> usize {
        self.treated.len()
    }

    pub fn is_empty(&self) -> bool {
        self.treated.is_empty()
    }

    pub fn view(&self) -> Result<TrialView<'_, f64>, HarnessError> {
        Ok(TrialView::new(&self.covariates, self.columns.len(), &self.treated, &self.outcome)?)
    }

    fn subset(&self, rows: &[usize]) -> Self {
        let p = self.columns.len();
        Self {
            columns: self.columns.clone(),
            covariates: rows.iter().flat_map(|&i| self.covariates[i * p..(i + 1) * p].iter().copied()).collect(),
            treated: rows.iter().map(|&i| self.treated[i]).collect(),
            outcome: rows.iter().map(|&i| self.outcome[i]).collect(),
        }
    }
}

fn parse_binary(raw: &str, column: &str, line: usize) -> Result<bool, HarnessError> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "1" | "true" => Ok(true),
        "0" | "false" => Ok(false),
        other => Err(HarnessError::Parse {
            line,
            message: format!("column `{column}`: expected 0/1, found `{other}`"),
        }),
    }
}

/// Reads a delimited trial file.
///
/// A covariate column is numeric when every value parses as a number and
/// categorical otherwise; categorical columns get one indicator per level
/// except the first in sorted order.
pub fn read_external<R: Read>(reader: R, spec: &ApplySpec) -> Result<ExternalTrial, HarnessError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| HarnessError::Parse {
                line: 1,
                message: format!("no column named `{name}`"),
            })
    };
    let y_col = find(&spec.outcome)?;
    let z_col = find(&spec.treatment)?;
    let x_cols: Vec<usize> = spec.covariates.iter().map(|c| find(c)).collect::<Result<_, _>>()?;
    if spec.covariates.is_empty() {
        return Err(HarnessError::Config("at least one covariate is required".into()));
    }

    let mut lines = Vec::new();
    let mut raw: Vec<Vec<String>> = Vec::new();
    let (mut treated, mut outcome) = (Vec::new(), Vec::new());
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize| record.get(i).unwrap_or("");
        outcome.push(parse_binary(field(y_col), &spec.outcome, line)?);
        treated.push(parse_binary(field(z_col), &spec.treatment, line)?);
        let values: Vec<String> = x_cols.iter().map(|&c| field(c).to_string()).collect();
        if let Some(j) = values.iter().position(String::is_empty) {
            return Err(HarnessError::Parse {
                line,
                message: format!("missing value in column `{}`", spec.covariates[j]),
            });
        }
        raw.push(values);
        lines.push(line);
    }
    if outcome.iter().all(|&y| y) || outcome.iter().all(|&y| !y) {
        return Err(HarnessError::SingleClass(spec.outcome.clone()));
    }
    if treated.iter().all(|&z| z) || treated.iter().all(|&z| !z) {
        return Err(HarnessError::SingleClass(spec.treatment.clone()));
    }

    // Per covariate: numeric, or the non-reference levels.
    let mut coding: Vec<Option<Vec<String>>> = Vec::with_capacity(x_cols.len());
    let mut columns = Vec::new();
    for (j, name) in spec.covariates.iter().enumerate() {
        if raw.iter().all(|r| r[j].parse::<f64>().is_ok_and(f64::is_finite)) {
            coding.push(None);
            columns.push(name.clone());
        } else {
            let levels: BTreeSet<&str> = raw.iter().map(|r| r[j].as_str()).collect();
            let levels: Vec<String> = levels.into_iter().skip(1).map(str::to_string).collect();
            columns.extend(levels.iter().map(|l| format!("{name}={l}")));
            coding.push(Some(levels));
        }
    }
    let mut covariates = Vec::with_capacity(raw.len() * columns.len());
    for values in &raw {
        for (v, code) in values.iter().zip(&coding) {
            match code {
                None => covariates.push(v.parse().expect("checked numeric")),
                Some(levels) => covariates.extend(levels.iter().map(|l| if l == v { 1.0 } else { 0.0 })),
            }
        }
    }
    Ok(ExternalTrial {
        columns,
        covariates,
        treated,
        outcome,
    })
}

/// AIC table entry.
#[derive(Debug, Clone, PartialEq)]
pub struct AicRow {
    pub method: MethodKind,
    pub log_likelihood: Option<f64>,
    pub aic: Option<f64>,
    pub failure: Option<String>,
}

/// Cross-validated benefit metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossValidated {
    pub folds: usize,
    pub n_pairs: usize,
    pub c_for_benefit: Option<f64>,
    pub ici_benefit: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApplyReport {
    pub method: MethodKind,
    /// Kind behind the predictions (the selected one for adaptive).
    pub effective_method: MethodKind,
    pub lp: Vec<f64>,
    pub benefit: Vec<f64>,
    pub aic_table: Vec<AicRow>,
    pub cross_validated: CrossValidated,
}

fn fit_predict(
    train: &ExternalTrial,
    method: MethodKind,
    n_strata: usize,
) -> Result<(crate::models::RiskModel<f64>, BenefitModel<f64>), HarnessError> {
    let view = train.view()?;
    let risk = fit_risk_model(&view)?;
    let lp = risk.baseline_lp(&train.covariates)?;
    let model = fit_method(&view, &risk, &lp, method, n_strata)?;
    Ok((risk, model))
}

/// Fold of each patient: a seeded permutation dealt round-robin.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream(seed, StreamPurpose::CrossValidation, 0, 0));
    let mut fold = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        fold[i] = pos % folds;
    }
    fold
}

/// Cross-validated c-for-benefit and ICI. Held-out patients are matched
/// within their fold and the pairs of all folds are pooled.
pub fn cross_validate(trial: &ExternalTrial, spec: &ApplySpec) -> Result<CrossValidated, HarnessError> {
    if spec.folds < 2 || spec.folds > trial.len() {
        return Err(HarnessError::Config(format!("cannot split {} patients into {} folds", trial.len(), spec.folds)));
    }
    let fold = fold_assignment(trial.len(), spec.folds, spec.seed);
    let mut pooled = MatchedPairSet {
        observed: Vec::new(),
        predicted: Vec::new(),
    };
    for k in 0..spec.folds {
        let train: Vec<usize> = (0..trial.len()).filter(|&i| fold[i] != k).collect();
        let test: Vec<usize> = (0..trial.len()).filter(|&i| fold[i] == k).collect();
        let (risk, model) = fit_predict(&trial.subset(&train), spec.method, spec.n_strata)?;
        let held = trial.subset(&test);
        let predicted = model.predict(&risk.baseline_lp(&held.covariates)?);
        let pairs = match_pairs(&held.treated, &held.outcome, &predicted)?;
        pooled.observed.extend(pairs.observed);
        pooled.predicted.extend(pairs.predicted);
    }
    Ok(CrossValidated {
        folds: spec.folds,
        n_pairs: pooled.n_pairs(),
        c_for_benefit: c_for_benefit(&pooled).ok(),
        ici_benefit: ici_for_benefit(&pooled).ok(),
    })
}

/// Fits every method on the full data, reports the chosen one per patient,
/// and cross-validates it.
pub fn apply_trial(trial: &ExternalTrial, spec: &ApplySpec) -> Result<ApplyReport, HarnessError> {
    let fits = fit_all_methods(&trial.view()?, spec.n_strata)?;
    let aic_table = fits
        .models
        .iter()
        .map(|(kind, m)| match m {
            Ok(m) => AicRow {
                method: *kind,
                log_likelihood: m.log_likelihood(),
                aic: m.aic(),
                failure: None,
            },
            Err(e) => AicRow {
                method: *kind,
                log_likelihood: None,
                aic: None,
                failure: Some(e.to_string()),
            },
        })
        .collect();
    let model = match fits.get(spec.method).expect("every method is fitted") {
        Ok(m) => m,
        Err(e) => return Err(e.clone().into()),
    };
    Ok(ApplyReport {
        method: spec.method,
        effective_method: model.effective_kind(),
        benefit: model.predict(&fits.lp),
        lp: fits.lp.clone(),
        aic_table,
        cross_validated: cross_validate(trial, spec)?,
    })
}

/// Reads `path` and runs [`apply_trial`].
pub fn apply_file(path: &Path, spec: &ApplySpec) -> Result<ApplyReport, HarnessError> {
    let trial = read_external(std::fs::File::open(path)?, spec)?;
    apply_trial(&trial, spec)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes `benefit.csv`, `aic.csv` and `cross_validation.csv` into `dir`.
pub fn write_report(dir: &Path, report: &ApplyReport) -> Result<Vec<PathBuf>, HarnessError> {
    std::fs::create_dir_all(dir)?;
    let paths = [dir.join("benefit.csv"), dir.join("aic.csv"), dir.join("cross_validation.csv")];

    let mut w = csv::Writer::from_path(&paths[0])?;
    w.write_record(["row", "lp", "predicted_benefit"])?;
    for (i, (lp, b)) in report.lp.iter().zip(&report.benefit).enumerate() {
        w.write_record([(i + 1).to_string(), lp.to_string(), b.to_string()])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(&paths[1])?;
    w.write_record(["method", "log_likelihood", "aic", "selected", "failure_reason"])?;
    for row in &report.aic_table {
        let selected = report.method == MethodKind::Adaptive && row.method == report.effective_method;
        w.write_record([
            row.method.to_string(),
            opt(row.log_likelihood),
            opt(row.aic),
            u8::from(selected).to_string(),
            row.failure.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;

    let cv = &report.cross_validated;
    let mut w = csv::Writer::from_path(&paths[2])?;
    w.write_record(["method", "folds", "pairs", "c_for_benefit", "ici_benefit"])?;
    w.write_record([
        report.method.to_string(),
        cv.folds.to_string(),
        cv.n_pairs.to_string(),
        opt(cv.c_for_benefit),
        opt(cv.ici_benefit),
    ])?;
    w.flush()?;
    Ok(paths.to_vec())
}

/// Writes a simulated trial as `x1..x8,treatment,outcome`.
pub fn write_trial<W: Write>(writer: W, trial: &Population) -> Result<(), HarnessError> {
    let p = trial.covariates.len() / trial.len().max(1);
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (1..=p).map(|j| format!("x{j}")).collect();
    header.extend(["treatment".to_string(), "outcome".to_string()]);
    w.write_record(&header)?;
    for i in 0..trial.len() {
        let mut rec: Vec<String> = trial.covariate_row(i).iter().map(f64::to_string).collect();
        rec.push(u8::from(trial.treated[i]).to_string());
        rec.push(u8::from(trial.outcome[i]).to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
