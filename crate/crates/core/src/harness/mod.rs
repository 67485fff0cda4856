//! Replication sweeps over the scenario grid.

pub mod aggregate;
pub mod apply;
pub mod figures;
pub mod results;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::metrics::{c_for_benefit, ici_for_benefit, match_pairs, rmse, MetricError};
use crate::models::{fit_all_methods, BenefitModel, MethodKind, ModelError, TrialView};
use crate::scenario::{sample_superpopulation, sample_trial, stream, Population, Scenario, ScenarioError, StreamPurpose};

pub use aggregate::{aggregate, load_summary, save_summary, AggregateRow, Metric, SelectionRow, Summary};
pub use apply::{apply_file, apply_trial, ApplyReport, ApplySpec};
pub use figures::{emit_figure_data, FigureId};
pub use results::{read_results, write_results, RESULTS_HEADER};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("scenarios missing from the input: {0:?}")]
    MissingScenarios(Vec<u32>),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("column `{0}` has a single class")]
    SingleClass(String),
    #[error("unknown figure `{0}`")]
    UnknownFigure(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Population on which the benefit metrics are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum MetricPopulation {
    #[default]
    #[serde(rename = "superpop")]
    SuperPopulation,
    #[serde(rename = "trial")]
    Trial,
}

impl fmt::Display for MetricPopulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::SuperPopulation => "superpop",
            Self::Trial => "trial",
        })
    }
}

impl FromStr for MetricPopulation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "superpop" => Ok(Self::SuperPopulation),
            "trial" => Ok(Self::Trial),
            other => Err(format!("unknown metric population `{other}`; expected superpop or trial")),
        }
    }
}

/// Settings of one sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub scenario_ids: Vec<u32>,
    pub replications: u32,
    pub superpop_size: usize,
    pub master_seed: u64,
    /// Worker threads; 0 uses the rayon default.
    pub worker_count: usize,
    pub output_dir: Option<PathBuf>,
    pub metric_population: MetricPopulation,
    pub n_strata: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario_ids: Vec::new(),
            replications: 500,
            superpop_size: 500_000,
            master_seed: 1,
            worker_count: 0,
            output_dir: None,
            metric_population: MetricPopulation::SuperPopulation,
            n_strata: 4,
        }
    }
}

impl RunConfig {
    /// Desk-scale profile: 200 replications, super-population of 100,000.
    pub fn fast(mut self) -> Self {
        self.replications = 200;
        self.superpop_size = 100_000;
        self
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.replications < 1 {
            return Err(HarnessError::Config("replications must be at least 1".into()));
        }
        if self.superpop_size < 1000 {
            return Err(HarnessError::Config("super-population size must be at least 1000".into()));
        }
        if self.n_strata < 1 {
            return Err(HarnessError::Config("need at least one risk stratum".into()));
        }
        Ok(())
    }
}

/// One row per (scenario, replication, method).
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationResult {
    pub scenario_id: u32,
    pub replication: u32,
    pub method: MethodKind,
    pub rmse: Option<f64>,
    pub c_for_benefit: Option<f64>,
    pub ici_benefit: Option<f64>,
    /// Kind chosen by the adaptive approach.
    pub selected_model: Option<MethodKind>,
    pub failure: Option<String>,
}

impl ReplicationResult {
    fn failed(scenario_id: u32, replication: u32, method: MethodKind, reason: String) -> Self {
        Self {
            scenario_id,
            replication,
            method,
            rmse: None,
            c_for_benefit: None,
            ici_benefit: None,
            selected_model: None,
            failure: Some(reason),
        }
    }

    pub fn is_failed(&self) -> bool {
        self.failure.is_some()
    }
}

/// Truth-bearing population shared by all replications of a scenario.
#[derive(Debug, Clone)]
pub struct ScenarioTruth {
    /// Scenario with its harm resolved on the super-population.
    pub scenario: Scenario,
    pub superpop: Population,
}

impl ScenarioTruth {
    pub fn generate(scenario: &Scenario, size: usize, master_seed: u64) -> Result<Self, HarnessError> {
        let mut rng = stream(master_seed, StreamPurpose::SuperPopulation, scenario.id, 0);
        let superpop = sample_superpopulation(scenario, size, &mut rng)?;
        Ok(Self {
            scenario: scenario.with_harm(superpop.harm),
            superpop,
        })
    }
}

struct Scores {
    rmse: f64,
    c_for_benefit: Option<f64>,
    ici: Option<f64>,
}

fn score(model: &BenefitModel<f64>, eval: &Population, lp: &[f64]) -> Result<Scores, MetricError> {
    let predicted = model.predict(lp);
    let rmse = rmse(&eval.true_benefit, &predicted)?;
    let pairs = match_pairs(&eval.treated, &eval.outcome, &predicted)?;
    Ok(Scores {
        rmse,
        c_for_benefit: c_for_benefit(&pairs).ok(),
        ici: ici_for_benefit(&pairs).ok(),
    })
}

/// Samples one trial, fits every method and scores it.
///
/// The trial stream depends only on (seed, scenario id, replication), and a
/// failing method yields a failed row rather than an error.
pub fn run_replication(
    truth: &ScenarioTruth,
    replication: u32,
    master_seed: u64,
    metric_population: MetricPopulation,
    n_strata: usize,
) -> Vec<ReplicationResult> {
    let id = truth.scenario.id;
    let mut rng = stream(master_seed, StreamPurpose::Trial, id, replication);
    let trial = match sample_trial(&truth.scenario, &mut rng) {
        Ok(t) => t,
        Err(e) => return fail_all(id, replication, &e.to_string()),
    };
    let fits = match fit_all_methods(&TrialView::from_population(&trial), n_strata) {
        Ok(f) => f,
        Err(e) => return fail_all(id, replication, &format!("risk model: {e}")),
    };
    let eval = match metric_population {
        MetricPopulation::SuperPopulation => &truth.superpop,
        MetricPopulation::Trial => &trial,
    };
    let eval_lp = match metric_population {
        MetricPopulation::SuperPopulation => match fits.risk.baseline_lp(&eval.covariates) {
            Ok(lp) => lp,
            Err(e) => return fail_all(id, replication, &e.to_string()),
        },
        MetricPopulation::Trial => fits.lp.clone(),
    };

    let mut rows: Vec<ReplicationResult> = Vec::with_capacity(MethodKind::ALL.len());
    for (kind, model) in &fits.models {
        let row = match (kind, model) {
            (_, Err(e)) => ReplicationResult::failed(id, replication, *kind, e.to_string()),
            (MethodKind::Adaptive, Ok(m)) => {
                // Predictions are those of the selected candidate, so reuse its scores.
                let selected = m.effective_kind();
                match rows.iter().find(|r| r.method == selected) {
                    Some(r) if !r.is_failed() => ReplicationResult {
                        method: MethodKind::Adaptive,
                        selected_model: Some(selected),
                        ..r.clone()
                    },
                    _ => scored_row(id, replication, *kind, m, eval, &eval_lp, Some(selected)),
                }
            }
            (_, Ok(m)) => scored_row(id, replication, *kind, m, eval, &eval_lp, None),
        };
        rows.push(row);
    }
    rows
}

fn scored_row(
    id: u32,
    replication: u32,
    kind: MethodKind,
    model: &BenefitModel<f64>,
    eval: &Population,
    lp: &[f64],
    selected_model: Option<MethodKind>,
) -> ReplicationResult {
    match score(model, eval, lp) {
        Ok(s) => ReplicationResult {
            scenario_id: id,
            replication,
            method: kind,
            rmse: Some(s.rmse),
            c_for_benefit: s.c_for_benefit,
            ici_benefit: s.ici,
            selected_model,
            failure: None,
        },
        Err(e) => ReplicationResult::failed(id, replication, kind, format!("metrics: {e}")),
    }
}

fn fail_all(id: u32, replication: u32, reason: &str) -> Vec<ReplicationResult> {
    MethodKind::ALL
        .into_iter()
        .map(|k| ReplicationResult::failed(id, replication, k, reason.to_string()))
        .collect()
}

fn select_scenarios<'a>(all: &'a [Scenario], ids: &[u32]) -> Result<Vec<&'a Scenario>, HarnessError> {
    if ids.is_empty() {
        return Ok(all.iter().collect());
    }
    let mut missing = Vec::new();
    let mut chosen = Vec::with_capacity(ids.len());
    for &id in ids {
        match all.iter().find(|s| s.id == id) {
            Some(s) => chosen.push(s),
            None => missing.push(id),
        }
    }
    if missing.is_empty() {
        Ok(chosen)
    } else {
        Err(HarnessError::MissingScenarios(missing))
    }
}

/// Runs every (scenario, replication) unit of `config` over a worker pool.
///
/// Output is ordered by scenario (in `config.scenario_ids` order, or file
/// order when empty), then replication, then method, whatever the worker count.
pub fn run_sweep(scenarios: &[Scenario], config: &RunConfig) -> Result<Vec<ReplicationResult>, HarnessError> {
    config.validate()?;
    let chosen = select_scenarios(scenarios, &config.scenario_ids)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.worker_count)
        .build()
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let mut out = Vec::with_capacity(chosen.len() * config.replications as usize * MethodKind::ALL.len());
    for scenario in chosen {
        let truth = pool.install(|| ScenarioTruth::generate(scenario, config.superpop_size, config.master_seed))?;
        let rows: Vec<Vec<ReplicationResult>> = pool.install(|| {
            (0..config.replications)
                .into_par_iter()
                .map(|r| run_replication(&truth, r, config.master_seed, config.metric_population, config.n_strata))
                .collect()
        });
        out.extend(rows.into_iter().flatten());
    }
    Ok(out)
}
