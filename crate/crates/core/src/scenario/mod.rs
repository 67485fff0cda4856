//! Trial and super-population generation for the scenario grid.
//!
//! Control-arm outcomes follow a logistic model in eight covariates
//! (`x1..x4 ~ N(0,1)`, `x5..x8 ~ Bernoulli(0.2)`). Treated-arm risk is either a
//! quadratic transform of the control linear predictor or, for interaction
//! scenarios, a linear predictor with covariate-specific treatment terms. A
//! constant absolute harm is then added to the treated-arm probability.

pub mod grid;
pub mod io;
pub mod rng;

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::glm::expit;

pub use io::{load_scenarios, parse_scenarios, write_scenarios, SCENARIO_HEADER};
pub use rng::{stream, SimRng, StreamPurpose};

/// Number of baseline covariates.
pub const N_COVARIATES: usize = 8;
/// Continuous covariates come first.
pub const N_CONTINUOUS: usize = 4;
pub const BINARY_PREVALENCE: f64 = 0.2;
/// Trial sizes used by the grid.
pub const GRID_SAMPLE_SIZES: [usize; 3] = [4250, 1063, 17000];
pub const GRID_AUCS: [f64; 3] = [0.75, 0.65, 0.85];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("scenario {0}: treatment-related harm has not been resolved")]
    HarmUnresolved(u32),
    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },
    #[error("row {row}: invalid field `{field}`: {message}")]
    Invalid {
        row: usize,
        field: &'static str,
        message: String,
    },
    #[error("i/o error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Intensity {
    Moderate,
    Strong,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum InteractionKind {
    Weak,
    Mixed,
    Strong,
    NegativeWeak,
    NegativeMixed,
    NegativeStrong,
    Combined,
}

impl InteractionKind {
    pub const ALL: [InteractionKind; 7] = [
        Self::Weak,
        Self::Mixed,
        Self::Strong,
        Self::NegativeWeak,
        Self::NegativeMixed,
        Self::NegativeStrong,
        Self::Combined,
    ];

    fn label(self) -> &'static str {
        match self {
            Self::Weak => "weak",
            Self::Mixed => "mixed",
            Self::Strong => "strong",
            Self::NegativeWeak => "negative-weak",
            Self::NegativeMixed => "negative-mixed",
            Self::NegativeStrong => "negative-strong",
            Self::Combined => "combined",
        }
    }
}

/// Shape of the deviation from a constant relative treatment effect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DeviationShape {
    Constant,
    Linear(Intensity),
    Quadratic(Intensity),
    NonMonotonic,
    Interaction(InteractionKind),
}

impl DeviationShape {
    /// Risk-based shapes in grid order.
    pub const RISK_BASED: [DeviationShape; 6] = [
        Self::Constant,
        Self::Linear(Intensity::Moderate),
        Self::Linear(Intensity::Strong),
        Self::Quadratic(Intensity::Moderate),
        Self::Quadratic(Intensity::Strong),
        Self::NonMonotonic,
    ];
}

impl fmt::Display for DeviationShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let intensity = |i: &Intensity| match i {
            Intensity::Moderate => "moderate",
            Intensity::Strong => "strong",
        };
        match self {
            Self::Constant => f.write_str("constant"),
            Self::Linear(i) => write!(f, "linear-{}", intensity(i)),
            Self::Quadratic(i) => write!(f, "quadratic-{}", intensity(i)),
            Self::NonMonotonic => f.write_str("non-monotonic"),
            Self::Interaction(k) => write!(f, "interaction-{}", k.label()),
        }
    }
}

impl FromStr for DeviationShape {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parsed = match s {
            "constant" => Self::Constant,
            "linear-moderate" => Self::Linear(Intensity::Moderate),
            "linear-strong" => Self::Linear(Intensity::Strong),
            "quadratic-moderate" => Self::Quadratic(Intensity::Moderate),
            "quadratic-strong" => Self::Quadratic(Intensity::Strong),
            "non-monotonic" => Self::NonMonotonic,
            other => {
                let kind = other
                    .strip_prefix("interaction-")
                    .and_then(|k| InteractionKind::ALL.into_iter().find(|c| c.label() == k));
                match kind {
                    Some(k) => Self::Interaction(k),
                    None => return Err(format!("unknown shape `{other}`")),
                }
            }
        };
        Ok(parsed)
    }
}

/// Average relative treatment effect the scenario is built around.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EffectSize {
    /// Odds ratio 1.
    Absent,
    /// Odds ratio 0.8.
    Moderate,
    /// Odds ratio 0.5.
    High,
}

impl EffectSize {
    pub const ALL: [EffectSize; 3] = [Self::Absent, Self::Moderate, Self::High];

    pub fn odds_ratio(self) -> f64 {
        match self {
            Self::Absent => 1.0,
            Self::Moderate => 0.8,
            Self::High => 0.5,
        }
    }
}

impl fmt::Display for EffectSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Absent => "absent",
            Self::Moderate => "moderate",
            Self::High => "high",
        })
    }
}

impl FromStr for EffectSize {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "absent" => Ok(Self::Absent),
            "moderate" => Ok(Self::Moderate),
            "high" => Ok(Self::High),
            other => Err(format!("unknown effect size `{other}`")),
        }
    }
}

/// Constant absolute treatment-related harm setting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum HarmLabel {
    Absent,
    ModeratePositive,
    StrongPositive,
    Negative,
}

impl HarmLabel {
    pub const ALL: [HarmLabel; 4] = [
        Self::Absent,
        Self::ModeratePositive,
        Self::StrongPositive,
        Self::Negative,
    ];
}

impl fmt::Display for HarmLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Absent => "absent",
            Self::ModeratePositive => "moderate-positive",
            Self::StrongPositive => "strong-positive",
            Self::Negative => "negative",
        })
    }
}

impl FromStr for HarmLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "absent" => Ok(Self::Absent),
            "moderate-positive" => Ok(Self::ModeratePositive),
            "strong-positive" => Ok(Self::StrongPositive),
            "negative" => Ok(Self::Negative),
            other => Err(format!("unknown harm label `{other}`")),
        }
    }
}

/// Treated-arm linear predictor specification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TreatmentEffect {
    /// `lp1 = g2 (lp0 - c)^2 + g1 (lp0 - c) + g0`.
    Gamma { g0: f64, g1: f64, g2: f64, c: f64 },
    /// `lp1 = g0 + b0 + sum_j (b_j + theta_j) x_j`.
    Interaction { g0: f64, theta: [f64; N_COVARIATES] },
}

impl TreatmentEffect {
    pub fn constant_odds_ratio(odds_ratio: f64) -> Self {
        Self::Gamma {
            g0: odds_ratio.ln(),
            g1: 1.0,
            g2: 0.0,
            c: 0.0,
        }
    }
}

/// One row of the scenario grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub id: u32,
    pub shape: DeviationShape,
    pub effect: EffectSize,
    pub n: usize,
    pub target_auc: f64,
    pub harm_label: HarmLabel,
    pub beta: [f64; N_COVARIATES + 1],
    pub effect_model: TreatmentEffect,
    /// Absolute probability shift added in the treated arm, once resolved.
    pub harm_value: Option<f64>,
    /// Mean true benefit before harms, as carried by the grid file.
    pub benefit_before: Option<f64>,
    pub benefit_after: Option<f64>,
}

impl Scenario {
    pub fn with_harm(&self, harm: f64) -> Self {
        Self {
            harm_value: Some(harm),
            ..self.clone()
        }
    }

    pub fn resolved_harm(&self) -> Result<f64, ScenarioError> {
        self.harm_value.ok_or(ScenarioError::HarmUnresolved(self.id))
    }
}

/// Baseline coefficients `(b0, b, ..., b)` calibrated to the given AUC.
pub fn baseline_beta(target_auc: f64) -> Option<[f64; N_COVARIATES + 1]> {
    let (b0, b) = if (target_auc - 0.75).abs() < 1e-9 {
        (-2.08, 0.49)
    } else if (target_auc - 0.65).abs() < 1e-9 {
        (-1.63, 0.26)
    } else if (target_auc - 0.85).abs() < 1e-9 {
        (-2.70, 0.82)
    } else {
        return None;
    };
    let mut beta = [b; N_COVARIATES + 1];
    beta[0] = b0;
    Some(beta)
}

/// Generated individuals with their potential-outcome probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    /// Row-major `n x 8`.
    pub covariates: Vec<f64>,
    pub treated: Vec<bool>,
    pub lp0: Vec<f64>,
    pub lp1: Vec<f64>,
    pub p0: Vec<f64>,
    /// Treated-arm probability after adding harm and clamping to `[0, 1]`.
    pub p1: Vec<f64>,
    pub outcome: Vec<bool>,
    /// `p0 - p1`.
    pub true_benefit: Vec<f64>,
    pub harm: f64,
}

impl Population {
    pub fn len(&self) -> usize {
        self.treated.len()
    }

    pub fn is_empty(&self) -> bool {
        self.treated.is_empty()
    }

    pub fn covariate_row(&self, i: usize) -> &[f64] {
        &self.covariates[i * N_COVARIATES..(i + 1) * N_COVARIATES]
    }

    pub fn mean_true_benefit(&self) -> f64 {
        mean(&self.true_benefit)
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

/// `n` rows of 4 standard-normal then 4 Bernoulli(0.2) covariates, row-major.
pub fn generate_covariates<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut out = Vec::with_capacity(n * N_COVARIATES);
    for _ in 0..n {
        for _ in 0..N_CONTINUOUS {
            out.push(rng.sample::<f64, _>(StandardNormal));
        }
        for _ in N_CONTINUOUS..N_COVARIATES {
            out.push(if rng.random::<f64>() < BINARY_PREVALENCE { 1.0 } else { 0.0 });
        }
    }
    out
}

/// `lp0 = b0 + sum_j b_j x_j` for each row.
pub fn control_lp(covariates: &[f64], beta: &[f64]) -> Result<Vec<f64>, ScenarioError> {
    if beta.len() != N_COVARIATES + 1 {
        return Err(ScenarioError::DimensionMismatch {
            what: "beta",
            expected: N_COVARIATES + 1,
            got: beta.len(),
        });
    }
    if !covariates.len().is_multiple_of(N_COVARIATES) {
        return Err(ScenarioError::DimensionMismatch {
            what: "covariates",
            expected: N_COVARIATES,
            got: covariates.len() % N_COVARIATES,
        });
    }
    Ok(covariates
        .chunks_exact(N_COVARIATES)
        .map(|row| beta[0] + row.iter().zip(&beta[1..]).map(|(x, b)| x * b).sum::<f64>())
        .collect())
}

/// `lp1 = g2 (lp0 - c)^2 + g1 (lp0 - c) + g0`, elementwise.
pub fn treatment_lp(lp0: &[f64], g0: f64, g1: f64, g2: f64, c: f64) -> Vec<f64> {
    lp0.iter()
        .map(|&l| {
            let d = l - c;
            g2 * d * d + g1 * d + g0
        })
        .collect()
}

/// `lp1 = g0 + b0 + sum_j (b_j + theta_j) x_j`.
pub fn interaction_lp(
    covariates: &[f64],
    beta: &[f64],
    g0: f64,
    theta: &[f64],
) -> Result<Vec<f64>, ScenarioError> {
    if theta.len() != N_COVARIATES {
        return Err(ScenarioError::DimensionMismatch {
            what: "theta",
            expected: N_COVARIATES,
            got: theta.len(),
        });
    }
    if beta.len() != N_COVARIATES + 1 {
        return Err(ScenarioError::DimensionMismatch {
            what: "beta",
            expected: N_COVARIATES + 1,
            got: beta.len(),
        });
    }
    let shifted: Vec<f64> = std::iter::once(beta[0] + g0)
        .chain(beta[1..].iter().zip(theta).map(|(b, t)| b + t))
        .collect();
    control_lp(covariates, &shifted)
}

/// Treated-arm linear predictor of `scenario` for the given rows.
pub fn scenario_lp1(scenario: &Scenario, covariates: &[f64], lp0: &[f64]) -> Result<Vec<f64>, ScenarioError> {
    match scenario.effect_model {
        TreatmentEffect::Gamma { g0, g1, g2, c } => Ok(treatment_lp(lp0, g0, g1, g2, c)),
        TreatmentEffect::Interaction { g0, theta } => interaction_lp(covariates, &scenario.beta, g0, &theta),
    }
}

/// Absolute harm for `scenario` given the harm-free mean true benefit.
///
/// Proportional to the mean benefit (0.25, 0.50, -0.25) except when the
/// average effect is absent, where the fixed shifts 0.01, 0.02, -0.01 apply.
pub fn resolve_harm(scenario: &Scenario, superpop_benefit_mean: f64) -> f64 {
    let null_effect = scenario.effect == EffectSize::Absent;
    match (scenario.harm_label, null_effect) {
        (HarmLabel::Absent, _) => 0.0,
        (HarmLabel::ModeratePositive, true) => 0.01,
        (HarmLabel::StrongPositive, true) => 0.02,
        (HarmLabel::Negative, true) => -0.01,
        (HarmLabel::ModeratePositive, false) => 0.25 * superpop_benefit_mean,
        (HarmLabel::StrongPositive, false) => 0.50 * superpop_benefit_mean,
        (HarmLabel::Negative, false) => -0.25 * superpop_benefit_mean,
    }
}

/// Random quantities behind a population, before the outcome model is applied.
#[derive(Debug, Clone)]
struct Draws {
    covariates: Vec<f64>,
    treated: Vec<bool>,
    uniforms: Vec<f64>,
}

fn draw<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Draws {
    let covariates = generate_covariates(n, rng);
    let n_treated = n / 2;
    let mut treated: Vec<bool> = (0..n).map(|i| i < n_treated).collect();
    treated.shuffle(rng);
    let uniforms = (0..n).map(|_| rng.random::<f64>()).collect();
    Draws {
        covariates,
        treated,
        uniforms,
    }
}

fn assemble(scenario: &Scenario, draws: Draws, harm: f64) -> Result<Population, ScenarioError> {
    let lp0 = control_lp(&draws.covariates, &scenario.beta)?;
    let lp1 = scenario_lp1(scenario, &draws.covariates, &lp0)?;
    let p0: Vec<f64> = lp0.iter().map(|&l| expit(l)).collect();
    let p1: Vec<f64> = lp1.iter().map(|&l| (expit(l) + harm).clamp(0.0, 1.0)).collect();
    let true_benefit = p0.iter().zip(&p1).map(|(a, b)| a - b).collect();
    let outcome = draws
        .uniforms
        .iter()
        .zip(&draws.treated)
        .enumerate()
        .map(|(i, (&u, &z))| u < if z { p1[i] } else { p0[i] })
        .collect();
    Ok(Population {
        covariates: draws.covariates,
        treated: draws.treated,
        lp0,
        lp1,
        p0,
        p1,
        outcome,
        true_benefit,
        harm,
    })
}

/// Draws a trial of `scenario.n` patients with an exact 50/50 arm split
/// (the treated arm gets `floor(n/2)`).
///
/// Per patient a single uniform `u` decides the outcome: `y = u < p_z`.
pub fn sample_trial<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> Result<Population, ScenarioError> {
    let harm = scenario.resolved_harm()?;
    assemble(scenario, draw(scenario.n, rng), harm)
}

/// Draws a truth-bearing super-population of `size` individuals.
///
/// When the scenario's harm is unresolved it is resolved here from the mean
/// true benefit of the same draws with harm 0, and recorded on the result.
pub fn sample_superpopulation<R: Rng + ?Sized>(
    scenario: &Scenario,
    size: usize,
    rng: &mut R,
) -> Result<Population, ScenarioError> {
    let draws = draw(size, rng);
    let harm = match scenario.harm_value {
        Some(h) => h,
        None => {
            let lp0 = control_lp(&draws.covariates, &scenario.beta)?;
            let lp1 = scenario_lp1(scenario, &draws.covariates, &lp0)?;
            let mean_benefit = lp0
                .iter()
                .zip(&lp1)
                .map(|(&a, &b)| expit(a) - expit(b))
                .sum::<f64>()
                / size.max(1) as f64;
            resolve_harm(scenario, mean_benefit)
        }
    };
    assemble(scenario, draws, harm)
}

/// Control-arm event rate and true-model AUC of `beta` over `n` draws.
///
/// Outcomes are drawn as `Y(0) ~ Bernoulli(expit(lp0))`; the AUC is the
/// c-statistic of `lp0` against them.
pub fn control_arm_summary<R: Rng + ?Sized>(beta: &[f64], n: usize, rng: &mut R) -> Result<(f64, f64), ScenarioError> {
    let x = generate_covariates(n, rng);
    let lp0 = control_lp(&x, beta)?;
    let y: Vec<bool> = lp0.iter().map(|&l| rng.random::<f64>() < expit(l)).collect();
    let rate = y.iter().filter(|&&v| v).count() as f64 / n.max(1) as f64;
    let auc = crate::metrics::c_statistic(&lp0, &y).unwrap_or(f64::NAN);
    Ok((rate, auc))
}
