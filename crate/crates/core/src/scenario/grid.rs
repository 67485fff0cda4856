//! Construction of the shipped scenario grid.
//!
//! Rows enumerate effect size, then deviation shape, then trial size, then
//! AUC, then harm label, giving ids 1..=648 for the risk-based scenarios and
//! 649..=676 for the interaction scenarios (seven kinds by four harm labels).
//!
//! Deviation coefficients are expressed as a slope deficit `1 - g1` and a
//! curvature `g2` at AUC 0.75, scaled for the other AUC levels. `g0` is then
//! solved so that the mean true benefit matches the constant-effect scenario
//! with the same effect size and AUC (zero when the effect is absent).
//! Non-monotonic rows carry fixed coefficients for moderate and high effects.

use crate::glm::expit;

use super::{
    baseline_beta, control_lp, generate_covariates, interaction_lp, resolve_harm, stream,
    treatment_lp, DeviationShape, EffectSize, HarmLabel, Intensity, InteractionKind, Scenario,
    ScenarioError, StreamPurpose, TreatmentEffect, GRID_AUCS, GRID_SAMPLE_SIZES, N_COVARIATES,
};

/// Number of risk-based scenarios.
pub const N_RISK_BASED: usize = 648;
/// Number of interaction scenarios.
pub const N_INTERACTION: usize = 28;
/// Trial size of the interaction scenarios.
pub const INTERACTION_N: usize = 4250;
/// Treatment intercept shared by the interaction scenarios.
pub const INTERACTION_G0: f64 = -0.69;

/// Default calibration population used to solve `g0`.
pub const DEFAULT_CALIBRATION_SIZE: usize = 1_000_000;
pub const DEFAULT_CALIBRATION_SEED: u64 = 20_200_101;

const WEAK: f64 = -0.19;
const STRONG: f64 = -0.49;
const NEG_WEAK: f64 = 0.16;
const NEG_STRONG: f64 = 0.33;

/// Covariates (0-based) carrying treatment interactions.
pub const INTERACTION_COVARIATES: [usize; 4] = [0, 1, 4, 5];

impl InteractionKind {
    /// Interaction log odds ratio on each designated covariate.
    pub fn theta(self) -> [f64; N_COVARIATES] {
        let four = match self {
            Self::Weak => [WEAK; 4],
            Self::Mixed => [WEAK, STRONG, WEAK, STRONG],
            Self::Strong => [STRONG; 4],
            Self::NegativeWeak => [NEG_WEAK; 4],
            Self::NegativeMixed => [NEG_WEAK, NEG_STRONG, NEG_WEAK, NEG_STRONG],
            Self::NegativeStrong => [NEG_STRONG; 4],
            Self::Combined => [STRONG, NEG_STRONG, STRONG, NEG_STRONG],
        };
        let mut theta = [0.0; N_COVARIATES];
        for (&j, v) in INTERACTION_COVARIATES.iter().zip(four) {
            theta[j] = v;
        }
        theta
    }
}

fn auc_index(auc: f64) -> Option<usize> {
    GRID_AUCS.iter().position(|a| (a - auc).abs() < 1e-9)
}

/// Multiplier applied to the AUC-0.75 deviation for each AUC level.
fn auc_scale(auc_idx: usize) -> f64 {
    [1.0, 1.245, 0.837][auc_idx]
}

pub fn round3(v: f64) -> f64 {
    let r = (v * 1000.0).round() / 1000.0;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// `(g1, g2)` for a deviation shape, or `None` for the fixed-coefficient shapes.
fn slope_curvature(shape: DeviationShape, auc_idx: usize) -> Option<(f64, f64)> {
    let (deficit, curvature) = match shape {
        DeviationShape::Constant => return Some((1.0, 0.0)),
        DeviationShape::Linear(Intensity::Moderate) => (0.053, 0.0),
        DeviationShape::Linear(Intensity::Strong) => (0.20, 0.0),
        DeviationShape::Quadratic(Intensity::Moderate) => (0.16, 0.025),
        DeviationShape::Quadratic(Intensity::Strong) => (0.32, 0.05),
        DeviationShape::NonMonotonic | DeviationShape::Interaction(_) => return None,
    };
    let s = auc_scale(auc_idx);
    Some((round3(1.0 - deficit * s), round3(curvature * s)))
}

/// Printed non-monotonic coefficients `(g0, g1, g2)`.
fn non_monotonic(effect: EffectSize, auc_idx: usize) -> (f64, f64, f64) {
    const MODERATE: [(f64, f64, f64); 3] = [
        (0.173, 1.560, 0.105),
        (0.481, 1.783, 0.137),
        (-0.085, 1.354, 0.074),
    ];
    const HIGH: [(f64, f64, f64); 3] = [
        (-0.084, 2.035, 0.210),
        (0.786, 2.762, 0.321),
        (-0.621, 1.566, 0.138),
    ];
    match effect {
        EffectSize::High => HIGH[auc_idx],
        _ => MODERATE[auc_idx],
    }
}

/// Legible printed `g0` values that take precedence over the solved ones.
fn printed_g0(effect: EffectSize, shape: DeviationShape, auc_idx: usize) -> Option<f64> {
    match (effect, shape, auc_idx) {
        (EffectSize::Absent, DeviationShape::Linear(Intensity::Moderate), 0) => Some(-0.060),
        (EffectSize::Absent, DeviationShape::Linear(Intensity::Moderate), 1) => Some(-0.080),
        _ => None,
    }
}

/// Control linear predictors of a calibration population at one AUC level.
struct Calibration {
    covariates: Vec<f64>,
    lp0: Vec<f64>,
    p0_mean: f64,
}

impl Calibration {
    fn new(auc_idx: usize, size: usize, seed: u64) -> Result<Self, ScenarioError> {
        let beta = baseline_beta(GRID_AUCS[auc_idx]).expect("grid AUC");
        let mut rng = stream(seed, StreamPurpose::Calibration, auc_idx as u32, 0);
        let covariates = generate_covariates(size, &mut rng);
        let lp0 = control_lp(&covariates, &beta)?;
        let p0_mean = lp0.iter().map(|&l| expit(l)).sum::<f64>() / size as f64;
        Ok(Self {
            covariates,
            lp0,
            p0_mean,
        })
    }

    fn mean_p1(&self, g0: f64, g1: f64, g2: f64) -> (f64, f64) {
        let lp1 = treatment_lp(&self.lp0, g0, g1, g2, 0.0);
        let n = lp1.len() as f64;
        let (s, d) = lp1.iter().fold((0.0, 0.0), |(s, d), &l| {
            let p = expit(l);
            (s + p, d + p * (1.0 - p))
        });
        (s / n, d / n)
    }

    fn mean_benefit(&self, g0: f64, g1: f64, g2: f64) -> f64 {
        self.p0_mean - self.mean_p1(g0, g1, g2).0
    }

    /// `g0` such that the mean benefit equals `target`.
    fn solve_g0(&self, g1: f64, g2: f64, target: f64) -> f64 {
        let mut g0 = 0.0;
        for _ in 0..100 {
            let (m, slope) = self.mean_p1(g0, g1, g2);
            let f = self.p0_mean - m - target;
            let step = f / slope;
            g0 += step;
            if step.abs() < 1e-12 {
                break;
            }
        }
        g0
    }
}

fn benefit_pair(scenario: &Scenario, mean: f64) -> (Option<f64>, Option<f64>) {
    let harm = resolve_harm(scenario, mean);
    (Some(round3(mean)), Some(round3(mean - harm)))
}

/// Builds the 648 risk-based scenarios.
///
/// `calibration_size` draws per AUC level (stream purpose `Calibration`)
/// are used to solve reconstructed `g0` values and to fill the benefit
/// columns.
pub fn build_risk_grid(calibration_size: usize, seed: u64) -> Result<Vec<Scenario>, ScenarioError> {
    let calibrations: Vec<Calibration> = (0..GRID_AUCS.len())
        .map(|a| Calibration::new(a, calibration_size, seed))
        .collect::<Result<_, _>>()?;
    let mut out = Vec::with_capacity(N_RISK_BASED);
    for effect in EffectSize::ALL {
        for shape in DeviationShape::RISK_BASED {
            for n in GRID_SAMPLE_SIZES {
                for (auc_idx, &auc) in GRID_AUCS.iter().enumerate() {
                    let cal = &calibrations[auc_idx];
                    let constant_g0 = round3(effect.odds_ratio().ln());
                    let target = cal.mean_benefit(constant_g0, 1.0, 0.0);
                    let (g0, g1, g2) = match slope_curvature(shape, auc_idx) {
                        _ if shape == DeviationShape::Constant => (constant_g0, 1.0, 0.0),
                        Some((g1, g2)) => match printed_g0(effect, shape, auc_idx) {
                            Some(g0) => (g0, g1, g2),
                            None => (round3(cal.solve_g0(g1, g2, target)), g1, g2),
                        },
                        None => {
                            let (g0, g1, g2) = non_monotonic(effect, auc_idx);
                            if effect == EffectSize::Absent {
                                (round3(cal.solve_g0(g1, g2, 0.0)), g1, g2)
                            } else {
                                (g0, g1, g2)
                            }
                        }
                    };
                    let mean = cal.mean_benefit(g0, g1, g2);
                    for harm_label in HarmLabel::ALL {
                        let mut s = Scenario {
                            id: out.len() as u32 + 1,
                            shape,
                            effect,
                            n,
                            target_auc: auc,
                            harm_label,
                            beta: baseline_beta(auc).expect("grid AUC"),
                            effect_model: TreatmentEffect::Gamma { g0, g1, g2, c: 0.0 },
                            harm_value: None,
                            benefit_before: None,
                            benefit_after: None,
                        };
                        (s.benefit_before, s.benefit_after) = benefit_pair(&s, mean);
                        out.push(s);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Builds the 28 interaction scenarios (ids 649..=676).
pub fn build_interaction_grid(calibration_size: usize, seed: u64) -> Result<Vec<Scenario>, ScenarioError> {
    let auc_idx = auc_index(0.75).expect("grid AUC");
    let cal = Calibration::new(auc_idx, calibration_size, seed)?;
    let beta = baseline_beta(0.75).expect("grid AUC");
    let mut out = Vec::with_capacity(N_INTERACTION);
    for kind in InteractionKind::ALL {
        let theta = kind.theta();
        let lp1 = interaction_lp(&cal.covariates, &beta, INTERACTION_G0, &theta)?;
        let mean = cal.p0_mean - lp1.iter().map(|&l| expit(l)).sum::<f64>() / lp1.len() as f64;
        for harm_label in HarmLabel::ALL {
            let mut s = Scenario {
                id: (N_RISK_BASED + out.len() + 1) as u32,
                shape: DeviationShape::Interaction(kind),
                effect: EffectSize::High,
                n: INTERACTION_N,
                target_auc: 0.75,
                harm_label,
                beta,
                effect_model: TreatmentEffect::Interaction {
                    g0: INTERACTION_G0,
                    theta,
                },
                harm_value: None,
                benefit_before: None,
                benefit_after: None,
            };
            (s.benefit_before, s.benefit_after) = benefit_pair(&s, mean);
            out.push(s);
        }
    }
    Ok(out)
}

/// The shipped risk-based grid.
pub fn shipped_risk_grid() -> Vec<Scenario> {
    super::parse_scenarios(include_str!("../../data/scenarios.csv").as_bytes()).expect("shipped grid parses")
}

/// The shipped interaction scenarios.
pub fn shipped_interaction_grid() -> Vec<Scenario> {
    super::parse_scenarios(include_str!("../../data/interactions.csv").as_bytes())
        .expect("shipped interaction grid parses")
}

/// All 676 shipped scenarios in id order.
pub fn shipped_scenarios() -> Vec<Scenario> {
    let mut all = shipped_risk_grid();
    all.extend(shipped_interaction_grid());
    all
}

/// Grid id of a risk-based scenario, or `None` outside the grid.
pub fn risk_grid_id(
    effect: EffectSize,
    shape: DeviationShape,
    n: usize,
    target_auc: f64,
    harm: HarmLabel,
) -> Option<u32> {
    let e = EffectSize::ALL.iter().position(|&x| x == effect)?;
    let s = DeviationShape::RISK_BASED.iter().position(|&x| x == shape)?;
    let k = GRID_SAMPLE_SIZES.iter().position(|&x| x == n)?;
    let a = auc_index(target_auc)?;
    let h = HarmLabel::ALL.iter().position(|&x| x == harm)?;
    Some((1 + e * 216 + s * 36 + k * 12 + a * 4 + h) as u32)
}
