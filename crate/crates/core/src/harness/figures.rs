//! Plot-ready data behind the result figures.
//!
//! Each figure has up to four panels. A panel file holds the quantiles of one
//! metric per method, for the harm-free scenario of the panel's deviation
//! shape and for whichever harm variants the summary covers. RMSE figures
//! also get one truth-curve file per panel (baseline risk vs true benefit).

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::aggregate::{Metric, Summary};
use super::HarnessError;
use crate::glm::{expit, logit};
use crate::scenario::grid::risk_grid_id;
use crate::scenario::{
    control_lp, generate_covariates, scenario_lp1, stream, DeviationShape, EffectSize, HarmLabel, Intensity,
    InteractionKind, Scenario, StreamPurpose,
};

/// What a figure reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FigureKind {
    Metric(Metric),
    Selection,
}

/// One figure: the scenarios of each panel and what is reported.
#[derive(Debug, Clone, PartialEq)]
pub struct FigureSpec {
    pub id: String,
    pub kind: FigureKind,
    pub panels: Vec<PanelSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanelSpec {
    pub label: char,
    pub shape: DeviationShape,
    /// Harm-free scenario, required.
    pub base_id: u32,
    /// Scenario id per harm level, harm-free first.
    pub harm_ids: Vec<(HarmLabel, u32)>,
}

/// Identifier of a supported figure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FigureId(&'static str);

pub const FIGURE_IDS: [&str; 18] = [
    "1", "2", "3", "4", "5", "S3", "S4", "S5", "S6", "S7", "S8", "S9", "S10", "S11", "S12", "S13", "S14", "S15",
];

impl fmt::Display for FigureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.0)
    }
}

impl FromStr for FigureId {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let t = t.strip_prefix("fig").or_else(|| t.strip_prefix("Fig")).unwrap_or(t);
        FIGURE_IDS
            .iter()
            .find(|id| id.eq_ignore_ascii_case(t))
            .map(|id| FigureId(id))
            .ok_or_else(|| HarnessError::UnknownFigure(s.to_string()))
    }
}

const PANEL_SHAPES: [DeviationShape; 4] = [
    DeviationShape::Constant,
    DeviationShape::Linear(Intensity::Strong),
    DeviationShape::Quadratic(Intensity::Strong),
    DeviationShape::NonMonotonic,
];

/// Trial setting of a risk-based figure.
fn setting(id: &str) -> (EffectSize, usize, f64) {
    match id {
        "1" | "4" | "5" | "S3" => (EffectSize::Moderate, 4250, 0.75),
        "2" | "S4" | "S6" | "S8" => (EffectSize::Moderate, 17000, 0.75),
        "3" | "S5" | "S7" | "S9" => (EffectSize::Moderate, 4250, 0.85),
        "S10" => (EffectSize::High, 4250, 0.75),
        "S11" => (EffectSize::High, 17000, 0.75),
        "S12" => (EffectSize::High, 4250, 0.85),
        _ => unreachable!("not a risk-based figure"),
    }
}

fn interaction_panels(kinds: &[InteractionKind]) -> Vec<PanelSpec> {
    kinds
        .iter()
        .enumerate()
        .map(|(i, &kind)| {
            let k = InteractionKind::ALL.iter().position(|&x| x == kind).expect("kind listed");
            let first = (crate::scenario::grid::N_RISK_BASED + 1 + 4 * k) as u32;
            PanelSpec {
                label: (b'A' + i as u8) as char,
                shape: DeviationShape::Interaction(kind),
                base_id: first,
                harm_ids: HarmLabel::ALL.iter().enumerate().map(|(h, &l)| (l, first + h as u32)).collect(),
            }
        })
        .collect()
}

impl FigureSpec {
    pub fn new(id: FigureId) -> Self {
        let kind = match id.0 {
            "4" | "S6" | "S7" => FigureKind::Metric(Metric::CForBenefit),
            "5" | "S8" | "S9" => FigureKind::Metric(Metric::IciBenefit),
            "S3" | "S4" | "S5" => FigureKind::Selection,
            _ => FigureKind::Metric(Metric::Rmse),
        };
        let panels = match id.0 {
            "S13" => interaction_panels(&[InteractionKind::Weak, InteractionKind::Mixed, InteractionKind::Strong]),
            "S14" => interaction_panels(&[
                InteractionKind::NegativeWeak,
                InteractionKind::NegativeMixed,
                InteractionKind::NegativeStrong,
            ]),
            "S15" => interaction_panels(&[InteractionKind::Combined]),
            other => {
                let (effect, n, auc) = setting(other);
                PANEL_SHAPES
                    .iter()
                    .enumerate()
                    .map(|(i, &shape)| {
                        let harm_ids: Vec<(HarmLabel, u32)> = HarmLabel::ALL
                            .iter()
                            .map(|&h| (h, risk_grid_id(effect, shape, n, auc, h).expect("grid cell")))
                            .collect();
                        PanelSpec {
                            label: (b'A' + i as u8) as char,
                            shape,
                            base_id: harm_ids[0].1,
                            harm_ids,
                        }
                    })
                    .collect()
            }
        };
        Self {
            id: id.0.to_string(),
            kind,
            panels,
        }
    }

    /// Harm-free scenario ids, which the summary must cover.
    pub fn required_ids(&self) -> Vec<u32> {
        self.panels.iter().map(|p| p.base_id).collect()
    }

    pub fn has_truth_curves(&self) -> bool {
        self.kind == FigureKind::Metric(Metric::Rmse)
    }

    fn panel_path(&self, dir: &Path, panel: &PanelSpec) -> PathBuf {
        dir.join(format!("fig{}_panel{}.csv", self.id, panel.label))
    }

    fn truth_path(&self, dir: &Path, panel: &PanelSpec) -> PathBuf {
        dir.join(format!("fig{}_panel{}_truth.csv", self.id, panel.label))
    }
}

/// Points on the truth curve of a gamma scenario.
pub const TRUTH_GRID_POINTS: usize = 199;
/// Population drawn for binned truth curves of interaction scenarios.
pub const TRUTH_POPULATION: usize = 100_000;
const TRUTH_BINS: usize = 50;
const TRUTH_SEED: u64 = 1;

/// Harm added in the treated arm: the grid's benefit drop, zero when unknown.
fn grid_harm(s: &Scenario) -> f64 {
    if let Some(h) = s.harm_value {
        return h;
    }
    match (s.benefit_before, s.benefit_after) {
        (Some(b), Some(a)) => b - a,
        _ => 0.0,
    }
}

/// Baseline risk and true benefit along the curve of `scenario`.
///
/// Gamma scenarios use the closed form on an even grid of baseline risks;
/// interaction scenarios, where benefit is not a function of risk alone,
/// use bin means over a simulated population.
pub fn truth_curve(scenario: &Scenario) -> Result<Vec<(f64, f64)>, HarnessError> {
    let harm = grid_harm(scenario);
    match scenario.shape {
        DeviationShape::Interaction(_) => {
            let mut rng = stream(TRUTH_SEED, StreamPurpose::SuperPopulation, scenario.id, u32::MAX);
            let x = generate_covariates(TRUTH_POPULATION, &mut rng);
            let lp0 = control_lp(&x, &scenario.beta)?;
            let lp1 = scenario_lp1(scenario, &x, &lp0)?;
            let mut pts: Vec<(f64, f64)> = lp0
                .iter()
                .zip(&lp1)
                .map(|(&a, &b)| {
                    let p0 = expit(a);
                    (p0, p0 - (expit(b) + harm).clamp(0.0, 1.0))
                })
                .collect();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            let per = pts.len() / TRUTH_BINS;
            Ok(pts
                .chunks(per)
                .take(TRUTH_BINS)
                .map(|c| {
                    let m = c.len() as f64;
                    (c.iter().map(|p| p.0).sum::<f64>() / m, c.iter().map(|p| p.1).sum::<f64>() / m)
                })
                .collect())
        }
        _ => (1..=TRUTH_GRID_POINTS)
            .map(|i| {
                let p0 = i as f64 / (TRUTH_GRID_POINTS + 1) as f64;
                let lp0 = logit(p0).expect("p0 inside (0, 1)");
                let lp1 = scenario_lp1(scenario, &[], &[lp0])?[0];
                Ok((p0, p0 - (expit(lp1) + harm).clamp(0.0, 1.0)))
            })
            .collect(),
    }
}

fn lookup(scenarios: &[Scenario], id: u32) -> Option<&Scenario> {
    scenarios.iter().find(|s| s.id == id)
}

/// Writes the files of figure `id` into `out_dir` and returns their paths.
///
/// `scenarios` supplies the definitions used for truth curves.
pub fn emit_figure_data(
    summary: &Summary,
    id: FigureId,
    scenarios: &[Scenario],
    out_dir: &Path,
) -> Result<Vec<PathBuf>, HarnessError> {
    let spec = FigureSpec::new(id);
    let covered = summary.scenario_ids();
    let missing: Vec<u32> = spec.required_ids().into_iter().filter(|i| !covered.contains(i)).collect();
    if !missing.is_empty() {
        return Err(HarnessError::MissingScenarios(missing));
    }
    if spec.has_truth_curves() {
        let undefined: Vec<u32> = spec
            .required_ids()
            .into_iter()
            .filter(|&i| lookup(scenarios, i).is_none())
            .collect();
        if !undefined.is_empty() {
            return Err(HarnessError::MissingScenarios(undefined));
        }
    }
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    for panel in &spec.panels {
        let path = spec.panel_path(out_dir, panel);
        write_panel(std::fs::File::create(&path)?, &spec, panel, summary)?;
        written.push(path);
    }
    if spec.has_truth_curves() {
        for panel in &spec.panels {
            let path = spec.truth_path(out_dir, panel);
            let mut wtr = csv::Writer::from_writer(std::fs::File::create(&path)?);
            wtr.write_record(["harm", "scenario_id", "baseline_risk", "true_benefit"])?;
            for &(harm, sid) in &panel.harm_ids {
                if sid != panel.base_id && !covered.contains(&sid) {
                    continue;
                }
                let Some(s) = lookup(scenarios, sid) else { continue };
                for (p0, b) in truth_curve(s)? {
                    wtr.write_record([harm.to_string(), sid.to_string(), p0.to_string(), b.to_string()])?;
                }
            }
            wtr.flush()?;
            written.push(path);
        }
    }
    Ok(written)
}

fn write_panel<W: Write>(writer: W, spec: &FigureSpec, panel: &PanelSpec, summary: &Summary) -> Result<(), HarnessError> {
    let mut wtr = csv::Writer::from_writer(writer);
    match spec.kind {
        FigureKind::Metric(metric) => {
            wtr.write_record([
                "shape", "harm", "scenario_id", "method", "metric", "n", "failures", "q025", "q25", "q50", "q75", "q975",
            ])?;
            for &(harm, sid) in &panel.harm_ids {
                for row in summary.rows.iter().filter(|r| r.scenario_id == sid && r.metric == metric) {
                    let mut rec = vec![
                        panel.shape.to_string(),
                        harm.to_string(),
                        sid.to_string(),
                        row.method.to_string(),
                        metric.to_string(),
                        row.n.to_string(),
                        row.failures.to_string(),
                    ];
                    rec.extend((0..5).map(|i| row.quantiles.map(|q| q[i].to_string()).unwrap_or_default()));
                    wtr.write_record(&rec)?;
                }
            }
        }
        FigureKind::Selection => {
            wtr.write_record(["shape", "harm", "scenario_id", "model", "count", "frequency"])?;
            for &(harm, sid) in &panel.harm_ids {
                for s in summary.selection.iter().filter(|s| s.scenario_id == sid) {
                    wtr.write_record([
                        panel.shape.to_string(),
                        harm.to_string(),
                        sid.to_string(),
                        s.model.to_string(),
                        s.count.to_string(),
                        s.frequency.to_string(),
                    ])?;
                }
            }
        }
    }
    wtr.flush()?;
    Ok(())
}
