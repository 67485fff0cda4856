//! Two-stage risk-based benefit models.
//!
//! Stage one fits a logistic risk model on all covariates plus treatment and
//! derives each patient's baseline linear predictor `lp` with treatment set to
//! zero. Stage two models treatment benefit as a function of `lp` only.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::glm::{expit, fit_logistic, DesignMatrix, GlmError, LogisticFit};
use crate::scalar::Scalar;
use crate::scenario::{Population, N_COVARIATES};
use crate::spline::{place_knots, quantile_sorted, rcs_basis_into, sorted_copy, KnotSet, SplineError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Glm(#[from] GlmError),
    #[error(transparent)]
    Spline(#[from] SplineError),
    #[error("risk stratum {stratum} has no {arm} patients")]
    DegenerateStratum { stratum: usize, arm: &'static str },
    #[error("{0} fit did not converge")]
    NotConverged(MethodKind),
    #[error("{0} fit shows separation")]
    Separation(MethodKind),
    #[error("no candidate model could be fitted")]
    AllCandidatesFailed,
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("need at least one stratum")]
    NoStrata,
}

/// The benefit-model families, in order of increasing flexibility.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MethodKind {
    Stratified,
    Constant,
    Linear,
    Rcs3,
    Rcs4,
    Rcs5,
    Adaptive,
}

impl MethodKind {
    pub const ALL: [MethodKind; 7] = [
        Self::Stratified,
        Self::Constant,
        Self::Linear,
        Self::Rcs3,
        Self::Rcs4,
        Self::Rcs5,
        Self::Adaptive,
    ];

    /// Candidates ranked by the adaptive approach, fewest parameters first.
    pub const CANDIDATES: [MethodKind; 5] = [Self::Constant, Self::Linear, Self::Rcs3, Self::Rcs4, Self::Rcs5];

    pub fn label(self) -> &'static str {
        match self {
            Self::Stratified => "stratified",
            Self::Constant => "constant",
            Self::Linear => "linear",
            Self::Rcs3 => "rcs3",
            Self::Rcs4 => "rcs4",
            Self::Rcs5 => "rcs5",
            Self::Adaptive => "adaptive",
        }
    }

    /// Knot count of the spline kinds.
    pub fn knots(self) -> Option<usize> {
        match self {
            Self::Rcs3 => Some(3),
            Self::Rcs4 => Some(4),
            Self::Rcs5 => Some(5),
            _ => None,
        }
    }

    fn from_knots(k: usize) -> Option<Self> {
        match k {
            3 => Some(Self::Rcs3),
            4 => Some(Self::Rcs4),
            5 => Some(Self::Rcs5),
            _ => None,
        }
    }
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for MethodKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace(['-', '_'], "");
        Self::ALL
            .into_iter()
            .find(|k| k.label() == norm)
            .ok_or_else(|| format!("unknown method `{s}`"))
    }
}

/// Borrowed trial data: row-major covariates, treatment and outcome.
#[derive(Debug, Clone, Copy)]
pub struct TrialView<'a, T> {
    covariates: &'a [T],
    n_covariates: usize,
    treated: &'a [bool],
    outcome: &'a [bool],
}

impl<'a, T: Scalar> TrialView<'a, T> {
    pub fn new(
        covariates: &'a [T],
        n_covariates: usize,
        treated: &'a [bool],
        outcome: &'a [bool],
    ) -> Result<Self, ModelError> {
        let n = treated.len();
        if outcome.len() != n {
            return Err(ModelError::DimensionMismatch {
                what: "outcome",
                expected: n,
                got: outcome.len(),
            });
        }
        if covariates.len() != n * n_covariates {
            return Err(ModelError::DimensionMismatch {
                what: "covariates",
                expected: n * n_covariates,
                got: covariates.len(),
            });
        }
        Ok(Self {
            covariates,
            n_covariates,
            treated,
            outcome,
        })
    }

    pub fn len(&self) -> usize {
        self.treated.len()
    }

    pub fn is_empty(&self) -> bool {
        self.treated.is_empty()
    }

    pub fn n_covariates(&self) -> usize {
        self.n_covariates
    }

    pub fn covariates(&self) -> &'a [T] {
        self.covariates
    }

    pub fn covariate_row(&self, i: usize) -> &'a [T] {
        &self.covariates[i * self.n_covariates..(i + 1) * self.n_covariates]
    }

    pub fn treated(&self) -> &'a [bool] {
        self.treated
    }

    pub fn outcome(&self) -> &'a [bool] {
        self.outcome
    }
}

impl<'a> TrialView<'a, f64> {
    pub fn from_population(pop: &'a Population) -> Self {
        Self {
            covariates: &pop.covariates,
            n_covariates: N_COVARIATES,
            treated: &pop.treated,
            outcome: &pop.outcome,
        }
    }
}

/// Logistic regression of the outcome on all covariates and treatment.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskModel<T> {
    pub fit: LogisticFit<T>,
    n_covariates: usize,
}

impl<T: Scalar> RiskModel<T> {
    /// Column of the treatment indicator in the risk-model design.
    pub fn treatment_index(&self) -> usize {
        self.n_covariates + 1
    }

    /// Estimated log odds ratio of treatment.
    pub fn treatment_coefficient(&self) -> T {
        self.fit.coefficients[self.treatment_index()]
    }

    /// Baseline linear predictor of one covariate row, treatment set to 0.
    pub fn baseline_lp_row(&self, row: &[T]) -> T {
        let c = &self.fit.coefficients;
        row.iter().zip(&c[1..=self.n_covariates]).fold(c[0], |acc, (&x, &b)| acc + x * b)
    }

    /// Baseline linear predictors of row-major covariates.
    pub fn baseline_lp(&self, covariates: &[T]) -> Result<Vec<T>, ModelError> {
        if !covariates.len().is_multiple_of(self.n_covariates) {
            return Err(ModelError::DimensionMismatch {
                what: "covariates",
                expected: self.n_covariates,
                got: covariates.len() % self.n_covariates,
            });
        }
        Ok(covariates.chunks_exact(self.n_covariates).map(|r| self.baseline_lp_row(r)).collect())
    }
}

fn check_fit<T: Scalar>(fit: &LogisticFit<T>, kind: MethodKind) -> Result<(), ModelError> {
    if fit.separation {
        Err(ModelError::Separation(kind))
    } else if !fit.converged {
        Err(ModelError::NotConverged(kind))
    } else {
        Ok(())
    }
}

/// Fits the risk model on the full trial (both arms).
pub fn fit_risk_model<T: Scalar>(trial: &TrialView<'_, T>) -> Result<RiskModel<T>, ModelError> {
    let p = trial.n_covariates;
    let x = DesignMatrix::from_fn(trial.len(), p + 1, |i, row| {
        row[..p].copy_from_slice(trial.covariate_row(i));
        row[p] = crate::scalar::indicator(trial.treated[i]);
    })?;
    let fit = fit_logistic(&x, trial.outcome)?;
    check_fit(&fit, MethodKind::Constant)?;
    Ok(RiskModel { fit, n_covariates: p })
}

/// Event-rate differences within baseline-risk quantile groups.
#[derive(Debug, Clone, PartialEq)]
pub struct StratifiedModel<T> {
    /// Upper bounds of all strata but the last.
    pub cut_points: Vec<T>,
    pub benefits: Vec<T>,
}

impl<T: Scalar> StratifiedModel<T> {
    pub fn stratum_of(&self, lp: T) -> usize {
        self.cut_points.iter().take_while(|&&c| lp > c).count()
    }

    pub fn predict_one(&self, lp: T) -> T {
        self.benefits[self.stratum_of(lp)]
    }
}

pub fn fit_stratified<T: Scalar>(
    trial: &TrialView<'_, T>,
    lp: &[T],
    n_strata: usize,
) -> Result<StratifiedModel<T>, ModelError> {
    if n_strata == 0 {
        return Err(ModelError::NoStrata);
    }
    check_len(lp, trial.len())?;
    let sorted = sorted_copy(lp);
    if sorted.is_empty() {
        return Err(ModelError::DegenerateStratum { stratum: 0, arm: "control" });
    }
    let cut_points: Vec<T> = (1..n_strata)
        .map(|s| quantile_sorted(&sorted, s as f64 / n_strata as f64))
        .collect();
    let mut model = StratifiedModel {
        cut_points,
        benefits: vec![T::zero(); n_strata],
    };
    // [events, count] per stratum for control then treated.
    let mut tally = vec![[[0usize; 2]; 2]; n_strata];
    for ((&l, &z), &y) in lp.iter().zip(trial.treated).zip(trial.outcome) {
        let cell = &mut tally[model.stratum_of(l)][usize::from(z)];
        cell[0] += usize::from(y);
        cell[1] += 1;
    }
    for (s, cells) in tally.iter().enumerate() {
        for (arm, cell) in ["control", "treated"].into_iter().zip(cells) {
            if cell[1] == 0 {
                return Err(ModelError::DegenerateStratum { stratum: s, arm });
            }
        }
        let rate = |c: [usize; 2]| T::from_count(c[0]) / T::from_count(c[1]);
        model.benefits[s] = rate(cells[0]) - rate(cells[1]);
    }
    Ok(model)
}

fn check_len<T>(lp: &[T], n: usize) -> Result<(), ModelError> {
    if lp.len() == n {
        Ok(())
    } else {
        Err(ModelError::DimensionMismatch {
            what: "linear predictor",
            expected: n,
            got: lp.len(),
        })
    }
}

/// Constant relative effect taken from the risk model.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantModel<T> {
    /// Log odds ratio of treatment.
    pub delta: T,
    pub log_likelihood: T,
    pub aic: T,
}

/// Parameters of the equivalent stage-two fit on `(1, lp, z)`.
pub const CONSTANT_PARAMETERS: usize = 3;

impl<T: Scalar> ConstantModel<T> {
    pub fn predict_one(&self, lp: T) -> T {
        expit(lp) - expit(lp + self.delta)
    }
}

/// The risk model's log-likelihood is attained by the stage-two design
/// `(1, lp, z)` at intercept 0, slope 1, so it is charged three parameters.
pub fn fit_constant<T: Scalar>(risk: &RiskModel<T>) -> ConstantModel<T> {
    let ll = risk.fit.log_likelihood;
    ConstantModel {
        delta: risk.treatment_coefficient(),
        log_likelihood: ll,
        aic: crate::glm::aic(CONSTANT_PARAMETERS, ll),
    }
}

/// Stage-two logistic model `(1, lp, z, z h_1(lp), ..., z h_m(lp))`.
///
/// With `knots == None` the basis is `h_1(lp) = lp`, the linear interaction.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionModel<T> {
    pub knots: Option<KnotSet<T>>,
    pub fit: LogisticFit<T>,
}

impl<T: Scalar> InteractionModel<T> {
    pub fn kind(&self) -> MethodKind {
        match &self.knots {
            None => MethodKind::Linear,
            Some(k) => MethodKind::from_knots(k.len()).expect("3 to 5 knots"),
        }
    }

    fn basis_len(&self) -> usize {
        self.knots.as_ref().map_or(1, KnotSet::basis_len)
    }

    /// Benefit `expit(f(lp, 0)) - expit(f(lp, 1))`.
    pub fn predict_one(&self, lp: T) -> T {
        let c = &self.fit.coefficients;
        let control = c[0] + c[1] * lp;
        let mut shift = c[2];
        match &self.knots {
            None => shift = shift + c[3] * lp,
            Some(k) => {
                let mut h = [T::zero(); 4];
                let h = &mut h[..k.basis_len()];
                rcs_basis_into(lp, k, h);
                for (&hj, &cj) in h.iter().zip(&c[3..]) {
                    shift = shift + hj * cj;
                }
            }
        }
        expit(control) - expit(control + shift)
    }
}

fn fit_interaction<T: Scalar>(
    trial: &TrialView<'_, T>,
    lp: &[T],
    knots: Option<KnotSet<T>>,
    kind: MethodKind,
) -> Result<InteractionModel<T>, ModelError> {
    check_len(lp, trial.len())?;
    let m = knots.as_ref().map_or(1, KnotSet::basis_len);
    let x = DesignMatrix::from_fn(trial.len(), 2 + m, |i, row| {
        let l = lp[i];
        row[0] = l;
        if trial.treated[i] {
            row[1] = T::one();
            match &knots {
                None => row[2] = l,
                Some(k) => rcs_basis_into(l, k, &mut row[2..]),
            }
        }
    })?;
    let fit = fit_logistic(&x, trial.outcome)?;
    check_fit(&fit, kind)?;
    let model = InteractionModel { knots, fit };
    debug_assert_eq!(model.basis_len(), m);
    Ok(model)
}

pub fn fit_linear_interaction<T: Scalar>(
    trial: &TrialView<'_, T>,
    lp: &[T],
) -> Result<InteractionModel<T>, ModelError> {
    fit_interaction(trial, lp, None, MethodKind::Linear)
}

/// Spline interaction with `k` knots placed on the pooled `lp`.
pub fn fit_rcs<T: Scalar>(trial: &TrialView<'_, T>, lp: &[T], k: usize) -> Result<InteractionModel<T>, ModelError> {
    let kind = MethodKind::from_knots(k).ok_or(SplineError::UnsupportedKnotCount(k))?;
    let knots = place_knots(lp, k)?;
    fit_interaction(trial, lp, Some(knots), kind)
}

/// A fitted benefit predictor.
#[derive(Debug, Clone, PartialEq)]
pub enum BenefitModel<T> {
    Stratified(StratifiedModel<T>),
    Constant(ConstantModel<T>),
    Interaction(InteractionModel<T>),
    /// Minimum-AIC candidate; `aics` lists every attempted candidate.
    Adaptive {
        selected: Box<BenefitModel<T>>,
        aics: Vec<(MethodKind, Option<T>)>,
    },
}

impl<T: Scalar> BenefitModel<T> {
    pub fn kind(&self) -> MethodKind {
        match self {
            Self::Stratified(_) => MethodKind::Stratified,
            Self::Constant(_) => MethodKind::Constant,
            Self::Interaction(m) => m.kind(),
            Self::Adaptive { .. } => MethodKind::Adaptive,
        }
    }

    /// Kind that actually produces the predictions.
    pub fn effective_kind(&self) -> MethodKind {
        match self {
            Self::Adaptive { selected, .. } => selected.kind(),
            other => other.kind(),
        }
    }

    pub fn aic(&self) -> Option<T> {
        match self {
            Self::Stratified(_) => None,
            Self::Constant(m) => Some(m.aic),
            Self::Interaction(m) => Some(m.fit.aic),
            Self::Adaptive { selected, .. } => selected.aic(),
        }
    }

    pub fn log_likelihood(&self) -> Option<T> {
        match self {
            Self::Stratified(_) => None,
            Self::Constant(m) => Some(m.log_likelihood),
            Self::Interaction(m) => Some(m.fit.log_likelihood),
            Self::Adaptive { selected, .. } => selected.log_likelihood(),
        }
    }

    pub fn predict_one(&self, lp: T) -> T {
        match self {
            Self::Stratified(m) => m.predict_one(lp),
            Self::Constant(m) => m.predict_one(lp),
            Self::Interaction(m) => m.predict_one(lp),
            Self::Adaptive { selected, .. } => selected.predict_one(lp),
        }
    }

    pub fn predict(&self, lp: &[T]) -> Vec<T> {
        lp.iter().map(|&l| self.predict_one(l)).collect()
    }
}

/// Picks the minimum-AIC candidate. Ties go to the earlier (less flexible)
/// entry; failed candidates are skipped.
pub fn select_adaptive<T: Scalar>(
    candidates: Vec<Result<BenefitModel<T>, ModelError>>,
) -> Result<BenefitModel<T>, ModelError> {
    let aics: Vec<(MethodKind, Option<T>)> = candidates
        .iter()
        .enumerate()
        .map(|(i, c)| match c {
            Ok(m) => (m.kind(), m.aic()),
            Err(_) => (MethodKind::CANDIDATES.get(i).copied().unwrap_or(MethodKind::Adaptive), None),
        })
        .collect();
    let mut best: Option<BenefitModel<T>> = None;
    for model in candidates.into_iter().flatten() {
        let Some(a) = model.aic() else { continue };
        if !a.is_finite() {
            continue;
        }
        if best.as_ref().is_none_or(|b| a < b.aic().unwrap_or(T::infinity())) {
            best = Some(model);
        }
    }
    let selected = best.ok_or(ModelError::AllCandidatesFailed)?;
    Ok(BenefitModel::Adaptive {
        selected: Box::new(selected),
        aics,
    })
}

/// Every method fitted on one trial, in [`MethodKind::ALL`] order.
#[derive(Debug, Clone)]
pub struct MethodFits<T> {
    pub risk: RiskModel<T>,
    /// Baseline linear predictor of each trial patient.
    pub lp: Vec<T>,
    pub models: Vec<(MethodKind, Result<BenefitModel<T>, ModelError>)>,
}

impl<T: Scalar> MethodFits<T> {
    pub fn get(&self, kind: MethodKind) -> Option<&Result<BenefitModel<T>, ModelError>> {
        self.models.iter().find(|(k, _)| *k == kind).map(|(_, m)| m)
    }
}

/// Fits the risk model, then the stratified, constant, linear, RCS-3/4/5 and
/// adaptive benefit models. Only a risk-model failure is returned as an error.
pub fn fit_all_methods<T: Scalar>(trial: &TrialView<'_, T>, n_strata: usize) -> Result<MethodFits<T>, ModelError> {
    let risk = fit_risk_model(trial)?;
    let lp = risk.baseline_lp(trial.covariates)?;
    let stratified = fit_stratified(trial, &lp, n_strata).map(BenefitModel::Stratified);
    let candidates: Vec<Result<BenefitModel<T>, ModelError>> = vec![
        Ok(BenefitModel::Constant(fit_constant(&risk))),
        fit_linear_interaction(trial, &lp).map(BenefitModel::Interaction),
        fit_rcs(trial, &lp, 3).map(BenefitModel::Interaction),
        fit_rcs(trial, &lp, 4).map(BenefitModel::Interaction),
        fit_rcs(trial, &lp, 5).map(BenefitModel::Interaction),
    ];
    let adaptive = select_adaptive(candidates.clone());
    let mut models = vec![(MethodKind::Stratified, stratified)];
    models.extend(MethodKind::CANDIDATES.into_iter().zip(candidates));
    models.push((MethodKind::Adaptive, adaptive));
    Ok(MethodFits { risk, lp, models })
}

/// Fits a single method.
pub fn fit_method<T: Scalar>(
    trial: &TrialView<'_, T>,
    risk: &RiskModel<T>,
    lp: &[T],
    kind: MethodKind,
    n_strata: usize,
) -> Result<BenefitModel<T>, ModelError> {
    match kind {
        MethodKind::Stratified => fit_stratified(trial, lp, n_strata).map(BenefitModel::Stratified),
        MethodKind::Constant => Ok(BenefitModel::Constant(fit_constant(risk))),
        MethodKind::Linear => fit_linear_interaction(trial, lp).map(BenefitModel::Interaction),
        MethodKind::Rcs3 | MethodKind::Rcs4 | MethodKind::Rcs5 => {
            fit_rcs(trial, lp, kind.knots().expect("spline kind")).map(BenefitModel::Interaction)
        }
        MethodKind::Adaptive => select_adaptive(
            MethodKind::CANDIDATES
                .into_iter()
                .map(|k| fit_method(trial, risk, lp, k, n_strata))
                .collect(),
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_trial() -> (Vec<f64>, Vec<bool>, Vec<bool>) {
        // Two patients per stratum, one per arm; lp equals the single covariate.
        let lp = vec![-3.0, -2.9, -2.0, -1.9, -1.0, -0.9, 0.0, 0.1];
        let treated = vec![false, true, false, true, true, false, false, true];
        let outcome = vec![true, false, true, true, false, true, false, false];
        (lp, treated, outcome)
    }

    #[test]
    fn stratified_toy_by_hand() {
        let (lp, treated, outcome) = toy_trial();
        let view = TrialView::new(&lp, 1, &treated, &outcome).unwrap();
        let m = fit_stratified(&view, &lp, 4).unwrap();
        // Strata (control y, treated y): (1,0), (1,1), (1,0), (0,0).
        assert_eq!(m.benefits, vec![1.0, 0.0, 1.0, 0.0]);
        assert_eq!(m.predict_one(-10.0), 1.0);
        assert_eq!(m.predict_one(10.0), 0.0);
    }

    #[test]
    fn stratified_all_zero_outcomes() {
        let (lp, treated, _) = toy_trial();
        let outcome = vec![false; 8];
        let view = TrialView::new(&lp, 1, &treated, &outcome).unwrap();
        assert_eq!(fit_stratified(&view, &lp, 4).unwrap().benefits, vec![0.0; 4]);
    }

    #[test]
    fn stratified_empty_cell_is_degenerate() {
        let (lp, _, outcome) = toy_trial();
        let treated = vec![false, false, false, true, true, false, false, true];
        let view = TrialView::new(&lp, 1, &treated, &outcome).unwrap();
        assert_eq!(
            fit_stratified(&view, &lp, 4),
            Err(ModelError::DegenerateStratum { stratum: 0, arm: "treated" })
        );
    }

    #[test]
    fn constant_model_closed_form() {
        let m = ConstantModel {
            delta: 0.8_f64.ln(),
            log_likelihood: 0.0,
            aic: 6.0,
        };
        let lp = (0.2_f64 / 0.8).ln();
        let expect = 0.2 - 0.2 * 0.8 / (0.8 + 0.2 * 0.8);
        assert!((m.predict_one(lp) - expect).abs() < 1e-15);
        assert!((m.predict_one(lp) - 0.0333).abs() < 1e-4);
        let zero = ConstantModel { delta: 0.0, ..m };
        assert_eq!(zero.predict_one(-1.3), 0.0);
    }

    #[test]
    fn method_labels_round_trip() {
        for k in MethodKind::ALL {
            assert_eq!(k.label().parse::<MethodKind>().unwrap(), k);
        }
        assert_eq!("RCS-3".parse::<MethodKind>().unwrap(), MethodKind::Rcs3);
        assert!("rcs6".parse::<MethodKind>().is_err());
    }

    #[test]
    fn adaptive_with_single_survivor_and_ties() {
        let c = |aic: f64| ConstantModel {
            delta: -0.2,
            log_likelihood: -aic / 2.0 + 3.0,
            aic,
        };
        let only = select_adaptive(vec![
            Err(ModelError::AllCandidatesFailed),
            Ok(BenefitModel::Constant(c(10.0))),
        ])
        .unwrap();
        assert_eq!(only.effective_kind(), MethodKind::Constant);
        match select_adaptive(vec![
            Ok(BenefitModel::Constant(c(10.0))),
            Ok(BenefitModel::Constant(ConstantModel { delta: 0.5, ..c(10.0) })),
        ])
        .unwrap()
        {
            BenefitModel::Adaptive { selected, .. } => match *selected {
                BenefitModel::Constant(m) => assert_eq!(m.delta, -0.2),
                _ => unreachable!(),
            },
            _ => unreachable!(),
        }
        assert_eq!(
            select_adaptive::<f64>(vec![Err(ModelError::AllCandidatesFailed)]),
            Err(ModelError::AllCandidatesFailed)
        );
    }
}
