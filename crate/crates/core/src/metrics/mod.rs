//! Accuracy, discrimination and calibration measures for benefit predictions.

pub mod loess;

use std::cmp::Ordering;

use thiserror::Error;

use crate::scalar::Scalar;

pub use loess::{loess_smooth, loess_smooth_with, LoessOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input")]
    Empty,
    #[error("labels have a single class")]
    SingleClass,
    #[error("the {0} arm is empty")]
    EmptyArm(&'static str),
    #[error("all matched pairs have the same observed benefit")]
    NoUnequalPairs,
    #[error("need at least {needed} points, found {found}")]
    TooFewPoints { needed: usize, found: usize },
    #[error("non-finite input")]
    NonFinite,
}

fn same_len(a: usize, b: usize) -> Result<(), MetricError> {
    if a == b {
        Ok(())
    } else {
        Err(MetricError::LengthMismatch { left: a, right: b })
    }
}

fn total<T: Scalar>(a: &T, b: &T) -> Ordering {
    a.partial_cmp(b).unwrap_or(Ordering::Equal)
}

/// Root mean squared difference.
pub fn rmse<T: Scalar>(truth: &[T], predicted: &[T]) -> Result<T, MetricError> {
    same_len(truth.len(), predicted.len())?;
    if truth.is_empty() {
        return Err(MetricError::Empty);
    }
    let ss: T = truth
        .iter()
        .zip(predicted)
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum();
    Ok((ss / T::from_count(truth.len())).sqrt())
}

/// Probability that a random positive scores above a random negative, ties
/// counting one half, from mid-ranks.
pub fn c_statistic<T: Scalar>(scores: &[T], labels: &[bool]) -> Result<T, MetricError> {
    same_len(scores.len(), labels.len())?;
    let n_pos = labels.iter().filter(|&&l| l).count() as u128;
    let n_neg = labels.len() as u128 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricError::SingleClass);
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| total(&scores[a], &scores[b]));
    // Twice the rank sum of the positives, kept integral.
    let mut rank_sum2: u128 = 0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && scores[idx[j]] == scores[idx[i]] {
            j += 1;
        }
        let pos_in_group = idx[i..j].iter().filter(|&&k| labels[k]).count() as u128;
        rank_sum2 += pos_in_group * (i as u128 + 1 + j as u128);
        i = j;
    }
    let num2 = rank_sum2 - n_pos * (n_pos + 1);
    Ok(T::lit(num2 as f64 / (2 * n_pos * n_neg) as f64))
}

/// Patients matched 1:1 across arms by rank of predicted benefit.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchedPairSet<T> {
    /// `y(control) - y(treated)` per pair.
    pub observed: Vec<i8>,
    /// Mean predicted benefit of the two members.
    pub predicted: Vec<T>,
}

impl<T: Scalar> MatchedPairSet<T> {
    pub fn n_pairs(&self) -> usize {
        self.observed.len()
    }

    pub fn observed_as<U: Scalar>(&self) -> Vec<U> {
        self.observed.iter().map(|&o| U::lit(f64::from(o))).collect()
    }
}

/// Sorts each arm by predicted benefit (ties by patient index) and pairs equal
/// ranks. With unequal arms the highest-ranked patients of the larger arm are
/// left unmatched.
pub fn match_pairs<T: Scalar>(
    treated: &[bool],
    outcome: &[bool],
    predicted: &[T],
) -> Result<MatchedPairSet<T>, MetricError> {
    same_len(treated.len(), outcome.len())?;
    same_len(treated.len(), predicted.len())?;
    let mut control: Vec<usize> = (0..treated.len()).filter(|&i| !treated[i]).collect();
    let mut active: Vec<usize> = (0..treated.len()).filter(|&i| treated[i]).collect();
    if control.is_empty() {
        return Err(MetricError::EmptyArm("control"));
    }
    if active.is_empty() {
        return Err(MetricError::EmptyArm("treated"));
    }
    let by_prediction = |&a: &usize, &b: &usize| total(&predicted[a], &predicted[b]).then(a.cmp(&b));
    control.sort_by(by_prediction);
    active.sort_by(by_prediction);
    let half = T::half();
    let (observed, predicted) = control
        .iter()
        .zip(&active)
        .map(|(&c, &t)| {
            (
                i8::from(outcome[c]) - i8::from(outcome[t]),
                (predicted[c] + predicted[t]) * half,
            )
        })
        .unzip();
    Ok(MatchedPairSet { observed, predicted })
}

/// Concordance over pairs of matched pairs with unequal observed benefit.
///
/// Pairs are grouped by observed benefit (-1, 0, 1); each higher group is
/// compared with each lower group by binary search in its sorted predictions.
pub fn c_for_benefit<T: Scalar>(pairs: &MatchedPairSet<T>) -> Result<T, MetricError> {
    same_len(pairs.observed.len(), pairs.predicted.len())?;
    let mut groups: [Vec<T>; 3] = Default::default();
    for (&o, &p) in pairs.observed.iter().zip(&pairs.predicted) {
        groups[(o + 1) as usize].push(p);
    }
    for g in &mut groups {
        g.sort_by(total);
    }
    // Twice the concordance count, so half-credit ties stay integral.
    let mut concordant2: u128 = 0;
    let mut comparable: u128 = 0;
    for hi in 1..3 {
        for lo in 0..hi {
            let low = &groups[lo];
            for &p in &groups[hi] {
                let below = low.partition_point(|&v| v < p) as u128;
                let tied = low.partition_point(|&v| v <= p) as u128 - below;
                concordant2 += 2 * below + tied;
            }
            comparable += (groups[hi].len() * low.len()) as u128;
        }
    }
    if comparable == 0 {
        return Err(MetricError::NoUnequalPairs);
    }
    Ok(T::lit(concordant2 as f64 / (2 * comparable) as f64))
}

/// Mean absolute gap between predicted pair benefit and the loess-smoothed
/// observed pair benefit.
pub fn ici_for_benefit<T: Scalar>(pairs: &MatchedPairSet<T>) -> Result<T, MetricError> {
    ici_for_benefit_with(pairs, &LoessOptions::default())
}

pub fn ici_for_benefit_with<T: Scalar>(pairs: &MatchedPairSet<T>, opts: &LoessOptions) -> Result<T, MetricError> {
    let observed: Vec<T> = pairs.observed_as();
    let smooth = loess_smooth_with(&pairs.predicted, &observed, &pairs.predicted, opts)?;
    let gap: T = pairs
        .predicted
        .iter()
        .zip(&smooth)
        .map(|(&p, &s)| (p - s).abs())
        .sum();
    Ok(gap / T::from_count(pairs.n_pairs()))
}
