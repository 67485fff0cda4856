//! Restricted cubic spline (natural spline) basis with Harrell's default knot
//! positions.

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SplineError {
    #[error("unsupported knot count {0}; expected 3, 4 or 5")]
    UnsupportedKnotCount(usize),
    #[error("need at least {needed} distinct values to place knots, found {found}")]
    Degenerate { needed: usize, found: usize },
    #[error("knots must be finite and strictly increasing")]
    InvalidKnots,
}

/// Empirical quantile positions used for `k` knots.
pub fn knot_quantiles(k: usize) -> Result<&'static [f64], SplineError> {
    match k {
        3 => Ok(&[0.10, 0.50, 0.90]),
        4 => Ok(&[0.05, 0.35, 0.65, 0.95]),
        5 => Ok(&[0.05, 0.275, 0.50, 0.725, 0.95]),
        other => Err(SplineError::UnsupportedKnotCount(other)),
    }
}

/// Quantile of already sorted data by linear interpolation between order
/// statistics: position `h = (n - 1) * prob`, value
/// `x[floor h] + (h - floor h) * (x[floor h + 1] - x[floor h])`.
pub fn quantile_sorted<T: Scalar>(sorted: &[T], prob: f64) -> T {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let h = (sorted.len() - 1) as f64 * prob.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = T::lit(h - lo as f64);
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Sorts a copy of `values` (total order, NaN last).
pub fn sorted_copy<T: Scalar>(values: &[T]) -> Vec<T> {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Greater));
    v
}

/// Strictly increasing knots `t_1 < ... < t_k`, `k` in 3..=5.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotSet<T> {
    knots: Vec<T>,
}

impl<T: Scalar> KnotSet<T> {
    pub fn new(knots: Vec<T>) -> Result<Self, SplineError> {
        knot_quantiles(knots.len())?;
        let ok = knots.iter().all(|t| t.is_finite()) && knots.windows(2).all(|w| w[0] < w[1]);
        if !ok {
            return Err(SplineError::InvalidKnots);
        }
        Ok(Self { knots })
    }

    pub fn knots(&self) -> &[T] {
        &self.knots
    }

    pub fn len(&self) -> usize {
        self.knots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.knots.is_empty()
    }

    /// Number of basis functions, `k - 1` (the first being the identity).
    pub fn basis_len(&self) -> usize {
        self.knots.len() - 1
    }
}

/// Places `k` knots at the empirical quantiles listed in [`knot_quantiles`].
pub fn place_knots<T: Scalar>(values: &[T], k: usize) -> Result<KnotSet<T>, SplineError> {
    let probs = knot_quantiles(k)?;
    let sorted = sorted_copy(values);
    let distinct = 1 + sorted.windows(2).filter(|w| w[0] != w[1]).count();
    if sorted.is_empty() || distinct < k {
        return Err(SplineError::Degenerate {
            needed: k,
            found: if sorted.is_empty() { 0 } else { distinct },
        });
    }
    let knots: Vec<T> = probs.iter().map(|&p| quantile_sorted(&sorted, p)).collect();
    KnotSet::new(knots).map_err(|_| SplineError::Degenerate {
        needed: k,
        found: distinct,
    })
}

#[inline]
fn pos_cube<T: Scalar>(v: T) -> T {
    if v > T::zero() {
        v * v * v
    } else {
        T::zero()
    }
}

/// Writes the `k - 1` basis values at `x` into `out`.
///
/// `out[0] = x`; for `j = 1..=k-2`,
/// `out[j] = (x - t_j)_+^3 - (x - t_{k-1})_+^3 (t_k - t_j)/(t_k - t_{k-1})
///          + (x - t_k)_+^3 (t_{k-1} - t_j)/(t_k - t_{k-1})`,
/// which is linear for `x` beyond either boundary knot.
pub fn rcs_basis_into<T: Scalar>(x: T, knots: &KnotSet<T>, out: &mut [T]) {
    let t = knots.knots();
    let k = t.len();
    debug_assert_eq!(out.len(), k - 1);
    out[0] = x;
    let t_last = t[k - 1];
    let t_penult = t[k - 2];
    let span = t_last - t_penult;
    let tail_last = pos_cube(x - t_last);
    let tail_penult = pos_cube(x - t_penult);
    for j in 0..k - 2 {
        let tj = t[j];
        out[j + 1] = pos_cube(x - tj) - tail_penult * (t_last - tj) / span
            + tail_last * (t_penult - tj) / span;
    }
}

pub fn rcs_basis<T: Scalar>(x: T, knots: &KnotSet<T>) -> Vec<T> {
    let mut out = vec![T::zero(); knots.basis_len()];
    rcs_basis_into(x, knots, &mut out);
    out
}
