//! Maximum-likelihood logistic regression by iteratively reweighted least
//! squares, plus the logistic link and its inverse.

use thiserror::Error;

use crate::linalg;
use crate::scalar::{indicator, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GlmError {
    #[error("probability {0} outside the open interval (0, 1)")]
    Domain(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("design matrix has no rows")]
    Empty,
    #[error("design matrix entry ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },
    #[error("first design column must be a constant intercept of ones (row {row})")]
    MissingIntercept { row: usize },
    #[error("outcome has a single class; logistic fit is undefined")]
    SingleClass,
    #[error("weighted normal equations are singular (reciprocal condition {rcond:.3e})")]
    RankDeficient { rcond: f64 },
}

/// Logistic function `e^x / (1 + e^x)`, evaluated without overflow.
#[inline]
pub fn expit<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Log-odds of `p`; defined on the open unit interval only.
pub fn logit<T: Scalar>(p: T) -> Result<T, GlmError> {
    if p > T::zero() && p < T::one() {
        Ok((p / (T::one() - p)).ln())
    } else {
        Err(GlmError::Domain(p.to_f64_lossy()))
    }
}

/// `ln(1 + e^x)` without overflow for large `x`.
#[inline]
fn log1p_exp<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Bernoulli log-likelihood of a single observation with natural parameter `eta`.
#[inline]
pub fn bernoulli_log_likelihood<T: Scalar>(y: bool, eta: T) -> T {
    if y {
        -log1p_exp(-eta)
    } else {
        -log1p_exp(eta)
    }
}

/// Row-major design matrix whose first column is the intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix<T> {
    rows: usize,
    cols: usize,
    values: Vec<T>,
}

impl<T: Scalar> DesignMatrix<T> {
    /// Wraps row-major `values`, checking the intercept column and finiteness.
    pub fn new(rows: usize, cols: usize, values: Vec<T>) -> Result<Self, GlmError> {
        if rows == 0 || cols == 0 {
            return Err(GlmError::Empty);
        }
        if values.len() != rows * cols {
            return Err(GlmError::DimensionMismatch {
                expected: rows * cols,
                got: values.len(),
            });
        }
        for (idx, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(GlmError::NonFinite {
                    row: idx / cols,
                    col: idx % cols,
                });
            }
        }
        for row in 0..rows {
            if values[row * cols] != T::one() {
                return Err(GlmError::MissingIntercept { row });
            }
        }
        Ok(Self { rows, cols, values })
    }

    /// Builds a design with `predictors` non-intercept columns; `fill` writes
    /// the predictors of one row into the provided slice.
    pub fn from_fn<F>(rows: usize, predictors: usize, mut fill: F) -> Result<Self, GlmError>
    where
        F: FnMut(usize, &mut [T]),
    {
        let cols = predictors + 1;
        let mut values = vec![T::zero(); rows * cols];
        for (row, chunk) in values.chunks_exact_mut(cols).enumerate() {
            chunk[0] = T::one();
            fill(row, &mut chunk[1..]);
        }
        Self::new(rows, cols, values)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Column count including the intercept.
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[T]> {
        self.values.chunks_exact(self.cols)
    }
}

/// Iteration controls for [`fit_logistic_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Relative change of the log-likelihood between accepted iterates.
    pub relative_tolerance: f64,
    /// Max-norm of the score vector.
    pub score_tolerance: f64,
    /// Floor applied to the IRLS weights `p(1-p)`.
    pub weight_floor: f64,
    /// Reciprocal condition estimate below which the normal equations are singular.
    pub min_rcond: f64,
    /// Coefficient magnitude treated as divergence towards infinity.
    pub separation_bound: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            relative_tolerance: 1e-8,
            score_tolerance: 1e-6,
            weight_floor: 1e-10,
            min_rcond: 1e-12,
            separation_bound: 30.0,
        }
    }
}

/// Outcome of a logistic regression fit.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit<T> {
    pub coefficients: Vec<T>,
    pub log_likelihood: T,
    /// `2 * coefficients.len() - 2 * log_likelihood`.
    pub aic: T,
    pub converged: bool,
    pub iterations: usize,
    /// Set when the fit drifted towards infinite coefficients.
    pub separation: bool,
    /// Max-norm of the score at the returned coefficients.
    pub score_max_norm: T,
    /// Deviance (`-2 * log_likelihood`) of the start value and every accepted iterate.
    pub deviance_trace: Vec<T>,
}

impl<T: Scalar> LogisticFit<T> {
    pub fn n_parameters(&self) -> usize {
        self.coefficients.len()
    }

    pub fn deviance(&self) -> T {
        -(T::lit(2.0) * self.log_likelihood)
    }
}

/// `2k - 2 * log_likelihood`.
pub fn aic<T: Scalar>(n_parameters: usize, log_likelihood: T) -> T {
    T::lit(2.0) * (T::from_count(n_parameters) - log_likelihood)
}

/// Fits with [`FitOptions::default`].
pub fn fit_logistic<T: Scalar>(x: &DesignMatrix<T>, y: &[bool]) -> Result<LogisticFit<T>, GlmError> {
    fit_logistic_with(x, y, &FitOptions::default())
}

struct Evaluation<T> {
    log_likelihood: T,
    score: Vec<T>,
    information: Vec<T>,
    any_saturated: bool,
}

fn evaluate<T: Scalar>(
    x: &DesignMatrix<T>,
    y: &[bool],
    beta: &[T],
    weight_floor: T,
    with_information: bool,
) -> Evaluation<T> {
    let p = x.cols();
    let mut ll = T::zero();
    let mut score = vec![T::zero(); p];
    let mut info = if with_information {
        vec![T::zero(); p * p]
    } else {
        Vec::new()
    };
    let mut any_saturated = false;
    for (row, &yi) in x.iter_rows().zip(y) {
        let eta = dot(row, beta);
        ll = ll + bernoulli_log_likelihood(yi, eta);
        let mu = expit(eta);
        let resid = indicator::<T>(yi) - mu;
        let raw_w = mu * (T::one() - mu);
        let w = if raw_w < weight_floor {
            any_saturated = true;
            weight_floor
        } else {
            raw_w
        };
        for (s, &xj) in score.iter_mut().zip(row) {
            *s = *s + xj * resid;
        }
        if with_information {
            for a in 0..p {
                let wa = w * row[a];
                for b in 0..=a {
                    info[a * p + b] = info[a * p + b] + wa * row[b];
                }
            }
        }
    }
    if with_information {
        for a in 0..p {
            for b in 0..a {
                info[b * p + a] = info[a * p + b];
            }
        }
    }
    Evaluation {
        log_likelihood: ll,
        score,
        information: info,
        any_saturated,
    }
}

#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&u, &v)| acc + u * v)
}

fn max_abs<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
}

/// Newton-Raphson/IRLS maximum-likelihood fit of `y` on the columns of `x`.
///
/// Every accepted iterate increases the log-likelihood (step halving), so the
/// recorded deviance trace is non-increasing. Convergence requires either a
/// relative log-likelihood change below `relative_tolerance` after a full step
/// or a score max-norm below `score_tolerance`, and in both cases a vanishing
/// Newton step; the step condition keeps separated data (score tending to zero
/// while coefficients diverge) from being reported as converged.
pub fn fit_logistic_with<T: Scalar>(
    x: &DesignMatrix<T>,
    y: &[bool],
    opts: &FitOptions,
) -> Result<LogisticFit<T>, GlmError> {
    if x.rows() != y.len() {
        return Err(GlmError::DimensionMismatch {
            expected: x.rows(),
            got: y.len(),
        });
    }
    let events = y.iter().filter(|&&v| v).count();
    if events == 0 || events == y.len() {
        return Err(GlmError::SingleClass);
    }

    let p = x.cols();
    let floor = T::lit(opts.weight_floor);
    let mut beta = vec![T::zero(); p];
    beta[0] = logit(T::from_count(events) / T::from_count(y.len()))?;

    let mut current = evaluate(x, y, &beta, floor, true);
    let mut trace = vec![-(T::lit(2.0) * current.log_likelihood)];
    let mut last_rel_change: Option<T> = None;
    let mut last_full_step = false;
    let mut converged = false;
    let mut iterations = 0;

    loop {
        let step = linalg::solve_spd(&current.information, &current.score, p, opts.min_rcond)
            .map_err(|s| GlmError::RankDeficient { rcond: s.rcond })?;
        let score_norm = max_abs(&current.score);
        let step_norm = max_abs(&step);
        let step_small = step_norm <= T::lit(1e-3) * (T::one() + max_abs(&beta));
        let rel_ok = last_full_step
            && last_rel_change.is_some_and(|r| r < T::lit(opts.relative_tolerance));
        // Gain predicted by the quadratic model; near the optimum it drops below
        // the rounding noise of the log-likelihood sum and line search stalls.
        let tol_ll = T::lit(opts.relative_tolerance) * current.log_likelihood.abs().max(T::one());
        let gain = dot(&current.score, &step) * T::half();
        let within_noise = gain.abs() <= tol_ll;
        if step_small && (score_norm < T::lit(opts.score_tolerance) || rel_ok || within_noise) {
            if score_norm >= T::lit(opts.score_tolerance) {
                // final full Newton step
                let next: Vec<T> = beta.iter().zip(&step).map(|(&b, &s)| b + s).collect();
                let next_eval = evaluate(x, y, &next, floor, true);
                if next_eval.log_likelihood.is_finite() && next_eval.log_likelihood >= current.log_likelihood - tol_ll {
                    iterations += 1;
                    beta = next;
                    current = next_eval;
                    trace.push(-(T::lit(2.0) * current.log_likelihood));
                }
            }
            converged = true;
            break;
        }
        if iterations == opts.max_iterations {
            break;
        }

        let mut scale = T::one();
        let mut accepted = None;
        for _ in 0..40 {
            let candidate: Vec<T> = beta
                .iter()
                .zip(&step)
                .map(|(&b, &s)| b + scale * s)
                .collect();
            let ll = evaluate(x, y, &candidate, floor, false).log_likelihood;
            if ll.is_finite() && ll >= current.log_likelihood {
                accepted = Some(candidate);
                break;
            }
            scale = scale * T::half();
        }
        let Some(next) = accepted else {
            // no ascent available at working precision
            break;
        };
        iterations += 1;
        let next_eval = evaluate(x, y, &next, floor, true);
        let denom = current.log_likelihood.abs().max(T::lit(1e-10));
        last_rel_change = Some((next_eval.log_likelihood - current.log_likelihood).abs() / denom);
        last_full_step = scale == T::one();
        beta = next;
        current = next_eval;
        trace.push(-(T::lit(2.0) * current.log_likelihood));
    }

    let separation = current.any_saturated
        || max_abs(&beta) > T::lit(opts.separation_bound);
    if separation {
        converged = false;
    }
    let log_likelihood = current.log_likelihood;
    Ok(LogisticFit {
        aic: aic(p, log_likelihood),
        score_max_norm: max_abs(&current.score),
        coefficients: beta,
        log_likelihood,
        converged,
        iterations,
        separation,
        deviance_trace: trace,
    })
}

/// Row-wise inner products of `x` with the fitted coefficients.
pub fn predict_linear<T: Scalar>(fit: &LogisticFit<T>, x: &DesignMatrix<T>) -> Result<Vec<T>, GlmError> {
    linear_predictor(&fit.coefficients, x)
}

pub fn linear_predictor<T: Scalar>(coefficients: &[T], x: &DesignMatrix<T>) -> Result<Vec<T>, GlmError> {
    if coefficients.len() != x.cols() {
        return Err(GlmError::DimensionMismatch {
            expected: x.cols(),
            got: coefficients.len(),
        });
    }
    Ok(x.iter_rows().map(|row| dot(row, coefficients)).collect())
}

/// Log-likelihood of arbitrary coefficients on `(x, y)`.
pub fn log_likelihood_at<T: Scalar>(coefficients: &[T], x: &DesignMatrix<T>, y: &[bool]) -> Result<T, GlmError> {
    let eta = linear_predictor(coefficients, x)?;
    if eta.len() != y.len() {
        return Err(GlmError::DimensionMismatch {
            expected: eta.len(),
            got: y.len(),
        });
    }
    Ok(eta
        .iter()
        .zip(y)
        .map(|(&e, &yi)| bernoulli_log_likelihood(yi, e))
        .sum())
}

/// Score vector `X^T (y - expit(X beta))`.
pub fn score_at<T: Scalar>(coefficients: &[T], x: &DesignMatrix<T>, y: &[bool]) -> Result<Vec<T>, GlmError> {
    let eta = linear_predictor(coefficients, x)?;
    let mut score = vec![T::zero(); x.cols()];
    for ((row, &e), &yi) in x.iter_rows().zip(&eta).zip(y) {
        let r = indicator::<T>(yi) - expit(e);
        for (s, &v) in score.iter_mut().zip(row) {
            *s = *s + v * r;
        }
    }
    Ok(score)
}
