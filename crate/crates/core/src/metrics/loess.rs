//! Local linear regression (loess) with tricube weights.

use crate::scalar::Scalar;

use super::MetricError;

/// Smoother settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoessOptions {
    /// Fraction of points in each local neighbourhood.
    pub span: f64,
    /// Inputs up to this size are fitted exactly at every evaluation point.
    pub exact_limit: usize,
    /// Number of vertices for interpolated evaluation above `exact_limit`.
    pub vertices: usize,
}

impl Default for LoessOptions {
    fn default() -> Self {
        Self {
            span: 0.75,
            exact_limit: 2000,
            vertices: 200,
        }
    }
}

/// Minimum number of points accepted by the smoother.
pub const MIN_POINTS: usize = 10;

/// Sorted copy of the data with neighbourhood size `q`.
struct Fitter<T> {
    x: Vec<T>,
    y: Vec<T>,
    q: usize,
}

impl<T: Scalar> Fitter<T> {
    fn new(x: &[T], y: &[T], span: f64) -> Self {
        let mut idx: Vec<usize> = (0..x.len()).collect();
        idx.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
        let n = x.len();
        let q = ((span * n as f64).floor() as usize).clamp(2.min(n), n);
        Self {
            x: idx.iter().map(|&i| x[i]).collect(),
            y: idx.iter().map(|&i| y[i]).collect(),
            q,
        }
    }

    /// Start of the `q` nearest neighbours of `x0` in the sorted data.
    fn window_start(&self, x0: T) -> usize {
        let (x, q) = (&self.x, self.q);
        let (mut lo, mut hi) = (0, x.len() - q);
        while lo < hi {
            let mid = (lo + hi) / 2;
            if x0 - x[mid] <= x[mid + q] - x0 {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        lo
    }

    /// Local fit at `x0`: fitted value and slope.
    fn fit_at(&self, x0: T) -> (T, T) {
        let lo = self.window_start(x0);
        let xs = &self.x[lo..lo + self.q];
        let ys = &self.y[lo..lo + self.q];
        let d = (x0 - xs[0]).max(xs[self.q - 1] - x0);
        if d <= T::zero() {
            // Every neighbour sits at x0: average the whole tie group.
            let a = self.x.partition_point(|&v| v < x0);
            let b = self.x.partition_point(|&v| v <= x0);
            let tied = &self.y[a..b];
            return (tied.iter().copied().sum::<T>() / T::from_count(tied.len()), T::zero());
        }
        // Weighted sums in one pass, with x centred at x0.
        let inv_d = T::one() / d;
        let (mut sw, mut swx, mut swy, mut swxx, mut swxy) = (T::zero(), T::zero(), T::zero(), T::zero(), T::zero());
        for (&xi, &yi) in xs.iter().zip(ys) {
            let dx = xi - x0;
            let u = (dx * inv_d).abs();
            if u >= T::one() {
                continue;
            }
            let t = T::one() - u * u * u;
            let w = t * t * t;
            sw = sw + w;
            swx = swx + w * dx;
            swy = swy + w * yi;
            swxx = swxx + w * dx * dx;
            swxy = swxy + w * dx * yi;
        }
        if sw <= T::zero() {
            let mean = ys.iter().copied().sum::<T>() / T::from_count(ys.len());
            return (mean, T::zero());
        }
        let (xbar, ybar) = (swx / sw, swy / sw);
        let sxx = swxx - swx * xbar;
        let sxy = swxy - swx * ybar;
        if sxx <= T::lit(1e-10) * sw * d * d {
            return (ybar, T::zero());
        }
        let slope = sxy / sxx;
        (ybar - slope * xbar, slope)
    }
}

fn validate<T: Scalar>(x: &[T], y: &[T], x_eval: &[T]) -> Result<(), MetricError> {
    if x.len() != y.len() {
        return Err(MetricError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < MIN_POINTS {
        return Err(MetricError::TooFewPoints {
            needed: MIN_POINTS,
            found: x.len(),
        });
    }
    if x.iter().chain(y).chain(x_eval).any(|v| !v.is_finite()) {
        return Err(MetricError::NonFinite);
    }
    Ok(())
}

/// Loess with the default options (span 0.75, degree 1, no robustness
/// iterations), evaluated at `x_eval`.
pub fn loess_smooth<T: Scalar>(x: &[T], y: &[T], x_eval: &[T]) -> Result<Vec<T>, MetricError> {
    loess_smooth_with(x, y, x_eval, &LoessOptions::default())
}

/// Above `opts.exact_limit` points the local fit is computed at vertices
/// spaced by quantiles of `x` and evaluated in between by cubic Hermite
/// interpolation of the fitted values and local slopes.
pub fn loess_smooth_with<T: Scalar>(
    x: &[T],
    y: &[T],
    x_eval: &[T],
    opts: &LoessOptions,
) -> Result<Vec<T>, MetricError> {
    validate(x, y, x_eval)?;
    let fitter = Fitter::new(x, y, opts.span);
    let n = fitter.x.len();
    if n <= opts.exact_limit || opts.vertices < 2 {
        return Ok(x_eval.iter().map(|&x0| fitter.fit_at(x0).0).collect());
    }
    let mut vx: Vec<T> = (0..opts.vertices)
        .map(|i| fitter.x[i * (n - 1) / (opts.vertices - 1)])
        .collect();
    vx.dedup();
    let vfit: Vec<(T, T)> = vx.iter().map(|&v| fitter.fit_at(v)).collect();
    let two = T::lit(2.0);
    let three = T::lit(3.0);
    Ok(x_eval
        .iter()
        .map(|&x0| {
            if vx.len() < 2 || x0 < vx[0] || x0 > vx[vx.len() - 1] {
                return fitter.fit_at(x0).0;
            }
            let j = (vx.partition_point(|&v| v <= x0) - 1).min(vx.len() - 2);
            let (x_a, x_b) = (vx[j], vx[j + 1]);
            let ((f_a, s_a), (f_b, s_b)) = (vfit[j], vfit[j + 1]);
            let h = x_b - x_a;
            let t = (x0 - x_a) / h;
            let t2 = t * t;
            let t3 = t2 * t;
            let h00 = two * t3 - three * t2 + T::one();
            let h10 = t3 - two * t2 + t;
            let h01 = three * t2 - two * t3;
            let h11 = t3 - t2;
            h00 * f_a + h10 * h * s_a + h01 * f_b + h11 * h * s_b
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_a_line() {
        let x: Vec<f64> = (0..50).map(|i| f64::from(i) * 0.37 - 3.0).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let fit = loess_smooth(&x, &y, &x).unwrap();
        for (f, t) in fit.iter().zip(&y) {
            assert!((f - t).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_input_gives_constant_output() {
        let x: Vec<f64> = (0..30).map(f64::from).collect();
        let y = vec![0.25; 30];
        for v in loess_smooth(&x, &y, &x).unwrap() {
            assert!((v - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn tied_x_falls_back_to_mean() {
        let x = vec![1.0_f64; 12];
        let y: Vec<f64> = (0..12).map(f64::from).collect();
        let out = loess_smooth(&x, &y, &[1.0]).unwrap();
        assert!((out[0] - 5.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_small_or_mismatched_input() {
        assert!(matches!(
            loess_smooth(&[1.0_f64; 5], &[1.0; 5], &[1.0]),
            Err(MetricError::TooFewPoints { .. })
        ));
        assert!(matches!(
            loess_smooth(&[1.0_f64; 12], &[1.0; 11], &[1.0]),
            Err(MetricError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn interpolated_surface_tracks_exact_fit() {
        let n = 5000;
        let x: Vec<f64> = (0..n).map(|i| (f64::from(i) / f64::from(n)).powi(2) * 4.0 - 2.0).collect();
        let y: Vec<f64> = x.iter().enumerate().map(|(i, v)| v.sin() + if i % 2 == 0 { 0.1 } else { -0.1 }).collect();
        let exact = loess_smooth_with(&x, &y, &x, &LoessOptions { exact_limit: usize::MAX, ..Default::default() }).unwrap();
        let interp = loess_smooth(&x, &y, &x).unwrap();
        let gaps: Vec<f64> = exact.iter().zip(&interp).map(|(a, b)| (a - b).abs()).collect();
        let worst = gaps.iter().copied().fold(0.0, f64::max);
        let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
        assert!(worst < 2e-3 && mean < 1e-4, "max gap {worst}, mean gap {mean}");
    }
}
