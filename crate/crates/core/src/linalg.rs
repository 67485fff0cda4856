//! Dense symmetric positive-definite solves for the small normal-equation
//! systems produced by IRLS (a dozen unknowns at most).

use crate::scalar::Scalar;

/// Result of a failed factorization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Singular {
    /// Reciprocal condition estimate of the equilibrated matrix at failure.
    pub rcond: f64,
}

/// Solves `a * x = b` for symmetric positive-definite `a` (row-major, `p×p`).
///
/// The matrix is first scaled to unit diagonal; the reciprocal condition
/// estimate is `(min L_ii / max L_ii)^2` of the Cholesky factor of the scaled
/// matrix. Anything below `min_rcond` is reported as singular.
pub(crate) fn solve_spd<T: Scalar>(
    a: &[T],
    b: &[T],
    p: usize,
    min_rcond: f64,
) -> Result<Vec<T>, Singular> {
    debug_assert_eq!(a.len(), p * p);
    debug_assert_eq!(b.len(), p);

    let mut scale = vec![T::one(); p];
    for (i, s) in scale.iter_mut().enumerate() {
        let d = a[i * p + i];
        if !(d > T::zero()) || !d.is_finite() {
            return Err(Singular { rcond: 0.0 });
        }
        *s = T::one() / d.sqrt();
    }

    // lower-triangular factor, row-major
    let mut l = vec![T::zero(); p * p];
    for i in 0..p {
        for j in 0..=i {
            let mut sum = a[i * p + j] * scale[i] * scale[j];
            for k in 0..j {
                sum = sum - l[i * p + k] * l[j * p + k];
            }
            if i == j {
                if !(sum > T::zero()) || !sum.is_finite() {
                    return Err(Singular { rcond: 0.0 });
                }
                l[i * p + i] = sum.sqrt();
            } else {
                l[i * p + j] = sum / l[j * p + j];
            }
        }
    }

    let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
    for i in 0..p {
        let d = l[i * p + i].to_f64_lossy();
        lo = lo.min(d);
        hi = hi.max(d);
    }
    let rcond = (lo / hi).powi(2);
    if !(rcond >= min_rcond) {
        return Err(Singular { rcond });
    }

    // forward then backward substitution on the scaled system
    let mut y = vec![T::zero(); p];
    for i in 0..p {
        let mut sum = b[i] * scale[i];
        for k in 0..i {
            sum = sum - l[i * p + k] * y[k];
        }
        y[i] = sum / l[i * p + i];
    }
    let mut x = vec![T::zero(); p];
    for i in (0..p).rev() {
        let mut sum = y[i];
        for k in (i + 1)..p {
            sum = sum - l[k * p + i] * x[k];
        }
        x[i] = sum / l[i * p + i];
    }
    for (xi, s) in x.iter_mut().zip(&scale) {
        *xi = *xi * *s;
    }
    Ok(x)
}
