//! Plain bisection for monotone residuals.

use crate::error::{Error, Result};

pub(crate) const MAX_ITERATIONS: usize = 200;

/// Finds a root of `residual` on `[lo, hi]`, which must bracket a sign change.
/// Infinite endpoint residuals are accepted; NaN is not.
///
/// Iterates until the midpoint coincides with an endpoint (the bracket can no
/// longer shrink in `f64`) or until `rel_tol * max(1, |mid|)` is reached,
/// whichever comes first.
pub(crate) fn bisect<F>(mut residual: F, mut lo: f64, mut hi: f64, rel_tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let r_lo = residual(lo);
    let r_hi = residual(hi);
    if r_lo == 0.0 {
        return Ok(lo);
    }
    if r_hi == 0.0 {
        return Ok(hi);
    }
    if r_lo.is_nan() || r_hi.is_nan() || r_lo.signum() == r_hi.signum() {
        return Err(Error::NoSignChange { lo, hi, r_lo, r_hi });
    }
    let lo_negative = r_lo < 0.0;
    for _ in 0..MAX_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || (hi - lo) <= rel_tol * mid.abs().max(1.0) {
            return Ok(mid.clamp(lo, hi));
        }
        let r = residual(mid);
        if r == 0.0 {
            return Ok(mid);
        }
        if (r < 0.0) == lo_negative {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::NoConvergence {
        lo,
        hi,
        iterations: MAX_ITERATIONS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_sqrt2() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 0.0).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn decreasing_residual() {
        let r = bisect(|x| 1.0 - x, 0.0, 3.0, 0.0).unwrap();
        assert!((r - 1.0).abs() < 1e-15);
    }

    #[test]
    fn reports_missing_sign_change() {
        let err = bisect(|x| x * x + 1.0, -1.0, 1.0, 0.0).unwrap_err();
        assert!(matches!(err, Error::NoSignChange { .. }));
        assert!(err.is_convergence_failure());
    }
}
