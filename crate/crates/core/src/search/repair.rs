//! Moment repair through the family `φ ↦ a φ^b`.

use super::dense::leaf_moments;
use crate::error::{Error, Result};
use crate::kernel::bisect;

/// Relative moment accuracy the repair guarantees.
pub(crate) const REPAIR_TOL: f64 = 1e-10;

const LOG_B_MIN: f64 = -20.0;
const LOG_B_MAX: f64 = 8.0;

/// Returns `a φ^b` with `∫ = f` and `∫ (·)^q = h`.
///
/// For fixed `b` the mass condition fixes `a`, and the resulting `q`-moment
/// `f^q ∫φ^{bq} / (∫φ^b)^q` decreases in `b` (larger `b` concentrates mass),
/// so `b` is found by bisection on `ln b`. The reachable range runs from
/// `f^q μ(supp φ)^{1-q}` (as `b → 0`) down to `f^q μ(argmax φ)^{1-q}`.
pub(crate) fn repair(values: &[f64], f: f64, h: f64, q: f64) -> Result<Vec<f64>> {
    let top = values.iter().cloned().fold(0.0, f64::max);
    if !(top > 0.0) {
        return Err(Error::InfeasibleStart(
            "function vanishes identically".into(),
        ));
    }
    let w: Vec<f64> = values.iter().map(|v| v / top).collect();
    let moment = |log_b: f64| -> f64 {
        let b = log_b.exp();
        let powered: Vec<f64> = w
            .iter()
            .map(|&x| if x > 0.0 { x.powf(b) } else { 0.0 })
            .collect();
        let (m1, mq) = leaf_moments(&powered, q);
        f.powf(q) * mq / m1.powf(q)
    };
    let log_b = bisect(|lb| moment(lb) - h, LOG_B_MIN, LOG_B_MAX, 0.0).map_err(|_| {
        Error::InfeasibleStart(format!(
            "q-moment {h} outside the range [{}, {}] reachable by a phi^b",
            moment(LOG_B_MAX),
            moment(LOG_B_MIN)
        ))
    })?;
    let b = log_b.exp();
    let powered: Vec<f64> = w
        .iter()
        .map(|&x| if x > 0.0 { x.powf(b) } else { 0.0 })
        .collect();
    let (m1, _) = leaf_moments(&powered, q);
    let a = f / m1;
    let out: Vec<f64> = powered.iter().map(|x| a * x).collect();
    let (f1, h1) = leaf_moments(&out, q);
    if (f1 - f).abs() > REPAIR_TOL * f || (h1 - h).abs() > REPAIR_TOL * h {
        return Err(Error::InfeasibleStart(format!(
            "repair reached moments ({f1}, {h1}) instead of ({f}, {h})"
        )));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hits_both_moments() {
        let v = [0.1, 2.0, 0.0, 0.7, 1.3, 0.4, 5.0, 0.05];
        for &(f, h, q) in &[(1.0, 0.8, 0.5), (2.0, 0.9, 0.3), (0.5, 0.45, 0.8)] {
            let out = repair(&v, f, h, q).unwrap();
            let (f1, h1) = leaf_moments(&out, q);
            assert!((f1 - f).abs() <= 1e-12 * f);
            assert!((h1 - h).abs() <= 1e-10 * h);
            assert_eq!(out[2], 0.0);
        }
    }

    #[test]
    fn reports_unreachable_moments() {
        // Support of measure 1/4 caps the q-moment at f^q (1/4)^{1-q}.
        let v = [1.0, 0.0, 0.0, 0.0];
        assert!(matches!(
            repair(&v, 1.0, 0.9, 0.5),
            Err(Error::InfeasibleStart(_))
        ));
        assert!(repair(&[0.0; 4], 1.0, 0.5, 0.5).is_err());
    }
}
