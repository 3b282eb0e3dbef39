use serde::{Deserialize, Serialize};

use super::{k0, omega_q};
use crate::error::{Error, Result};

/// Admissible parameters `(q, f, h, L)` of the Bellman function, with the
/// derived quantities that every downstream computation needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BellmanParams {
    /// Exponent, `0 < q < 1`.
    pub q: f64,
    /// First moment `∫φ`.
    pub f: f64,
    /// q-moment `∫φ^q`, with `0 < h <= f^q`.
    pub h: f64,
    /// Threshold `L >= f`.
    #[serde(rename = "L")]
    pub threshold: f64,
    /// `f^q / h >= 1`.
    pub lambda: f64,
    /// `L / f >= 1`.
    pub mu: f64,
    /// Eigenvalue constant `ω_q(((1-q)L^q + qL^{q-1}f) / h) >= 1`.
    pub c: f64,
}

impl BellmanParams {
    pub fn new(q: f64, f: f64, h: f64, threshold: f64) -> Result<Self> {
        check_exponent(q)?;
        if !(f > 0.0 && f.is_finite()) {
            return Err(Error::domain("f", f, "f > 0"));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::domain("h", h, "h > 0"));
        }
        let fq = f.powf(q);
        if h > fq {
            return Err(Error::domain("h", h, "h <= f^q"));
        }
        if !(threshold >= f && threshold.is_finite()) {
            return Err(Error::domain("L", threshold, "L >= f"));
        }
        let lambda = fq / h;
        let mu = threshold / f;
        let c = omega_q(bellman_argument(q, f, h, threshold).max(1.0), q)?;
        Ok(BellmanParams {
            q,
            f,
            h,
            threshold,
            lambda,
            mu,
            c,
        })
    }

    /// `B(f, h, L, 1) = h·c`.
    pub fn bellman_value(&self) -> f64 {
        self.h * self.c
    }

    /// `c^{1/q}`, the eigenvalue of `max(M φ, L) ≈ c^{1/q} φ`.
    pub fn eigenvalue(&self) -> f64 {
        self.c.powf(1.0 / self.q)
    }

    /// `τ = L / c^{1/q}`.
    pub fn tau(&self) -> f64 {
        self.threshold / self.eigenvalue()
    }

    /// Limiting measure of the excess set, `k₀(λ, μ)`.
    ///
    /// Degenerate cases are resolved by continuity: `k₀ = 1` when `L = f`
    /// (the whole space is the excess set) and `k₀ = 0` when `h = f^q`.
    pub fn excess_measure(&self) -> Result<f64> {
        if self.h >= self.f.powf(self.q) {
            return Ok(0.0);
        }
        if self.mu <= 1.0 {
            return Ok(1.0);
        }
        k0(self.lambda, self.mu, self.q)
    }

    /// True when only the constant function `φ ≡ f` has these moments.
    pub fn is_holder_extremal(&self) -> bool {
        self.h >= self.f.powf(self.q) * (1.0 - 1e-15)
    }

    pub fn summary(&self) -> Result<BellmanSummary> {
        Ok(BellmanSummary {
            params: *self,
            value: self.bellman_value(),
            c: self.c,
            tau: self.tau(),
            k0: self.excess_measure()?,
        })
    }
}

/// The Bellman value with the constants of the limiting extremal profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BellmanSummary {
    pub params: BellmanParams,
    /// `h c`.
    pub value: f64,
    pub c: f64,
    pub tau: f64,
    pub k0: f64,
}

/// `((1-q)L^q + qL^{q-1}f) / h = (f^q/h)·H_q(L/f)`.
pub fn bellman_argument(q: f64, f: f64, h: f64, threshold: f64) -> f64 {
    ((1.0 - q) * threshold.powf(q) + q * threshold.powf(q - 1.0) * f) / h
}

pub(crate) fn check_exponent(q: f64) -> Result<()> {
    if q > 0.0 && q < 1.0 {
        Ok(())
    } else {
        Err(Error::domain("q", q, "0 < q < 1"))
    }
}
