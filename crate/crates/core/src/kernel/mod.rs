//! Closed forms and root-finding for the special functions behind the
//! Bellman value.
//!
//! The central pair is `H_q(z) = (1-q)z^q + qz^{q-1}` on `[1, ∞)` and
//! `ω_q = (H_q^{-1})^q`. Everything else (`σ_q`, the root `X_λ(k)`, `k₀`,
//! `R_{q,μ}`, `R_k`) is expressed through them. All functions here are pure.

mod bisect;
mod params;

pub use params::{bellman_argument, BellmanParams, BellmanSummary};

pub(crate) use bisect::bisect;
pub(crate) use params::check_exponent;

use serde::Serialize;

use crate::error::{Error, Result};

/// `H_q(z) = (1-q)z^q + qz^{q-1}` for `z >= 1`.
pub fn h_q(z: f64, q: f64) -> Result<f64> {
    check_exponent(q)?;
    if !(z >= 1.0) || z.is_infinite() {
        return Err(Error::domain("z", z, "z >= 1"));
    }
    Ok(transfer(z, q))
}

#[inline]
pub(crate) fn transfer(z: f64, q: f64) -> f64 {
    (1.0 - q) * z.powf(q) + q * z.powf(q - 1.0)
}

/// `ω_q(z) = [H_q^{-1}(z)]^q` for `z >= 1`.
///
/// Solved directly for `w = x^q`, where `H_q` reads `(1-q)w + q w^{1-1/q}`,
/// by bisection on `[1, (z+1)/(1-q)]`; the upper end brackets because the
/// first term alone exceeds `z` there. Working in `w` avoids overflow of `x` for small `q`.
pub fn omega_q(z: f64, q: f64) -> Result<f64> {
    check_exponent(q)?;
    if !(z >= 1.0) || z.is_infinite() {
        return Err(Error::domain("z", z, "z >= 1"));
    }
    if z == 1.0 {
        return Ok(1.0);
    }
    let slope = 1.0 - 1.0 / q;
    bisect(
        |w| (1.0 - q) * w + q * w.powf(slope) - z,
        1.0,
        (z + 1.0) / (1.0 - q),
        0.0,
    )
}

/// `U_q(x) = ω_q(x) / x`.
pub fn u_q(x: f64, q: f64) -> Result<f64> {
    Ok(omega_q(x, q)? / x)
}

/// `σ_q(k, x) = ((1-q)x + q - kx) / ((1-k)^{1-q} (1-kx)^q ((1-q)x + q))`,
/// for `0 < k < 1` and `0 < x < 1/k`.
///
/// Equals `H_q(x(1-k)/(1-kx)) / H_q(x)` where both sides are defined.
pub fn sigma_q(k: f64, x: f64, q: f64) -> Result<f64> {
    check_exponent(q)?;
    if !(k > 0.0 && k < 1.0) {
        return Err(Error::domain("k", k, "0 < k < 1"));
    }
    if !(x > 0.0) || k * x >= 1.0 {
        return Err(Error::domain("x", x, "0 < x < 1/k"));
    }
    Ok(sigma_unchecked(k, x, q))
}

#[inline]
fn sigma_unchecked(k: f64, x: f64, q: f64) -> f64 {
    let base = (1.0 - q) * x + q;
    (base - k * x) / ((1.0 - k).powf(1.0 - q) * (1.0 - k * x).max(0.0).powf(q) * base)
}

/// `X_λ(k)`: the unique root in `(1, 1/k)` of `H_q(x(1-k)/(1-kx)) = λ H_q(x)`,
/// for `λ > 1` and `0 < k < 1`.
///
/// Solved as `σ_q(k, x) = λ` by bisection on `ln(1 - kx)`, which resolves
/// roots very close to `1/k` (small `q`, large `λ`).
pub fn chi_lambda(lambda: f64, k: f64, q: f64) -> Result<f64> {
    check_exponent(q)?;
    if !(lambda > 1.0) || lambda.is_infinite() {
        return Err(Error::domain("lambda", lambda, "lambda > 1"));
    }
    if !(k > 0.0 && k < 1.0) {
        return Err(Error::domain("k", k, "0 < k < 1"));
    }
    let scale = (1.0 - k).powf(1.0 - q);
    let residual = |t: f64| {
        let s = t.exp();
        let x = (1.0 - s) / k;
        let base = (1.0 - q) * x + q;
        (base - (1.0 - s)) / (scale * s.powf(q) * base) - lambda
    };
    let t = bisect(residual, LOG_GAP_MIN, (1.0 - k).ln(), 0.0)?;
    Ok((1.0 - t.exp()) / k)
}

/// Smallest `ln(1 - kx)` searched by [`chi_lambda`].
const LOG_GAP_MIN: f64 = -700.0;

/// `k₀(λ, μ) = (W - μ) / (μ (W - 1))` with `W = ω_q(λ H_q(μ))^{1/q}`.
///
/// This is the unique `k ∈ (0, 1/μ)` with `σ_q(k, μ) = λ`.
pub fn k0(lambda: f64, mu: f64, q: f64) -> Result<f64> {
    check_exponent(q)?;
    if !(lambda > 1.0) {
        return Err(Error::domain("lambda", lambda, "lambda > 1"));
    }
    if !(mu > 1.0) {
        return Err(Error::domain("mu", mu, "mu > 1"));
    }
    let w = omega_q(lambda * transfer(mu, q), q)?.powf(1.0 / q);
    if w <= mu {
        return Err(Error::domain("k0", (w - mu) / (mu * (w - 1.0)), "k0 > 0"));
    }
    Ok((w - mu) / (mu * (w - 1.0)))
}

/// `R_{q,μ}(k, x) = (x(1-k)/(1-kx))^q / σ_q(k, x) + (μ^q - x^q)(1-k)` on
/// `W = {0 < k < 1, 1 < x < 1/k}`.
pub fn r_q_mu(k: f64, x: f64, mu: f64, q: f64) -> Result<f64> {
    check_exponent(q)?;
    if !(k > 0.0 && k < 1.0) {
        return Err(Error::domain("k", k, "0 < k < 1"));
    }
    if !(x > 1.0) || k * x >= 1.0 {
        return Err(Error::domain("x", x, "1 < x < 1/k"));
    }
    if !(mu >= 1.0) {
        return Err(Error::domain("mu", mu, "mu >= 1"));
    }
    let y = x * (1.0 - k) / (1.0 - k * x);
    Ok(y.powf(q) / sigma_unchecked(k, x, q) + (mu.powf(q) - x.powf(q)) * (1.0 - k))
}

/// `ℓ_k(B) = (1-k)^{1-q}(f-B)^q + k^{1-q}B^q`.
pub fn ell_k(b: f64, k: f64, f: f64, q: f64) -> f64 {
    (1.0 - k).powf(1.0 - q) * (f - b).max(0.0).powf(q) + k.powf(1.0 - q) * b.max(0.0).powf(q)
}

/// The interval `W_k = [ρ₀, ρ₁]` on which `R_k` is defined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RkDomain {
    pub rho0: f64,
    pub rho1: f64,
    pub k: f64,
}

impl RkDomain {
    /// `ℓ_k` peaks at `B = kf` with value `f^q > h` and is monotone on either
    /// side, so each endpoint is either the boundary or a bisection root.
    pub fn new(k: f64, f: f64, h: f64, q: f64) -> Result<Self> {
        check_exponent(q)?;
        if !(k > 0.0 && k < 1.0) {
            return Err(Error::domain("k", k, "0 < k < 1"));
        }
        if !(f > 0.0) {
            return Err(Error::domain("f", f, "f > 0"));
        }
        if !(h > 0.0 && h < f.powf(q)) {
            return Err(Error::domain("h", h, "0 < h < f^q"));
        }
        let peak = k * f;
        let rho0 = if ell_k(0.0, k, f, q) >= h {
            0.0
        } else {
            bisect(|b| ell_k(b, k, f, q) - h, 0.0, peak, 0.0)?
        };
        let rho1 = if ell_k(f, k, f, q) >= h {
            f
        } else {
            bisect(|b| ell_k(b, k, f, q) - h, peak, f, 0.0)?
        };
        Ok(RkDomain { rho0, rho1, k })
    }

    pub fn contains(&self, b: f64) -> bool {
        b >= self.rho0 && b <= self.rho1
    }
}

/// `R_k(B)`, the two-branch bound on the excess-set contribution.
///
/// Uses the `ω_q` branch when `(1-k)^{1-q}(f-B)^q < h <= ℓ_k(B)` and
/// `k^{1-q}B^q / (1-q)` when `h <= (1-k)^{1-q}(f-B)^q`.
pub fn r_k(b: f64, k: f64, params: &BellmanParams) -> Result<f64> {
    r_k_raw(b, k, params.f, params.h, params.q)
}

pub(crate) fn r_k_raw(b: f64, k: f64, f: f64, h: f64, q: f64) -> Result<f64> {
    check_exponent(q)?;
    if !(k > 0.0 && k < 1.0) {
        return Err(Error::domain("k", k, "0 < k < 1"));
    }
    if !(0.0..=f).contains(&b) {
        return Err(Error::domain("B", b, "0 <= B <= f"));
    }
    let outside = (1.0 - k).powf(1.0 - q) * (f - b).powf(q);
    let inside = k.powf(1.0 - q) * b.powf(q);
    // ρ₀/ρ₁ come from bisection, so allow them to land a rounding error short.
    if outside + inside < h * (1.0 - 1e-12) {
        return Err(Error::domain("B", b, "l_k(B) >= h"));
    }
    if h <= outside {
        return Ok(inside / (1.0 - q));
    }
    let rest = h - outside;
    Ok(rest * omega_q((inside / rest).max(1.0), q)?)
}

/// Location and value of the maximum of `R_k` over `W_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RkMaximum {
    /// `X_λ(k)` with `λ = f^q/h`.
    pub chi: f64,
    /// `B⋆ = X_λ(k) k f`.
    pub b_star: f64,
    /// `h ω_q(λ H_q(X_λ(k))) - (1-k) f^q X_λ(k)^q`.
    pub value: f64,
    /// Whether `(1-k)^{1-q}(f-B⋆)^q < h < ℓ_k(B⋆)` holds numerically.
    pub sandwich: bool,
}

pub fn maximize_r_k(k: f64, params: &BellmanParams) -> Result<RkMaximum> {
    maximize_r_k_raw(k, params.f, params.h, params.q)
}

pub(crate) fn maximize_r_k_raw(k: f64, f: f64, h: f64, q: f64) -> Result<RkMaximum> {
    let fq = f.powf(q);
    let lambda = fq / h;
    let chi = chi_lambda(lambda, k, q)?;
    let b_star = chi * k * f;
    let value =
        h * omega_q((lambda * transfer(chi, q)).max(1.0), q)? - (1.0 - k) * fq * chi.powf(q);
    let outside = (1.0 - k).powf(1.0 - q) * (f - b_star).powf(q);
    let sandwich = outside < h && h < ell_k(b_star, k, f, q);
    Ok(RkMaximum {
        chi,
        b_star,
        value,
        sandwich,
    })
}

/// `B(f, h, L, 1) = h ω_q(((1-q)L^q + qL^{q-1}f) / h)`.
pub fn bellman_value(params: &BellmanParams) -> f64 {
    params.bellman_value()
}

/// Same value computed from raw inputs, reporting a domain error when the
/// `ω_q` argument drops below one.
pub fn bellman_value_raw(q: f64, f: f64, h: f64, threshold: f64) -> Result<f64> {
    check_exponent(q)?;
    let z = bellman_argument(q, f, h, threshold);
    if !(z >= 1.0) {
        return Err(Error::domain("omega argument", z, ">= 1"));
    }
    Ok(h * omega_q(z, q)?)
}

/// Slack of `t + (1-q)/q >= t^q / q`; zero only at `t = 1`.
pub fn elementary_slack(t: f64, q: f64) -> f64 {
    t + (1.0 - q) / q - t.powf(q) / q
}
