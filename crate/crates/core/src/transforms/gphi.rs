use serde::Serialize;

use crate::dyadic::{excess_set, linearize, pow, StepFunction, TreeSpec, MAX_LEAVES};
use crate::error::{Error, Result};
use crate::kernel::check_exponent;

/// The two values `{c_I, 0}` that replace `φ` on one set `A(φ, I)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GPhiEntry {
    pub node: crate::dyadic::Node,
    pub c: f64,
    /// `(∫_A φ^q / (∫_A φ)^q)^{1/(1-q)}`.
    pub gamma: f64,
    /// Support measure actually used, a multiple of `m^{-refine}`.
    pub gamma_realized: f64,
    /// `μ(A(φ, I))`.
    pub a_measure: f64,
    /// Support of `{g = c}` as unit ranges at the refinement depth.
    pub support: Vec<(u64, u64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GPhiRecord {
    pub refine: u32,
    pub entries: Vec<GPhiEntry>,
}

/// Refinement used when none is requested: eight levels below the tree and
/// at least `2^-44` resolution, capped at `2^53` cells.
pub fn default_refine(spec: &TreeSpec) -> u32 {
    let bits = (spec.m as f64).log2();
    let wanted = (spec.depth + 8).max((44.0 / bits).ceil() as u32);
    let mut refine = wanted;
    while crate::dyadic::checked_pow(spec.m, refine).is_none_or(|n| n > MAX_LEAVES) {
        refine -= 1;
    }
    refine.max(spec.depth)
}

/// Replaces `φ` on each `A(φ, I)` with `I ∈ S_φ`, `I ⊆ E_φ` by a function
/// taking the single value `c_I` on a set of measure `γ_I` and zero
/// elsewhere; `φ` is kept off `E_φ = {M_T φ >= L}`.
///
/// `c_I γ_I = ∫_A φ` and `c_I^q γ_I = ∫_A φ^q`, with `γ_I` rounded to the
/// refinement grid and `c_I` then fixed by the first equation, so mass is
/// preserved exactly on every `A(φ, I)` and the `q`-moment up to the
/// rounding of `γ_I`. Supports are packed from the left end of `A(φ, I)`.
pub fn g_phi(
    phi: &StepFunction<f64>,
    threshold: f64,
    q: f64,
    spec: &TreeSpec,
    refine: Option<u32>,
) -> Result<(StepFunction<f64>, GPhiRecord)> {
    check_exponent(q)?;
    let refine = refine.unwrap_or_else(|| default_refine(spec));
    if refine < phi.depth()
        || crate::dyadic::checked_pow(spec.m, refine).is_none_or(|n| n > MAX_LEAVES)
    {
        return Err(Error::RefinementTooCoarse {
            refine,
            reason: format!(
                "refinement must lie between the function depth {} and the 2^53 cell limit",
                phi.depth()
            ),
        });
    }
    let lin = linearize(phi, spec)?;
    let excess = excess_set(phi, threshold, q, spec)?;
    let m = spec.m;
    let scale = pow(m, refine - phi.depth());
    let fine_total = pow(m, refine) as f64;
    let coarse_total = phi.total_units() as f64;

    let mut targets: Vec<_> = lin
        .elements
        .iter()
        .filter(|e| excess.elements.iter().any(|j| e.node.is_within(j, m)))
        .collect();
    targets.sort_by(|a, b| b.node.depth.cmp(&a.node.depth).then(a.node.cmp(&b.node)));

    // (lo, hi, value) in refinement units for every replaced range.
    let mut replaced: Vec<(u64, u64, f64)> = Vec::new();
    let mut entries = Vec::with_capacity(targets.len());
    for e in targets {
        let mut mass = 0.0;
        let mut power = 0.0;
        let mut support_units = 0u64;
        for &(lo, hi) in &e.a_set {
            mass += phi.mass_units(lo, hi);
            let mut p = phi.piece_at(lo);
            while p < phi.len() && phi.breaks()[p] < hi {
                let v = phi.values()[p];
                let len = phi.breaks()[p + 1].min(hi) - phi.breaks()[p].max(lo);
                if v > 0.0 {
                    power += v.powf(q) * len as f64;
                    support_units += len;
                }
                p += 1;
            }
        }
        let a = mass / coarse_total;
        let b = power / coarse_total;
        let a_measure = e.alpha_units as f64 / coarse_total;

        let (c, gamma, gamma_units) = if a > 0.0 {
            let gamma = (b / a.powf(q)).powf(1.0 / (1.0 - q));
            let cap = support_units * scale;
            let units = ((gamma * fine_total).round() as u64).min(cap);
            if units == 0 {
                return Err(Error::RefinementTooCoarse {
                    refine,
                    reason: format!("support measure {gamma:e} of {} rounds to zero", e.node),
                });
            }
            (a / (units as f64 / fine_total), gamma, units)
        } else {
            (0.0, 0.0, 0)
        };

        let mut support = Vec::new();
        let mut left = gamma_units;
        for &(lo, hi) in &e.a_set {
            let (flo, fhi) = (lo * scale, hi * scale);
            let take = left.min(fhi - flo);
            if take > 0 {
                support.push((flo, flo + take));
                replaced.push((flo, flo + take, c));
            }
            if take < fhi - flo {
                replaced.push((flo + take, fhi, 0.0));
            }
            left -= take;
        }
        entries.push(GPhiEntry {
            node: e.node,
            c,
            gamma,
            gamma_realized: gamma_units as f64 / fine_total,
            a_measure,
            support,
        });
    }

    let g = assemble(phi, replaced, refine, scale)?;
    Ok((g, GPhiRecord { refine, entries }))
}

/// Overlays the replaced ranges on `φ` at the refinement depth.
fn assemble(
    phi: &StepFunction<f64>,
    mut replaced: Vec<(u64, u64, f64)>,
    refine: u32,
    scale: u64,
) -> Result<StepFunction<f64>> {
    replaced.sort_by_key(|r| r.0);
    let mut breaks = vec![0u64];
    let mut values = Vec::new();
    let mut cursor = 0u64;
    for (lo, hi, v) in replaced {
        copy_phi(phi, scale, cursor, lo, &mut breaks, &mut values);
        breaks.push(hi);
        values.push(v);
        cursor = hi;
    }
    copy_phi(
        phi,
        scale,
        cursor,
        phi.total_units() * scale,
        &mut breaks,
        &mut values,
    );
    StepFunction::new(phi.base(), refine, breaks, values)
}

fn copy_phi(
    phi: &StepFunction<f64>,
    scale: u64,
    mut x: u64,
    to: u64,
    breaks: &mut Vec<u64>,
    values: &mut Vec<f64>,
) {
    while x < to {
        let p = phi.piece_at(x / scale);
        let piece_end = (phi.breaks()[p + 1] * scale).min(to);
        breaks.push(piece_end);
        values.push(phi.values()[p]);
        x = piece_end;
    }
}
