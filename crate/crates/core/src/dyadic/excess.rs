use serde::Serialize;

use super::tree::AdaptiveTree;
use super::{maximal_function, pow, Node, StepFunction, TreeSpec};
use crate::error::{Error, Result};

/// Maximal tree elements whose average reaches a threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExcessSet {
    pub elements: Vec<Node>,
    /// `μ(E)`.
    pub k: f64,
    /// `∫_E φ^q`.
    #[serde(rename = "A")]
    pub a: f64,
    /// `∫_E φ`.
    #[serde(rename = "B")]
    pub b: f64,
}

/// `E = ∪ I_j` with `I_j` the maximal elements satisfying `Av_{I_j}(φ) ≥ L`;
/// this is `{M_T φ ≥ L}`.
pub fn excess_set(
    phi: &StepFunction<f64>,
    threshold: f64,
    q: f64,
    spec: &TreeSpec,
) -> Result<ExcessSet> {
    let elements = maximal_above(phi, spec, |avg| avg >= threshold)?;
    let m = phi.base();
    let total = phi.total_units() as f64;
    let mut k = 0.0;
    let mut a = 0.0;
    let mut b = 0.0;
    for node in &elements {
        let (lo, hi) = node.units(m, phi.depth());
        k += (hi - lo) as f64 / total;
        b += phi.mass_units(lo, hi) / total;
        a += power_mass_units(phi, lo, hi, q) / total;
    }
    Ok(ExcessSet { elements, k, a, b })
}

/// Maximal tree elements whose average satisfies `pred`, in position order.
pub(crate) fn maximal_above(
    phi: &StepFunction<f64>,
    spec: &TreeSpec,
    pred: impl Fn(f64) -> bool,
) -> Result<Vec<Node>> {
    let tree = AdaptiveTree::build(phi, spec)?;
    let mut out: Vec<(u64, Node)> = tree
        .entries
        .iter()
        .filter(|e| pred(e.average) && e.parent.is_none_or(|p| !chain_hits(&tree, p, &pred)))
        .map(|e| (e.lo, e.node))
        .collect();
    out.sort_by_key(|x| x.0);
    Ok(out.into_iter().map(|x| x.1).collect())
}

fn chain_hits(tree: &AdaptiveTree<f64>, mut i: usize, pred: &impl Fn(f64) -> bool) -> bool {
    loop {
        let e = &tree.entries[i];
        if pred(e.average) {
            return true;
        }
        match e.parent {
            Some(p) => i = p,
            None => return false,
        }
    }
}

/// `∫_{[lo,hi)} φ^q` scaled by `m^depth`.
pub(crate) fn power_mass_units(phi: &StepFunction<f64>, lo: u64, hi: u64, q: f64) -> f64 {
    let mut acc = 0.0;
    let mut p = phi.piece_at(lo);
    let breaks = phi.breaks();
    let values = phi.values();
    while p < values.len() && breaks[p] < hi {
        let len = breaks[p + 1].min(hi) - breaks[p].max(lo);
        if values[p] > 0.0 {
            acc += values[p].powf(q) * len as f64;
        }
        p += 1;
    }
    acc
}

/// Both sides of an inequality `lhs <= rhs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InequalityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

impl InequalityCheck {
    pub fn new(lhs: f64, rhs: f64) -> Self {
        InequalityCheck {
            lhs,
            rhs,
            slack: rhs - lhs,
        }
    }
}

/// Weak type (1,1): `μ({M_T φ > λ}) <= (1/λ) ∫_{M_T φ > λ} φ`.
pub fn weak_type_check(
    phi: &StepFunction<f64>,
    spec: &TreeSpec,
    lambda: f64,
) -> Result<InequalityCheck> {
    if !(lambda > 0.0) {
        return Err(Error::domain("lambda", lambda, "lambda > 0"));
    }
    let elements = maximal_above(phi, spec, |avg| avg > lambda)?;
    let total = phi.total_units() as f64;
    let mut measure = 0.0;
    let mut mass = 0.0;
    for node in &elements {
        let (lo, hi) = node.units(phi.base(), phi.depth());
        measure += (hi - lo) as f64 / total;
        mass += phi.mass_units(lo, hi) / total;
    }
    Ok(InequalityCheck::new(measure, mass / lambda))
}

/// Kolmogorov: `∫_E (M_T φ)^q <= (1/(1-q)) μ(E)^{1-q} (∫φ)^q` for a set `E`
/// given as unit ranges at the tree depth.
pub fn kolmogorov_check(
    phi: &StepFunction<f64>,
    spec: &TreeSpec,
    set: &[(u64, u64)],
    q: f64,
) -> Result<InequalityCheck> {
    crate::kernel::check_exponent(q)?;
    let mt = maximal_function(phi, spec)?;
    let total = pow(spec.m, spec.depth);
    let mut measure_units = 0u64;
    let mut lhs = 0.0;
    for &(lo, hi) in set {
        if lo >= hi || hi > total {
            return Err(Error::InvalidStepFunction(format!(
                "set range [{lo}, {hi}) is not inside [0, {total})"
            )));
        }
        measure_units += hi - lo;
        lhs += power_mass_units(&mt, lo, hi, q);
    }
    let total = total as f64;
    let measure = measure_units as f64 / total;
    let rhs = measure.powf(1.0 - q) * phi.integral().powf(q) / (1.0 - q);
    Ok(InequalityCheck::new(lhs / total, rhs))
}
