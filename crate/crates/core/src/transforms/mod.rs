//! Functionals of a step function measured against the Bellman value: the
//! objective `∫ max(M_T φ, L)^q`, the eigenfunction residual, the two-valued
//! transform `g_φ` and the tree inequalities that bound the objective.

mod gphi;
mod inequalities;

use serde::Serialize;

use crate::dyadic::{excess_set, AdaptiveTree, ExcessSet, StepFunction, TreeSpec};
use crate::error::Result;
use crate::kernel::{check_exponent, BellmanParams};

pub use gphi::{default_refine, g_phi, GPhiEntry, GPhiRecord};
pub use inequalities::{
    family_inside_gap, family_outside_gap, maximal_family_outside_gap, optimal_beta,
    random_disjoint_family, random_maximal_family, write_gap_csv, FamilyTerms, GapRow,
    InequalityGap,
};

/// `∫ [max(M_T φ, L)]^q`, exact at the resolution of `φ`.
pub fn objective(phi: &StepFunction<f64>, threshold: f64, q: f64, spec: &TreeSpec) -> Result<f64> {
    check_exponent(q)?;
    let tree = AdaptiveTree::build(phi, spec)?;
    let total = phi.total_units() as f64;
    let lq = threshold.powf(q);
    let mut acc = 0.0;
    for i in tree.cells() {
        let e = &tree.entries[i];
        let v = if e.best > threshold {
            e.best.powf(q)
        } else {
            lq
        };
        acc += v * (e.hi - e.lo) as f64;
    }
    Ok(acc / total)
}

/// `∫ |max(M_T φ, L) - c^{1/q} φ|^q`, split over `E = {M_T φ >= L}` and
/// its complement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EigenResidual {
    pub total: f64,
    /// Contribution of `E`.
    pub excess: f64,
    /// Contribution of `X \ E`.
    pub complement: f64,
}

pub fn eigen_residual(
    phi: &StepFunction<f64>,
    threshold: f64,
    params: &BellmanParams,
    spec: &TreeSpec,
) -> Result<EigenResidual> {
    let q = params.q;
    let scale = params.eigenvalue();
    let tree = AdaptiveTree::build(phi, spec)?;
    let total = phi.total_units() as f64;
    let mut excess = 0.0;
    let mut complement = 0.0;
    for i in tree.cells() {
        let e = &tree.entries[i];
        let len = (e.hi - e.lo) as f64;
        let diff = (e.best.max(threshold) - scale * e.average).abs();
        let term = if diff > 0.0 { diff.powf(q) * len } else { 0.0 };
        if e.best >= threshold {
            excess += term;
        } else {
            complement += term;
        }
    }
    let excess = excess / total;
    let complement = complement / total;
    Ok(EigenResidual {
        total: excess + complement,
        excess,
        complement,
    })
}

/// `τ = L / c^{1/q}`, the limiting value of extremal functions off the
/// excess set.
pub fn tau_target(params: &BellmanParams) -> f64 {
    params.tau()
}

/// How close a given function is to extremal for `params`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub objective: f64,
    pub analytic_bound: f64,
    pub gap: f64,
    pub residual: EigenResidual,
    pub excess: ExcessSet,
    /// `(∫φ, ∫φ^q)`.
    pub moments: (f64, f64),
}

pub fn evaluate(
    phi: &StepFunction<f64>,
    params: &BellmanParams,
    spec: &TreeSpec,
) -> Result<Evaluation> {
    let objective = objective(phi, params.threshold, params.q, spec)?;
    let bound = params.bellman_value();
    Ok(Evaluation {
        objective,
        analytic_bound: bound,
        gap: bound - objective,
        residual: eigen_residual(phi, params.threshold, params, spec)?,
        excess: excess_set(phi, params.threshold, params.q, spec)?,
        moments: phi.moments(params.q),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::k0;

    fn spec(n: u32) -> TreeSpec {
        TreeSpec::new(2, n).unwrap()
    }

    #[test]
    fn objective_of_constant() {
        let phi = StepFunction::constant(2, 1.0).unwrap();
        assert!((objective(&phi, 1.3, 0.5, &spec(3)).unwrap() - 1.3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn objective_of_half_step() {
        let phi = StepFunction::new(2, 1, vec![0, 1, 2], vec![2.0, 0.0]).unwrap();
        let got = objective(&phi, 1.2, 0.5, &spec(4)).unwrap();
        let expect = 0.5 * 2f64.sqrt() + 0.5 * 1.2f64.sqrt();
        assert!((got - expect).abs() < 1e-15);
    }

    #[test]
    fn objective_decomposes_over_excess_set() {
        let phi =
            StepFunction::from_leaves(2, 3, vec![0.0, 3.0, 1.0, 0.2, 2.5, 0.0, 0.7, 0.6]).unwrap();
        let s = spec(3);
        let l = 1.2;
        let e = excess_set(&phi, l, 0.5, &s).unwrap();
        let mt = crate::dyadic::maximal_function(&phi, &s).unwrap();
        let mut inside = 0.0;
        for node in &e.elements {
            for x in node.units(2, 3).0..node.units(2, 3).1 {
                inside += mt.value_at(x).sqrt() / 8.0;
            }
        }
        let expect = inside + l.sqrt() * (1.0 - e.k);
        assert!((objective(&phi, l, 0.5, &s).unwrap() - expect).abs() < 1e-14);
    }

    #[test]
    fn residual_of_constants() {
        let tight = BellmanParams::new(0.5, 1.0, 1.0, 1.0).unwrap();
        let phi = StepFunction::constant(2, 1.0).unwrap();
        assert_eq!(
            eigen_residual(&phi, 1.0, &tight, &spec(3)).unwrap().total,
            0.0
        );

        let p = BellmanParams::new(0.5, 1.0, 1.0, 1.5).unwrap();
        let r = eigen_residual(&phi, 1.5, &p, &spec(3)).unwrap();
        let expect = (1.5 - p.eigenvalue()).abs().sqrt();
        assert!((r.total - expect).abs() < 1e-15);
        assert_eq!(r.excess, 0.0);
    }

    #[test]
    fn tau_values() {
        let tight = BellmanParams::new(0.3, 2.0, 2f64.powf(0.3), 2.0).unwrap();
        assert!((tau_target(&tight) - 2.0).abs() < 1e-14);

        let p = BellmanParams::new(0.5, 1.0, 0.8, 1.2).unwrap();
        let k = k0(p.lambda, p.mu, p.q).unwrap();
        let lhs = (p.f - k * p.threshold) / (1.0 - k);
        assert!((lhs - tau_target(&p)).abs() < 1e-10);
        // ω_{1/2}(z) = z + √(z²-1) with z = (√1.2/2 + 1/(2√1.2)) / 0.8
        let z: f64 = (0.5 * 1.2f64.sqrt() + 0.5 / 1.2f64.sqrt()) / 0.8;
        let c = z + (z * z - 1.0).sqrt();
        assert!((tau_target(&p) - 1.2 / (c * c)).abs() < 1e-12);
        assert!((tau_target(&p) - 0.295_894_105_943_234_1).abs() < 1e-12);
    }
}
