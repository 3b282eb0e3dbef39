use std::io::Write;

use rand::Rng;
use serde::Serialize;

use crate::dyadic::{
    linearize, maximal_function, power_mass_units, Linearization, Node, StepFunction, TreeSpec,
};
use crate::error::{Error, Result};
use crate::kernel::{check_exponent, omega_q};
use crate::report::{format_float, write_csv};

/// Both sides of one tree inequality at a given `β`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InequalityGap {
    pub lhs: f64,
    pub rhs: f64,
    pub beta: f64,
    pub slack: f64,
}

impl InequalityGap {
    fn new(lhs: f64, rhs: f64, beta: f64) -> Self {
        InequalityGap {
            lhs,
            rhs,
            beta,
            slack: rhs - lhs,
        }
    }
}

/// The `β`-independent integrals entering the three inequalities for one
/// function and one family `{I_j}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FamilyTerms {
    pub q: f64,
    /// `(∫φ)^q`.
    pub mass_q: f64,
    /// `Σ μ(I_j) y_{I_j}^q`.
    pub weighted_averages: f64,
    /// `∫_{∪I_j} (M_T φ)^q`.
    pub inside_maximal: f64,
    /// `∫_{X \ ∪I_j} (M_T φ)^q`.
    pub outside_maximal: f64,
    /// `∫_{∪I_j} φ^q`.
    pub inside_power: f64,
    /// `∫_{X \ ∪I_j} φ^q`.
    pub outside_power: f64,
}

impl FamilyTerms {
    /// Checks that the family consists of pairwise disjoint elements of
    /// `S_φ` and evaluates the integrals.
    pub fn new(
        phi: &StepFunction<f64>,
        lin: &Linearization<f64>,
        mt: &StepFunction<f64>,
        family: &[Node],
        q: f64,
    ) -> Result<Self> {
        check_exponent(q)?;
        let m = lin.m;
        for (i, a) in family.iter().enumerate() {
            if !lin.contains(a) {
                return Err(Error::FamilyNotInSPhi(*a));
            }
            for b in &family[i + 1..] {
                if a.overlaps(b, m) {
                    return Err(Error::FamilyNotDisjoint(*a, *b));
                }
            }
        }
        let total_phi = phi.total_units() as f64;
        let total_mt = mt.total_units() as f64;
        let mt_scale = mt.depth();

        let mut weighted_averages = 0.0;
        let mut inside_maximal = 0.0;
        let mut inside_power = 0.0;
        for node in family {
            let y = lin.get(node).expect("checked above").average;
            weighted_averages += node.measure(m) * y.powf(q);
            let (lo, hi) = node.units(m, mt_scale);
            inside_maximal += power_mass_units(mt, lo, hi, q) / total_mt;
            let (lo, hi) = node.units(m, phi.depth());
            inside_power += power_mass_units(phi, lo, hi, q) / total_phi;
        }
        let all_maximal = power_mass_units(mt, 0, mt.total_units(), q) / total_mt;
        let all_power = power_mass_units(phi, 0, phi.total_units(), q) / total_phi;
        Ok(FamilyTerms {
            q,
            mass_q: phi.integral().powf(q),
            weighted_averages,
            inside_maximal,
            outside_maximal: (all_maximal - inside_maximal).max(0.0),
            inside_power,
            outside_power: (all_power - inside_power).max(0.0),
        })
    }

    fn bound(&self, beta: f64, first: f64, second: f64) -> f64 {
        let q = self.q;
        ((beta + 1.0) * first - (beta + 1.0).powf(q) * second) / ((1.0 - q) * beta)
    }

    /// `∫_{X∖∪I_j}(M_T φ)^q <= [(β+1)(f^q − Σμ(I_j)y^q) − (β+1)^q ∫_{X∖∪I_j} φ^q] / ((1−q)β)`.
    pub fn outside_gap(&self, beta: f64) -> InequalityGap {
        let rhs = self.bound(
            beta,
            self.mass_q - self.weighted_averages,
            self.outside_power,
        );
        InequalityGap::new(self.outside_maximal, rhs, beta)
    }

    /// `∫_{∪I_j}(M_T φ)^q <= [(β+1)Σμ(I_j)y^q − (β+1)^q ∫_{∪I_j} φ^q] / ((1−q)β)`.
    pub fn inside_gap(&self, beta: f64) -> InequalityGap {
        let rhs = self.bound(beta, self.weighted_averages, self.inside_power);
        InequalityGap::new(self.inside_maximal, rhs, beta)
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(Error::domain("beta", beta, "beta > 0"))
    }
}

fn terms(
    phi: &StepFunction<f64>,
    family: &[Node],
    q: f64,
    spec: &TreeSpec,
) -> Result<(FamilyTerms, Linearization<f64>)> {
    let lin = linearize(phi, spec)?;
    let mt = maximal_function(phi, spec)?;
    let t = FamilyTerms::new(phi, &lin, &mt, family, q)?;
    Ok((t, lin))
}

/// Returns the first element of `S_φ` that misses the union of `family`.
pub(crate) fn first_unmet(lin: &Linearization<f64>, family: &[Node]) -> Option<Node> {
    lin.elements
        .iter()
        .map(|e| e.node)
        .find(|n| !family.iter().any(|j| n.overlaps(j, lin.m)))
}

/// Bound off the union of a maximal disjoint family in `S_φ`.
pub fn maximal_family_outside_gap(
    phi: &StepFunction<f64>,
    family: &[Node],
    beta: f64,
    q: f64,
    spec: &TreeSpec,
) -> Result<InequalityGap> {
    check_beta(beta)?;
    let (t, lin) = terms(phi, family, q, spec)?;
    if let Some(n) = first_unmet(&lin, family) {
        return Err(Error::FamilyNotMaximal(n));
    }
    Ok(t.outside_gap(beta))
}

/// Bound on the union of a disjoint family in `S_φ`.
pub fn family_inside_gap(
    phi: &StepFunction<f64>,
    family: &[Node],
    beta: f64,
    q: f64,
    spec: &TreeSpec,
) -> Result<InequalityGap> {
    check_beta(beta)?;
    Ok(terms(phi, family, q, spec)?.0.inside_gap(beta))
}

/// The bound of [`maximal_family_outside_gap`] without the maximality requirement.
pub fn family_outside_gap(
    phi: &StepFunction<f64>,
    family: &[Node],
    beta: f64,
    q: f64,
    spec: &TreeSpec,
) -> Result<InequalityGap> {
    check_beta(beta)?;
    Ok(terms(phi, family, q, spec)?.0.outside_gap(beta))
}

/// Minimiser over `β` of `[(β+1)P − (β+1)^q Q] / ((1−q)β)` for `P >= Q > 0`:
/// `β = ω_q(P/Q)^{1/q} − 1`, with minimum `Q ω_q(P/Q)`.
pub fn optimal_beta(p: f64, q_moment: f64, q: f64) -> Result<f64> {
    Ok(omega_q((p / q_moment).max(1.0), q)?.powf(1.0 / q) - 1.0)
}

/// A disjoint family meeting every element of `S_φ`: walk down from the
/// root and stop at each element with probability `stop`, always stopping
/// at elements with nothing below them.
pub fn random_maximal_family<R: Rng + ?Sized>(
    rng: &mut R,
    lin: &Linearization<f64>,
    stop: f64,
) -> Vec<Node> {
    let mut below: std::collections::BTreeMap<Node, Vec<Node>> = Default::default();
    for e in &lin.elements {
        if let Some(s) = e.star {
            below.entry(s).or_default().push(e.node);
        }
    }
    let mut out = Vec::new();
    let mut stack = vec![Node::ROOT];
    while let Some(n) = stack.pop() {
        match below.get(&n) {
            Some(kids) if !rng.gen_bool(stop.clamp(0.0, 1.0)) => stack.extend(kids.iter().copied()),
            _ => out.push(n),
        }
    }
    out.sort();
    out
}

/// A disjoint family in `S_φ` that need not be maximal.
pub fn random_disjoint_family<R: Rng + ?Sized>(
    rng: &mut R,
    lin: &Linearization<f64>,
    stop: f64,
) -> Vec<Node> {
    let full = random_maximal_family(rng, lin, stop);
    let keep: f64 = rng.gen_range(0.0..1.0);
    full.into_iter().filter(|_| rng.gen_bool(keep)).collect()
}

/// One row of an inequality fuzzing export.
#[derive(Debug, Clone, Serialize)]
pub struct GapRow {
    pub phi_id: usize,
    pub family_id: usize,
    pub beta: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

pub fn write_gap_csv<W: Write>(out: W, rows: &[GapRow]) -> Result<()> {
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.phi_id.to_string(),
                r.family_id.to_string(),
                format_float(r.beta),
                format_float(r.lhs),
                format_float(r.rhs),
                format_float(r.slack),
            ]
        })
        .collect();
    write_csv(
        out,
        &["phi_id", "family_id", "beta", "lhs", "rhs", "slack"],
        &cells,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half_step() -> StepFunction {
        StepFunction::new(2, 1, vec![0, 1, 2], vec![2.0, 0.0]).unwrap()
    }

    fn spec(n: u32) -> TreeSpec {
        TreeSpec::new(2, n).unwrap()
    }

    #[test]
    fn half_step_gaps() {
        let phi = half_step();
        let fam = [Node::new(1, 0)];
        let g41 = maximal_family_outside_gap(&phi, &fam, 1.0, 0.5, &spec(3)).unwrap();
        // Off [0,1/2): M = 1, φ = 0, so lhs = 1/2 and rhs = 4(1 − √2/2).
        assert!((g41.lhs - 0.5).abs() < 1e-15);
        assert!((g41.rhs - 4.0 * (1.0 - 0.5 * 2f64.sqrt())).abs() < 1e-14);
        assert!(g41.slack >= 0.0);
        let g42 = family_inside_gap(&phi, &fam, 0.5, 0.5, &spec(3)).unwrap();
        assert!(g42.slack >= 0.0);
    }

    #[test]
    fn root_family_is_degenerate() {
        let phi = StepFunction::constant(2, 1.0).unwrap();
        let g = maximal_family_outside_gap(&phi, &[Node::ROOT], 0.7, 0.5, &spec(2)).unwrap();
        assert_eq!(g.lhs, 0.0);
        assert!(g.rhs.abs() < 1e-15);
    }

    #[test]
    fn family_validation() {
        let phi = half_step();
        let s = spec(3);
        assert!(matches!(
            family_inside_gap(&phi, &[Node::new(1, 1)], 1.0, 0.5, &s),
            Err(Error::FamilyNotInSPhi(_))
        ));
        assert!(matches!(
            family_inside_gap(&phi, &[Node::ROOT, Node::new(1, 0)], 1.0, 0.5, &s),
            Err(Error::FamilyNotInSPhi(_)) | Err(Error::FamilyNotDisjoint(..))
        ));
        assert!(matches!(
            maximal_family_outside_gap(&phi, &[], 1.0, 0.5, &s),
            Err(Error::FamilyNotMaximal(_))
        ));
        assert!(family_outside_gap(&phi, &[], 1.0, 0.5, &s).is_ok());
        assert!(family_inside_gap(&phi, &[Node::new(1, 0)], 0.0, 0.5, &s).is_err());
    }

    #[test]
    fn global_bound_is_minimised_at_optimal_beta() {
        let phi =
            StepFunction::from_leaves(2, 3, vec![0.2, 3.0, 1.0, 0.0, 0.5, 0.5, 2.0, 0.1]).unwrap();
        let q = 0.5;
        let s = spec(3);
        let (f, h) = phi.moments(q);
        let beta = optimal_beta(f.powf(q), h, q).unwrap();
        let best = family_inside_gap(&phi, &[Node::ROOT], beta, q, &s).unwrap();
        assert!((best.rhs - h * omega_q(f.powf(q) / h, q).unwrap()).abs() < 1e-12);
        for i in 0..200 {
            let b = 10f64.powf(-3.0 + 6.0 * i as f64 / 199.0);
            let g = family_inside_gap(&phi, &[Node::ROOT], b, q, &s).unwrap();
            assert!(g.rhs >= best.rhs - 1e-12);
        }
    }

    #[test]
    fn csv_has_fixed_columns() {
        let mut buf = Vec::new();
        let rows = [GapRow {
            phi_id: 0,
            family_id: 1,
            beta: 0.5,
            lhs: 1.0,
            rhs: 2.0,
            slack: 1.0,
        }];
        write_gap_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("phi_id,family_id,beta,lhs,rhs,slack\n"));
    }
}
