//! Randomized check suites over the tree inequalities, the linearization
//! and the `g_φ` construction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dyadic::sample::{random_rational_step, random_set, random_step};
use crate::dyadic::{
    direct_support, excess_set, is_t_good, kolmogorov_check, linearize, maximal_function,
    weak_type_check, StepFunction, TreeSpec,
};
use crate::error::Result;
use crate::transforms::{
    family_inside_gap, family_outside_gap, g_phi, maximal_family_outside_gap,
    random_disjoint_family, random_maximal_family,
};

/// Slack below which an inequality counts as violated.
pub const SLACK_TOL: f64 = 1e-12;
/// Relative tolerance on the moments of `g_φ`.
pub const MOMENT_TOL: f64 = 1e-9;
/// Violations described in full in a summary.
const MAX_LISTED: usize = 20;

/// `n` logarithmically spaced points in `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Inequalities,
    Linearization,
    Gphi,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Inequalities => "inequalities",
            Suite::Linearization => "linearization",
            Suite::Gphi => "gphi",
        }
    }
}

impl std::str::FromStr for Suite {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "inequalities" => Ok(Suite::Inequalities),
            "linearization" => Ok(Suite::Linearization),
            "gphi" => Ok(Suite::Gphi),
            _ => Err(format!(
                "unknown suite {s:?}; expected inequalities, linearization or gphi"
            )),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteSummary {
    pub suite: Suite,
    pub instances: usize,
    pub checks: u64,
    pub violations: u64,
    /// Smallest slack seen (inequality suites only).
    pub worst_slack: Option<f64>,
    pub seed: u64,
    pub tree: TreeSpec,
    /// The first violations, described.
    pub details: Vec<String>,
}

impl SuiteSummary {
    fn new(suite: Suite, instances: usize, seed: u64, tree: TreeSpec) -> Self {
        SuiteSummary {
            suite,
            instances,
            checks: 0,
            violations: 0,
            worst_slack: None,
            seed,
            tree,
            details: Vec::new(),
        }
    }

    fn record(&mut self, ok: bool, describe: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.violations += 1;
            if self.details.len() < MAX_LISTED {
                self.details.push(describe());
            }
        }
    }

    fn slack(&mut self, slack: f64, describe: impl FnOnce() -> String) {
        self.worst_slack = Some(self.worst_slack.map_or(slack, |w| w.min(slack)));
        self.record(slack >= -SLACK_TOL, || {
            format!("{} (slack {slack:e})", describe())
        });
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

fn instance_rng(seed: u64, i: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i as u64);
    rng
}

pub fn run_suite(
    suite: Suite,
    instances: usize,
    seed: u64,
    tree: &TreeSpec,
) -> Result<SuiteSummary> {
    match suite {
        Suite::Inequalities => inequality_suite(instances, seed, tree, 50),
        Suite::Linearization => linearization_suite(instances, seed, tree),
        Suite::Gphi => gphi_suite(instances, seed, tree),
    }
}

/// For each random function: the three family bounds over a `β` grid on
/// `[1e-3, 1e3]`, the weak type inequality at several heights and the
/// Kolmogorov inequality on a random set.
pub fn inequality_suite(
    instances: usize,
    seed: u64,
    tree: &TreeSpec,
    betas: usize,
) -> Result<SuiteSummary> {
    let mut s = SuiteSummary::new(Suite::Inequalities, instances, seed, *tree);
    let beta_grid = log_grid(1e-3, 1e3, betas);
    for i in 0..instances {
        let mut rng = instance_rng(seed, i);
        let phi = random_step(&mut rng, tree.m, tree.depth);
        s.record(is_t_good(&phi, tree), || {
            format!("instance {i}: not T-good")
        });
        let q: f64 = rng.gen_range(0.05..0.95);
        let lin = linearize(&phi, tree)?;
        let stops: [f64; 2] = [rng.gen_range(0.1..0.9), rng.gen_range(0.1..0.9)];
        let maximal = random_maximal_family(&mut rng, &lin, stops[0]);
        let disjoint = random_disjoint_family(&mut rng, &lin, stops[1]);
        for &beta in &beta_grid {
            let g = maximal_family_outside_gap(&phi, &maximal, beta, q, tree)?;
            s.slack(g.slack, || {
                format!("instance {i}: maximal-family bound at beta {beta}")
            });
            let g = family_inside_gap(&phi, &disjoint, beta, q, tree)?;
            s.slack(g.slack, || {
                format!("instance {i}: inside-union bound at beta {beta}")
            });
            let g = family_outside_gap(&phi, &disjoint, beta, q, tree)?;
            s.slack(g.slack, || {
                format!("instance {i}: outside-union bound at beta {beta}")
            });
        }
        let f = phi.integral();
        for lambda in log_grid(0.1 * f, 100.0 * f, 10) {
            let c = weak_type_check(&phi, tree, lambda)?;
            s.slack(c.slack, || format!("instance {i}: weak type at {lambda}"));
        }
        let set = random_set(&mut rng, tree.m, tree.depth);
        let c = kolmogorov_check(&phi, tree, &set, q)?;
        s.slack(c.slack, || format!("instance {i}: Kolmogorov at q = {q}"));
    }
    Ok(s)
}

/// Exact rational checks: the weight identity, `Σ y_I χ_A = M_T φ`, and
/// agreement with the pointwise construction of `S_φ` and `μ(A(φ, I))`.
pub fn linearization_suite(instances: usize, seed: u64, tree: &TreeSpec) -> Result<SuiteSummary> {
    let mut s = SuiteSummary::new(Suite::Linearization, instances, seed, *tree);
    for i in 0..instances {
        let mut rng = instance_rng(seed, i);
        let phi = random_rational_step(&mut rng, tree.m, tree.depth);
        let lin = linearize(&phi, tree)?;
        let bad = lin.weight_identity_violations();
        s.record(bad.is_empty(), || {
            format!("instance {i}: weight identity fails at {bad:?}")
        });
        let rebuilt = lin.reconstruct()?;
        s.record(rebuilt == maximal_function(&phi, tree)?, || {
            format!("instance {i}: reconstruction differs from the maximal function")
        });
        let direct = direct_support(&phi, tree)?;
        let same = direct.len() == lin.elements.len()
            && lin
                .elements
                .iter()
                .all(|e| direct.get(&e.node) == Some(&e.alpha_units));
        s.record(same, || {
            format!("instance {i}: criterion and pointwise construction disagree")
        });
    }
    Ok(s)
}

/// `g_φ` keeps both moments, does not lower `M_T φ`, and does not shrink the
/// zero set inside `E_φ`.
pub fn gphi_suite(instances: usize, seed: u64, tree: &TreeSpec) -> Result<SuiteSummary> {
    let mut s = SuiteSummary::new(Suite::Gphi, instances, seed, *tree);
    for i in 0..instances {
        let mut rng = instance_rng(seed, i);
        let phi = random_step(&mut rng, tree.m, tree.depth);
        let q: f64 = rng.gen_range(0.05..0.95);
        let threshold = phi.integral() * rng.gen_range(1.0..4.0);
        let (g, record) = g_phi(&phi, threshold, q, tree, None)?;

        let (f0, h0) = phi.moments(q);
        let (f1, h1) = g.moments(q);
        s.record((f1 - f0).abs() <= MOMENT_TOL * f0, || {
            format!("instance {i}: mass {f0} -> {f1}")
        });
        s.record((h1 - h0).abs() <= MOMENT_TOL * h0, || {
            format!("instance {i}: q-moment {h0} -> {h1}")
        });

        let fine = TreeSpec::new(tree.m, record.refine)?;
        let m_phi = maximal_function(&phi, tree)?;
        let m_g = maximal_function(&g, &fine)?;
        let dominated = m_g
            .zip(&m_phi)?
            .iter()
            .all(|(_, _, a, b)| **a >= **b * (1.0 - 1e-12));
        s.record(dominated, || {
            format!("instance {i}: M g below M phi somewhere")
        });

        let excess = excess_set(&phi, threshold, q, tree)?;
        let zeros_phi = zero_measure(&phi, &excess.elements, tree);
        let zeros_g = zero_measure(&g, &excess.elements, tree);
        s.record(zeros_g >= zeros_phi, || {
            format!("instance {i}: zero set inside E shrank from {zeros_phi} to {zeros_g}")
        });
    }
    Ok(s)
}

/// `μ({ψ = 0} ∩ ∪ nodes)`.
fn zero_measure(psi: &StepFunction<f64>, nodes: &[crate::dyadic::Node], tree: &TreeSpec) -> f64 {
    let unit_depth = psi.depth().max(tree.depth);
    let psi = psi
        .refine_to(unit_depth)
        .expect("refining to a deeper grid");
    let total = psi.total_units() as f64;
    let mut units = 0u64;
    for node in nodes {
        let (lo, hi) = node.units(tree.m, unit_depth);
        let b = psi.breaks();
        for (p, v) in psi.values().iter().enumerate() {
            if *v == 0.0 {
                let (a, c) = (b[p].max(lo), b[p + 1].min(hi));
                if a < c {
                    units += c - a;
                }
            }
        }
    }
    units as f64 / total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_endpoints() {
        let g = log_grid(1e-3, 1e3, 50);
        assert_eq!(g.len(), 50);
        assert!((g[0] - 1e-3).abs() < 1e-18 && (g[49] - 1e3).abs() < 1e-9);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn small_suites_pass() {
        let t = TreeSpec::new(2, 4).unwrap();
        for suite in [Suite::Inequalities, Suite::Linearization, Suite::Gphi] {
            let s = run_suite(suite, 10, 1, &t).unwrap();
            assert!(s.passed(), "{:?}", s.details);
            assert!(s.checks > 0);
        }
    }

    #[test]
    fn suite_names_parse() {
        for suite in [Suite::Inequalities, Suite::Linearization, Suite::Gphi] {
            assert_eq!(suite.name().parse::<Suite>().unwrap(), suite);
        }
        assert!("bogus".parse::<Suite>().is_err());
    }
}
