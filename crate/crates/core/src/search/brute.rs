//! Exhaustive search over quantized step functions on tiny trees.

use rayon::prelude::*;

use super::dense::{leaf_moments, DenseTree};
use super::repair::repair;
use super::SearchReport;
use crate::dyadic::{StepFunction, TreeSpec};
use crate::error::{Error, Result};
use crate::kernel::BellmanParams;

pub const MAX_BRUTE_LEAVES: u64 = 16;
pub const MAX_BRUTE_GRID: u32 = 12;
/// Upper bound on `grid^(m^N)`, the number of enumerated candidates.
pub const MAX_BRUTE_CANDIDATES: u64 = 20_000_000;
/// Near-feasible candidates that are repaired exactly before the final pick.
const SHORTLIST: usize = 256;
const CHUNK: u64 = 1 << 16;

/// Enumerates all leaf vectors with entries in `{0, 1, 2, 4, …, 2^(grid − 2)}`, scales
/// each to `∫φ = f`, keeps those whose `q`-moment is within `h / (grid − 1)`
/// of `h`, and returns the best one after exact moment repair.
///
/// Candidates whose zero set or peak set makes exact repair impossible are
/// skipped. The shortlist of the best raw objectives is repaired onto the constraint
/// surface and re-scored, so the reported function is exactly feasible.
pub fn brute_force_oracle(
    params: &BellmanParams,
    tree: &TreeSpec,
    grid: u32,
) -> Result<SearchReport> {
    let n = tree.leaves();
    if n > MAX_BRUTE_LEAVES {
        return Err(Error::ComplexityGuard(format!(
            "{n} leaves exceeds {MAX_BRUTE_LEAVES}"
        )));
    }
    if !(2..=MAX_BRUTE_GRID).contains(&grid) {
        return Err(Error::ComplexityGuard(format!(
            "grid {grid} outside 2..={MAX_BRUTE_GRID}"
        )));
    }
    let total = (grid as u64)
        .checked_pow(n as u32)
        .filter(|&t| t <= MAX_BRUTE_CANDIDATES)
        .ok_or_else(|| {
            Error::ComplexityGuard(format!(
                "{grid}^{n} candidates exceeds {MAX_BRUTE_CANDIDATES}"
            ))
        })?;
    if params.is_holder_extremal() {
        let phi = StepFunction::constant(tree.m, params.f)?.refine_to(tree.depth)?;
        return SearchReport::from_function(params, tree, phi, 0, (total, 0, 0));
    }

    let (q, f, h, l) = (params.q, params.f, params.h, params.threshold);
    let tol = h / (grid - 1) as f64;
    let n = n as usize;
    // `a φ^b` keeps the zero set, so the support must be able to carry `h`.
    let repairable = |digits: &[f64]| {
        let support = digits.iter().filter(|&&d| d > 0.0).count() as f64 / n as f64;
        let top = digits.iter().cloned().fold(0.0, f64::max);
        let peak = digits.iter().filter(|&&d| d == top).count() as f64 / n as f64;
        let fq = f.powf(q);
        fq * support.powf(1.0 - q) > h && fq * peak.powf(1.0 - q) < h
    };
    let chunks = total.div_ceil(CHUNK);
    let mut shortlist: Vec<(f64, u64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut dense = DenseTree::new(tree.m, tree.depth);
            let mut digits = vec![0.0; n];
            let mut found = Vec::new();
            for code in c * CHUNK..((c + 1) * CHUNK).min(total) {
                decode(code, grid, &mut digits);
                let (g1, gq) = leaf_moments(&digits, q);
                if g1 == 0.0 {
                    continue;
                }
                if (f.powf(q) * gq / g1.powf(q) - h).abs() > tol || !repairable(&digits) {
                    continue;
                }
                let scale = f / g1;
                digits.iter_mut().for_each(|d| *d *= scale);
                found.push((dense.objective(&digits, l, q), code));
            }
            keep_best(&mut found);
            found
        })
        .reduce(Vec::new, |mut a, b| {
            a.extend(b);
            keep_best(&mut a);
            a
        });
    keep_best(&mut shortlist);

    let mut dense = DenseTree::new(tree.m, tree.depth);
    let mut digits = vec![0.0; n];
    let mut best: Option<(f64, u64, Vec<f64>)> = None;
    for &(_, code) in &shortlist {
        decode(code, grid, &mut digits);
        let Ok(values) = repair(&digits, f, h, q) else {
            continue;
        };
        let value = dense.objective(&values, l, q);
        let better = match &best {
            None => true,
            Some((b, c, _)) => value > *b || (value == *b && code < *c),
        };
        if better {
            best = Some((value, code, values));
        }
    }
    match best {
        Some((_, _, values)) => SearchReport::from_leaves(params, tree, values, 0, (total, 0, 0)),
        None => Err(Error::InfeasibleStart(format!(
            "no quantized function on a grid of {grid} reaches h = {h} at {n} cells"
        ))),
    }
}

/// Level `j` of the grid: `0` for `j = 0`, else `2^(j − 1)`. Geometric
/// levels reach the large cell ratios that extremal functions need.
fn decode(mut code: u64, grid: u32, digits: &mut [f64]) {
    for d in digits.iter_mut() {
        let j = (code % grid as u64) as i32;
        *d = if j == 0 { 0.0 } else { 2f64.powi(j - 1) };
        code /= grid as u64;
    }
}

/// Sorts by objective (descending, then code) and truncates to the shortlist.
fn keep_best(found: &mut Vec<(f64, u64)>) {
    found.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    found.truncate(SHORTLIST);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search::{local_search, SearchOptions};

    fn params() -> BellmanParams {
        BellmanParams::new(0.5, 1.0, 0.8, 1.2).unwrap()
    }

    #[test]
    fn guards() {
        let p = params();
        assert!(matches!(
            brute_force_oracle(&p, &TreeSpec::new(2, 5).unwrap(), 4),
            Err(Error::ComplexityGuard(_))
        ));
        assert!(matches!(
            brute_force_oracle(&p, &TreeSpec::new(2, 2).unwrap(), 13),
            Err(Error::ComplexityGuard(_))
        ));
        assert!(matches!(
            brute_force_oracle(&p, &TreeSpec::new(2, 4).unwrap(), 12),
            Err(Error::ComplexityGuard(_))
        ));
    }

    #[test]
    fn two_cells_match_local_search() {
        let p = params();
        let tree = TreeSpec::new(2, 1).unwrap();
        let brute = brute_force_oracle(&p, &tree, 12).unwrap();
        let opts = SearchOptions {
            restarts: 4,
            budget: 2000,
        };
        let local = local_search(&p, &tree, 1, &opts).unwrap();
        assert!((brute.objective - local.objective).abs() < 1e-6);
        assert!(brute.objective <= brute.analytic_bound);
    }

    #[test]
    fn feasible_and_below_bound() {
        let p = params();
        let tree = TreeSpec::new(2, 3).unwrap();
        let r = brute_force_oracle(&p, &tree, 6).unwrap();
        assert!(r.moment_error.0.abs() < 1e-9 && r.moment_error.1.abs() < 1e-9);
        assert!(r.objective <= r.analytic_bound + 1e-9);
        assert!(r.objective > p.threshold.powf(p.q));
    }

    #[test]
    fn holder_extremal_is_constant() {
        let p = BellmanParams::new(0.5, 2.0, 2f64.sqrt(), 3.0).unwrap();
        let r = brute_force_oracle(&p, &TreeSpec::new(2, 2).unwrap(), 5).unwrap();
        assert_eq!(r.best_phi.values(), &[2.0]);
        assert!((r.objective - 3f64.sqrt()).abs() < 1e-15);
    }
}
