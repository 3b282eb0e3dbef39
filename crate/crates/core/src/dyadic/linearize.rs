use std::collections::BTreeMap;

use super::tree::AdaptiveTree;
use super::{average, pow, Node, Scalar, StepFunction, TreeSpec};
use crate::error::{Error, Result};

/// One element `I ∈ S_φ` with its share of the maximal function.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearElement<T> {
    pub node: Node,
    /// `y_I = Av_I(φ)`.
    pub average: T,
    /// `μ(A(φ, I))` in units of `m^{-unit_depth}`.
    pub alpha_units: u64,
    /// Smallest element of `S_φ` strictly containing `I`; `None` for the root.
    pub star: Option<Node>,
    /// `A(φ, I)` as sorted, disjoint unit ranges.
    pub a_set: Vec<(u64, u64)>,
}

/// `S_φ` together with the sets `A(φ, I)` on which `M_T φ = Av_I(φ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linearization<T> {
    pub m: u32,
    pub unit_depth: u32,
    /// Sorted by node; the root comes first.
    pub elements: Vec<LinearElement<T>>,
}

impl<T: Scalar> Linearization<T> {
    pub fn s_phi(&self) -> Vec<Node> {
        self.elements.iter().map(|e| e.node).collect()
    }

    pub fn get(&self, node: &Node) -> Option<&LinearElement<T>> {
        self.elements
            .binary_search_by(|e| e.node.cmp(node))
            .ok()
            .map(|i| &self.elements[i])
    }

    pub fn contains(&self, node: &Node) -> bool {
        self.get(node).is_some()
    }

    pub fn total_units(&self) -> u64 {
        pow(self.m, self.unit_depth)
    }

    pub fn node_units(&self, node: &Node) -> u64 {
        let (lo, hi) = node.units(self.m, self.unit_depth);
        hi - lo
    }

    pub fn alpha(&self, element: &LinearElement<T>) -> f64 {
        element.alpha_units as f64 / self.total_units() as f64
    }

    /// `Σ_{I ∈ S_φ} y_I χ_{A(φ,I)}` as a step function.
    pub fn reconstruct(&self) -> Result<StepFunction<T>> {
        let mut ranges: Vec<(u64, u64, &T)> = self
            .elements
            .iter()
            .flat_map(|e| e.a_set.iter().map(move |&(lo, hi)| (lo, hi, &e.average)))
            .collect();
        ranges.sort_by_key(|r| r.0);
        let mut breaks = vec![0];
        let mut values = Vec::with_capacity(ranges.len());
        for (lo, hi, v) in ranges {
            if lo != *breaks.last().unwrap() {
                return Err(Error::InvalidTree(format!(
                    "sets A(phi, I) leave a gap or overlap at unit {lo}"
                )));
            }
            breaks.push(hi);
            values.push(v.clone());
        }
        StepFunction::new(self.m, self.unit_depth, breaks, values)
    }

    /// Checks `μ(A(φ,I)) = μ(I) − Σ_{J⋆ = I} μ(J)` in integer units and
    /// returns the elements where it fails.
    pub fn weight_identity_violations(&self) -> Vec<Node> {
        let mut children_units: BTreeMap<Node, u64> = BTreeMap::new();
        for e in &self.elements {
            if let Some(star) = e.star {
                *children_units.entry(star).or_default() += self.node_units(&e.node);
            }
        }
        self.elements
            .iter()
            .filter(|e| {
                let inner = children_units.get(&e.node).copied().unwrap_or(0);
                e.alpha_units + inner != self.node_units(&e.node)
            })
            .map(|e| e.node)
            .collect()
    }

    /// Elements `I ∈ S_φ` all of whose children also lie in `S_φ`. Every
    /// element should have at least one child outside.
    pub fn elements_with_all_children_inside(&self) -> Vec<Node> {
        self.elements
            .iter()
            .filter(|e| e.node.children(self.m).all(|c| self.contains(&c)))
            .map(|e| e.node)
            .collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let total = self.total_units() as f64;
        let elements: Vec<serde_json::Value> = self
            .elements
            .iter()
            .map(|e| {
                serde_json::json!({
                    "node": e.node,
                    "y": e.average.to_json(),
                    "alpha": e.alpha_units as f64 / total,
                    "star": e.star,
                    "a_set": e.a_set.iter().map(|&(lo, hi)| [lo as f64 / total, hi as f64 / total]).collect::<Vec<_>>(),
                })
            })
            .collect();
        serde_json::json!({ "m": self.m, "elements": elements })
    }
}

/// Builds `S_φ` from the ancestor criterion (`I ≠ X` belongs iff
/// `Av_I(φ)` strictly exceeds every proper ancestor's average) and the
/// sets `A(φ, I)` from the shallowest-maximiser rule at each cell.
pub fn linearize<T: Scalar>(phi: &StepFunction<T>, spec: &TreeSpec) -> Result<Linearization<T>> {
    let tree = AdaptiveTree::build(phi, spec)?;
    let entries = &tree.entries;

    let mut in_s = vec![false; entries.len()];
    in_s[0] = true;
    for (i, e) in entries.iter().enumerate().skip(1) {
        let parent = &entries[e.parent.expect("non-root has a parent")];
        in_s[i] = e.average > parent.best;
    }

    let mut a_sets: BTreeMap<usize, Vec<(u64, u64)>> = BTreeMap::new();
    let mut bad_units = 0u64;
    for c in tree.cells() {
        let cell = &entries[c];
        let owner = cell.owner;
        if entries[owner].average != cell.best || !in_s[owner] {
            bad_units += cell.hi - cell.lo;
            continue;
        }
        let set = a_sets.entry(owner).or_default();
        match set.last_mut() {
            Some(last) if last.1 == cell.lo => last.1 = cell.hi,
            _ => set.push((cell.lo, cell.hi)),
        }
    }
    if bad_units > 0 {
        return Err(Error::NotTGood(bad_units as f64 / tree_units(&tree) as f64));
    }

    let mut elements = Vec::new();
    for (i, e) in entries.iter().enumerate() {
        if !in_s[i] {
            continue;
        }
        let mut star = None;
        let mut up = e.parent;
        while let Some(p) = up {
            if in_s[p] {
                star = Some(entries[p].node);
                break;
            }
            up = entries[p].parent;
        }
        let a_set = a_sets.remove(&i).unwrap_or_default();
        elements.push(LinearElement {
            node: e.node,
            average: e.average.clone(),
            alpha_units: a_set.iter().map(|(lo, hi)| hi - lo).sum(),
            star,
            a_set,
        });
    }
    elements.sort_by_key(|e| e.node);
    Ok(Linearization {
        m: tree.m,
        unit_depth: tree.unit_depth,
        elements,
    })
}

fn tree_units<T>(tree: &AdaptiveTree<T>) -> u64 {
    pow(tree.m, tree.unit_depth)
}

/// Largest cell count [`direct_support`] will enumerate.
const DIRECT_LEAF_LIMIT: u64 = 1 << 20;

/// `S_φ` and `μ(A(φ, I))` (in units) from the pointwise definition: at each
/// cell, take the shallowest ancestor attaining the largest average.
///
/// Evaluates every average independently; meant as a cross-check.
pub fn direct_support<T: Scalar>(
    phi: &StepFunction<T>,
    spec: &TreeSpec,
) -> Result<BTreeMap<Node, u64>> {
    super::tree::check_fits(phi, spec)?;
    let m = spec.m;
    let depth = phi.depth();
    let cells = pow(m, depth);
    if cells > DIRECT_LEAF_LIMIT {
        return Err(Error::ComplexityGuard(format!(
            "direct support enumerates {cells} cells (limit {DIRECT_LEAF_LIMIT})"
        )));
    }
    let mut out = BTreeMap::new();
    out.insert(Node::ROOT, 0);
    for x in 0..cells {
        let leaf = Node::new(depth, x);
        let mut best: Option<(T, Node)> = None;
        for d in 0..=depth {
            let node = leaf.ancestor_at(d, m);
            let avg = average(phi, &node);
            if best.as_ref().is_none_or(|(b, _)| avg > *b) {
                best = Some((avg, node));
            }
        }
        let owner = best.expect("depth >= 0 gives one candidate").1;
        *out.entry(owner).or_default() += 1;
    }
    Ok(out)
}
