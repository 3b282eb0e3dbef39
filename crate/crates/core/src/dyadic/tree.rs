use super::{Node, Scalar, StepFunction, TreeSpec};
use crate::error::{Error, Result};

/// One visited tree element.
#[derive(Debug, Clone)]
pub(crate) struct TreeEntry<T> {
    pub node: Node,
    pub lo: u64,
    pub hi: u64,
    pub average: T,
    pub parent: Option<usize>,
    pub first_child: Option<usize>,
    /// Largest average on the chain from the root down to this node.
    pub best: T,
    /// Shallowest entry on that chain attaining `best`.
    pub owner: usize,
    /// The node lies inside one constant piece; every descendant then has
    /// the same average, so the descent stops here.
    pub uniform: bool,
}

/// The part of the tree on which `φ` is not constant, plus one layer of
/// uniform nodes below it. Those uniform nodes partition `[0, 1)`.
#[derive(Debug, Clone)]
pub(crate) struct AdaptiveTree<T> {
    pub m: u32,
    /// Unit resolution of `lo`/`hi`: the depth of `φ`.
    pub unit_depth: u32,
    pub entries: Vec<TreeEntry<T>>,
}

impl<T: Scalar> AdaptiveTree<T> {
    pub fn build(phi: &StepFunction<T>, spec: &TreeSpec) -> Result<Self> {
        check_fits(phi, spec)?;
        let m = spec.m;
        let unit_depth = phi.depth();
        let root = make_entry(phi, Node::ROOT, unit_depth, m, None);
        let mut entries = vec![TreeEntry {
            best: root.average.clone(),
            owner: 0,
            ..root
        }];
        let mut cursor = 0;
        while cursor < entries.len() {
            if !entries[cursor].uniform {
                let first = entries.len();
                entries[cursor].first_child = Some(first);
                let node = entries[cursor].node;
                for child in node.children(m) {
                    let mut e = make_entry(phi, child, unit_depth, m, Some(cursor));
                    let parent = &entries[cursor];
                    // Strict comparison keeps the shallowest maximiser.
                    if e.average > parent.best {
                        e.best = e.average.clone();
                        e.owner = entries.len();
                    } else {
                        e.best = parent.best.clone();
                        e.owner = parent.owner;
                    }
                    entries.push(e);
                }
            }
            cursor += 1;
        }
        Ok(AdaptiveTree {
            m,
            unit_depth,
            entries,
        })
    }

    /// Uniform entries sorted by position; they partition `[0, 1)`.
    pub fn cells(&self) -> Vec<usize> {
        let mut cells: Vec<usize> = (0..self.entries.len())
            .filter(|&i| self.entries[i].uniform)
            .collect();
        cells.sort_by_key(|&i| self.entries[i].lo);
        cells
    }

    /// `M_T φ` at the resolution of `φ`.
    pub fn maximal(&self) -> Result<StepFunction<T>> {
        let cells = self.cells();
        let mut breaks = Vec::with_capacity(cells.len() + 1);
        breaks.push(0);
        let mut values = Vec::with_capacity(cells.len());
        for &i in &cells {
            breaks.push(self.entries[i].hi);
            values.push(self.entries[i].best.clone());
        }
        StepFunction::new(self.m, self.unit_depth, breaks, values)
    }
}

fn make_entry<T: Scalar>(
    phi: &StepFunction<T>,
    node: Node,
    unit_depth: u32,
    m: u32,
    parent: Option<usize>,
) -> TreeEntry<T> {
    let (lo, hi) = node.units(m, unit_depth);
    let p = phi.piece_at(lo);
    let uniform = phi.breaks()[p + 1] >= hi;
    let average = if uniform {
        phi.values()[p].clone()
    } else {
        phi.mass_units(lo, hi) / T::from_units(hi - lo)
    };
    TreeEntry {
        node,
        lo,
        hi,
        best: average.clone(),
        average,
        parent,
        first_child: None,
        owner: 0,
        uniform,
    }
}

pub(crate) fn check_fits<T: Scalar>(phi: &StepFunction<T>, spec: &TreeSpec) -> Result<()> {
    if phi.base() != spec.m {
        return Err(Error::InvalidStepFunction(format!(
            "function base {} differs from tree branching {}",
            phi.base(),
            spec.m
        )));
    }
    if phi.depth() > spec.depth {
        return Err(Error::InvalidStepFunction(format!(
            "function resolution {} is finer than tree depth {}",
            phi.depth(),
            spec.depth
        )));
    }
    Ok(())
}

/// `Av_I(φ)`.
pub fn average<T: Scalar>(phi: &StepFunction<T>, node: &Node) -> T {
    let m = phi.base();
    if node.depth >= phi.depth() {
        let cell = node.ancestor_at(phi.depth(), m);
        return phi.value_at(cell.index).clone();
    }
    let (lo, hi) = node.units(m, phi.depth());
    phi.mass_units(lo, hi) / T::from_units(hi - lo)
}

/// `M_T φ(x) = sup { Av_I(φ) : x ∈ I }`, returned at depth `N`.
///
/// Below the resolution of `φ` every average equals the local value, so the
/// supremum over the infinite tree is a maximum over finitely many nodes.
pub fn maximal_function<T: Scalar>(
    phi: &StepFunction<T>,
    spec: &TreeSpec,
) -> Result<StepFunction<T>> {
    AdaptiveTree::build(phi, spec)?
        .maximal()?
        .refine_to(spec.depth)
}

/// Whether the maximal value at every point is attained by a tree element
/// containing it.
///
/// Step functions representable on the tree always qualify; functions that
/// do not fit the tree are reported as not certifiable.
pub fn is_t_good<T: Scalar>(phi: &StepFunction<T>, spec: &TreeSpec) -> bool {
    match AdaptiveTree::build(phi, spec) {
        Ok(tree) => tree
            .cells()
            .into_iter()
            .all(|i| tree.entries[tree.entries[i].owner].average == tree.entries[i].best),
        Err(_) => false,
    }
}
