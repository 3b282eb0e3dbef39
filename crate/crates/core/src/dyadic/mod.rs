//! The m-adic interval tree on `[0, 1)`, step functions on it, and exact
//! evaluation of the tree maximal operator.
//!
//! A node at depth `d` with index `i` is the interval `[i/m^d, (i+1)/m^d)`.
//! Step functions carry breakpoints as integer numerators over `m^depth`, so
//! every average over a tree node is a finite sum and is exact in rational
//! mode.

mod excess;
mod linearize;
pub mod sample;
mod step;
mod tree;

use std::fmt;

use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use excess::{excess_set, kolmogorov_check, weak_type_check, ExcessSet, InequalityCheck};
pub use linearize::{direct_support, linearize, LinearElement, Linearization};
pub use step::{Endpoint, Piece, StepFunction};
pub use tree::{average, is_t_good, maximal_function};

pub(crate) use excess::power_mass_units;
pub(crate) use tree::AdaptiveTree;

/// Arithmetic used for function values: `f64` or exact `BigRational`.
pub trait Scalar:
    Num + Clone + PartialOrd + FromPrimitive + ToPrimitive + fmt::Debug + Send + Sync
{
    fn from_units(n: u64) -> Self {
        Self::from_u64(n).expect("u64 is representable")
    }

    fn as_f64(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn to_json(&self) -> serde_json::Value;

    fn from_json(value: &serde_json::Value) -> Option<Self>;
}

impl Scalar for f64 {
    fn to_json(&self) -> serde_json::Value {
        serde_json::json!(*self)
    }

    /// Accepts numbers and the `"n/d"` strings of exact mode.
    fn from_json(value: &serde_json::Value) -> Option<Self> {
        match value {
            serde_json::Value::String(s) => BigRational::from_json(value)
                .and_then(|r| r.to_f64())
                .or_else(|| s.trim().parse().ok()),
            _ => value.as_f64(),
        }
    }
}

/// Rationals travel as `"n/d"` strings (or `"n"` for integers).
impl Scalar for BigRational {
    fn to_json(&self) -> serde_json::Value {
        serde_json::Value::String(self.to_string())
    }

    fn from_json(value: &serde_json::Value) -> Option<Self> {
        match value {
            serde_json::Value::String(s) => s.trim().parse().ok(),
            serde_json::Value::Number(n) => n.as_i64().map(|n| BigRational::from_integer(n.into())),
            _ => None,
        }
    }
}

/// Branching factor `m` and maximal depth `N` of the tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeSpec {
    pub m: u32,
    #[serde(rename = "N")]
    pub depth: u32,
}

/// Leaf counts are kept at or below `2^53` so that unit counts convert to
/// `f64` without rounding.
pub const MAX_LEAVES: u64 = 1 << 53;

impl TreeSpec {
    pub fn new(m: u32, depth: u32) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidTree(format!(
                "branching m = {m} must be >= 2"
            )));
        }
        if depth < 1 {
            return Err(Error::InvalidTree("depth N must be >= 1".into()));
        }
        match checked_pow(m, depth) {
            Some(n) if n <= MAX_LEAVES => Ok(TreeSpec { m, depth }),
            _ => Err(Error::InvalidTree(format!(
                "m^N = {m}^{depth} exceeds 2^53 leaves"
            ))),
        }
    }

    /// `m^N`.
    pub fn leaves(&self) -> u64 {
        pow(self.m, self.depth)
    }

    pub fn leaf_measure(&self) -> f64 {
        1.0 / self.leaves() as f64
    }
}

/// One tree element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Node {
    pub depth: u32,
    pub index: u64,
}

impl Node {
    pub const ROOT: Node = Node { depth: 0, index: 0 };

    pub fn new(depth: u32, index: u64) -> Self {
        Node { depth, index }
    }

    pub fn parent(&self, m: u32) -> Option<Node> {
        (self.depth > 0).then(|| Node::new(self.depth - 1, self.index / m as u64))
    }

    pub fn children(&self, m: u32) -> impl Iterator<Item = Node> {
        let depth = self.depth + 1;
        let first = self.index * m as u64;
        (first..first + m as u64).map(move |i| Node::new(depth, i))
    }

    /// The node's interval `[lo, hi)` in units of `m^{-unit_depth}`.
    pub fn units(&self, m: u32, unit_depth: u32) -> (u64, u64) {
        debug_assert!(unit_depth >= self.depth);
        let scale = pow(m, unit_depth - self.depth);
        (self.index * scale, (self.index + 1) * scale)
    }

    pub fn measure(&self, m: u32) -> f64 {
        (m as f64).powi(-(self.depth as i32))
    }

    /// True when `self ⊆ other`.
    pub fn is_within(&self, other: &Node, m: u32) -> bool {
        self.depth >= other.depth && self.index / pow(m, self.depth - other.depth) == other.index
    }

    /// Tree elements are nested or disjoint.
    pub fn overlaps(&self, other: &Node, m: u32) -> bool {
        self.is_within(other, m) || other.is_within(self, m)
    }

    /// The depth-`depth` ancestor (or `self` at equal depth).
    pub fn ancestor_at(&self, depth: u32, m: u32) -> Node {
        debug_assert!(depth <= self.depth);
        Node::new(depth, self.index / pow(m, self.depth - depth))
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(depth {}, index {})", self.depth, self.index)
    }
}

pub(crate) fn checked_pow(m: u32, e: u32) -> Option<u64> {
    (m as u64).checked_pow(e)
}

pub(crate) fn pow(m: u32, e: u32) -> u64 {
    checked_pow(m, e).expect("m^e overflows u64")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_values_accept_rational_strings() {
        assert_eq!(f64::from_json(&serde_json::json!("1/4")), Some(0.25));
        assert_eq!(f64::from_json(&serde_json::json!("2.5")), Some(2.5));
        assert_eq!(f64::from_json(&serde_json::json!(3)), Some(3.0));
        assert_eq!(f64::from_json(&serde_json::json!("x")), None);
    }

    #[test]
    fn tree_spec_guards() {
        assert!(TreeSpec::new(1, 3).is_err());
        assert!(TreeSpec::new(2, 0).is_err());
        assert!(TreeSpec::new(2, 53).is_ok());
        assert!(TreeSpec::new(2, 54).is_err());
        assert!(TreeSpec::new(3, 40).is_err());
        assert_eq!(TreeSpec::new(3, 4).unwrap().leaves(), 81);
    }

    #[test]
    fn children_partition_parent() {
        for m in 2..5u32 {
            let node = Node::new(2, 3);
            let (lo, hi) = node.units(m, 4);
            let mut cursor = lo;
            for child in node.children(m) {
                let (clo, chi) = child.units(m, 4);
                assert_eq!(clo, cursor);
                assert_eq!(child.parent(m), Some(node));
                assert!(child.is_within(&node, m));
                cursor = chi;
            }
            assert_eq!(cursor, hi);
        }
    }

    #[test]
    fn measures_shrink() {
        let mut prev = 2.0;
        for d in 0..20 {
            let mu = Node::new(d, 0).measure(2);
            assert!(mu < prev);
            prev = mu;
        }
        assert!(prev < 1e-5);
    }

    #[test]
    fn nesting() {
        let a = Node::new(1, 1);
        let b = Node::new(3, 5);
        let c = Node::new(3, 2);
        assert!(b.is_within(&a, 2));
        assert!(!c.is_within(&a, 2));
        assert!(a.overlaps(&b, 2) && b.overlaps(&a, 2));
        assert!(!a.overlaps(&c, 2));
        assert_eq!(b.ancestor_at(1, 2), a);
        assert!(Node::ROOT.parent(2).is_none());
    }
}
