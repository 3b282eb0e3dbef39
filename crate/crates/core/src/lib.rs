//! Bellman function of the dyadic maximal operator for Kolmogorov's
//! inequality with exponent `q ∈ (0, 1)`.
//!
//! - [`kernel`]: the special functions `H_q`, `ω_q`, `σ_q`, `X_λ(k)`, `k₀`,
//!   `R_k` and the closed-form Bellman value.
//! - [`dyadic`]: m-adic tree, step functions, the exact maximal operator and
//!   its linearization.
//! - [`transforms`]: the two-valued `g_φ` transform, the tree inequalities and
//!   the eigenfunction residual.
//! - [`search`]: constrained local search for near-extremal step functions.
//! - [`report`]: deterministic JSON and CSV output.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN.

pub mod dyadic;
pub mod error;
pub mod kernel;
pub mod report;
pub mod search;
pub mod transforms;
pub mod verify;

pub use dyadic::{Node, StepFunction, TreeSpec};
pub use error::{Error, Result};
pub use kernel::BellmanParams;
