use thiserror::Error;

use crate::dyadic::Node;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{name} = {value} is outside its domain ({constraint})")]
    Domain {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },

    #[error("no sign change of the residual on [{lo}, {hi}]: r(lo) = {r_lo}, r(hi) = {r_hi}")]
    NoSignChange {
        lo: f64,
        hi: f64,
        r_lo: f64,
        r_hi: f64,
    },

    #[error(
        "bisection did not converge after {iterations} iterations; final bracket [{lo}, {hi}]"
    )]
    NoConvergence { lo: f64, hi: f64, iterations: usize },

    #[error("invalid tree: {0}")]
    InvalidTree(String),

    #[error("invalid step function: {0}")]
    InvalidStepFunction(String),

    #[error("function is not T-good: exceptional set has measure {0}")]
    NotTGood(f64),

    #[error("family element {0} is not in S_phi")]
    FamilyNotInSPhi(Node),

    #[error("family elements {0} and {1} overlap")]
    FamilyNotDisjoint(Node, Node),

    #[error("family is not maximal in S_phi: {0} misses its union")]
    FamilyNotMaximal(Node),

    #[error("refinement depth {refine} too coarse: {reason}")]
    RefinementTooCoarse { refine: u32, reason: String },

    #[error("no feasible starting point: {0}")]
    InfeasibleStart(String),

    #[error("complexity guard: {0}")]
    ComplexityGuard(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(name: &'static str, value: f64, constraint: &'static str) -> Self {
        Error::Domain {
            name,
            value,
            constraint,
        }
    }

    /// True for root-finding failures (as opposed to bad inputs).
    pub fn is_convergence_failure(&self) -> bool {
        matches!(
            self,
            Error::NoSignChange { .. } | Error::NoConvergence { .. }
        )
    }

    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_) | Error::Csv(_))
    }
}
