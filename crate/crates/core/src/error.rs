use crate::tanaka::TanakaState;

/// Errors produced by the numerical routines and simulators.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the domain of a mathematical function.
    #[error("domain error in {func}: {detail}")]
    Domain { func: &'static str, detail: String },

    /// Invalid problem or experiment parameters.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A user-supplied integrand returned a non-finite value.
    #[error("integrand returned non-finite value {value} at node {node}")]
    Evaluation { node: f64, value: f64 },

    /// An exhaustive search would exceed its enumeration budget.
    #[error("enumeration budget exceeded: {0}")]
    Budget(String),

    /// The critical-point scan found an even number of roots, which happens
    /// only at a tangency on the regime boundary.
    #[error("degenerate tangency: scan found {roots} roots of F(u) = delta")]
    DegenerateTangency { roots: usize },

    /// A root that exists analytically was not bracketed.
    #[error("infeasible parameters: {0}")]
    Infeasible(String),

    /// The replica saddle-point iteration did not settle.
    #[error("fixed-point iteration did not converge after {iterations} iterations")]
    NonConvergence {
        iterations: usize,
        last: TanakaState,
    },

    /// An iterate became non-finite.
    #[error("iteration diverged: {0}")]
    Divergence(String),

    /// An internal consistency check failed.
    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn domain(func: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            func,
            detail: detail.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
