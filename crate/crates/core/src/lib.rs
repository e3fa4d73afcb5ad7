//! Shape stability toolkit for neighborhood storage networks.
//!
//! A storage network routes unit items arriving on `K` Poisson streams into
//! the nodes of per-stream neighborhoods. This crate decides, exactly, whether
//! the arrival rates admit equilibrium allocations (every node fed at rate
//! `1/n`), builds the routing policies that realize them, verifies the
//! one-step drift identities of the centered load vector in exact rational
//! arithmetic, produces transience certificates when no equilibrium exists,
//! and runs reproducible Monte Carlo recurrence diagnostics on the embedded
//! arrival chain.
//!
//! Module map:
//! - [`net`]: networks, configurations, the shape transform and magnitude.
//! - [`feasibility`]: subset condition, max-flow allocation solvers, the
//!   decision polytope, and separating functionals.
//! - [`policy`]: JSQ, equilibrium (ERP/SERP), perturbed-equilibrium, and
//!   table policies.
//! - [`drift`]: exact one-step drift of the shape magnitude and its
//!   closed forms, jump bounds, and certificate drift checks.
//! - [`sim`]: deterministic counter-based simulation of the embedded chain,
//!   return-time collection, and recurrence diagnostics.
//! - [`rng`]: the counter-mode generator behind every randomized piece.
//! - [`testgen`]: reproducible random instances for property sweeps.

pub mod drift;
pub mod feasibility;
mod maxflow;
pub mod net;
pub mod policy;
pub mod rational;
pub mod rng;
pub mod sim;
pub mod testgen;

pub use net::{shape_magnitude, shape_of, Configuration, Shape, StorageNetwork};
pub use rational::Rat;

use thiserror::Error as ThisError;

#[derive(Debug, ThisError)]
pub enum Error {
    #[error("denominator must be non-zero")]
    ZeroDenominator,
    #[error("cannot parse {0:?} as an exact rational (use \"p/q\")")]
    RationalParse(String),
    #[error("network definition: {0}")]
    NetworkParse(String),
    #[error("network is invalid: {0}")]
    InvalidNetwork(String),
    #[error("expected a vector of length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("{count} neighborhoods exceed the 2^K enumeration cap ({cap}); use flow-based decision only")]
    TooManyNeighborhoods { count: usize, cap: usize },
    #[error("product of neighborhood sizes exceeds the vertex enumeration guard ({guard})")]
    EnumerationGuard { guard: u64 },
    #[error("integer capacities exceed 128 bits after scaling; rates too fine for the flow solver")]
    ScaleOverflow,
    #[error("lower-bound probe did not converge within {0} halvings; this indicates an arithmetic bug")]
    ProbeCapExceeded(u32),
    #[error("epsilon {epsilon} out of range: a perturbed policy needs 0 < epsilon < {limit}")]
    EpsilonOutOfRange { epsilon: String, limit: String },
    #[error("allocation shape does not match the network: {0}")]
    AllocationShape(String),
    #[error("{0}")]
    Precondition(String),
    #[error("certificate violated: {0}")]
    CertificateViolated(String),
    #[error("internal assertion: {0}")]
    Internal(String),
    #[error("square-root interval failed to reach the requested width")]
    PrecisionFailure,
}

impl Error {
    /// Distinguishes internal-assertion failures (exit status 2 at the CLI)
    /// from input/usage errors (exit status 1).
    pub fn is_internal(&self) -> bool {
        matches!(
            self,
            Error::CertificateViolated(_)
                | Error::Internal(_)
                | Error::ProbeCapExceeded(_)
                | Error::PrecisionFailure
        )
    }
}
