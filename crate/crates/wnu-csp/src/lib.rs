//! CSP solving for finite binary constraint languages preserved by a special
//! weak near-unanimity (WNU) operation, at desk scale.
//!
//! The solver follows the reduction strategy of Zhuk's dichotomy algorithm:
//! cycle-consistency, irreducibility and weaker-instance reductions, the
//! four-case domain analysis (binary absorption, center, polynomially complete
//! quotient, linear quotient) and the linear case over products of prime
//! fields.  Every run emits a trace whose steps can be re-validated
//! independently, either against the embedded witnesses or against a
//! brute-force oracle.

pub mod algebra;
pub mod certkit;
pub mod consistency;
pub mod linear;
pub mod model;
pub mod presets;
pub mod solver;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("resource budget exhausted: {0}")]
    Resource(String),
    #[error("internal inconsistency: {0}")]
    Internal(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("trace rejected: {0}")]
    Rejected(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
