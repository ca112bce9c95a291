//! Crate-wide error type.
//!
//! Most failure modes here are mathematical rather than operational: a local
//! model can be degenerate, a linear system can be inconsistent, a sampler can
//! exhaust its retry budget without finding an element subject to all the
//! splitting constraints. These are reported as structured variants so the
//! tower driver can distinguish "bug" from "this instance genuinely does not
//! admit the construction".

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid field parameters: {0}")]
    BadField(String),

    #[error("arithmetic domain error: {0}")]
    Domain(String),

    #[error("inconsistent group table: {0}")]
    BadGroup(String),

    #[error("representation has the wrong shape: {0}")]
    BadRep(String),

    #[error("linear system has no solution: {0}")]
    NoSolution(String),

    #[error("degenerate local data: {0}")]
    DegenerateLocal(String),

    #[error("sampling failed after {tries} attempts: {context}")]
    SamplingExhausted { tries: u64, context: String },

    #[error("unresolvable obstruction: {0}")]
    Obstructed(String),

    #[error("deformation condition bookkeeping violated: {0}")]
    ConditionViolation(String),

    #[error("invalid instance data: {0}")]
    BadInstance(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
