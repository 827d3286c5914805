//! Doubly variational quantum solver for AC optimal power flow.
//!
//! The OPF is cast as a complex QCQP `min v†M₀v s.t. v†Mₘv ≤ bₘ`. The primal
//! voltage vector is modelled as `α|ψ(θ)⟩` and the multipliers as
//! `β²|ξₘ(φ)|²`, both produced by parameterized circuits simulated exactly on
//! a statevector. Lagrangian terms are measured through the XOR-colour
//! (extended Bell) decomposition and the saddle point is found by
//! primal-dual or extragradient iterations.
//!
//! Module map:
//!
//! - [`grid`]: case files, admittance and power-flow matrices, QCQP assembly.
//! - [`permutation`]: bandwidth, colour sets, reverse Cuthill-McKee.
//! - [`statevector`]: gates, layered ansätze, basis sampling.
//! - [`xbm`]: colour decomposition, diagonalizing circuits, estimators.
//! - [`variational`]: the doubly variational Lagrangian and its gradients.
//! - [`saddle`]: PD / EG engines, schedules, classical baselines.
//! - [`bounds`]: Lipschitz constant, variance bound, sample budgets.
//! - [`harness`]: instance generation, reference oracle, metrics, reports.

pub mod bounds;
pub mod grid;
pub mod harness;
pub mod linalg;
pub mod permutation;
pub mod rng;
pub mod saddle;
pub mod statevector;
pub mod variational;
pub mod xbm;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("diverged at iteration {iteration}: |L| = {value:e} exceeds the ceiling")]
    Divergence { iteration: usize, value: f64 },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed document: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn dimension(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io { path: path.as_ref().display().to_string(), source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
