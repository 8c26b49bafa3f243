//! Numerics toolkit for a long-distance ion-photon entanglement link.
//!
//! The crate models the full engineering chain of such an experiment at desk
//! scale:
//!
//! - [`qstate`]: two-qubit density matrices and entanglement metrics
//!   (fidelity with the nearest maximally entangled state, concurrence,
//!   purity, CHSH value, memory dephasing).
//! - [`tomography`]: the 9-setting / 36-outcome measurement model,
//!   linear-inversion and iterative maximum-likelihood reconstruction, and
//!   Monte-Carlo bootstrap error bars.
//! - [`linkmodel`]: photon loss budgets, fiber transmission, and the
//!   background-count noise models that predict the reconstructed fidelity.
//! - [`cavity`]: cavity-QED parameter calculations (waist, finesse,
//!   linewidth, coupling rate, cooperativity).
//! - [`rates`]: heralded remote-entanglement rate analysis for single- and
//!   two-photon click schemes.
//! - [`simulator`]: seeded Monte-Carlo simulation of the pulsed experiment,
//!   producing click records, histograms and tomography counts that
//!   round-trip through the reconstruction engine.
//!
//! All randomized routines take explicit seeds and are deterministic; with
//! the `parallel` feature (default) bootstrap replicas run on a rayon pool
//! with results gathered in replica order, so output is identical to the
//! sequential fallback.

pub mod cavity;
pub mod linkmodel;
pub mod optim;
mod par;
pub mod qstate;
pub mod rates;
pub mod simulator;
pub mod tomography;

/// Errors produced by the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An input value or file failed validation.
    #[error("invalid {what}: {why}")]
    Validation { what: &'static str, why: String },
    /// A measurement setting carries no events, so reconstruction cannot start.
    #[error("insufficient data: setting {setting} has zero total counts")]
    InsufficientData { setting: String },
    /// An iterative optimization failed to converge; carries the best value found.
    #[error("optimizer did not converge after {restarts} restarts (best objective {best})")]
    NonConvergence { best: f64, restarts: usize },
    /// Too many bootstrap replicas failed to reconstruct.
    #[error("{failed} of {total} bootstrap replicas failed to reconstruct")]
    TooManyReplicaFailures { failed: usize, total: usize },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn validation(what: &'static str, why: impl Into<String>) -> Self {
        Error::Validation { what, why: why.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
