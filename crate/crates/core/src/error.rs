//! Error types shared across the crate.

use thiserror::Error;

/// Diagnostics carried by a failed Newton iteration.
#[derive(Debug, Clone)]
pub struct NewtonDiagnostics {
    /// Iterations performed before giving up.
    pub iterations: usize,
    /// Scaled residual norm at the last iterate.
    pub last_residual: f64,
    /// Norm of the last accepted Newton step.
    pub last_step_norm: f64,
    /// Mesh size at the point of failure.
    pub mesh_len: usize,
}

/// Why a periodic-orbit search gave up.
#[derive(Debug, Clone)]
pub enum PeriodicFailure {
    /// The trajectory settled onto an equilibrium instead of an orbit.
    ConvergedToEquilibrium { state: Vec<f64> },
    /// The trajectory left the bounded region.
    Unbounded { t: f64, norm: f64 },
    /// Return-map distances did not contract below tolerance.
    NoConvergence { last_distances: Vec<f64> },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid problem specification: {0}")]
    InvalidSpec(String),

    #[error("right-hand side returned a non-finite value at t = {t}")]
    NonFiniteRhs { t: f64 },

    #[error("step size underflow at t = {t} (blow-up of the trajectory or stiffness)")]
    StepSizeUnderflow { t: f64 },

    #[error("quadrature did not converge: {0}")]
    QuadratureNonConvergence(String),

    #[error(
        "Newton iteration failed after {} iterations (scaled residual {:.3e}, mesh {})",
        .0.iterations, .0.last_residual, .0.mesh_len
    )]
    NewtonFailure(NewtonDiagnostics),

    #[error("mesh overflow: {needed} nodes needed, cap is {cap}")]
    MeshOverflow { needed: usize, cap: usize },

    #[error("no periodic orbit found: {0:?}")]
    NoPeriodicOrbit(PeriodicFailure),

    #[error("no bounded shooting window found: {0}")]
    NoBoundedWindow(String),

    #[error("no decaying interface tail found: {0}")]
    NoDecayingTail(String),

    #[error("rescaled profile failed residual re-verification: {0}")]
    RescaleVerification(String),

    #[error("operation requires a converged solution: {0}")]
    Unconverged(String),
}

pub type Result<T> = std::result::Result<T, Error>;
