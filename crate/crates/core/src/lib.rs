//! Numerical machinery for self-similar blow-up profiles of the quasilinear
//! fourth-order porous-medium equation with source
//!
//! ```text
//!     u_t = -(|u|^n u)_xxxx + |u|^(p-1) u,    n > 0, p > 1.
//! ```
//!
//! Blow-up solutions of the form `u = (T-t)^(-1/(p-1)) f(x/(T-t)^beta)` are
//! governed by a singular fourth-order ODE for the profile `f` (or its
//! transform `F = |f|^n f`).  This crate provides:
//!
//! * [`params`] — exponent bookkeeping and blow-up regime classification,
//! * [`odeint`] — an adaptive Dormand–Prince 5(4) initial-value integrator
//!   with dense output, event location and Poincaré-map periodic orbits,
//! * [`collocation`] — a damped-Newton Lobatto-IIIA collocation solver for
//!   two-point boundary-value problems with adaptive mesh refinement,
//! * [`oscillatory`] — the local interface analysis: the `P_k` operator
//!   family, the oscillatory interface component and its periodic orbit,
//!   non-oscillatory equilibria and their characteristic spectrum,
//! * [`spectral`] — the rescaled bi-harmonic kernel, its eigenfunctions,
//!   the adjoint generalized Hermite polynomials and bi-orthonormality,
//! * [`profiles`] — assembly and solution of the profile boundary-value
//!   problems in all three regimes, interface estimation, pattern
//!   classification by multiindex, energy/fibering evaluation,
//! * [`continuation`] — parameter continuation of profiles with jump
//!   detection and bifurcation-point prediction.

pub mod band;
pub mod collocation;
pub mod continuation;
pub mod error;
pub mod mesh;
pub mod multiindex;
pub mod odeint;
pub mod oscillatory;
pub mod params;
pub mod profiles;
pub mod quad;
pub mod spectral;

pub use error::{Error, Result};
pub use mesh::Mesh;
pub use multiindex::{MultiIndex, MultiIndexEntry};
pub use params::{ProblemParams, Regime};
