//! # krdiv
//!
//! A desk-scale numerical laboratory for the divergence-operator
//! representation of the Wasserstein-1 (Kantorovich–Rubinstein) distance
//! between measures on a Gaussian space.
//!
//! For probability measures `ν₀`, `ν₁` on `ℝⁿ` whose difference has a
//! square-integrable density `α = d(ν₁−ν₀)/dμ` against the standard
//! Gaussian `μ`, the distance admits the representation
//!
//! ```text
//! W₁(ν₀, ν₁) = inf { E_μ|u| : I u = α }
//! ```
//!
//! where `I` is the divergence operator (the adjoint of the stochastic
//! derivative `D`). This crate computes both sides independently and checks
//! every estimate along the way:
//!
//! * [`chaos`] — orthonormal Hermite chaos algebra on `(ℝⁿ, μ)`: basis
//!   evaluation, sparse expansions, Gauss–Hermite tensor quadrature.
//! * [`malliavin`] — the operator toolkit on chaos expansions: derivative
//!   `D`, divergence `I`, number operator `L = ID`, Ornstein–Uhlenbeck
//!   semigroup `T_t` (spectral and Mehler-integral forms), the minimal-norm
//!   representer `v(α)` and the `(1+L)⁻¹Dα` field, and the kernel of `I`.
//! * [`measures`] — Gaussian mixtures with exact densities relative to `μ`,
//!   exact `T_t` smoothing, ε-mixing, coordinate projection, conditional
//!   expectation, and seeded sampling.
//! * [`transport`] — independent W₁ oracles: the exact 1-D CDF integral,
//!   an exact transportation LP with certified optimality, and a
//!   Kantorovich dual lower bound with a certified Lipschitz potential.
//! * [`flow`] — the discretized transport flow `φ_k(x) = x + u(x)/(m·α_t(x))`
//!   with per-step first-order and movement error bounds.
//! * [`minimize`] — minimization of `E_μ|u|` over the affine solution set
//!   `{u : Iu = α}` truncated at chaos degree `d`, and the resulting
//!   lower/upper sandwich reports.
//! * [`cli`] — batch front door used by the `krdiv` binary.
//!
//! All values are immutable after construction and all operations are pure;
//! reductions use fixed summation orders so repeated runs are bit-identical.

use thiserror::Error;

pub mod chaos;
pub mod cli;
pub mod flow;
pub mod malliavin;
pub mod measures;
pub mod minimize;
pub mod special;
pub mod transport;

pub use chaos::{ChaosFn, MultiIndex, QuadratureGrid, VectorField};
pub use measures::{DiscreteMeasure, GaussianMixture};

/// Error type shared by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("component covariance is singular; density relative to the Gaussian is undefined")]
    SingularCovariance,

    #[error("resource guard exceeded: {0}")]
    ResourceGuard(String),

    #[error("unbalanced masses: |total(a) - total(b)| = {0:e}")]
    Unbalanced(f64),

    #[error("eigenvalue computation failed to converge")]
    EigenFailure,

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("density floor breached: value {value:.3e} below floor {floor:.3e} at a working point")]
    DensityFloor { value: f64, floor: f64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
