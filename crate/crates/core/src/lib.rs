//! Numerical laboratory for pseudo-Markovian solutions of fully nonlinear,
//! possibly degenerate path-dependent PDEs
//!
//! ```text
//! ∂_t u(t, ω) + G(t, ω, u, ∂_ω u, ∂²_ωω u) = 0,   u(T, ω) = ξ(ω),
//! ```
//!
//! built around cone-shaped hitting times of the form
//!
//! ```text
//! H = inf { s ≥ t : |x + B_s − B_t| + L₁ (s − t) ≥ R } ∧ T.
//! ```
//!
//! The crate is organised along the pipeline:
//!
//! * [`path`] — piecewise-linear sample paths, sup-norms, concatenation and
//!   partition interpolation (the discrete model of the canonical space).
//! * [`hitting`] — cone hitting times, the recursive hitting sequence and
//!   the partition extraction π_n, with an exact-arithmetic restart check.
//! * [`nonlin`] — simulation of bounded drift/diffusion control laws and
//!   Monte Carlo estimation of the sublinear expectations Ē^L / E̲^L, plus a
//!   one-dimensional HJB finite-difference oracle.
//! * [`cone`] — a monotone explicit finite-difference solver for
//!   path-frozen PDEs on cone domains, the upper/lower bounding generators
//!   and a probabilistic cross-check of the bounding equation.
//! * [`cascade`] — the pseudo-Markovian engine: backward cascades of cone
//!   solves over hitting partitions with upper/lower sandwiching,
//!   compatibility checks and comparison verification.
//! * [`shjb`] — stochastic HJB values with random coefficients (controlled
//!   decoupled FBSDE, direct and path-frozen pipelines).
//! * [`isaacs`] — path-dependent Isaacs game values in strong formulation
//!   (strategy vs control on the hitting mesh).
//! * [`config`], [`cli`] — experiment configuration, orchestration and the
//!   bundled verification suites.

pub mod cascade;
pub mod cli;
pub mod cone;
pub mod config;
pub mod hitting;
pub mod isaacs;
pub mod nonlin;
pub mod path;
pub mod shjb;
pub mod util;

/// Crate-wide error type. Variants mirror the failure modes of the numerical
/// pipeline: domain/precondition violations, configuration problems (CFL,
/// empty control families), and resource guards (recursion budgets).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("anchor error: {0}")]
    Anchor(String),
    #[error("ordering error: {0}")]
    Ordering(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("control bound violated: {0}")]
    Bound(String),
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("divergence at time slice {slice}: {message}")]
    Divergence { slice: usize, message: String },
    #[error("iteration did not converge: {0}")]
    Convergence(String),
    #[error("insufficient stencil: {0}")]
    Stencil(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
