//! Optimal two-sided reflecting barriers for Lévy processes.
//!
//! The library solves singular control problems where a Lévy process is kept
//! inside a band `[a, b]` by two monotone pushing processes, paying a running
//! state cost plus proportional costs `q_u`, `q_d` per unit of push at the
//! lower and upper barrier. Two regimes are covered:
//!
//! * **ergodic** — minimize the long-run average cost; solved in closed form
//!   for compound Poisson models with two-sided exponential jumps and for
//!   strictly stable models with finite mean (`optimizer::solve_ergodic_cpp`,
//!   `optimizer::solve_ergodic_stable`), and numerically for anything with an
//!   analytic stationary law (`optimizer::solve_ergodic_general`);
//! * **discounted** — minimize the expected discounted cost for a
//!   jump-diffusion with two-sided exponential jumps, via the saddle point of
//!   an associated stopping-game payoff (`optimizer::solve_discounted_jd`).
//!
//! Every analytic quantity has an independent Monte Carlo counterpart in
//! [`simulator`], which simulates the reflected paths themselves (exactly, in
//! the compound Poisson case) and estimates the same cost functionals.

pub mod discounted;
pub mod ergodic;
pub mod models;
pub mod numerics;
pub mod optimizer;
pub mod simulator;

pub use models::{
    CompoundPoissonTwoExp, CostSpec, JumpDiffusionTwoExp, LevyModel, Quotes, StableFiniteMean,
};
pub use numerics::NumericTolerances;
pub use optimizer::{BarrierSolution, Method, Regime};

/// Library-wide error type.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    /// Root finding was asked to work on an interval without a sign change.
    #[error("no sign change on [{lo}, {hi}]: f(lo)={f_lo:e}, f(hi)={f_hi:e}")]
    NoBracket { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },
    /// An iterative routine hit its iteration or subdivision cap.
    #[error("no convergence after {iterations} iterations (best estimate {partial:e})")]
    NoConvergence { iterations: u32, partial: f64 },
    /// A semi-infinite integral kept growing under refinement.
    #[error("integral does not settle under refinement (partial estimate {partial:e})")]
    Divergent { partial: f64 },
    /// A linear system is numerically singular.
    #[error("matrix numerically singular (condition estimate {condition:e})")]
    Singular { condition: f64 },
    /// Saddle search ended on the boundary of the supplied ranges.
    #[error("no interior stationary point: search settled on a range boundary at ({a}, {b})")]
    BoundarySolution { a: f64, b: f64 },
    /// A constructor rejected its parameters.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    /// An operation requires E[X_1] < 0 for the compound Poisson model.
    #[error(
        "{what} requires a negative mean: lambda1/alpha1 - lambda2/alpha2 = {mean} must be < 0"
    )]
    MeanCondition { what: &'static str, mean: f64 },
    /// An argument is outside the operation's domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// The operation is not defined for this model kind.
    #[error("{op} is not supported for the {kind} model kind")]
    Unsupported { op: &'static str, kind: &'static str },
    /// A simulation configuration cannot deliver the requested accuracy.
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
