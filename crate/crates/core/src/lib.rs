//! Joint distribution of the Parisian ruin time and the number of claims
//! until Parisian ruin in the classical compound-Poisson risk model.
//!
//! The surplus process is `U(t) = u + c t - sum of claims up to t`, with
//! Poisson claim arrivals of rate `lambda` and i.i.d. positive claim sizes.
//! Parisian ruin occurs at the first instant the surplus has stayed
//! continuously below zero for a fixed delay `d`.
//!
//! The crate computes, for exponential and tabulated claim laws:
//!
//! * `w_u^d(n, t)` — joint density of ruin at time `t` with `n` claims,
//! * `p_u^d(n)` — probability that exactly `n` claims occur up to ruin,
//! * cumulative probabilities `psi_u^d(n, t)`,
//! * the deficit-extended density `w_u^d(n, t, x)`,
//!
//! together with the classical (non-Parisian) ruin building blocks, the
//! first-passage law used by the restart argument, and an exact event-driven
//! Monte Carlo simulator that serves as an independent oracle.

// Parameter guards use the negated form `!(v > 0.0)` on purpose (it rejects
// NaN, which `v <= 0.0` lets through); convolution loops keep explicit
// indices because each index also drives offset arithmetic; test reference
// constants are frozen at full precision.
#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::excessive_precision
)]

pub mod classical;
pub mod error;
pub mod model;
pub mod numerics;
pub mod parisian;
pub mod passage;
pub mod simulate;

pub use classical::ClassicalRuinDensity;
pub use error::{Error, Result};
pub use model::{AtomDensity, ClaimDistribution, ModelParams};
pub use numerics::{DensityGrid, QuadRule, Tolerance};
pub use parisian::{
    DeficitSolution, Mode, ParisianSolution, ParisianSolver, ProbabilityTable, SolverConfig,
};
pub use passage::PassageLaw;
pub use simulate::{
    estimate_joint, estimate_passage, simulate_path, JointEstimate, MCEstimate, SimConfig,
};
