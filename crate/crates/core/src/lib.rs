//! Projected stochastic approximation on hyperrectangles.
//!
//! This crate implements the projected Robbins-Monro iteration
//!
//! ```text
//! x_{n+1} = proj_K(x_n + gamma_n * (h(x_n) + e_n + r_n))
//! ```
//!
//! on a box `K`, together with the two projected stochastic proximal-gradient
//! updates for composite objectives `f + g` (`g` a separable sparsity penalty),
//! and a measurement suite for the ODE-method objects that govern its
//! convergence: the piecewise-constant interpolants `X_n` and `Z_n` built on
//! the time scale `t_n = sum gamma_k`, window partial-sum statistics,
//! equicontinuity moduli, Lipschitz estimates of the projection-accumulation
//! process against the `(H + R) * d` ceiling, the projected-ODE integral
//! identity residual, and stationary-set distances.
//!
//! Module map:
//!
//! - [`geometry`]: boxes, Euclidean projection, normal/tangent cones.
//! - [`schedules`]: step-size schedules and noise models with assumption checks.
//! - [`prox`]: separable penalties (L1 / MCP / SCAD / zero), proximal
//!   operators with and without box constraint, Clarke intervals.
//! - [`engine`]: the three iteration rules with full per-step trajectory
//!   recording, including the projection term `P_n`.
//! - [`diagnostics`]: interpolants and the trajectory statistics.
//! - [`odeflow`]: projected Euler integration, SA-vs-ODE comparison,
//!   Lyapunov descent rates, stationarity residuals.
//! - [`problems`]: built-in test problems with known ground truth.

pub mod diagnostics;
pub mod engine;
mod error;
pub mod geometry;
pub mod odeflow;
pub mod problems;
pub mod prox;
pub mod schedules;
pub(crate) mod vecmath;

pub use error::{Error, Result};
pub use geometry::{dist_to_normal_cone_shifted, in_normal_cone, project_tangent};
pub use geometry::{FaceSignature, FaceTag, HyperRect};
pub use prox::{Penalty, SubgradientInterval};
pub use schedules::{EPart, NoiseModel, RPart, StepSchedule};

/// Random generator used for all stochastic runs. Distinct seeds give
/// statistically independent streams, so replicas are keyed by seed alone.
pub type RunRng = rand_chacha::ChaCha12Rng;

/// Builds the reproducible generator for one replica.
pub fn rng_for_seed(seed: u64) -> RunRng {
    use rand::SeedableRng;
    RunRng::seed_from_u64(seed)
}
