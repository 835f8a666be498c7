//! Molecular dynamics for latent-variable (polarizable) force fields.
//!
//! Four dynamics are provided for a model `(U, A(r), b(r))`:
//!
//! - exact MD, where the latent variables solve `∂Q/∂x = 0` at every step;
//! - XL-BOMD, which evolves the latent variables with a small fictitious mass;
//! - Stochastic-XLMD, which adds a Langevin thermostat on the latent
//!   velocities only;
//! - the averaged limit equation `p̄' = hbar(r̄) − T g(r̄)`.
//!
//! [`langevin`] holds the analytic machinery of the frozen-`r` latent
//! dynamics (propagator, covariances, Poisson solution) and [`harness`] runs
//! ensembles, sweeps and cost comparisons. The core is generic over `f32` and
//! `f64`; the aliases at the crate root fix `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod harness;
pub mod integrators;
pub mod io;
pub mod langevin;
pub mod linalg;
pub mod model;
pub mod rng;
pub mod scalar;
pub mod solvers;

pub use error::{Error, Result};
pub use harness::{ErrorReport, ReferenceSpec, SweepParam, SweepResult};
pub use integrators::{LatentInit, Method, SimParams, Trajectory, VelocityInit};
pub use model::{builtin_model, BVariant, ExtendedState, LatentModel, ModelSpec, ModelTag};
pub use langevin::{LangevinSystem, PoissonSolution};
pub use scalar::Scalar;
pub use solvers::{CostCounters, SolveResult, SolverKind};

pub type MatF64 = linalg::Mat<f64>;
pub type ModelSpecF64 = ModelSpec<f64>;
pub type ExtendedStateF64 = ExtendedState<f64>;
pub type SimParamsF64 = SimParams<f64>;
pub type TrajectoryF64 = Trajectory<f64>;
pub type LangevinSystemF64 = LangevinSystem<f64>;
pub type PoissonSolutionF64 = PoissonSolution<f64>;
