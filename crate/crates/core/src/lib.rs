//! Optimal mass transport over controlled rigid-body angular-velocity
//! dynamics.
//!
//! The crate computes ground costs for the Kantorovich (optimal coupling)
//! formulation of transport problems whose particles obey the controlled
//! Euler equation `x' = f0(x) + u`, with `x = J ⊙ ω`:
//!
//! * [`rigid_body`]: the Euler drift, the affine drift induced by moving the
//!   target to the origin, and a norm-invariance falsification test.
//! * [`steering`]: radial feedback laws that drive `‖x - x_f‖` linearly to
//!   zero, the two-phase bounding controller, and a fixed-step RK4 closed-loop
//!   integrator.
//! * [`trajopt`]: a direct-transcription numerical oracle for the
//!   minimum-energy two-point boundary value problem.
//! * [`ground_cost`]: closed-form costs, bounds, and cost-matrix assembly.
//! * [`transport`]: discrete measures, exact and entropic coupling solvers,
//!   and particle-level ensemble steering.
//! * [`cli`]: scenario files and the artifact writers behind the `gomt`
//!   binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod ground_cost;
mod ode;
pub mod rigid_body;
pub mod steering;
pub mod trajopt;
pub mod transport;

pub use error::{Error, Result};

/// A point in the three-dimensional state space (`x = J ⊙ ω`, or the
/// translated coordinate `z = x - x_f`).
pub type StateVec = nalgebra::Vector3<f64>;
