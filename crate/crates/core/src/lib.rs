//! Dynamics, differential flatness and time-varying LQR for a flexible hose
//! carried by several quadrotors.
//!
//! The hose is a chain of `n` massless rigid links with point masses at the
//! joints. Quadrotors are rigidly attached at a subset of the joints. The
//! configuration space is `ℝ³ × (S²)ⁿ × SO(3)^{n_Q}` and every module works
//! on it directly, without local angles.
//!
//! * [`geometry`]: hat/vee, projections and error functions on S² and SO(3).
//! * [`jets`]: truncated Taylor arithmetic for high-order time derivatives.
//! * [`model`]: parameters, state, input and chain kinematics.
//! * [`dynamics`]: equations of motion, energy and link tensions.
//! * [`flatness`]: flat outputs to full state and input, static shapes.
//! * [`linearization`]: error states and the linear time-varying model.
//! * [`control`]: Riccati synthesis, gain schedules and a PD baseline.
//! * [`sim`]: integration, scenarios, logging and the scaling benchmark.
//! * [`presets`]: the reference setups used by tests, configs and the guide.

pub mod control;
pub mod dynamics;
pub mod error;
pub mod flatness;
pub mod geometry;
pub mod jets;
pub mod linearization;
pub mod model;
pub mod presets;
pub mod sim;

pub use error::{Error, Result};
pub use model::{ControlInput, Quadrotor, SystemParams, SystemState};
