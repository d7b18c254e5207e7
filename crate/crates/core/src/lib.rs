//! Adaptive backstepping control of a single inverted pendulum with a
//! projection recurrent network as the online constrained optimiser.
//!
//! Each control period the controller forms backstepping error coordinates,
//! assembles a scalar box-constrained QP, relaxes a one-state projection
//! network whose equilibrium is the QP minimiser, and optionally refreshes
//! the model through recursive least squares.

pub mod backstepping;
pub mod config;
pub mod error;
pub mod grid;
pub mod plant;
pub mod prnn;
pub mod qp;
pub mod rls;
pub mod sim;
pub mod trace;
pub mod verify;

pub use error::{Error, Result};
