//! Self-tuning tube-based model predictive control.

pub mod estimation;
pub mod geometry;
pub mod simulator;
pub mod solvers;
pub mod tube_mpc;
