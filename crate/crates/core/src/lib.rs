//! Simulator for relativistic Wigner-friend protocols.
//!
//! A [`protocol::Scenario`] attaches quantum operations to events in 1+1D
//! Minkowski space. [`runner::run`] executes the events in the time order of
//! any inertial frame, collapsing branches instantaneously in that frame,
//! and [`analysis`] compares the resulting outcome statistics across frames.

pub mod analysis;
pub mod protocol;
pub mod qstate;
pub mod runner;
pub mod spacetime;

pub use num_complex::Complex64;
