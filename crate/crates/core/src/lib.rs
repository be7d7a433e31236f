//! Two-atom Rydberg-blockade gate simulator and analytic error-budget
//! engine.
//!
//! The crate is organized around one validated [`params::ExperimentConfig`]
//! feeding four independent consumers:
//!
//! - [`blockade`] — blockade-shift models B(R) and the √N collective Rabi
//!   enhancement;
//! - [`budget`] — closed-form intrinsic and technical error terms, coherence
//!   times, and the assembled [`budget::ErrorBudgetReport`];
//! - [`dynamics`] — Lindblad density-matrix simulation of the blockade pulse
//!   protocols (controlled-phase, two CNOT constructions, Bell preparation)
//!   with gate and state fidelity metrics;
//! - [`montecarlo`] — shot-level Ramsey, Bell, and parity-oscillation
//!   experiments with seeded, merge-safe randomness and loss correction.
//!
//! All internal frequencies are angular (rad/s); user-facing conversions
//! live in [`params::units`].

pub mod blockade;
pub mod budget;
pub mod density;
pub mod dynamics;
pub mod error;
pub mod montecarlo;
pub mod numerics;
pub mod params;

pub use error::{Error, Result};
pub use params::ExperimentConfig;
