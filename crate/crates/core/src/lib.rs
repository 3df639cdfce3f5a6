//! Laboratory for the distributed age-of-information transmission game.
//!
//! Nodes share a slotted collision channel and each one tunes its own
//! transmission probability from per-frame averages of transmission cost and
//! age. This crate simulates that channel, runs the local learning rule,
//! computes the induced game's Nash equilibrium and social optimum, and
//! provides a round-robin comparator plus a scenario harness (`aoi-lab`).
//!
//! Module map:
//! - [`model`]: parameters, profiles, configuration, trajectories.
//! - [`channel`]: one frame of the slotted collision channel and its
//!   large-frame closed forms.
//! - [`learning`]: the per-frame update rule, its expected form and
//!   learning-rate schedules.
//! - [`game`]: virtual utility, best response, contraction certificate and
//!   equilibrium solver.
//! - [`welfare`]: social utility, social optimum and price of anarchy.
//! - [`rr`]: collision-free round-robin baseline.
//! - [`harness`]: configuration parsing and scenario execution.

pub mod channel;
pub mod error;
pub mod game;
pub mod harness;
pub mod learning;
pub mod model;
mod roots;
pub mod rr;
pub mod stream;
pub mod welfare;

pub use error::{Error, Result};
pub use model::{
    derive_params, ChurnEvent, FrameObservation, FrameRecord, GameConfig, NodeParams, ProbVector,
    RosterChange, Trajectory,
};
