//! Meal-delivery dispatch laboratory.
//!
//! The crate wires five subsystems into one reproducible pipeline:
//!
//! * [`graph`] — road network, all-pairs shortest paths, mid-edge distance queries
//! * [`demand`] — survey-marginal order synthesis, destination/restaurant draws,
//!   courier head-count calibration
//! * [`dispatch`] — tip-weighted route cost and the genetic-annealing queue optimizer
//! * [`sim`] — discrete-time courier simulation and scenario sweeps
//! * [`advisory`] — logistic deliverability filter, OLS latency model with inference,
//!   and the tip inversion that answers "how much tip for a target waiting time"
//!
//! Every randomized stage takes an explicit seed; identical seeds give byte-identical
//! outputs.

pub mod advisory;
pub mod demand;
pub mod dispatch;
pub mod error;
pub mod graph;
pub mod io;
pub mod seed;
pub mod sim;

pub use error::{Error, Result};
