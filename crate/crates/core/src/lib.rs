//! Cooperative salvo guidance: a team of pursuers estimates a moving target
//! through a directed sensing network and steers so that all of them reach it
//! at the same time.
//!
//! The crate is split along the data flow of one engagement:
//!
//! * [`graph`] builds Laplacians and the spectral quantities that set gain floors.
//! * [`dynamics`] holds the planar kinematics.
//! * [`observer`] is the distributed prescribed-time target observer.
//! * [`guidance`] is the time-to-go consensus law on top of true proportional navigation.
//! * [`sim`] integrates everything with RK4.
//! * [`scenario`] and [`output`] read scenario files and write traces and metrics.
//! * [`batch`] fans independent runs and sweeps out over threads.

// `!(x > 0.0)` style checks are deliberate: they reject NaN along with the bad range
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod batch;
pub mod dynamics;
pub mod error;
pub mod graph;
pub mod guidance;
pub mod observer;
pub mod output;
pub mod scenario;
pub mod sim;

pub use error::{Error, Result};
pub use scenario::{parse_scenario, ScenarioConfig, ScenarioError};
pub use sim::{run, EngagementMetrics, RunOutput, SimulationTrace};
