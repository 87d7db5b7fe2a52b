//! Passenger-flow simulation on tram networks.
//!
//! Trams are atomic passenger masses transported along the edges of a
//! directed graph. Passengers queue per outgoing edge, board and alight at
//! scheduled stop events, and the resulting waiting and standing times are
//! aggregated over Monte Carlo runs.

pub mod dynamics;
pub mod experiment;
pub mod io;
pub mod metrics;
pub mod network;
pub mod scenarios;
pub mod service;
pub mod solver;
pub mod stochastic;

pub use experiment::{Experiment, RunConfig, RunError, RunOutcome};
pub use network::{EdgeIdx, StopIdx, Timetable, TramNetwork, Trip};
