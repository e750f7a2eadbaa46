//! A regression market for trading lagged wind power data.
//!
//! A buyer (the central agent) forecasts its own production from lagged
//! features of itself and of other agents. Sellers attach a reservation
//! price `u` to each of their lag features. The market operator turns each
//! reservation into a per-feature L1 penalty `λ = (T/2)·u`, fits a weighted
//! lasso, and pays each seller `|u·β|` for every feature the lasso keeps.
//! The buyer's in-sample loss plus payments never exceeds what it would
//! lose using its own data alone.

pub mod agent;
pub mod config;
pub mod data_io;
pub mod error;
pub mod experiment;
pub mod market;
pub mod regression;
pub mod timeseries;

pub use agent::AgentId;
pub use error::{Error, Result};
