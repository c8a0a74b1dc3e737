//! Sorting-center planning, wave allocation, staffing and simulation.

pub mod demand;
pub mod error;
pub mod executor;
pub mod kpi;
pub mod labor;
pub mod layout;
pub mod pipeline;
pub mod planner;
pub mod scenario;
pub mod tuner;
pub mod twin;

pub use error::{CoreError, Result};
