//! Planning and simulation toolkit for energy-constrained multi-agent
//! coverage.
//!
//! The pipeline: solve the optimal coverage and charging formations over a
//! reward field, connect them with a minimum-length alternating tour, derive
//! the duty-cycle-optimal charging/dwell times that keep every battery alive
//! indefinitely, expand the result into synchronized per-agent schedules,
//! and play those back in a deterministic closed-loop simulator — optionally
//! against a decentralized threshold-charging baseline for comparison.

pub mod energy;
pub mod error;
pub mod formation;
pub mod geom;
pub mod mission;
pub mod planner;
pub mod report;
pub mod routing;
pub mod scenario;
pub mod simulator;

pub use error::{Error, Result};
pub use geom::Point2;
