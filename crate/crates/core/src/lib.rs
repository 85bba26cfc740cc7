//! First contact percolation (FCP) on integer lattices.
//!
//! Every nearest-neighbour edge carries an independent simple point process of
//! meeting times. An infection starting at the origin crosses an edge only at
//! one of its meeting times, and consecutive crossings must happen at
//! non-decreasing times. This crate samples such environments, runs the
//! spread, enumerates permitted paths on small instances, compares point
//! processes through convex-order and hitting-probability tests, drives the
//! quantile coupling used for strict speed-up arguments, and estimates time
//! constants on the half-line.
//!
//! Module map:
//!
//! - [`point_process`]: process specifications, sampling, hitting/void
//!   probabilities and quantiles.
//! - [`engine`]: edge environments, event-driven spread, hitting times.
//! - [`path_oracle`]: brute-force counting of permitted paths.
//! - [`ordering`]: convex-order, hitting-domination and speed-up condition
//!   testers.
//! - [`coupling`]: the shared-uniform quantile coupling and its property
//!   checks.
//! - [`estimators`]: time-constant estimation and the waiting-time bound.
//! - [`verify`]: the acceptance battery shared by the test suite and the CLI.

pub mod coupling;
pub mod engine;
pub mod error;
pub mod estimators;
pub mod ordering;
pub mod path_oracle;
pub mod point_process;
pub mod rng;
pub mod sets;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
pub use point_process::{PointPattern, ProcessSpec};
