//! Gridworld multi-agent path finding with prioritized, cluster-based
//! communication.
//!
//! The crate is organised around the simulation engine in [`mapf`]:
//!
//! * [`coupled_planner`] searches the joint configuration space and provides
//!   an exhaustive optimal oracle.
//! * [`priority_labeling`] unfolds coupled solutions into imitation and
//!   implicit-priority datasets.
//! * [`cbrp_topology`] elects cluster centrals from agent weights.
//! * [`prioritized_policy`] runs the priority → cluster → message → decision
//!   pipeline as an executable decentralized planner.
//! * [`losses`] holds the training objectives as plain numeric functions.
//! * [`bench`] generates scenarios and aggregates benchmark measurements.

pub mod bench;
pub mod cbrp_topology;
pub mod coupled_planner;
pub mod error;
pub mod losses;
pub mod mapf;
pub mod prioritized_policy;
pub mod priority_labeling;

pub use error::{Error, Result};
