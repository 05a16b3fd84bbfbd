//! World model: grid, agents, simultaneous-move execution and measurements.

pub mod format;
pub mod grid;
pub mod metrics;
pub mod observe;
pub mod sim;
pub mod solution;

pub use grid::{shortest_path_distance, Action, Cell, DistanceMap, GridMap, Instance};
pub use metrics::{measurements, MeasurementRow};
pub use observe::{observe, Observation, DEFAULT_FOV};
pub use sim::{
    execute_policy, execute_policy_with, step, step_detailed, valid_actions, ConflictEvent,
    ConflictKind, ExecutionTrace, MoveOutcome, RewardConfig, SimState,
};
pub use solution::{Plan, Solution};
