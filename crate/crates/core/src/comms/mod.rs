//! Directed communication graph and the delayed broadcast channel between
//! robots.

mod delay;
mod graph;
mod history;

pub use delay::{DelaySchedule, DelayShape, DelaySnapshot, EdgeDelay};
pub use graph::{build_graph, CommGraph, GraphSpec};
pub use history::{receive_delayed, Received, StateHistory};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CommsError {
    #[error("graph has no robots")]
    EmptyGraph,
    #[error("adjacency row {row} has length {len}, expected {n}")]
    NotSquare { row: usize, len: usize, n: usize },
    #[error("robot {0} lists itself as a neighbour")]
    SelfLoop(usize),
    #[error("adjacency entry ({i}, {j}) = {value} is not 0 or 1")]
    NonBinary { i: usize, j: usize, value: u8 },
    #[error("robot {0} receives from no other robot")]
    IsolatedRobot(usize),
    #[error("graph has {got} robots, expected {expected}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("robot {receiver} does not receive from robot {sender}")]
    NotNeighbor { receiver: usize, sender: usize },
    #[error("robot {robot} published at t = {t} after t = {last}")]
    NonMonotonicTime { robot: usize, last: f64, t: f64 },
    #[error("robot {robot} out of range for {n} robots")]
    UnknownRobot { robot: usize, n: usize },
    #[error("invalid delay specification: {0}")]
    InvalidDelay(String),
}
