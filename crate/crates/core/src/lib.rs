//! Corridor-constrained receding-horizon navigation for planar mobile robots.
//!
//! The pipeline runs bottom-up through the modules:
//!
//! - [`gridmap`]: occupancy grid, freeness and segment checks
//! - [`pathfind`]: 8-connected A* over the grid
//! - [`corridor`]: multi-orientation rectangular safe corridors and their
//!   linear constraints
//! - [`dynobs`]: moving obstacles, constant-velocity prediction and discrete
//!   barrier constraints
//! - [`ocp`]: the finite-horizon optimal control problem and its
//!   augmented-Lagrangian solver
//! - [`navsim`]: the closed loop, single- and multi-agent
//!
//! plus the file formats and tooling shared by the command-line front end
//! ([`scenario`], [`mapgen`], [`bench`], [`render`]).

// `!(x > 0.0)` style checks are kept on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod corridor;
pub mod dynobs;
pub mod geom;
pub mod gridmap;
pub mod mapgen;
pub mod navsim;
pub mod ocp;
pub mod pathfind;
pub mod render;
pub mod scenario;

pub use corridor::{Corridor, CorridorConstraint, CorridorMetrics, CorridorParams};
pub use dynobs::{CbfParams, DynamicObstacle, ObstaclePrediction};
pub use geom::Point2;
pub use gridmap::OccupancyGrid;
pub use navsim::{NavConfig, NavState, TraceRecord};
pub use ocp::{Control, OcpConfig, OcpProblem, OcpSolution, Pose, SolveStatus};
pub use pathfind::Path;
