//! Shared inputs for the criterion benchmarks.

use std::path::PathBuf;

use rectnav_core::corridor::{make_constraint, Corridor};
use rectnav_core::dynobs::predict;
use rectnav_core::gridmap::load_map;
use rectnav_core::{DynamicObstacle, OccupancyGrid, OcpProblem, Point2, Pose};

pub fn fixture_map(name: &str) -> OccupancyGrid {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/maps").join(name);
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    load_map(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// A mid-run horizon problem: heading across a 4 m corridor toward two
/// targets with `obstacles` crossing obstacles ahead.
pub fn horizon_problem(obstacles: usize) -> OcpProblem {
    let mut p = OcpProblem::new(Pose::new(0.0, 0.0, 0.2), Pose::new(2.5, 0.5, 0.0));
    p.target2 = Pose::new(4.0, 1.5, 0.6);
    let corridor = Corridor {
        seed: Point2::ZERO,
        v_left: Point2::new(-1.0, -2.0),
        v_right: Point2::new(5.0, 2.0),
        theta: 0.1,
    };
    p.corridor = make_constraint(&corridor, 0.3).unwrap();
    for i in 0..obstacles {
        let o = DynamicObstacle {
            position: Point2::new(1.8 + 0.6 * i as f64, 2.0 - 0.8 * i as f64),
            velocity: Point2::new(-0.1, -0.4 + 0.3 * i as f64),
            radius: 0.4,
        };
        p.obstacles.push(predict(&o, p.config.horizon, p.config.dt));
    }
    p
}
