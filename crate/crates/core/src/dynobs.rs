//! Moving circular obstacles and discrete-time barrier constraints.
//!
//! The barrier is `h = |p_robot - p_obs|^2 - (r_obs + r_robot + margin)^2`,
//! non-negative exactly when the robot center is outside the inflated disk.
//! Along a horizon the discrete condition `h[k+1] >= (1 - dt * gamma) h[k]`
//! keeps `h` above a geometrically decaying lower bound.

use serde::{Deserialize, Serialize};

use crate::geom::Point2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicObstacle {
    pub position: Point2,
    pub velocity: Point2,
    pub radius: f64,
}

/// Constant-velocity forecast, `positions[k]` at `k * dt` ahead.
#[derive(Debug, Clone, PartialEq)]
pub struct ObstaclePrediction {
    pub positions: Vec<Point2>,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CbfParams {
    /// Decay rate per second; `gamma * dt` must lie in `(0, 1)`.
    pub gamma: f64,
    pub robot_radius: f64,
    pub margin: f64,
}

impl Default for CbfParams {
    fn default() -> Self {
        Self {
            gamma: 5.0,
            robot_radius: 0.3,
            margin: 0.0,
        }
    }
}

pub fn predict(obstacle: &DynamicObstacle, n_steps: usize, dt: f64) -> ObstaclePrediction {
    let positions = (0..=n_steps)
        .map(|k| obstacle.position + obstacle.velocity * (k as f64 * dt))
        .collect();
    ObstaclePrediction {
        positions,
        radius: obstacle.radius,
    }
}

pub fn barrier(robot_pos: Point2, obstacle_pos: Point2, params: &CbfParams, obstacle_radius: f64) -> f64 {
    let reach = obstacle_radius + params.robot_radius + params.margin;
    (robot_pos - obstacle_pos).norm_squared() - reach * reach
}

/// `h_next - (1 - dt * gamma) * h_curr`; the constraint holds iff `>= 0`.
pub fn dcbf_residual(h_next: f64, h_curr: f64, gamma: f64, dt: f64) -> f64 {
    h_next - (1.0 - dt * gamma) * h_curr
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn cbf() -> CbfParams {
        CbfParams {
            gamma: 5.0,
            robot_radius: 0.3,
            margin: 0.0,
        }
    }

    #[test]
    fn prediction() {
        let o = DynamicObstacle {
            position: Point2::ZERO,
            velocity: Point2::new(1.0, 0.0),
            radius: 0.8,
        };
        let p = predict(&o, 10, 0.1);
        assert_eq!(p.positions.len(), 11);
        assert_abs_diff_eq!(p.positions[10].x, 1.0, epsilon = 1e-12);
        assert_eq!(p.positions[10].y, 0.0);

        let still = DynamicObstacle { velocity: Point2::ZERO, ..o };
        assert!(predict(&still, 5, 0.1).positions.iter().all(|&q| q == Point2::ZERO));

        let o = DynamicObstacle {
            velocity: Point2::new(0.3, -0.4),
            ..o
        };
        let p = predict(&o, 3, 0.1);
        assert_abs_diff_eq!(p.positions[3].x, 0.09, epsilon = 1e-12);
        assert_abs_diff_eq!(p.positions[3].y, -0.12, epsilon = 1e-12);
    }

    #[test]
    fn barrier_values() {
        assert_abs_diff_eq!(barrier(Point2::new(3.0, 0.0), Point2::ZERO, &cbf(), 0.8), 7.79, epsilon = 1e-12);
        assert_abs_diff_eq!(barrier(Point2::new(0.0, 1.1), Point2::ZERO, &cbf(), 0.8), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(barrier(Point2::ZERO, Point2::ZERO, &cbf(), 0.8), -1.21, epsilon = 1e-12);
    }

    #[test]
    fn residuals() {
        assert_abs_diff_eq!(dcbf_residual(0.5, 1.0, 5.0, 0.1), 0.0, epsilon = 1e-15);
        assert_eq!(dcbf_residual(0.0, 0.0, 5.0, 0.1), 0.0);
        assert_abs_diff_eq!(dcbf_residual(0.9, 2.0, 5.0, 0.1), -0.1, epsilon = 1e-12);
    }

    #[test]
    fn prediction_matches_stepwise_simulation() {
        let o = DynamicObstacle {
            position: Point2::new(1.5, -2.0),
            velocity: Point2::new(0.37, 0.11),
            radius: 0.8,
        };
        let p = predict(&o, 10, 0.1);
        for (k, q) in p.positions.iter().enumerate() {
            let sim = o.position + o.velocity * (k as f64 * 0.1);
            assert_eq!(*q, sim);
        }
    }

    /// Time derivative of `h` along straight-line motion equals the
    /// chain-rule expression `dh/dp_r . v_r + dh/dp_o . v_o`.
    #[test]
    fn continuous_derivative_matches_finite_difference() {
        let (pr, vr) = (Point2::new(1.0, 2.0), Point2::new(0.4, -0.2));
        let (po, vo) = (Point2::new(-0.5, 0.3), Point2::new(0.1, 0.6));
        let h = |t: f64| barrier(pr + vr * t, po + vo * t, &cbf(), 0.8);
        let eps = 1e-6;
        let fd = (h(eps) - h(-eps)) / (2.0 * eps);
        let d = pr - po;
        let analytic = 2.0 * d.dot(vr) - 2.0 * d.dot(vo);
        assert_abs_diff_eq!(fd, analytic, epsilon = 1e-7);
    }

    proptest! {
        #[test]
        fn barrier_symmetric(ax in -5.0f64..5.0, ay in -5.0f64..5.0, bx in -5.0f64..5.0, by in -5.0f64..5.0) {
            let (a, b) = (Point2::new(ax, ay), Point2::new(bx, by));
            prop_assert_eq!(barrier(a, b, &cbf(), 0.8), barrier(b, a, &cbf(), 0.8));
        }

        #[test]
        fn feasible_sequences_stay_above_decay_bound(
            h0 in 0.0f64..10.0,
            slack in prop::collection::vec(0.0f64..2.0, 1..30),
        ) {
            let (gamma, dt) = (5.0, 0.1);
            let mut h = vec![h0];
            for s in &slack {
                let prev = *h.last().unwrap();
                h.push((1.0 - dt * gamma) * prev + s);
            }
            for k in 0..h.len() {
                if k > 0 {
                    prop_assert!(dcbf_residual(h[k], h[k - 1], gamma, dt) >= -1e-12);
                }
                prop_assert!(h[k] >= 0.5f64.powi(k as i32) * h0 - 1e-9);
            }
        }
    }
}
