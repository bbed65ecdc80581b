use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rectnav_core::dynobs::{barrier, dcbf_residual, predict};
use rectnav_core::{CbfParams, DynamicObstacle, Point2};

const DT: f64 = 0.1;
const GAMMA: f64 = 5.0;

/// Random robot and obstacle walks, keeping only steps that satisfy the
/// discrete barrier condition. Returns the barrier values along the walk.
fn feasible_sequence(seed: u64, steps: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = CbfParams {
        gamma: GAMMA,
        robot_radius: 0.3,
        margin: 0.0,
    };
    let radius = 0.8;
    let mut robot = Point2::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
    let mut obs = Point2::ZERO;
    while barrier(robot, obs, &params, radius) < 0.0 {
        robot = robot * 1.5 + Point2::new(1.2, 0.0);
    }
    let mut hs = vec![barrier(robot, obs, &params, radius)];
    while hs.len() <= steps {
        let r = robot + Point2::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3));
        let o = obs + Point2::new(rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2));
        let h = barrier(r, o, &params, radius);
        if dcbf_residual(h, *hs.last().unwrap(), GAMMA, DT) >= 0.0 {
            robot = r;
            obs = o;
            hs.push(h);
        }
    }
    hs
}

proptest! {
    #[test]
    fn discrete_barrier_decays_at_most_geometrically(seed in any::<u64>()) {
        let hs = feasible_sequence(seed, 25);
        let rate = 1.0 - GAMMA * DT;
        for (k, &h) in hs.iter().enumerate() {
            let bound = rate.powi(k as i32) * hs[0];
            prop_assert!(h >= bound * (1.0 - 1e-12) - 1e-12, "k={k}: {h} < {bound}");
            prop_assert!(h >= 0.0);
        }
    }

    #[test]
    fn barrier_is_symmetric(a in (-9.0f64..9.0, -9.0f64..9.0), b in (-9.0f64..9.0, -9.0f64..9.0), r in 0.1f64..2.0) {
        let p = CbfParams::default();
        let (a, b) = (Point2::new(a.0, a.1), Point2::new(b.0, b.1));
        prop_assert_eq!(barrier(a, b, &p, r), barrier(b, a, &p, r));
    }
}

#[test]
fn prediction_replays_constant_velocity_motion() {
    let o = DynamicObstacle {
        position: Point2::new(1.0, -2.0),
        velocity: Point2::new(0.3, 0.7),
        radius: 0.8,
    };
    let pred = predict(&o, 10, DT);
    for (k, p) in pred.positions.iter().enumerate() {
        assert_eq!(*p, o.position + o.velocity * (k as f64 * DT));
    }
}
