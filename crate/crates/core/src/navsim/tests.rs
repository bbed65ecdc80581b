use approx::assert_abs_diff_eq;

use super::*;
use crate::corridor::CorridorParams;

fn empty_setup(start: Pose, goal: Pose) -> SimSetup {
    SimSetup {
        grid: OccupancyGrid::empty(200, 200, 0.1, Point2::ZERO).unwrap(),
        agents: vec![AgentSpec { start, goal }],
        obstacles: Vec::new(),
        corridor_params: CorridorParams::default(),
        ocp: OcpConfig::default(),
        cbf: CbfParams::default(),
        nav: NavConfig::default(),
    }
}

fn square(seed: Point2, half: f64) -> Corridor {
    Corridor {
        seed,
        v_left: Point2::new(-half, -half),
        v_right: Point2::new(half, half),
        theta: 0.0,
    }
}

#[test]
fn goal_ball_is_closed() {
    let goal = Pose::new(1.0, 1.0, 0.0);
    assert!(reach_goal(&goal, &goal, 0.2));
    assert!(reach_goal(&Pose::new(1.25, 1.0, 0.0), &goal, 0.25));
    assert!(!reach_goal(&Pose::new(1.2 + 1e-9, 1.0, 0.0), &goal, 0.2));
}

#[test]
fn corridor_selection() {
    let goal = Pose::new(9.0, 0.0, 0.3);
    let corridors: Vec<Corridor> = (0..5).map(|i| square(Point2::new(2.0 * i as f64, 0.0), 1.2)).collect();
    // x = 5.0 lies in corridors 2 (seed 4) and 3 (seed 6).
    let (t1, t2, idx) = current_corridor(&Pose::new(5.0, 0.0, 0.0), &corridors, &goal).unwrap();
    assert_eq!(idx, 3);
    assert_eq!(t1.position(), corridors[4].seed);
    assert_eq!(t2.position(), goal.position());
    assert_abs_diff_eq!(t1.psi, 0.0);
    assert_eq!(t2.psi, goal.psi);

    let (t1, t2, idx) = current_corridor(&Pose::new(8.5, 0.0, 0.0), &corridors, &goal).unwrap();
    assert_eq!(idx, 4);
    assert_eq!((t1, t2), (goal, goal));

    let single = [square(Point2::ZERO, 2.0)];
    let (t1, t2, idx) = current_corridor(&Pose::new(0.5, 0.5, 0.0), &single, &goal).unwrap();
    assert_eq!(idx, 0);
    assert_eq!((t1, t2), (goal, goal));

    assert!(matches!(
        current_corridor(&Pose::new(50.0, 0.0, 0.0), &corridors, &goal),
        Err(NavError::CorridorBreach { .. })
    ));
}

#[test]
fn scripted_obstacle_follows_waypoints() {
    let o = ScriptedObstacle {
        position: Point2::ZERO,
        velocity: Point2::new(0.0, 0.5),
        radius: 0.8,
        waypoints: vec![Point2::new(1.0, 0.0), Point2::new(1.0, 1.0)],
    };
    let (p, v) = o.state_at(1.0);
    assert_abs_diff_eq!(p.x, 0.5, epsilon = 1e-12);
    assert_abs_diff_eq!(v.x, 0.5, epsilon = 1e-12);
    let (p, v) = o.state_at(3.0);
    assert_abs_diff_eq!(p.y, 0.5, epsilon = 1e-12);
    assert_abs_diff_eq!(v.y, 0.5, epsilon = 1e-12);
    assert_eq!(o.state_at(10.0), (Point2::new(1.0, 1.0), Point2::ZERO));

    let straight = ScriptedObstacle { waypoints: Vec::new(), ..o };
    assert_eq!(straight.state_at(2.0), (Point2::new(0.0, 1.0), Point2::new(0.0, 0.5)));
}

#[test]
fn reaches_goal_on_empty_map() {
    let start = Pose::new(5.0, 10.0, 0.0);
    let goal = Pose::new(15.0, 10.0, 0.0);
    let result = run(&empty_setup(start, goal)).unwrap();
    let o = &result.outcomes[0];
    assert_eq!(o.status, NavStatus::Reached);
    assert_eq!(o.breaches, 0);
    assert_eq!(o.relaxed_ticks, 0);
    let straight = start.position().distance(goal.position());
    assert!(o.path_length <= 1.15 * straight, "{} vs {}", o.path_length, straight);
    let last = result.trace.last().unwrap();
    assert!(reach_goal(&last.pose, &goal, 0.2));
    assert_eq!(last.command, Control::ZERO);
    assert!(result.trace.iter().all(|r| r.min_h.is_none()));
    for r in &result.trace {
        assert!(r.command.u.abs() <= 1.0 + 1e-9 && r.command.r.abs() <= 1.5 + 1e-9);
    }
}

#[test]
fn already_at_goal() {
    let p = Pose::new(3.0, 3.0, 0.0);
    let result = run(&empty_setup(p, p)).unwrap();
    assert_eq!(result.outcomes[0].status, NavStatus::Reached);
    assert_eq!(result.trace.len(), 1);
    assert_eq!(result.trace[0].command, Control::ZERO);
    assert_eq!(result.trace[0].solver_status, None);
}

#[test]
fn unreachable_goal_is_reported() {
    let mut setup = empty_setup(Pose::new(2.0, 2.0, 0.0), Pose::new(15.0, 2.0, 0.0));
    setup.grid = OccupancyGrid::from_fn(200, 200, 0.1, Point2::ZERO, |x, _| x == 100).unwrap();
    let result = run(&setup).unwrap();
    assert_eq!(result.outcomes[0].status, NavStatus::Unreachable);
    assert!(result.outcomes[0].error.is_some());
}

#[test]
fn plant_matches_solver_prediction() {
    // With sim_dt equal to the solver step, the first realized pose is the
    // solver's own one-step prediction.
    let start = Pose::new(5.0, 10.0, 0.4);
    let goal = Pose::new(15.0, 12.0, 0.0);
    let mut setup = empty_setup(start, goal);
    setup.nav.max_ticks = 1;
    let result = run(&setup).unwrap();
    let first = &result.trace[0];
    let predicted = step_dynamics(start, first.command, setup.ocp.dt);
    let second = result.trace.iter().find(|r| r.time > 0.0).unwrap();
    assert_abs_diff_eq!(second.pose.x, predicted.x, epsilon = 1e-12);
    assert_abs_diff_eq!(second.pose.y, predicted.y, epsilon = 1e-12);
    assert_abs_diff_eq!(second.pose.psi, predicted.psi, epsilon = 1e-12);
    assert!(second.pose.x > start.x);
    assert_eq!(result.outcomes[0].status, NavStatus::Stuck);
}

#[test]
fn crossing_obstacle_keeps_barrier_positive() {
    let start = Pose::new(3.0, 10.0, 0.0);
    let goal = Pose::new(17.0, 10.0, 0.0);
    let mut setup = empty_setup(start, goal);
    setup.obstacles.push(ScriptedObstacle {
        position: Point2::new(10.0, 14.0),
        velocity: Point2::new(0.0, -0.5),
        radius: 0.8,
        waypoints: Vec::new(),
    });
    let result = run(&setup).unwrap();
    assert_eq!(result.outcomes[0].status, NavStatus::Reached);
    assert!(result.trace.iter().all(|r| r.min_h.unwrap() >= -1e-6));
}

#[test]
fn runs_are_deterministic_and_csv_round_trips() {
    let start = Pose::new(3.0, 3.0, 0.0);
    let goal = Pose::new(12.0, 9.0, 0.0);
    let a = run(&empty_setup(start, goal)).unwrap();
    let b = run(&empty_setup(start, goal)).unwrap();
    let nav = NavConfig::default();
    let csv = trace_to_csv(&a.trace, &nav);
    assert_eq!(csv, trace_to_csv(&b.trace, &nav));
    let back = trace_from_csv(&csv).unwrap();
    assert_eq!(back, a.trace);
    assert!(csv.lines().nth(1) == Some(TRACE_HEADER));
}

#[test]
fn rejects_bad_config() {
    let mut setup = empty_setup(Pose::new(1.0, 1.0, 0.0), Pose::new(2.0, 2.0, 0.0));
    setup.nav.sim_dt = 0.5;
    assert!(matches!(run(&setup), Err(NavError::Invalid(_))));
}
