use std::path::PathBuf;

use rectnav_core::navsim::{run, NavStatus};
use rectnav_core::scenario::load_scenario;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/scenarios").join(name)
}

#[test]
fn shipped_scenarios_load() {
    for name in ["case1.json", "case3.json", "unreachable.json"] {
        let (scenario, setup) = load_scenario(&fixture(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(setup.agents.len(), scenario.starts.len());
        for a in &setup.agents {
            assert!(setup.grid.is_free(a.start.position()));
        }
    }
}

#[test]
fn case3_agents_start_and_end_clear_of_each_other() {
    let (scenario, setup) = load_scenario(&fixture("case3.json")).unwrap();
    let reach = 2.0 * setup.cbf.robot_radius;
    for poses in [&scenario.starts, &scenario.goals] {
        for (i, a) in poses.iter().enumerate() {
            for b in &poses[i + 1..] {
                assert!(a.position().distance(b.position()) > reach);
            }
        }
    }
}

#[test]
fn goal_inside_wall_is_unreachable() {
    let (_, setup) = load_scenario(&fixture("unreachable.json")).unwrap();
    assert!(!setup.grid.is_free(setup.agents[0].goal.position()));
    let result = run(&setup).unwrap();
    assert_eq!(result.outcomes[0].status, NavStatus::Unreachable);
}
