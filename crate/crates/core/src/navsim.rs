//! Closed-loop receding-horizon navigation, single- and multi-agent.
//!
//! Every tick each running agent picks the corridor it is in, takes the next
//! two corridor seeds as targets, predicts the obstacles it can see (scripted
//! obstacles and the other agents) at constant velocity, solves the horizon
//! problem and applies the first control. Corridors are rebuilt from the
//! current pose every `replan_period` seconds and whenever the pose is
//! outside all corridors or the corridor index would go backwards.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corridor::{make_constraint, plan_corridors, Corridor, CorridorConstraint, CorridorParams, PlanError};
use crate::dynobs::{barrier, predict, CbfParams, DynamicObstacle, ObstaclePrediction};
use crate::geom::Point2;
use crate::gridmap::OccupancyGrid;
use crate::ocp::{self, shift_warm_start, step_dynamics, Control, OcpConfig, OcpProblem, Pose, SolveStatus};

/// Barrier value below which a true pose counts as a collision.
pub const COLLISION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stepping {
    /// Agents move one after another and see each other's fresh state.
    RoundRobin,
    /// Agents all plan against the state at the start of the tick.
    Jacobi,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NavConfig {
    /// Goal tolerance, meters.
    pub d_max: f64,
    /// Corridor regeneration period, seconds.
    pub replan_period: f64,
    /// Plant integration step, seconds.
    pub sim_dt: f64,
    pub max_ticks: usize,
    /// Consecutive failed solves before an agent is declared stuck.
    pub max_failures: usize,
    pub stepping: Stepping,
}

impl Default for NavConfig {
    fn default() -> Self {
        Self {
            d_max: 0.2,
            replan_period: 1.0,
            sim_dt: 0.1,
            max_ticks: 3000,
            max_failures: 3,
            stepping: Stepping::RoundRobin,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NavError {
    #[error("invalid navigation setup: {0}")]
    Invalid(String),
    #[error("pose ({x:.3}, {y:.3}) is outside every corridor")]
    CorridorBreach { x: f64, y: f64 },
}

impl NavConfig {
    pub fn validate(&self, ocp_dt: f64) -> Result<(), NavError> {
        let bad = |m: &str| Err(NavError::Invalid(m.to_string()));
        if !(self.d_max > 0.0) {
            return bad("d_max must be positive");
        }
        if !(self.replan_period > 0.0) {
            return bad("replan_period must be positive");
        }
        if !(self.sim_dt > 0.0 && self.sim_dt <= ocp_dt + 1e-12) {
            return bad("sim_dt must lie in (0, ocp dt]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NavStatus {
    Running,
    Reached,
    Stuck,
    Collided,
    /// No path to the goal from the start.
    Unreachable,
}

impl NavStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            NavStatus::Running => "running",
            NavStatus::Reached => "reached",
            NavStatus::Stuck => "stuck",
            NavStatus::Collided => "collided",
            NavStatus::Unreachable => "unreachable",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NavState {
    pub pose: Pose,
    pub corridor_index: usize,
    pub tick: usize,
    /// Simulation time of the last corridor rebuild, seconds.
    pub last_replan: f64,
    pub status: NavStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub time: f64,
    pub agent: usize,
    pub pose: Pose,
    pub command: Control,
    pub corridor_index: usize,
    /// Worst barrier value over all obstacles; `None` without obstacles.
    pub min_h: Option<f64>,
    /// `None` on rows where no problem was solved.
    pub solver_status: Option<SolveStatus>,
    pub relaxed: bool,
}

/// Obstacle following a polyline at constant speed, or moving at constant
/// velocity when it has no waypoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedObstacle {
    pub position: Point2,
    pub velocity: Point2,
    pub radius: f64,
    /// Visited in order after `position`, at speed `|velocity|`; the
    /// obstacle stops at the last one.
    #[serde(default, rename = "script")]
    pub waypoints: Vec<Point2>,
}

impl ScriptedObstacle {
    /// Position and velocity at time `t`.
    pub fn state_at(&self, t: f64) -> (Point2, Point2) {
        if self.waypoints.is_empty() {
            return (self.position + self.velocity * t, self.velocity);
        }
        let speed = self.velocity.norm();
        let mut remaining = speed * t;
        let mut from = self.position;
        for &to in &self.waypoints {
            let seg = to - from;
            let len = seg.norm();
            if len > 0.0 && remaining < len {
                let dir = seg * (1.0 / len);
                return (from + dir * remaining, dir * speed);
            }
            remaining -= len;
            from = to;
        }
        (from, Point2::ZERO)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub start: Pose,
    pub goal: Pose,
}

/// Everything a run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct SimSetup {
    pub grid: OccupancyGrid,
    pub agents: Vec<AgentSpec>,
    pub obstacles: Vec<ScriptedObstacle>,
    pub corridor_params: CorridorParams,
    pub ocp: OcpConfig,
    /// Barrier parameters used by the solver. Collision checks on true
    /// positions use the same radius without the margin.
    pub cbf: CbfParams,
    pub nav: NavConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentOutcome {
    pub status: NavStatus,
    pub ticks: usize,
    /// Ticks whose starting pose was outside every corridor.
    pub breaches: usize,
    pub relaxed_ticks: usize,
    pub replans: usize,
    pub path_length: f64,
    /// Smallest barrier value over the run, if there were obstacles.
    pub min_h: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    /// Rows ordered by tick, then agent.
    pub trace: Vec<TraceRecord>,
    pub outcomes: Vec<AgentOutcome>,
    /// Corridors planned at the start of the run, per agent.
    pub initial_corridors: Vec<Vec<Corridor>>,
    /// Smallest center distance between any two agents over all ticks.
    pub min_pairwise_distance: Option<f64>,
}

impl RunResult {
    pub fn all_reached(&self) -> bool {
        self.outcomes.iter().all(|o| o.status == NavStatus::Reached)
    }
}

/// Closed-ball goal test on position only.
pub fn reach_goal(pose: &Pose, goal: &Pose, d_max: f64) -> bool {
    pose.position().distance(goal.position()) <= d_max
}

fn bearing(from: Point2, to: Point2, fallback: f64) -> f64 {
    let d = to - from;
    if d.norm() < 1e-9 {
        fallback
    } else {
        d.y.atan2(d.x)
    }
}

/// Highest-index corridor containing `pose` and the two targets after it:
/// the seeds of the next two corridors, with the goal standing in past the
/// end of the list. Each target faces its successor.
pub fn current_corridor(pose: &Pose, corridors: &[Corridor], goal: &Pose) -> Result<(Pose, Pose, usize), NavError> {
    let p = pose.position();
    let index = corridors
        .iter()
        .rposition(|c| c.contains(p, 0.0))
        .ok_or(NavError::CorridorBreach { x: p.x, y: p.y })?;
    let (target1, target2) = targets_after(index, corridors, goal);
    Ok((target1, target2, index))
}

fn targets_after(index: usize, corridors: &[Corridor], goal: &Pose) -> (Pose, Pose) {
    let point = |i: usize| corridors.get(i).map_or(goal.position(), |c| c.seed);
    let (a, b, c) = (point(index + 1), point(index + 2), point(index + 3));
    (
        Pose::new(a.x, a.y, bearing(a, b, goal.psi)),
        Pose::new(b.x, b.y, bearing(b, c, goal.psi)),
    )
}

/// Constraint for corridor `c`, shrinking less when the rectangle is too
/// thin for the configured inset or when `cap` limits it.
fn corridor_constraint(c: &Corridor, delta_s: f64, cap: f64) -> CorridorConstraint {
    let width = c.v_right.x - c.v_left.x;
    let height = c.v_right.y - c.v_left.y;
    let shrink = delta_s.min(0.45 * width.min(height)).min(cap);
    make_constraint(c, shrink).unwrap_or_else(|_| CorridorConstraint::unbounded())
}

/// Per-agent loop state beyond [`NavState`].
#[derive(Debug, Clone)]
struct Agent {
    state: NavState,
    goal: Pose,
    corridors: Vec<Corridor>,
    /// Inset limit for corridor 0, which is seeded at the pose of the last
    /// rebuild. Keeps that pose one full step inside the constraint when it
    /// was rebuilt close to a wall.
    first_shrink: f64,
    warm: Option<Vec<Control>>,
    velocity: Point2,
    failures: usize,
    outcome: AgentOutcome,
}

/// Obstacle seen by one agent: position, velocity and radius.
type Sighting = (Point2, Point2, f64);

struct Sim<'a> {
    setup: &'a SimSetup,
    agents: Vec<Agent>,
    substeps: usize,
}

impl Sim<'_> {
    fn replan(&self, agent: &mut Agent, time: f64) -> Result<(), PlanError> {
        let (_, corridors) = plan_corridors(
            &self.setup.grid,
            agent.state.pose.position(),
            agent.goal.position(),
            &self.setup.corridor_params,
        )?;
        let seed_clearance = corridors.first().map_or(f64::INFINITY, |c| {
            c.v_right.x.min(c.v_right.y).min(-c.v_left.x).min(-c.v_left.y)
        });
        let step = self.setup.ocp.u_max * self.setup.ocp.dt;
        agent.first_shrink = (seed_clearance - step).max(0.0);
        agent.corridors = corridors;
        agent.state.last_replan = time;
        agent.outcome.replans += 1;
        Ok(())
    }

    /// Scripted obstacles and every other agent, as seen at `time`.
    fn sightings(&self, me: usize, time: f64, snapshot: &[(Point2, Point2)]) -> Vec<Sighting> {
        let mut out: Vec<Sighting> = self
            .setup
            .obstacles
            .iter()
            .map(|o| {
                let (p, v) = o.state_at(time);
                (p, v, o.radius)
            })
            .collect();
        for (j, &(p, v)) in snapshot.iter().enumerate() {
            if j != me {
                out.push((p, v, self.setup.cbf.robot_radius));
            }
        }
        out
    }

    fn true_min_h(&self, me: usize, time: f64, snapshot: &[(Point2, Point2)]) -> Option<f64> {
        let physical = CbfParams {
            margin: 0.0,
            ..self.setup.cbf
        };
        let pos = snapshot[me].0;
        self.sightings(me, time, snapshot)
            .iter()
            .map(|&(p, _, r)| barrier(pos, p, &physical, r))
            .reduce(f64::min)
    }

    fn snapshot(&self) -> Vec<(Point2, Point2)> {
        self.agents.iter().map(|a| (a.state.pose.position(), a.velocity)).collect()
    }

    fn constraint_for(&self, agent: &Agent, idx: usize) -> CorridorConstraint {
        let cap = if idx == 0 { agent.first_shrink } else { f64::INFINITY };
        corridor_constraint(&agent.corridors[idx], self.setup.corridor_params.delta_s, cap)
    }

    /// Solves and applies one control for agent `i`. Returns the trace row.
    fn advance(&mut self, i: usize, time: f64, snapshot: &[(Point2, Point2)], min_h: Option<f64>) -> TraceRecord {
        let setup = self.setup;
        let cfg = &setup.ocp;
        let sightings = self.sightings(i, time, snapshot);
        let mut agent = self.agents[i].clone();

        let due = time - agent.state.last_replan >= setup.nav.replan_period - 1e-9;
        let mut lookup = current_corridor(&agent.state.pose, &agent.corridors, &agent.goal);
        let regressed = matches!(lookup, Ok((_, _, idx)) if idx < agent.state.corridor_index);
        if lookup.is_err() {
            agent.outcome.breaches += 1;
        }
        if due || lookup.is_err() || regressed {
            if self.replan(&mut agent, time).is_ok() {
                agent.state.corridor_index = 0;
            }
            lookup = current_corridor(&agent.state.pose, &agent.corridors, &agent.goal);
        }
        let (target1, target2, index, corridor) = match lookup {
            Ok((t1, t2, idx)) => (t1, t2, idx, self.constraint_for(&agent, idx)),
            Err(_) => {
                // Outside every corridor even after a rebuild: steer for the
                // nearest corridor, whose rows the solver relaxes at first.
                let idx = nearest_corridor(&agent.corridors, agent.state.pose.position());
                let (t1, t2) = targets_after(idx, &agent.corridors, &agent.goal);
                (t1, t2, idx, self.constraint_for(&agent, idx))
            }
        };
        agent.state.corridor_index = index;

        let obstacles: Vec<ObstaclePrediction> = sightings
            .iter()
            .map(|&(position, velocity, radius)| {
                predict(
                    &DynamicObstacle {
                        position,
                        velocity,
                        radius,
                    },
                    cfg.horizon,
                    cfg.dt,
                )
            })
            .collect();
        let problem = OcpProblem {
            initial: agent.state.pose,
            target1,
            target2,
            corridor,
            obstacles,
            robot_radius: setup.cbf.robot_radius,
            safety_margin: setup.cbf.margin,
            config: cfg.clone(),
            warm_start: agent.warm.take(),
        };
        let solution = ocp::solve(&problem);

        let command = if solution.status == SolveStatus::Failed {
            agent.failures += 1;
            Control::ZERO
        } else {
            agent.failures = 0;
            agent.warm = Some(shift_warm_start(&solution.controls));
            solution.controls[0]
        };
        let relaxed = solution.status == SolveStatus::InfeasibleRelaxed;
        if relaxed {
            agent.outcome.relaxed_ticks += 1;
        }

        let record = TraceRecord {
            time,
            agent: i,
            pose: agent.state.pose,
            command,
            corridor_index: index,
            min_h,
            solver_status: Some(solution.status),
            relaxed,
        };

        let before = agent.state.pose;
        let h = cfg.dt / self.substeps as f64;
        let mut pose = before;
        for _ in 0..self.substeps {
            pose = step_dynamics(pose, command, h);
        }
        agent.outcome.path_length += pose.position().distance(before.position());
        agent.velocity = Point2::new(pose.psi.cos(), pose.psi.sin()) * command.u;
        agent.state.pose = pose;
        agent.state.tick += 1;
        agent.outcome.ticks = agent.state.tick;
        if agent.failures >= setup.nav.max_failures {
            agent.state.status = NavStatus::Stuck;
        }
        self.agents[i] = agent;
        record
    }
}

fn nearest_corridor(corridors: &[Corridor], p: Point2) -> usize {
    let outside = |c: &Corridor| {
        let e = c.to_local(p);
        let dx = (c.v_left.x - e.x).max(e.x - c.v_right.x).max(0.0);
        let dy = (c.v_left.y - e.y).max(e.y - c.v_right.y).max(0.0);
        dx.hypot(dy)
    };
    let mut best = 0;
    for (i, c) in corridors.iter().enumerate() {
        if outside(c) < outside(&corridors[best]) {
            best = i;
        }
    }
    best
}

fn stopped_record(time: f64, agent: usize, state: &NavState, min_h: Option<f64>) -> TraceRecord {
    TraceRecord {
        time,
        agent,
        pose: state.pose,
        command: Control::ZERO,
        corridor_index: state.corridor_index,
        min_h,
        solver_status: None,
        relaxed: false,
    }
}

/// Runs every agent until none is running.
pub fn run(setup: &SimSetup) -> Result<RunResult, NavError> {
    setup.nav.validate(setup.ocp.dt)?;
    setup.ocp.validate().map_err(|e| NavError::Invalid(e.to_string()))?;
    setup
        .corridor_params
        .validate()
        .map_err(|e| NavError::Invalid(e.to_string()))?;
    if setup.agents.is_empty() {
        return Err(NavError::Invalid("no agents".into()));
    }
    let substeps = ((setup.ocp.dt / setup.nav.sim_dt).round() as usize).max(1);

    let mut sim = Sim {
        setup,
        agents: Vec::with_capacity(setup.agents.len()),
        substeps,
    };
    let mut initial_corridors = Vec::new();
    for spec in &setup.agents {
        let mut agent = Agent {
            state: NavState {
                pose: spec.start,
                corridor_index: 0,
                tick: 0,
                last_replan: 0.0,
                status: NavStatus::Running,
            },
            goal: spec.goal,
            corridors: Vec::new(),
            first_shrink: f64::INFINITY,
            warm: None,
            velocity: Point2::ZERO,
            failures: 0,
            outcome: AgentOutcome {
                status: NavStatus::Running,
                ticks: 0,
                breaches: 0,
                relaxed_ticks: 0,
                replans: 0,
                path_length: 0.0,
                min_h: None,
                error: None,
            },
        };
        if let Err(e) = sim.replan(&mut agent, 0.0) {
            agent.state.status = NavStatus::Unreachable;
            agent.outcome.error = Some(e.to_string());
        }
        initial_corridors.push(agent.corridors.clone());
        sim.agents.push(agent);
    }

    let n = sim.agents.len();
    let mut trace = Vec::new();
    let mut min_pair: Option<f64> = None;
    let mut tick = 0usize;
    loop {
        let time = tick as f64 * setup.ocp.dt;
        let snapshot = sim.snapshot();
        for a in 0..n {
            for b in a + 1..n {
                let d = snapshot[a].0.distance(snapshot[b].0);
                min_pair = Some(min_pair.map_or(d, |m: f64| m.min(d)));
            }
        }

        // Status updates against the true world at the start of the tick.
        let mut min_hs = Vec::with_capacity(n);
        for i in 0..n {
            let min_h = sim.true_min_h(i, time, &snapshot);
            let agent = &mut sim.agents[i];
            if let Some(h) = min_h {
                agent.outcome.min_h = Some(agent.outcome.min_h.map_or(h, |m: f64| m.min(h)));
            }
            if agent.state.status == NavStatus::Running {
                let p = agent.state.pose.position();
                if min_h.is_some_and(|h| h < -COLLISION_TOL) || !setup.grid.is_free(p) {
                    agent.state.status = NavStatus::Collided;
                    trace.push(stopped_record(time, i, &agent.state, min_h));
                } else if reach_goal(&agent.state.pose, &agent.goal, setup.nav.d_max) {
                    agent.state.status = NavStatus::Reached;
                    agent.velocity = Point2::ZERO;
                    trace.push(stopped_record(time, i, &agent.state, min_h));
                } else if tick >= setup.nav.max_ticks {
                    agent.state.status = NavStatus::Stuck;
                    trace.push(stopped_record(time, i, &agent.state, min_h));
                }
            }
            min_hs.push(min_h);
        }
        if sim.agents.iter().all(|a| a.state.status != NavStatus::Running) {
            break;
        }

        for (i, &min_h) in min_hs.iter().enumerate() {
            if sim.agents[i].state.status != NavStatus::Running {
                continue;
            }
            let view = match setup.nav.stepping {
                Stepping::RoundRobin => sim.snapshot(),
                Stepping::Jacobi => snapshot.clone(),
            };
            let record = sim.advance(i, time, &view, min_h);
            trace.push(record);
        }
        tick += 1;
    }

    let outcomes = sim
        .agents
        .into_iter()
        .map(|a| AgentOutcome {
            status: a.state.status,
            ..a.outcome
        })
        .collect();
    Ok(RunResult {
        trace,
        outcomes,
        initial_corridors,
        min_pairwise_distance: min_pair,
    })
}

pub const TRACE_HEADER: &str = "time,agent,x,y,psi,u_cmd,r_cmd,corridor_idx,min_h,solver_status,relaxed";

/// CSV rendering of a trace, preceded by one `#` line with the loop settings.
pub fn trace_to_csv(trace: &[TraceRecord], nav: &NavConfig) -> String {
    let mut out = format!(
        "# d_max={} replan_period={} sim_dt={}\n{}\n",
        nav.d_max, nav.replan_period, nav.sim_dt, TRACE_HEADER
    );
    for r in trace {
        let min_h = r.min_h.map(|h| h.to_string()).unwrap_or_default();
        let status = r.solver_status.map(|s| s.as_str()).unwrap_or("none");
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.time, r.agent, r.pose.x, r.pose.y, r.pose.psi, r.command.u, r.command.r, r.corridor_index, min_h, status, r.relaxed
        ));
    }
    out
}

#[derive(Debug, Error, PartialEq)]
#[error("trace line {line}: {reason}")]
pub struct TraceParseError {
    pub line: usize,
    pub reason: String,
}

/// Parses [`trace_to_csv`] output back into records.
pub fn trace_from_csv(text: &str) -> Result<Vec<TraceRecord>, TraceParseError> {
    let mut out = Vec::new();
    let mut seen_header = false;
    for (n, line) in text.lines().enumerate() {
        let err = |reason: String| TraceParseError { line: n + 1, reason };
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        if !seen_header {
            if line != TRACE_HEADER {
                return Err(err("unexpected header".into()));
            }
            seen_header = true;
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 11 {
            return Err(err(format!("expected 11 fields, found {}", f.len())));
        }
        let num = |i: usize| f[i].parse::<f64>().map_err(|e| err(format!("field {}: {e}", i + 1)));
        let int = |i: usize| f[i].parse::<usize>().map_err(|e| err(format!("field {}: {e}", i + 1)));
        let solver_status = match f[9] {
            "none" => None,
            "optimal" => Some(SolveStatus::Optimal),
            "feasible_suboptimal" => Some(SolveStatus::FeasibleSuboptimal),
            "infeasible_relaxed" => Some(SolveStatus::InfeasibleRelaxed),
            "failed" => Some(SolveStatus::Failed),
            other => return Err(err(format!("unknown solver status {other:?}"))),
        };
        out.push(TraceRecord {
            time: num(0)?,
            agent: int(1)?,
            pose: Pose {
                x: num(2)?,
                y: num(3)?,
                psi: num(4)?,
            },
            command: Control::new(num(5)?, num(6)?),
            corridor_index: int(7)?,
            min_h: if f[8].is_empty() { None } else { Some(num(8)?) },
            solver_status,
            relaxed: f[10].parse().map_err(|e| err(format!("field 11: {e}")))?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
