//! Finite-horizon optimal control for a unicycle robot.
//!
//! The robot state is a [`Pose`], the input a [`Control`] (surge speed and
//! yaw rate). Each tick solves
//!
//! ```text
//! min  sum_k J_k(eta_k, nu_k) + J_N(eta_N)
//! s.t. eta_{k+1} = g(eta_k, nu_k),  box bounds on nu_k,
//!      corridor half-planes on eta_{k+1},
//!      discrete barrier decay for every predicted obstacle
//! ```
//!
//! by single shooting and an augmented-Lagrangian method ([`nlp`]). When the
//! hard problem has no feasible point the constraints are moved into a
//! quadratic penalty and the result is flagged [`SolveStatus::InfeasibleRelaxed`].

pub mod audit;
pub mod nlp;
pub mod shooting;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corridor::CorridorConstraint;
use crate::dynobs::{CbfParams, ObstaclePrediction};
use crate::geom::{normalize_angle, Point2};

use nlp::{minimize_al, minimize_box, AlSettings, InequalityNlp};
use shooting::ShootingNlp;

/// Quadratic weight on corridor violation in the relaxed fallback.
pub const SLACK_WEIGHT: f64 = 1e4;
/// Quadratic weight on barrier violation in the relaxed fallback; leaving
/// the corridor is preferred over closing in on an obstacle.
pub const BARRIER_SLACK_WEIGHT: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    /// Heading, radians in `(-pi, pi]`.
    pub psi: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, psi: f64) -> Self {
        Self {
            x,
            y,
            psi: normalize_angle(psi),
        }
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.psi.is_finite()
    }
}

impl From<[f64; 3]> for Pose {
    fn from(v: [f64; 3]) -> Self {
        Pose::new(v[0], v[1], v[2])
    }
}

impl From<Pose> for [f64; 3] {
    fn from(p: Pose) -> Self {
        [p.x, p.y, p.psi]
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Control {
    /// Surge speed, m/s.
    pub u: f64,
    /// Yaw rate, rad/s.
    pub r: f64,
}

impl Control {
    pub const ZERO: Control = Control { u: 0.0, r: 0.0 };

    pub fn new(u: f64, r: f64) -> Self {
        Self { u, r }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OcpError {
    #[error("invalid OCP configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OcpConfig {
    pub horizon: usize,
    pub dt: f64,
    /// Weights on the first target, `[x, y, psi]`.
    pub q1: [f64; 3],
    /// Weights on the second target.
    pub q2: [f64; 3],
    /// Input weights `[u, r]`.
    pub r_w: [f64; 2],
    /// Input-rate weights `[u, r]`.
    pub s_w: [f64; 2],
    pub u_min: f64,
    pub u_max: f64,
    pub r_max: f64,
    /// Barrier decay rate, 1/s.
    pub gamma: f64,
    pub constraint_tol: f64,
    /// Lower the surge bound to zero so the robot may stand still.
    pub allow_stop: bool,
    pub solver: AlSettings,
}

impl Default for OcpConfig {
    fn default() -> Self {
        Self {
            horizon: 10,
            dt: 0.1,
            q1: [20.0, 20.0, 0.1],
            q2: [5.0, 5.0, 0.05],
            r_w: [0.1, 0.1],
            s_w: [0.05, 0.05],
            u_min: 0.05,
            u_max: 1.0,
            r_max: 1.5,
            gamma: 5.0,
            constraint_tol: 1e-6,
            allow_stop: false,
            solver: AlSettings::default(),
        }
    }
}

impl OcpConfig {
    pub fn validate(&self) -> Result<(), OcpError> {
        let bad = |m: &str| Err(OcpError::InvalidConfig(m.to_string()));
        if self.horizon == 0 {
            return bad("horizon must be at least 1");
        }
        if !(self.dt > 0.0) {
            return bad("dt must be positive");
        }
        let weights = self.q1.iter().chain(&self.q2).chain(&self.r_w).chain(&self.s_w);
        if weights.clone().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return bad("weights must be finite and non-negative");
        }
        if !(self.u_min <= self.u_max) || !(self.r_max >= 0.0) {
            return bad("input bounds are inconsistent");
        }
        if !(self.gamma > 0.0 && self.gamma * self.dt < 1.0) {
            return bad("gamma * dt must lie in (0, 1)");
        }
        if !(self.constraint_tol > 0.0) {
            return bad("constraint_tol must be positive");
        }
        Ok(())
    }

    /// Effective surge bounds.
    pub fn u_bounds(&self) -> (f64, f64) {
        if self.allow_stop {
            (0.0, self.u_max)
        } else {
            (self.u_min, self.u_max)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OcpProblem {
    pub initial: Pose,
    pub target1: Pose,
    pub target2: Pose,
    pub corridor: CorridorConstraint,
    /// Each prediction holds at least `horizon + 1` positions.
    pub obstacles: Vec<ObstaclePrediction>,
    pub robot_radius: f64,
    pub safety_margin: f64,
    pub config: OcpConfig,
    pub warm_start: Option<Vec<Control>>,
}

impl OcpProblem {
    /// Unconstrained problem with a single target and default configuration.
    pub fn new(initial: Pose, target: Pose) -> Self {
        Self {
            initial,
            target1: target,
            target2: target,
            corridor: CorridorConstraint::unbounded(),
            obstacles: Vec::new(),
            robot_radius: CbfParams::default().robot_radius,
            safety_margin: 0.0,
            config: OcpConfig::default(),
            warm_start: None,
        }
    }

    pub fn cbf_params(&self) -> CbfParams {
        CbfParams {
            gamma: self.config.gamma,
            robot_radius: self.robot_radius,
            margin: self.safety_margin,
        }
    }

    /// Steps whose corridor rows are dropped: the first `ceil(N/2)` when the
    /// initial pose already violates the corridor, none otherwise.
    pub fn corridor_skip_steps(&self) -> usize {
        let worst = self
            .corridor
            .residuals(self.initial.position())
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max);
        if worst > self.config.constraint_tol {
            self.config.horizon.div_ceil(2)
        } else {
            0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    FeasibleSuboptimal,
    InfeasibleRelaxed,
    Failed,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::FeasibleSuboptimal => "feasible_suboptimal",
            SolveStatus::InfeasibleRelaxed => "infeasible_relaxed",
            SolveStatus::Failed => "failed",
        }
    }

    /// Optimal or feasible: all hard constraints hold within tolerance.
    pub fn is_feasible(&self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::FeasibleSuboptimal)
    }
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Iteration counts and final measures, for logging.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct SolverTrace {
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub final_violation: f64,
    pub projected_gradient: f64,
    pub restarts: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OcpSolution {
    pub controls: Vec<Control>,
    /// Rollout of `controls` from the initial pose, `N + 1` entries.
    pub states: Vec<Pose>,
    pub cost: f64,
    pub status: SolveStatus,
    /// Worst raw constraint residual, clamped at zero.
    pub max_violation: f64,
    /// Per-row constraint violation; only filled for relaxed solutions.
    pub slacks: Vec<f64>,
    /// Steps exempted from the corridor constraint.
    pub corridor_skip_steps: usize,
    pub trace: SolverTrace,
}

pub fn step_dynamics(eta: Pose, nu: Control, dt: f64) -> Pose {
    let (sin, cos) = eta.psi.sin_cos();
    Pose {
        x: eta.x + dt * nu.u * cos,
        y: eta.y + dt * nu.u * sin,
        psi: normalize_angle(eta.psi + dt * nu.r),
    }
}

pub fn rollout(initial: Pose, controls: &[Control], dt: f64) -> Vec<Pose> {
    let mut states = Vec::with_capacity(controls.len() + 1);
    states.push(initial);
    for nu in controls {
        let last = *states.last().expect("nonempty");
        states.push(step_dynamics(last, *nu, dt));
    }
    states
}

fn weighted_error(eta: &Pose, target: &Pose, q: &[f64; 3]) -> f64 {
    let dx = eta.x - target.x;
    let dy = eta.y - target.y;
    let dpsi = normalize_angle(eta.psi - target.psi);
    q[0] * dx * dx + q[1] * dy * dy + q[2] * dpsi * dpsi
}

pub fn terminal_cost(eta: &Pose, problem: &OcpProblem) -> f64 {
    let c = &problem.config;
    weighted_error(eta, &problem.target1, &c.q1) + weighted_error(eta, &problem.target2, &c.q2)
}

/// Stage cost: both target terms, the input term and the input-rate term.
pub fn stage_cost(eta: &Pose, nu: Control, nu_next: Control, problem: &OcpProblem) -> f64 {
    let c = &problem.config;
    let (du, dr) = (nu_next.u - nu.u, nu_next.r - nu.r);
    terminal_cost(eta, problem)
        + c.r_w[0] * nu.u * nu.u
        + c.r_w[1] * nu.r * nu.r
        + c.s_w[0] * du * du
        + c.s_w[1] * dr * dr
}

/// Total horizon cost of a control sequence. The rate term of the last
/// stage has no successor and is omitted.
pub fn total_cost(problem: &OcpProblem, controls: &[Control]) -> f64 {
    let states = rollout(problem.initial, controls, problem.config.dt);
    let n = controls.len();
    let mut cost = terminal_cost(&states[n], problem);
    for k in 0..n {
        let next = if k + 1 < n { controls[k + 1] } else { controls[k] };
        cost += stage_cost(&states[k], controls[k], next, problem);
    }
    cost
}

/// Drops the first control and repeats the last one.
pub fn shift_warm_start(controls: &[Control]) -> Vec<Control> {
    match controls {
        [] => Vec::new(),
        [only] => vec![*only],
        [_, rest @ ..] => {
            let mut v = rest.to_vec();
            v.push(*rest.last().expect("nonempty"));
            v
        }
    }
}

fn to_vector(controls: &[Control]) -> Vec<f64> {
    controls.iter().flat_map(|c| [c.u, c.r]).collect()
}

fn to_controls(z: &[f64]) -> Vec<Control> {
    z.chunks_exact(2).map(|c| Control::new(c[0], c[1])).collect()
}

struct Candidate {
    z: Vec<f64>,
    cost: f64,
    violation: f64,
    optimal: bool,
}

fn failed(problem: &OcpProblem, skip: usize, trace: SolverTrace) -> OcpSolution {
    let n = problem.config.horizon;
    OcpSolution {
        controls: vec![Control::ZERO; n],
        states: vec![problem.initial; n + 1],
        cost: f64::NAN,
        status: SolveStatus::Failed,
        max_violation: f64::NAN,
        slacks: Vec::new(),
        corridor_skip_steps: skip,
        trace,
    }
}

/// Solves the horizon problem. Never panics on numerical trouble: NaNs end in
/// [`SolveStatus::Failed`], an empty feasible set in a relaxed solution.
pub fn solve(problem: &OcpProblem) -> OcpSolution {
    let cfg = &problem.config;
    let skip = problem.corridor_skip_steps();
    let mut trace = SolverTrace::default();
    let valid_obstacles = problem.obstacles.iter().all(|o| o.positions.len() > cfg.horizon);
    if cfg.validate().is_err() || !valid_obstacles || !problem.initial.is_finite() {
        return failed(problem, skip, trace);
    }

    let n = cfg.horizon;
    let nlp = ShootingNlp::new(problem, skip);
    let (u_lo, u_hi) = cfg.u_bounds();
    let lower: Vec<f64> = (0..n).flat_map(|_| [u_lo, -cfg.r_max]).collect();
    let upper: Vec<f64> = (0..n).flat_map(|_| [u_hi, cfg.r_max]).collect();
    let settings = AlSettings {
        feas_tol: cfg.constraint_tol,
        ..cfg.solver
    };
    let violation_of = |cons: &[f64]| cons.iter().fold(0.0f64, |a, &c| a.max(c));

    let warm = problem
        .warm_start
        .as_ref()
        .filter(|w| w.len() == n)
        .map(|w| {
            let mut z = to_vector(w);
            nlp::project(&mut z, &lower, &upper);
            z
        });

    // Starting points: the warm start first, then straight and turning
    // sequences at low speed tried only while no feasible point is found.
    let mut starts: Vec<Vec<f64>> = Vec::new();
    if let Some(z) = &warm {
        starts.push(z.clone());
    }
    for r in [0.0, 0.5 * cfg.r_max, -0.5 * cfg.r_max, cfg.r_max, -cfg.r_max] {
        let mut z: Vec<f64> = (0..n).flat_map(|_| [u_lo.max(0.0), r]).collect();
        nlp::project(&mut z, &lower, &upper);
        starts.push(z);
    }

    let mut best: Option<Candidate> = None;
    let mut closest: Option<Candidate> = None;
    for (i, z0) in starts.iter().enumerate() {
        if i > 0 && best.is_some() {
            break;
        }
        if i > 0 {
            trace.restarts += 1;
        }
        let res = minimize_al(&nlp, z0, &lower, &upper, &settings);
        trace.outer_iterations += res.outer_iterations;
        trace.inner_iterations += res.inner_iterations;
        if !res.is_finite() {
            continue;
        }
        let cand = Candidate {
            cost: res.objective,
            violation: res.max_violation,
            optimal: res.max_violation <= settings.feas_tol && res.projected_gradient <= settings.opt_tol,
            z: res.x,
        };
        trace.final_violation = res.max_violation;
        trace.projected_gradient = res.projected_gradient;
        if cand.violation <= settings.feas_tol {
            best = Some(cand);
        } else if closest.as_ref().is_none_or(|c| cand.violation < c.violation) {
            closest = Some(cand);
        }
    }

    // Never return something worse than a feasible warm start.
    if let Some(z) = warm {
        let cons = nlp.constraints(&z);
        let cost = nlp.objective(&z);
        if cost.is_finite() && violation_of(&cons) <= settings.feas_tol {
            let better = best.as_ref().is_none_or(|b| cost < b.cost);
            if better {
                best = Some(Candidate {
                    z,
                    cost,
                    violation: violation_of(&cons),
                    optimal: false,
                });
            }
        }
    }

    if let Some(b) = best {
        let status = if b.optimal {
            SolveStatus::Optimal
        } else {
            SolveStatus::FeasibleSuboptimal
        };
        return finish(problem, &nlp, b.z, status, skip, trace);
    }

    // Relaxed fallback: quadratic penalty on every violated row.
    let Some(start) = closest else {
        return failed(problem, skip, trace);
    };
    let m = nlp.num_constraints();
    let nv = nlp.num_vars();
    let weights: Vec<f64> = (0..m)
        .map(|i| if nlp.is_barrier(i) { BARRIER_SLACK_WEIGHT } else { SLACK_WEIGHT })
        .collect();
    let penalized = |z: &[f64], g: &mut [f64]| -> f64 {
        let mut cons = vec![0.0; m];
        let mut jac = vec![0.0; m * nv];
        let mut value = nlp.evaluate(z, g, &mut cons, &mut jac);
        for i in 0..m {
            if cons[i] > 0.0 {
                value += weights[i] * cons[i] * cons[i];
                for (gk, jk) in g.iter_mut().zip(&jac[i * nv..(i + 1) * nv]) {
                    *gk += 2.0 * weights[i] * cons[i] * jk;
                }
            }
        }
        value
    };
    let res = minimize_box(
        penalized,
        &start.z,
        &lower,
        &upper,
        settings.max_inner,
        settings.opt_tol,
        settings.memory,
    );
    trace.inner_iterations += res.iterations;
    if !res.value.is_finite() || res.x.iter().any(|v| !v.is_finite()) {
        return failed(problem, skip, trace);
    }
    finish(problem, &nlp, res.x, SolveStatus::InfeasibleRelaxed, skip, trace)
}

fn finish(problem: &OcpProblem, nlp: &ShootingNlp, z: Vec<f64>, status: SolveStatus, skip: usize, mut trace: SolverTrace) -> OcpSolution {
    let cons = nlp.constraints(&z);
    let max_violation = cons
        .iter()
        .enumerate()
        .map(|(i, &g)| nlp.raw_value(i, g))
        .fold(0.0f64, f64::max);
    trace.final_violation = max_violation;
    let slacks = if status == SolveStatus::InfeasibleRelaxed {
        cons.iter().map(|g| g.max(0.0)).collect()
    } else {
        Vec::new()
    };
    let controls = to_controls(&z);
    let states = rollout(problem.initial, &controls, problem.config.dt);
    let cost = total_cost(problem, &controls);
    if !cost.is_finite() || states.iter().any(|s| !s.is_finite()) {
        return failed(problem, skip, trace);
    }
    OcpSolution {
        controls,
        states,
        cost,
        status,
        max_violation,
        slacks,
        corridor_skip_steps: skip,
        trace,
    }
}

/// Largest relative difference between the analytic cost and constraint
/// gradients and central finite differences at `z`.
pub fn gradient_check(problem: &OcpProblem, z: &[f64], step: f64) -> f64 {
    let nlp = ShootingNlp::new(problem, problem.corridor_skip_steps());
    let (nv, m) = (nlp.num_vars(), nlp.num_constraints());
    let mut grad = vec![0.0; nv];
    let mut cons = vec![0.0; m];
    let mut jac = vec![0.0; m * nv];
    nlp.evaluate(z, &mut grad, &mut cons, &mut jac);

    let mut worst = 0.0f64;
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1.0);
    let mut zp = z.to_vec();
    let (mut gp, mut gm) = (vec![0.0; nv], vec![0.0; nv]);
    let (mut cp, mut cm) = (vec![0.0; m], vec![0.0; m]);
    let mut jbuf = vec![0.0; m * nv];
    for j in 0..nv {
        zp[j] = z[j] + step;
        let fp = nlp.evaluate(&zp, &mut gp, &mut cp, &mut jbuf);
        zp[j] = z[j] - step;
        let fm = nlp.evaluate(&zp, &mut gm, &mut cm, &mut jbuf);
        zp[j] = z[j];
        worst = worst.max(rel(grad[j], (fp - fm) / (2.0 * step)));
        for i in 0..m {
            worst = worst.max(rel(jac[i * nv + j], (cp[i] - cm[i]) / (2.0 * step)));
        }
    }
    worst
}
