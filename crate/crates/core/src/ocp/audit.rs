//! Post-solve check of a returned solution, evaluated from the geometric
//! definitions rather than the solver's own constraint rows.

use crate::corridor::CorridorConstraint;
use crate::dynobs::{barrier, dcbf_residual};

use super::{rollout, OcpProblem, OcpSolution};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditReport {
    /// Largest `A eta - b` over the constrained steps (should be `<= tol`).
    pub max_corridor_row: f64,
    /// Smallest barrier residual over obstacles and steps (should be `>= -tol`).
    pub min_barrier_residual: f64,
    /// Largest state mismatch between the solution and a fresh rollout.
    pub dynamics_error: f64,
    /// Largest amount by which any control leaves its box.
    pub bound_excess: f64,
}

impl AuditReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_corridor_row <= tol && self.min_barrier_residual >= -tol && self.dynamics_error <= 1e-12 && self.bound_excess <= 1e-9
    }

    /// Worst violation of either constraint family, clamped at zero.
    pub fn max_violation(&self) -> f64 {
        self.max_corridor_row.max(-self.min_barrier_residual).max(0.0)
    }
}

fn corridor_rows(c: &CorridorConstraint, solution: &OcpSolution) -> f64 {
    let first = (solution.corridor_skip_steps + 1).min(solution.states.len());
    solution.states[first..]
        .iter()
        .flat_map(|s| c.residuals(s.position()))
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn audit(problem: &OcpProblem, solution: &OcpSolution) -> AuditReport {
    let cfg = &problem.config;
    let cbf = problem.cbf_params();

    let replay = rollout(problem.initial, &solution.controls, cfg.dt);
    let dynamics_error = replay
        .iter()
        .zip(&solution.states)
        .map(|(a, b)| (a.x - b.x).abs().max((a.y - b.y).abs()).max((a.psi - b.psi).abs()))
        .fold(if replay.len() == solution.states.len() { 0.0 } else { f64::INFINITY }, f64::max);

    let (u_lo, u_hi) = cfg.u_bounds();
    let bound_excess = solution
        .controls
        .iter()
        .map(|c| (u_lo - c.u).max(c.u - u_hi).max(c.r.abs() - cfg.r_max))
        .fold(0.0f64, f64::max);

    let mut min_barrier_residual = f64::INFINITY;
    for obs in &problem.obstacles {
        for k in 0..cfg.horizon {
            let h0 = barrier(solution.states[k].position(), obs.positions[k], &cbf, obs.radius);
            let h1 = barrier(solution.states[k + 1].position(), obs.positions[k + 1], &cbf, obs.radius);
            min_barrier_residual = min_barrier_residual.min(dcbf_residual(h1, h0, cfg.gamma, cfg.dt));
        }
    }

    AuditReport {
        max_corridor_row: corridor_rows(&problem.corridor, solution),
        min_barrier_residual,
        dynamics_error,
        bound_excess,
    }
}
