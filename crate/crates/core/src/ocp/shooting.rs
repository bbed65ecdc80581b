//! Single-shooting transcription of the receding-horizon problem.
//!
//! Decision vector `z = [u_0, r_0, u_1, r_1, ...]`. States are eliminated by
//! rollout; their derivatives with respect to `z` come from forward
//! sensitivities `S_{k+1} = A_k S_k + B_k`.
//!
//! Constraint rows, all in `g(z) <= 0` form:
//! corridor rows `A R(theta)^T (p_k - seed) - b + margin` for the constrained
//! steps, then barrier rows `(1 - gamma dt) h_k - h_{k+1}` per obstacle and step.

use crate::geom::normalize_angle;

use super::nlp::InequalityNlp;
use super::{OcpProblem, Pose};

/// Inward margin turning the strict corridor inequality into a closed one.
pub const CORRIDOR_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Corridor { step: usize, side: usize },
    Barrier { obstacle: usize, step: usize },
}

pub struct ShootingNlp<'a> {
    problem: &'a OcpProblem,
    /// Corridor rows are imposed on steps `first_corridor_step..=N`.
    first_corridor_step: usize,
    rows: Vec<RowKind>,
}

impl<'a> ShootingNlp<'a> {
    /// `skip_corridor_steps` exempts steps `1..=skip` from the corridor rows.
    pub fn new(problem: &'a OcpProblem, skip_corridor_steps: usize) -> Self {
        let n = problem.config.horizon;
        let first_corridor_step = (skip_corridor_steps + 1).max(1);
        let mut rows = Vec::new();
        for step in first_corridor_step..=n {
            for side in 0..4 {
                rows.push(RowKind::Corridor { step, side });
            }
        }
        for obstacle in 0..problem.obstacles.len() {
            for step in 0..n {
                rows.push(RowKind::Barrier { obstacle, step });
            }
        }
        Self {
            problem,
            first_corridor_step,
            rows,
        }
    }

    pub fn rows(&self) -> &[RowKind] {
        &self.rows
    }

    pub fn first_corridor_step(&self) -> usize {
        self.first_corridor_step
    }

    /// Constraint value with the corridor margin removed.
    pub fn is_barrier(&self, row: usize) -> bool {
        matches!(self.rows[row], RowKind::Barrier { .. })
    }

    pub fn raw_value(&self, row: usize, g: f64) -> f64 {
        match self.rows[row] {
            RowKind::Corridor { .. } => g - CORRIDOR_MARGIN,
            RowKind::Barrier { .. } => g,
        }
    }

    pub fn objective(&self, z: &[f64]) -> f64 {
        let mut grad = vec![0.0; z.len()];
        let mut cons = vec![0.0; self.rows.len()];
        let mut jac = vec![0.0; self.rows.len() * z.len()];
        self.evaluate(z, &mut grad, &mut cons, &mut jac)
    }

    pub fn constraints(&self, z: &[f64]) -> Vec<f64> {
        let mut grad = vec![0.0; z.len()];
        let mut cons = vec![0.0; self.rows.len()];
        let mut jac = vec![0.0; self.rows.len() * z.len()];
        self.evaluate(z, &mut grad, &mut cons, &mut jac);
        cons
    }
}

/// Gradient contribution of `q . (eta - target)^2` with respect to eta.
fn target_term(eta: &Pose, target: &Pose, q: &[f64; 3], d_eta: &mut [f64; 3]) -> f64 {
    let e = [eta.x - target.x, eta.y - target.y, normalize_angle(eta.psi - target.psi)];
    let mut value = 0.0;
    for i in 0..3 {
        value += q[i] * e[i] * e[i];
        d_eta[i] += 2.0 * q[i] * e[i];
    }
    value
}

impl InequalityNlp for ShootingNlp<'_> {
    fn num_vars(&self) -> usize {
        2 * self.problem.config.horizon
    }

    fn num_constraints(&self) -> usize {
        self.rows.len()
    }

    fn evaluate(&self, z: &[f64], grad: &mut [f64], cons: &mut [f64], jac: &mut [f64]) -> f64 {
        let p = self.problem;
        let cfg = &p.config;
        let n = cfg.horizon;
        let nv = 2 * n;
        let dt = cfg.dt;

        // Rollout with sensitivities; sens[k] is 3 x nv row-major.
        let mut states = Vec::with_capacity(n + 1);
        let mut sens = vec![0.0; (n + 1) * 3 * nv];
        states.push(p.initial);
        for k in 0..n {
            let (u, r) = (z[2 * k], z[2 * k + 1]);
            let s = states[k];
            let (sin, cos) = s.psi.sin_cos();
            states.push(Pose {
                x: s.x + dt * u * cos,
                y: s.y + dt * u * sin,
                psi: normalize_angle(s.psi + dt * r),
            });
            let (cur, next) = sens.split_at_mut((k + 1) * 3 * nv);
            let cur = &cur[k * 3 * nv..];
            let next = &mut next[..3 * nv];
            for j in 0..nv {
                let (sx, sy, sp) = (cur[j], cur[nv + j], cur[2 * nv + j]);
                next[j] = sx - dt * u * sin * sp;
                next[nv + j] = sy + dt * u * cos * sp;
                next[2 * nv + j] = sp;
            }
            next[2 * k] += dt * cos;
            next[nv + 2 * k] += dt * sin;
            next[2 * nv + 2 * k + 1] += dt;
        }

        // Cost.
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut cost = 0.0;
        for k in 0..=n {
            let mut d_eta = [0.0; 3];
            cost += target_term(&states[k], &p.target1, &cfg.q1, &mut d_eta);
            cost += target_term(&states[k], &p.target2, &cfg.q2, &mut d_eta);
            if k > 0 {
                let sk = &sens[k * 3 * nv..(k + 1) * 3 * nv];
                for j in 0..nv {
                    grad[j] += d_eta[0] * sk[j] + d_eta[1] * sk[nv + j] + d_eta[2] * sk[2 * nv + j];
                }
            }
        }
        for k in 0..n {
            for c in 0..2 {
                let v = z[2 * k + c];
                cost += cfg.r_w[c] * v * v;
                grad[2 * k + c] += 2.0 * cfg.r_w[c] * v;
                if k + 1 < n {
                    let d = z[2 * (k + 1) + c] - v;
                    cost += cfg.s_w[c] * d * d;
                    grad[2 * (k + 1) + c] += 2.0 * cfg.s_w[c] * d;
                    grad[2 * k + c] -= 2.0 * cfg.s_w[c] * d;
                }
            }
        }

        // Constraints.
        jac.iter_mut().for_each(|v| *v = 0.0);
        let (sin_t, cos_t) = p.corridor.theta.sin_cos();
        let decay = 1.0 - cfg.gamma * dt;
        let reach: Vec<f64> = p
            .obstacles
            .iter()
            .map(|o| o.radius + p.robot_radius + p.safety_margin)
            .collect();
        for (row, kind) in self.rows.iter().enumerate() {
            let jrow = &mut jac[row * nv..(row + 1) * nv];
            match *kind {
                RowKind::Corridor { step, side } => {
                    let a = p.corridor.a[side];
                    let s = states[step];
                    let (dx, dy) = (s.x - p.corridor.seed.x, s.y - p.corridor.seed.y);
                    let lx = cos_t * dx + sin_t * dy;
                    let ly = -sin_t * dx + cos_t * dy;
                    cons[row] = a[0] * lx + a[1] * ly - p.corridor.b[side] + CORRIDOR_MARGIN;
                    let wx = a[0] * cos_t - a[1] * sin_t;
                    let wy = a[0] * sin_t + a[1] * cos_t;
                    let sk = &sens[step * 3 * nv..(step + 1) * 3 * nv];
                    for j in 0..nv {
                        jrow[j] = wx * sk[j] + wy * sk[nv + j];
                    }
                }
                RowKind::Barrier { obstacle, step } => {
                    let o = &p.obstacles[obstacle];
                    let r2 = reach[obstacle] * reach[obstacle];
                    let (a, b) = (states[step], states[step + 1]);
                    let (oa, ob) = (o.positions[step], o.positions[step + 1]);
                    let (ax, ay) = (a.x - oa.x, a.y - oa.y);
                    let (bx, by) = (b.x - ob.x, b.y - ob.y);
                    let ha = ax * ax + ay * ay - r2;
                    let hb = bx * bx + by * by - r2;
                    cons[row] = decay * ha - hb;
                    let sa = &sens[step * 3 * nv..(step + 1) * 3 * nv];
                    let sb = &sens[(step + 1) * 3 * nv..(step + 2) * 3 * nv];
                    for j in 0..nv {
                        jrow[j] = decay * 2.0 * (ax * sa[j] + ay * sa[nv + j]) - 2.0 * (bx * sb[j] + by * sb[nv + j]);
                    }
                }
            }
        }
        cost
    }
}
