//! Multi-orientation rectangular safe corridors.
//!
//! Each corridor is a rectangle grown from a seed point inside a local frame
//! rotated by one of `n_c` evenly spaced angles in `[0, pi/2)`. The frame
//! whose rectangle ends up with the largest area wins. With `n_c = 1` this is
//! the classic axis-aligned static rectangular corridor, used as a baseline.
//!
//! Rectangles are kept in the `P_temp` layout `[y_right, x_left, y_left,
//! x_right]` (local coordinates relative to the seed); growing side `j` adds
//! `delta_l * ADD_VEC[j]` to entry `j`.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gridmap::{OccupancyGrid, Point2};
use crate::pathfind::{astar, Path, PathError};

/// Growth direction sign of each `P_temp` entry.
pub const ADD_VEC: [f64; 4] = [1.0, -1.0, -1.0, 1.0];

/// Row matrix of the corridor half-plane constraints in the local frame.
pub const CONSTRAINT_A: [[f64; 2]; 4] = [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorridorError {
    #[error("seed ({}, {}) is not free", .0.x, .0.y)]
    SeedOccupied(Point2),
    #[error("initial square around seed ({}, {}) collides in every frame", .0.x, .0.y)]
    InitialSquareBlocked(Point2),
    #[error("path point {index}: {source}")]
    AtPathIndex {
        index: usize,
        #[source]
        source: Box<CorridorError>,
    },
    #[error("corridor {width:.3} x {height:.3} m is empty after shrinking by {delta_s} m")]
    Degenerate { width: f64, height: f64, delta_s: f64 },
    #[error("empty corridor list")]
    Empty,
    #[error("invalid corridor parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorridorParams {
    /// Length of one growth step, meters.
    pub delta_l: f64,
    /// Half-size of the initial square around the seed, meters.
    pub delta_l0: f64,
    /// Maximum growth per direction beyond the initial square, meters.
    pub l_max: f64,
    /// Number of frame orientations tried.
    pub n_c: usize,
    /// Inward shrink applied when the corridor becomes a constraint, meters.
    pub delta_s: f64,
}

impl Default for CorridorParams {
    fn default() -> Self {
        Self {
            delta_l: 0.1,
            delta_l0: 0.3,
            l_max: 8.0,
            n_c: 10,
            delta_s: 0.3,
        }
    }
}

impl CorridorParams {
    pub fn validate(&self) -> Result<(), CorridorError> {
        let bad = |m: &str| Err(CorridorError::InvalidParams(m.to_string()));
        if !(self.delta_l > 0.0 && self.delta_l0 > 0.0 && self.l_max > 0.0 && self.delta_s > 0.0) {
            return bad("all lengths must be positive");
        }
        if self.n_c == 0 {
            return bad("n_c must be at least 1");
        }
        if self.delta_s >= self.delta_l0 + self.l_max {
            return bad("delta_s must be smaller than delta_l0 + l_max");
        }
        Ok(())
    }

    /// The same parameters restricted to the axis-aligned frame.
    pub fn axis_aligned(&self) -> Self {
        Self { n_c: 1, ..*self }
    }
}

/// A rotated rectangle: local vertices relative to `seed`, frame rotated by
/// `theta` about z.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Corridor {
    pub seed: Point2,
    /// Lower-left vertex in the local frame.
    pub v_left: Point2,
    /// Upper-right vertex in the local frame.
    pub v_right: Point2,
    pub theta: f64,
}

impl Corridor {
    pub fn area(&self) -> f64 {
        corridor_area(self)
    }

    pub fn contains(&self, p: Point2, shrink: f64) -> bool {
        contains(self, p, shrink)
    }

    pub fn to_local(&self, p: Point2) -> Point2 {
        (p - self.seed).rotate(-self.theta)
    }

    /// World-frame corners, counter-clockwise from the upper-right one.
    pub fn world_vertices(&self) -> [Point2; 4] {
        let [v1, v2, v3, v4, _] = update_vertex(&self.p_temp());
        [v1, v2, v3, v4].map(|v| vertex_to_global(self.seed, self.theta, v))
    }

    fn p_temp(&self) -> [f64; 4] {
        [self.v_right.y, self.v_left.x, self.v_left.y, self.v_right.x]
    }
}

/// Serialized form of a corridor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorridorRecord {
    pub seed: [f64; 2],
    pub v_left: [f64; 2],
    pub v_right: [f64; 2],
    pub theta_rad: f64,
    pub area_m2: f64,
}

impl From<&Corridor> for CorridorRecord {
    fn from(c: &Corridor) -> Self {
        Self {
            seed: c.seed.into(),
            v_left: c.v_left.into(),
            v_right: c.v_right.into(),
            theta_rad: c.theta,
            area_m2: c.area(),
        }
    }
}

impl From<&CorridorRecord> for Corridor {
    fn from(r: &CorridorRecord) -> Self {
        Self {
            seed: r.seed.into(),
            v_left: r.v_left.into(),
            v_right: r.v_right.into(),
            theta: r.theta_rad,
        }
    }
}

pub fn corridors_to_json(corridors: &[Corridor]) -> String {
    let records: Vec<CorridorRecord> = corridors.iter().map(CorridorRecord::from).collect();
    let mut s = serde_json::to_string_pretty(&records).expect("corridor records serialize");
    s.push('\n');
    s
}

pub fn corridors_from_json(text: &str) -> Result<Vec<Corridor>, serde_json::Error> {
    let records: Vec<CorridorRecord> = serde_json::from_str(text)?;
    Ok(records.iter().map(Corridor::from).collect())
}

/// Corridor half-planes `A * R(theta)^T (p - seed) - b < 0`, already shrunk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorridorConstraint {
    pub a: [[f64; 2]; 4],
    pub b: [f64; 4],
    pub theta: f64,
    pub seed: Point2,
}

impl CorridorConstraint {
    /// A constraint no point in practice can violate.
    pub fn unbounded() -> Self {
        Self {
            a: CONSTRAINT_A,
            b: [1e9; 4],
            theta: 0.0,
            seed: Point2::ZERO,
        }
    }

    /// `A * eta_H - b`; all entries negative means inside.
    pub fn residuals(&self, p: Point2) -> [f64; 4] {
        let eta = (p - self.seed).rotate(-self.theta);
        std::array::from_fn(|i| self.a[i][0] * eta.x + self.a[i][1] * eta.y - self.b[i])
    }

    pub fn is_satisfied(&self, p: Point2) -> bool {
        self.residuals(p).iter().all(|&r| r < 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorridorMetrics {
    /// Number of corridors.
    pub nc: usize,
    /// Mean corridor area, m^2.
    pub ma: f64,
    /// Wall-clock generation time, seconds.
    pub ts: f64,
}

/// Frame orientations `(pi/2) * k / n_c`, `k = 0..n_c`.
pub fn frame_angles(n_c: usize) -> Vec<f64> {
    (0..n_c).map(|k| FRAC_PI_2 * k as f64 / n_c as f64).collect()
}

/// Local-frame vertex to world coordinates.
pub fn vertex_to_global(seed: Point2, theta: f64, v_local: Point2) -> Point2 {
    seed + v_local.rotate(theta)
}

/// Rectangle vertices counter-clockwise from the upper-right one, with the
/// first repeated at the end, so that edge `j` (`V[j]`–`V[j+1]`) is the side
/// moved by `P_temp[j]`.
pub fn update_vertex(p_temp: &[f64; 4]) -> [Point2; 5] {
    let [y_r, x_l, y_l, x_r] = *p_temp;
    let v1 = Point2::new(x_r, y_r);
    [v1, Point2::new(x_l, y_r), Point2::new(x_l, y_l), Point2::new(x_r, y_l), v1]
}

/// Both transformed vertices lie in the map and the segment between them is
/// obstacle-free.
pub fn edge_valid(grid: &OccupancyGrid, seed: Point2, v_a: Point2, v_b: Point2, theta: f64) -> bool {
    let a = vertex_to_global(seed, theta, v_a);
    let b = vertex_to_global(seed, theta, v_b);
    grid.in_bounds(a) && grid.in_bounds(b) && grid.segment_free(a, b)
}

pub fn corridor_area(c: &Corridor) -> f64 {
    (c.v_right.x - c.v_left.x) * (c.v_right.y - c.v_left.y)
}

/// Strict containment of `p` in the corridor shrunk inward by `shrink`.
pub fn contains(c: &Corridor, p: Point2, shrink: f64) -> bool {
    let eta = c.to_local(p);
    eta.x < c.v_right.x - shrink
        && -eta.x < -c.v_left.x - shrink
        && eta.y < c.v_right.y - shrink
        && -eta.y < -c.v_left.y - shrink
}

pub fn make_constraint(c: &Corridor, delta_s: f64) -> Result<CorridorConstraint, CorridorError> {
    let width = c.v_right.x - c.v_left.x;
    let height = c.v_right.y - c.v_left.y;
    if width <= 2.0 * delta_s || height <= 2.0 * delta_s {
        return Err(CorridorError::Degenerate { width, height, delta_s });
    }
    Ok(CorridorConstraint {
        a: CONSTRAINT_A,
        b: [
            c.v_right.x - delta_s,
            -c.v_left.x - delta_s,
            c.v_right.y - delta_s,
            -c.v_left.y - delta_s,
        ],
        theta: c.theta,
        seed: c.seed,
    })
}

/// Grows the largest obstacle-free rectangle around `seed` over all frame
/// orientations.
pub fn construct_corridor(grid: &OccupancyGrid, seed: Point2, params: &CorridorParams) -> Result<Corridor, CorridorError> {
    params.validate()?;
    if !grid.is_free(seed) {
        return Err(CorridorError::SeedOccupied(seed));
    }
    let mut best: Option<Corridor> = None;
    for theta in frame_angles(params.n_c) {
        let Some(candidate) = expand_in_frame(grid, seed, theta, params) else {
            continue;
        };
        if best.is_none_or(|b| candidate.area() > b.area()) {
            best = Some(candidate);
        }
    }
    best.ok_or(CorridorError::InitialSquareBlocked(seed))
}

/// Rectangle growth inside one frame. `None` if the initial square collides.
///
/// Sides are grown in the cyclic order top, left, bottom, right. A side
/// freezes when its next step would exceed `l_max` or the swept strip is not
/// free; the failed step is never kept. The strip is validated with the new
/// edge itself, its two lateral sides and interior lines parallel to the edge
/// at most half a cell apart, so every grid cell that meets the rectangle is
/// checked, not only cells on the final edges.
fn expand_in_frame(grid: &OccupancyGrid, seed: Point2, theta: f64, params: &CorridorParams) -> Option<Corridor> {
    let l0 = params.delta_l0;
    let mut p_temp = [l0, -l0, -l0, l0];
    if !rect_free(grid, seed, theta, &p_temp) {
        return None;
    }
    let max_steps = (params.l_max / params.delta_l + 1e-9).floor() as usize;
    let spacing = 0.5 * grid.resolution();
    let mut steps = [0usize; 4];
    let mut expand = [true; 4];
    while expand.iter().any(|&e| e) {
        for j in 0..4 {
            if !expand[j] {
                continue;
            }
            if steps[j] + 1 > max_steps {
                expand[j] = false;
                continue;
            }
            let mut next = p_temp;
            next[j] = ADD_VEC[j] * (l0 + (steps[j] + 1) as f64 * params.delta_l);
            if strip_free(grid, seed, theta, &p_temp, &next, j, spacing) {
                p_temp = next;
                steps[j] += 1;
            } else {
                expand[j] = false;
            }
        }
    }
    let [y_r, x_l, y_l, x_r] = p_temp;
    Some(Corridor {
        seed,
        v_left: Point2::new(x_l, y_l),
        v_right: Point2::new(x_r, y_r),
        theta,
    })
}

fn strip_free(
    grid: &OccupancyGrid,
    seed: Point2,
    theta: f64,
    old: &[f64; 4],
    new: &[f64; 4],
    j: usize,
    spacing: f64,
) -> bool {
    let vo = update_vertex(old);
    let vn = update_vertex(new);
    if !edge_valid(grid, seed, vn[j], vn[j + 1], theta) {
        return false;
    }
    let g = |v: Point2| vertex_to_global(seed, theta, v);
    if !grid.segment_free(g(vo[j]), g(vn[j])) || !grid.segment_free(g(vo[j + 1]), g(vn[j + 1])) {
        return false;
    }
    let span = new[j] - old[j];
    let lines = (span.abs() / spacing).ceil() as usize;
    (1..lines).all(|i| {
        let mut mid = *old;
        mid[j] = old[j] + span * i as f64 / lines as f64;
        let vm = update_vertex(&mid);
        grid.segment_free(g(vm[j]), g(vm[j + 1]))
    })
}

/// Whole-rectangle check: four edges plus interior lines parallel to the
/// local x axis at most `resolution / 2` apart.
fn rect_free(grid: &OccupancyGrid, seed: Point2, theta: f64, p_temp: &[f64; 4]) -> bool {
    let v = update_vertex(p_temp);
    if !(0..4).all(|j| edge_valid(grid, seed, v[j], v[j + 1], theta)) {
        return false;
    }
    let [y_r, x_l, y_l, x_r] = *p_temp;
    let lines = ((y_r - y_l) / (0.5 * grid.resolution())).ceil() as usize;
    (1..lines).all(|i| {
        let y = y_l + (y_r - y_l) * i as f64 / lines as f64;
        grid.segment_free(
            vertex_to_global(seed, theta, Point2::new(x_l, y)),
            vertex_to_global(seed, theta, Point2::new(x_r, y)),
        )
    })
}

/// Chains corridors along a path: a new corridor is seeded at the last path
/// point still inside the previous corridor, so neighbours overlap, and a
/// final corridor is seeded at the path's end.
pub fn sequential_corridors(grid: &OccupancyGrid, path: &Path, params: &CorridorParams) -> Result<Vec<Corridor>, CorridorError> {
    let pts = &path.points;
    let build = |i: usize| {
        construct_corridor(grid, pts[i], params).map_err(|e| CorridorError::AtPathIndex {
            index: i,
            source: Box::new(e),
        })
    };
    let Some(last) = pts.len().checked_sub(1) else {
        return Err(CorridorError::Empty);
    };
    let mut out = vec![build(0)?];
    let mut seed_idx = 0;
    let mut i = 1;
    while i < pts.len() {
        if out.last().expect("nonempty").contains(pts[i], 0.0) {
            i += 1;
            continue;
        }
        // Step back one point; if that point already seeds the last corridor
        // there is nothing to step back to, so seed at the current point.
        let s = if i - 1 > seed_idx { i - 1 } else { i };
        out.push(build(s)?);
        seed_idx = s;
        if s == i {
            i += 1;
        }
    }
    if seed_idx != last && pts[seed_idx] != pts[last] {
        out.push(build(last)?);
    }
    Ok(out)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error(transparent)]
    Path(#[from] PathError),
    #[error(transparent)]
    Corridor(#[from] CorridorError),
}

/// A* between `start` and `goal` on a search grid dilated so that waypoints
/// keep a corridor's initial square clear of obstacles. The clearance is
/// reduced one cell at a time when the endpoints sit too close to a wall or
/// the dilation closes every passage; the last attempt uses the raw grid.
pub fn plan_path(grid: &OccupancyGrid, start: Point2, goal: Point2, params: &CorridorParams) -> Result<Path, PathError> {
    let res = grid.resolution();
    let cells = (params.delta_l0 / res).ceil() as usize + 1;
    let mut result = Err(PathError::NoPath);
    for r in (0..=cells).rev() {
        // Half a cell below the target width so the rounding inside
        // `dilated` lands exactly on `r` cells.
        let search = grid.dilated((r as f64 - 0.5) * res);
        result = astar(&search, start, goal);
        if result.is_ok() {
            break;
        }
    }
    result
}

/// Path search followed by corridor chaining along the path.
pub fn plan_corridors(
    grid: &OccupancyGrid,
    start: Point2,
    goal: Point2,
    params: &CorridorParams,
) -> Result<(Path, Vec<Corridor>), PlanError> {
    let path = plan_path(grid, start, goal, params)?;
    let corridors = sequential_corridors(grid, &path, params)?;
    Ok((path, corridors))
}

pub fn compute_metrics(corridors: &[Corridor], elapsed: f64) -> Result<CorridorMetrics, CorridorError> {
    if corridors.is_empty() {
        return Err(CorridorError::Empty);
    }
    let total: f64 = corridors.iter().map(corridor_area).sum();
    Ok(CorridorMetrics {
        nc: corridors.len(),
        ma: total / corridors.len() as f64,
        ts: elapsed,
    })
}
