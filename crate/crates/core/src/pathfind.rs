//! 8-connected A* over an occupancy grid.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::SQRT_2;

use thiserror::Error;

use crate::gridmap::{OccupancyGrid, Point2};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PathError {
    #[error("start ({}, {}) is occupied or outside the map", .0.x, .0.y)]
    StartBlocked(Point2),
    #[error("goal ({}, {}) is occupied or outside the map", .0.x, .0.y)]
    GoalBlocked(Point2),
    #[error("no path between start and goal")]
    NoPath,
}

/// Waypoint sequence: cell centers, with the exact start and goal at the ends.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub points: Vec<Point2>,
    /// Grid path length in meters (1 or sqrt(2) cells per move).
    pub cost: f64,
}

/// Neighbour offsets with their move cost in cells.
pub(crate) const MOVES: [(i64, i64, f64); 8] = [
    (1, 0, 1.0),
    (-1, 0, 1.0),
    (0, 1, 1.0),
    (0, -1, 1.0),
    (1, 1, SQRT_2),
    (-1, 1, SQRT_2),
    (-1, -1, SQRT_2),
    (1, -1, SQRT_2),
];

/// Calls `visit(neighbour, step_cost)` for every legal move out of `cell`.
/// Diagonal moves require both orthogonal side cells to be free.
pub(crate) fn for_each_neighbour(grid: &OccupancyGrid, cell: (usize, usize), mut visit: impl FnMut((usize, usize), f64)) {
    let (w, h) = (grid.width() as i64, grid.height() as i64);
    let (cx, cy) = (cell.0 as i64, cell.1 as i64);
    let free = |x: i64, y: i64| x >= 0 && y >= 0 && x < w && y < h && !grid.is_occupied_cell(x as usize, y as usize);
    for &(dx, dy, cost) in &MOVES {
        let (nx, ny) = (cx + dx, cy + dy);
        if !free(nx, ny) {
            continue;
        }
        if dx != 0 && dy != 0 && !(free(cx + dx, cy) && free(cx, cy + dy)) {
            continue;
        }
        visit((nx as usize, ny as usize), cost);
    }
}

#[derive(Debug, Clone, Copy)]
struct Open {
    f: f64,
    g: f64,
    idx: usize,
}

impl PartialEq for Open {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Open {}
impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Open {
    // Max-heap order: smallest f first, then largest g, then smallest index.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then(self.g.total_cmp(&other.g))
            .then(other.idx.cmp(&self.idx))
    }
}

/// Shortest 8-connected path between the cells containing `start` and `goal`.
pub fn astar(grid: &OccupancyGrid, start: Point2, goal: Point2) -> Result<Path, PathError> {
    if !grid.is_free(start) {
        return Err(PathError::StartBlocked(start));
    }
    if !grid.is_free(goal) {
        return Err(PathError::GoalBlocked(goal));
    }
    let s = grid.cell_of(start).expect("free point is in bounds");
    let t = grid.cell_of(goal).expect("free point is in bounds");
    let w = grid.width();
    let idx = |c: (usize, usize)| c.1 * w + c.0;
    let h = |c: (usize, usize)| {
        let dx = c.0 as f64 - t.0 as f64;
        let dy = c.1 as f64 - t.1 as f64;
        dx.hypot(dy)
    };

    let n = w * grid.height();
    let mut g_score = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    g_score[idx(s)] = 0.0;
    open.push(Open { f: h(s), g: 0.0, idx: idx(s) });

    while let Some(Open { g, idx: cur, .. }) = open.pop() {
        if closed[cur] {
            continue;
        }
        closed[cur] = true;
        if cur == idx(t) {
            return Ok(reconstruct(grid, &parent, cur, start, goal, g));
        }
        let cell = (cur % w, cur / w);
        for_each_neighbour(grid, cell, |nb, step| {
            let ni = idx(nb);
            if closed[ni] {
                return;
            }
            let ng = g + step;
            if ng < g_score[ni] {
                g_score[ni] = ng;
                parent[ni] = cur;
                open.push(Open { f: ng + h(nb), g: ng, idx: ni });
            }
        });
    }
    Err(PathError::NoPath)
}

fn reconstruct(grid: &OccupancyGrid, parent: &[usize], end: usize, start: Point2, goal: Point2, g: f64) -> Path {
    let w = grid.width();
    let mut cells = vec![end];
    let mut cur = end;
    while parent[cur] != usize::MAX {
        cur = parent[cur];
        cells.push(cur);
    }
    cells.reverse();
    let mut points: Vec<Point2> = cells.iter().map(|&i| grid.cell_center(i % w, i / w)).collect();
    let last = points.len() - 1;
    points[0] = start;
    points[last] = goal;
    Path {
        points,
        cost: g * grid.resolution(),
    }
}
