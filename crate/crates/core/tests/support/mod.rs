//! Brute-force reference implementations used as test oracles. Shared with
//! the acceptance suite in the cli crate through a `#[path]` include.

#![allow(dead_code)]

use rand::Rng;
use rectnav_core::{OccupancyGrid, Point2};

/// Random grid with the given fill probability.
pub fn random_grid(rng: &mut impl Rng, w: usize, h: usize, res: f64, fill: f64) -> OccupancyGrid {
    let bits: Vec<bool> = (0..w * h).map(|_| rng.random_bool(fill)).collect();
    OccupancyGrid::from_fn(w, h, res, Point2::ZERO, |x, y| bits[y * w + x]).unwrap()
}

fn cell_index(grid: &OccupancyGrid, p: Point2) -> Option<(usize, usize)> {
    let q = (p - grid.origin()) * (1.0 / grid.resolution());
    let (fx, fy) = (q.x.floor(), q.y.floor());
    if fx < 0.0 || fy < 0.0 || fx >= grid.width() as f64 || fy >= grid.height() as f64 {
        return None;
    }
    Some((fx as usize, fy as usize))
}

/// Dijkstra over 8-connected free cells, diagonals only when both side
/// cells are free. Plain O(n^2) selection, no heap. Cost in meters.
pub fn dijkstra_cost(grid: &OccupancyGrid, start: Point2, goal: Point2) -> Option<f64> {
    let s = cell_index(grid, start)?;
    let t = cell_index(grid, goal)?;
    let (w, h) = (grid.width(), grid.height());
    let free = |x: i64, y: i64| x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h && !grid.is_occupied_cell(x as usize, y as usize);
    if !free(s.0 as i64, s.1 as i64) || !free(t.0 as i64, t.1 as i64) {
        return None;
    }
    let mut dist = vec![f64::INFINITY; w * h];
    let mut done = vec![false; w * h];
    dist[s.1 * w + s.0] = 0.0;
    loop {
        let mut best = None;
        for i in 0..w * h {
            if !done[i] && dist[i].is_finite() && best.is_none_or(|b: usize| dist[i] < dist[b]) {
                best = Some(i);
            }
        }
        let u = best?;
        if u == t.1 * w + t.0 {
            return Some(dist[u] * grid.resolution());
        }
        done[u] = true;
        let (x, y) = ((u % w) as i64, (u / w) as i64);
        for dx in -1..=1i64 {
            for dy in -1..=1i64 {
                if (dx, dy) == (0, 0) || !free(x + dx, y + dy) {
                    continue;
                }
                if dx != 0 && dy != 0 && !(free(x + dx, y) && free(x, y + dy)) {
                    continue;
                }
                let v = (y + dy) as usize * w + (x + dx) as usize;
                let c = if dx != 0 && dy != 0 { std::f64::consts::SQRT_2 } else { 1.0 };
                dist[v] = dist[v].min(dist[u] + c);
            }
        }
    }
}

/// Supercover rasterization: the segment is free iff both endpoint cells
/// and every cell it crosses with positive length are free. Each cell is
/// clipped against the segment independently (Liang-Barsky).
pub fn supercover_free(grid: &OccupancyGrid, a: Point2, b: Point2) -> bool {
    let (Some(ca), Some(cb)) = (cell_index(grid, a), cell_index(grid, b)) else {
        return false;
    };
    if grid.is_occupied_cell(ca.0, ca.1) || grid.is_occupied_cell(cb.0, cb.1) {
        return false;
    }
    let res = grid.resolution();
    let o = grid.origin();
    let d = b - a;
    for iy in 0..grid.height() {
        for ix in 0..grid.width() {
            if !grid.is_occupied_cell(ix, iy) {
                continue;
            }
            let lo = Point2::new(o.x + ix as f64 * res, o.y + iy as f64 * res);
            let hi = Point2::new(lo.x + res, lo.y + res);
            let (mut t0, mut t1) = (0.0f64, 1.0f64);
            let mut empty = false;
            for (p, q) in [(-d.x, a.x - lo.x), (d.x, hi.x - a.x), (-d.y, a.y - lo.y), (d.y, hi.y - a.y)] {
                if p == 0.0 {
                    if q < 0.0 {
                        empty = true;
                    }
                } else {
                    let r = q / p;
                    if p < 0.0 {
                        t0 = t0.max(r);
                    } else {
                        t1 = t1.min(r);
                    }
                }
            }
            if !empty && t1 - t0 > 1e-12 {
                return false;
            }
        }
    }
    true
}

/// Signed distance-like test for a point against a rectangle given by its
/// seed, rotation and local extents: `Some(inside)` or `None` when the
/// point is within `eps` of an edge.
pub fn in_rotated_rect(seed: Point2, theta: f64, lo: Point2, hi: Point2, p: Point2, eps: f64) -> Option<bool> {
    let (s, c) = theta.sin_cos();
    let corner = |x: f64, y: f64| Point2::new(seed.x + c * x - s * y, seed.y + s * x + c * y);
    let poly = [corner(hi.x, hi.y), corner(lo.x, hi.y), corner(lo.x, lo.y), corner(hi.x, lo.y)];
    let mut min_side = f64::INFINITY;
    for j in 0..4 {
        let (u, v) = (poly[j], poly[(j + 1) % 4]);
        let e = v - u;
        let len = e.norm();
        // Counter-clockwise polygon: interior is to the left of each edge.
        let cross = (e.x * (p.y - u.y) - e.y * (p.x - u.x)) / len;
        min_side = min_side.min(cross);
    }
    if min_side.abs() < eps {
        None
    } else {
        Some(min_side > 0.0)
    }
}

/// Literal transcription of the sequential corridor algorithm over path
/// indices: scan forward while points are inside the last corridor; on the
/// first point outside, step back one point and seed there; close with a
/// corridor at the path's end. Returns the seed indices.
pub fn sequential_seed_indices(n: usize, mut inside_last: impl FnMut(&[usize], usize) -> bool) -> Vec<usize> {
    let mut seeds = vec![0];
    let mut i = 1;
    while i < n {
        if inside_last(&seeds, i) {
            i += 1;
            continue;
        }
        let mut s = i - 1;
        if s == *seeds.last().unwrap() {
            s = i;
        }
        seeds.push(s);
        if s == i {
            i += 1;
        }
    }
    if *seeds.last().unwrap() != n - 1 {
        seeds.push(n - 1);
    }
    seeds
}
