//! Occupancy-grid world model.
//!
//! A grid is loaded once from the text map format and never mutated. Points
//! map to cells by `floor((p - origin) / resolution)`, with the world's
//! upper boundary clamped into the last row/column.

use thiserror::Error;

pub use crate::geom::Point2;

#[derive(Debug, Error, PartialEq)]
pub enum MapError {
    #[error("line {line}: malformed header: {reason}")]
    Header { line: usize, reason: String },
    #[error("line {line}: expected {expected} cells, found {found}")]
    RowLength {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}, column {column}: unknown cell character {ch:?}")]
    UnknownCell { line: usize, column: usize, ch: char },
    #[error("expected {expected} rows, found {found}")]
    RowCount { expected: usize, found: usize },
    #[error("invalid grid: {0}")]
    Invalid(String),
}

/// Immutable boolean occupancy grid (`true` = occupied), row-major with row 0
/// at the bottom of the world.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    width: usize,
    height: usize,
    resolution: f64,
    origin: Point2,
    cells: Vec<bool>,
}

impl OccupancyGrid {
    pub fn new(
        width: usize,
        height: usize,
        resolution: f64,
        origin: Point2,
        cells: Vec<bool>,
    ) -> Result<Self, MapError> {
        if width == 0 || height == 0 {
            return Err(MapError::Invalid("dimensions must be positive".into()));
        }
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(MapError::Invalid(format!("resolution {resolution} must be > 0")));
        }
        if !origin.is_finite() {
            return Err(MapError::Invalid("origin must be finite".into()));
        }
        if cells.len() != width * height {
            return Err(MapError::Invalid(format!(
                "cell array has {} entries, expected {}",
                cells.len(),
                width * height
            )));
        }
        Ok(Self {
            width,
            height,
            resolution,
            origin,
            cells,
        })
    }

    /// An obstacle-free grid.
    pub fn empty(width: usize, height: usize, resolution: f64, origin: Point2) -> Result<Self, MapError> {
        Self::new(width, height, resolution, origin, vec![false; width * height])
    }

    /// Builds a grid by evaluating `occupied(ix, iy)` for every cell.
    pub fn from_fn(
        width: usize,
        height: usize,
        resolution: f64,
        origin: Point2,
        mut occupied: impl FnMut(usize, usize) -> bool,
    ) -> Result<Self, MapError> {
        let mut cells = Vec::with_capacity(width * height);
        for iy in 0..height {
            for ix in 0..width {
                cells.push(occupied(ix, iy));
            }
        }
        Self::new(width, height, resolution, origin, cells)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> Point2 {
        self.origin
    }

    /// Upper-right world corner.
    pub fn extent(&self) -> Point2 {
        self.origin
            + Point2::new(
                self.width as f64 * self.resolution,
                self.height as f64 * self.resolution,
            )
    }

    pub fn occupied_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    /// Occupancy of cell `(ix, iy)`; panics when out of range.
    pub fn is_occupied_cell(&self, ix: usize, iy: usize) -> bool {
        assert!(ix < self.width && iy < self.height, "cell ({ix}, {iy}) out of range");
        self.cells[iy * self.width + ix]
    }

    pub fn cell_center(&self, ix: usize, iy: usize) -> Point2 {
        self.origin
            + Point2::new(
                (ix as f64 + 0.5) * self.resolution,
                (iy as f64 + 0.5) * self.resolution,
            )
    }

    pub fn in_bounds(&self, p: Point2) -> bool {
        let hi = self.extent();
        p.x >= self.origin.x && p.y >= self.origin.y && p.x <= hi.x && p.y <= hi.y
    }

    /// Cell containing `p`, or `None` outside the map.
    pub fn cell_of(&self, p: Point2) -> Option<(usize, usize)> {
        if !self.in_bounds(p) {
            return None;
        }
        let ix = ((p.x - self.origin.x) / self.resolution).floor() as usize;
        let iy = ((p.y - self.origin.y) / self.resolution).floor() as usize;
        Some((ix.min(self.width - 1), iy.min(self.height - 1)))
    }

    /// True iff `p` is inside the map and its cell is unoccupied.
    pub fn is_free(&self, p: Point2) -> bool {
        match self.cell_of(p) {
            Some((ix, iy)) => !self.cells[iy * self.width + ix],
            None => false,
        }
    }

    /// Collision check of the closed segment `a`–`b`.
    ///
    /// Both endpoints must be free, plus one sample per grid cell the segment
    /// passes through: the parameter axis is split at every grid-line
    /// crossing and each piece of positive length is sampled at its midpoint.
    /// The result therefore matches an exact supercover rasterization of the
    /// segment (up to segments running exactly along grid lines).
    pub fn segment_free(&self, a: Point2, b: Point2) -> bool {
        // Canonical endpoint order keeps the predicate exactly symmetric.
        let (a, b) = if (a.x, a.y) <= (b.x, b.y) { (a, b) } else { (b, a) };
        if !self.is_free(a) || !self.is_free(b) {
            return false;
        }
        let inv = 1.0 / self.resolution;
        let ga = (a - self.origin) * inv;
        let gb = (b - self.origin) * inv;
        let d = gb - ga;

        let mut xs = Crossings::new(ga.x, gb.x);
        let mut ys = Crossings::new(ga.y, gb.y);
        let mut nx = xs.next();
        let mut ny = ys.next();
        let mut prev = 0.0;
        loop {
            let t = match (nx, ny) {
                (Some(tx), Some(ty)) if tx <= ty => {
                    nx = xs.next();
                    tx
                }
                (_, Some(ty)) => {
                    ny = ys.next();
                    ty
                }
                (Some(tx), None) => {
                    nx = xs.next();
                    tx
                }
                (None, None) => 1.0,
            };
            if t > prev && !self.grid_point_free(ga, d, 0.5 * (prev + t)) {
                return false;
            }
            if t >= 1.0 {
                return true;
            }
            prev = t;
        }
    }

    fn grid_point_free(&self, ga: Point2, d: Point2, t: f64) -> bool {
        let gx = (ga.x + t * d.x).floor();
        let gy = (ga.y + t * d.y).floor();
        if gx < 0.0 || gy < 0.0 {
            return false;
        }
        let ix = (gx as usize).min(self.width - 1);
        let iy = (gy as usize).min(self.height - 1);
        !self.cells[iy * self.width + ix]
    }

    /// Square dilation: a cell becomes occupied when any occupied cell, or
    /// the map border, lies within `half_width` meters (Chebyshev, rounded
    /// up to whole cells).
    ///
    /// Corridor construction always runs on the raw grid; the dilated copy is
    /// only a search grid that keeps waypoints away from walls.
    pub fn dilated(&self, half_width: f64) -> OccupancyGrid {
        let r = (half_width / self.resolution).ceil().max(0.0) as usize;
        if r == 0 {
            return self.clone();
        }
        let (w, h) = (self.width, self.height);
        // Horizontal pass, then vertical, each a sliding-window OR.
        let mut tmp = vec![false; w * h];
        for iy in 0..h {
            let row = &self.cells[iy * w..(iy + 1) * w];
            let mut prefix = vec![0usize; w + 1];
            for ix in 0..w {
                prefix[ix + 1] = prefix[ix] + row[ix] as usize;
            }
            for ix in 0..w {
                let near_border = ix < r || ix + r >= w;
                let lo = ix.saturating_sub(r);
                let hi = (ix + r + 1).min(w);
                tmp[iy * w + ix] = near_border || prefix[hi] > prefix[lo];
            }
        }
        let mut out = vec![false; w * h];
        for ix in 0..w {
            let mut prefix = vec![0usize; h + 1];
            for iy in 0..h {
                prefix[iy + 1] = prefix[iy] + tmp[iy * w + ix] as usize;
            }
            for iy in 0..h {
                let near_border = iy < r || iy + r >= h;
                let lo = iy.saturating_sub(r);
                let hi = (iy + r + 1).min(h);
                out[iy * w + ix] = near_border || prefix[hi] > prefix[lo];
            }
        }
        OccupancyGrid {
            cells: out,
            ..self.clone()
        }
    }

    /// Serializes back to the text map format.
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "mapgrid {} {} {} {} {}\n",
            self.width, self.height, self.resolution, self.origin.x, self.origin.y
        );
        s.reserve((self.width + 1) * self.height);
        for iy in (0..self.height).rev() {
            for ix in 0..self.width {
                s.push(if self.cells[iy * self.width + ix] { '#' } else { '.' });
            }
            s.push('\n');
        }
        s
    }
}

/// Parameters in `(0, 1)` at which a 1-D coordinate moving from `from` to
/// `to` crosses an integer, in increasing order.
struct Crossings {
    from: f64,
    inv_span: f64,
    next_k: f64,
    step: f64,
    to: f64,
}

impl Crossings {
    fn new(from: f64, to: f64) -> Self {
        let span = to - from;
        let (next_k, step) = if span > 0.0 {
            (from.floor() + 1.0, 1.0)
        } else {
            (from.ceil() - 1.0, -1.0)
        };
        Self {
            from,
            inv_span: if span != 0.0 { 1.0 / span } else { 0.0 },
            next_k,
            step,
            to,
        }
    }
}

impl Iterator for Crossings {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        if self.inv_span == 0.0 {
            return None;
        }
        let ahead = if self.step > 0.0 {
            self.next_k < self.to
        } else {
            self.next_k > self.to
        };
        if !ahead {
            return None;
        }
        let t = (self.next_k - self.from) * self.inv_span;
        self.next_k += self.step;
        Some(t)
    }
}

/// Parses the text map format:
///
/// ```text
/// mapgrid <width_cells> <height_cells> <resolution_m> <origin_x> <origin_y>
/// <height rows of width characters from {., #}, top row first>
/// ```
pub fn load_map(source: &str) -> Result<OccupancyGrid, MapError> {
    let mut lines = source.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    let (hline, header) = lines.next().ok_or(MapError::Header {
        line: 1,
        reason: "empty input".into(),
    })?;
    let herr = |reason: String| MapError::Header { line: hline, reason };
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 6 || fields[0] != "mapgrid" {
        return Err(herr(format!(
            "expected `mapgrid <w> <h> <res> <ox> <oy>`, got {header:?}"
        )));
    }
    let width: usize = fields[1]
        .parse()
        .map_err(|_| herr(format!("bad width {:?}", fields[1])))?;
    let height: usize = fields[2]
        .parse()
        .map_err(|_| herr(format!("bad height {:?}", fields[2])))?;
    let mut nums = [0.0f64; 3];
    for (slot, field) in nums.iter_mut().zip(&fields[3..]) {
        *slot = field
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| herr(format!("bad number {field:?}")))?;
    }
    let [resolution, ox, oy] = nums;
    if width == 0 || height == 0 {
        return Err(herr("dimensions must be positive".into()));
    }
    if resolution <= 0.0 {
        return Err(herr(format!("resolution {resolution} must be > 0")));
    }

    let mut cells = vec![false; width * height];
    let mut rows = 0usize;
    for (line, text) in lines {
        if rows == height {
            if text.trim().is_empty() {
                continue;
            }
            return Err(MapError::RowCount {
                expected: height,
                found: rows + 1,
            });
        }
        let found = text.chars().count();
        if found != width {
            return Err(MapError::RowLength {
                line,
                expected: width,
                found,
            });
        }
        let iy = height - 1 - rows;
        for (ix, ch) in text.chars().enumerate() {
            cells[iy * width + ix] = match ch {
                '.' => false,
                '#' => true,
                other => {
                    return Err(MapError::UnknownCell {
                        line,
                        column: ix + 1,
                        ch: other,
                    })
                }
            };
        }
        rows += 1;
    }
    if rows != height {
        return Err(MapError::RowCount {
            expected: height,
            found: rows,
        });
    }
    OccupancyGrid::new(width, height, resolution, Point2::new(ox, oy), cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid10() -> OccupancyGrid {
        OccupancyGrid::empty(10, 10, 1.0, Point2::ZERO).unwrap()
    }

    #[test]
    fn load_empty_and_single_cell() {
        let g = load_map("mapgrid 3 3 1.0 0 0\n...\n...\n...\n").unwrap();
        assert_eq!(g.occupied_count(), 0);
        let g = load_map("mapgrid 3 3 1.0 0 0\n...\n.#.\n...\n").unwrap();
        assert_eq!(g.occupied_count(), 1);
        assert!(g.is_occupied_cell(1, 1));
    }

    #[test]
    fn top_row_comes_first() {
        let g = load_map("mapgrid 2 2 1 0 0\n#.\n..\n").unwrap();
        assert!(g.is_occupied_cell(0, 1));
        assert!(!g.is_free(Point2::new(0.5, 1.5)));
        assert!(g.is_free(Point2::new(0.5, 0.5)));
    }

    #[test]
    fn parse_errors_are_distinct() {
        assert!(matches!(
            load_map("mapgrid 4 1 1 0 0\n...\n"),
            Err(MapError::RowLength { line: 2, expected: 4, found: 3 })
        ));
        assert!(matches!(
            load_map("mapgrid 2 1 1 0 0\n.x\n"),
            Err(MapError::UnknownCell { line: 2, column: 2, ch: 'x' })
        ));
        assert!(matches!(load_map("grid 2 1 1 0 0\n..\n"), Err(MapError::Header { line: 1, .. })));
        assert!(matches!(load_map("mapgrid 2 1 0 0 0\n..\n"), Err(MapError::Header { .. })));
        assert!(matches!(
            load_map("mapgrid 2 2 1 0 0\n..\n"),
            Err(MapError::RowCount { expected: 2, found: 1 })
        ));
        assert!(matches!(
            load_map("mapgrid 1 1 1 0 0\n.\n.\n"),
            Err(MapError::RowCount { .. })
        ));
    }

    #[test]
    fn bounds_are_closed() {
        let g = grid10();
        assert!(g.in_bounds(Point2::new(5.0, 5.0)));
        assert!(!g.in_bounds(Point2::new(-0.1, 5.0)));
        assert!(g.in_bounds(Point2::new(10.0, 10.0)));
        assert!(g.is_free(Point2::new(10.0, 10.0)));
        assert!(!g.in_bounds(Point2::new(f64::NAN, 1.0)));
    }

    #[test]
    fn freeness() {
        let g = grid10();
        assert!(g.is_free(Point2::new(5.5, 5.5)));
        assert!(!g.is_free(Point2::new(-1.0, -1.0)));
        let g = OccupancyGrid::from_fn(10, 10, 1.0, Point2::ZERO, |x, y| (x, y) == (5, 5)).unwrap();
        assert!(!g.is_free(Point2::new(5.5, 5.5)));
    }

    #[test]
    fn segments() {
        let g = grid10();
        assert!(g.segment_free(Point2::new(1.0, 1.0), Point2::new(8.0, 8.0)));
        assert!(g.segment_free(Point2::new(3.3, 3.3), Point2::new(3.3, 3.3)));
        let wall = OccupancyGrid::from_fn(10, 10, 1.0, Point2::ZERO, |x, _| x == 4).unwrap();
        assert!(!wall.segment_free(Point2::new(1.0, 1.0), Point2::new(8.0, 8.0)));
        assert!(!wall.segment_free(Point2::new(4.5, 4.5), Point2::new(4.5, 4.5)));
    }

    #[test]
    fn diagonal_corner_clip_is_caught() {
        // y = 3.05 - x cuts a 0.07 m chord off the corner of cell (2, 1).
        let g = OccupancyGrid::from_fn(4, 4, 1.0, Point2::ZERO, |x, y| (x, y) == (2, 1)).unwrap();
        assert!(!g.segment_free(Point2::new(1.05, 2.0), Point2::new(3.0, 0.05)));
        let g = OccupancyGrid::empty(4, 4, 1.0, Point2::ZERO).unwrap();
        assert!(g.segment_free(Point2::new(1.05, 2.0), Point2::new(3.0, 0.05)));
    }

    #[test]
    fn dilation_blocks_neighbourhood_and_border() {
        let g = OccupancyGrid::from_fn(11, 11, 1.0, Point2::ZERO, |x, y| (x, y) == (5, 5)).unwrap();
        let d = g.dilated(1.0);
        assert!(d.is_occupied_cell(4, 6));
        assert!(d.is_occupied_cell(0, 3));
        assert!(!d.is_occupied_cell(3, 3));
        assert!(!d.is_occupied_cell(7, 2));
    }

    fn arb_grid() -> impl Strategy<Value = OccupancyGrid> {
        (1usize..12, 1usize..12, prop::collection::vec(any::<bool>(), 144)).prop_map(|(w, h, bits)| {
            OccupancyGrid::from_fn(w, h, 0.5, Point2::new(-1.0, 2.0), |x, y| bits[y * 12 + x]).unwrap()
        })
    }

    proptest! {
        #[test]
        fn text_round_trip(g in arb_grid()) {
            let back = load_map(&g.to_text()).unwrap();
            prop_assert_eq!(back, g);
        }

        #[test]
        fn segment_symmetric_and_implies_endpoints(
            g in arb_grid(),
            ax in -1.5f64..5.5, ay in 1.5f64..8.5, bx in -1.5f64..5.5, by in 1.5f64..8.5,
        ) {
            let (a, b) = (Point2::new(ax, ay), Point2::new(bx, by));
            let ab = g.segment_free(a, b);
            prop_assert_eq!(ab, g.segment_free(b, a));
            if ab {
                prop_assert!(g.is_free(a) && g.is_free(b));
            }
        }
    }
}
