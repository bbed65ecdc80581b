//! SVG overlay of a map, corridors, agent trajectories and obstacle disks.
//!
//! Output depends only on the inputs, so re-rendering a saved trace is
//! byte-identical.

use std::collections::BTreeMap;
use std::fmt::Write;

use crate::corridor::Corridor;
use crate::geom::Point2;
use crate::gridmap::OccupancyGrid;
use crate::navsim::TraceRecord;

/// Pixels per meter.
const SCALE: f64 = 40.0;
const AGENT_COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// A disk drawn on top of the map, e.g. an obstacle's start position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disk {
    pub center: Point2,
    pub radius: f64,
}

struct Frame {
    origin: Point2,
    height: f64,
}

impl Frame {
    fn px(&self, p: Point2) -> (f64, f64) {
        ((p.x - self.origin.x) * SCALE, (self.height - (p.y - self.origin.y)) * SCALE)
    }
}

fn num(v: f64) -> String {
    let s = format!("{v:.2}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

pub fn render_svg(grid: &OccupancyGrid, corridors: &[Corridor], trace: &[TraceRecord], disks: &[Disk]) -> String {
    let ext = grid.extent();
    let f = Frame {
        origin: grid.origin(),
        height: ext.y,
    };
    let (w, h) = (ext.x * SCALE, ext.y * SCALE);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">"#,
        num(w),
        num(h),
        num(w),
        num(h)
    );
    let _ = writeln!(out, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);

    // Occupied cells, merged into horizontal runs per row.
    let res = grid.resolution();
    let _ = writeln!(out, r##"<g fill="#333333">"##);
    for iy in 0..grid.height() {
        let mut ix = 0;
        while ix < grid.width() {
            if !grid.is_occupied_cell(ix, iy) {
                ix += 1;
                continue;
            }
            let run_start = ix;
            while ix < grid.width() && grid.is_occupied_cell(ix, iy) {
                ix += 1;
            }
            let top_left = Point2::new(
                grid.origin().x + run_start as f64 * res,
                grid.origin().y + (iy + 1) as f64 * res,
            );
            let (x, y) = f.px(top_left);
            let _ = writeln!(
                out,
                r#"<rect x="{}" y="{}" width="{}" height="{}"/>"#,
                num(x),
                num(y),
                num((ix - run_start) as f64 * res * SCALE),
                num(res * SCALE)
            );
        }
    }
    let _ = writeln!(out, "</g>");

    let _ = writeln!(
        out,
        r##"<g fill="#4c9be8" fill-opacity="0.15" stroke="#4c9be8" stroke-width="1">"##
    );
    for c in corridors {
        let pts: Vec<String> = c
            .world_vertices()
            .iter()
            .map(|&v| {
                let (x, y) = f.px(v);
                format!("{},{}", num(x), num(y))
            })
            .collect();
        let _ = writeln!(out, r#"<polygon points="{}"/>"#, pts.join(" "));
    }
    let _ = writeln!(out, "</g>");

    let _ = writeln!(out, r##"<g fill="#e8a14c" fill-opacity="0.5" stroke="#b36b00">"##);
    for d in disks {
        let (x, y) = f.px(d.center);
        let _ = writeln!(
            out,
            r#"<circle cx="{}" cy="{}" r="{}"/>"#,
            num(x),
            num(y),
            num(d.radius * SCALE)
        );
    }
    let _ = writeln!(out, "</g>");

    let mut by_agent: BTreeMap<usize, Vec<Point2>> = BTreeMap::new();
    for r in trace {
        by_agent.entry(r.agent).or_default().push(r.pose.position());
    }
    for (agent, pts) in &by_agent {
        let color = AGENT_COLORS[agent % AGENT_COLORS.len()];
        let coords: Vec<String> = pts
            .iter()
            .map(|&p| {
                let (x, y) = f.px(p);
                format!("{},{}", num(x), num(y))
            })
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            coords.join(" ")
        );
        if let (Some(&first), Some(&last)) = (pts.first(), pts.last()) {
            for (p, fill) in [(first, "#ffffff"), (last, color)] {
                let (x, y) = f.px(p);
                let _ = writeln!(
                    out,
                    r#"<circle cx="{}" cy="{}" r="4" fill="{fill}" stroke="{color}"/>"#,
                    num(x),
                    num(y)
                );
            }
        }
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ocp::{Control, Pose};

    fn record(agent: usize, x: f64, y: f64) -> TraceRecord {
        TraceRecord {
            time: 0.0,
            agent,
            pose: Pose::new(x, y, 0.0),
            command: Control::ZERO,
            corridor_index: 0,
            min_h: None,
            solver_status: None,
            relaxed: false,
        }
    }

    #[test]
    fn occupied_rows_are_merged() {
        let g = OccupancyGrid::from_fn(10, 2, 1.0, Point2::ZERO, |x, y| y == 0 && (2..6).contains(&x)).unwrap();
        let svg = render_svg(&g, &[], &[], &[]);
        assert!(svg.contains(r#"<rect x="80" y="40" width="160" height="40"/>"#), "{svg}");
        assert_eq!(svg.matches("<rect x=").count(), 1);
    }

    #[test]
    fn renders_all_layers_deterministically() {
        let g = OccupancyGrid::empty(50, 50, 0.1, Point2::ZERO).unwrap();
        let c = Corridor {
            seed: Point2::new(2.0, 2.0),
            v_left: Point2::new(-1.0, -0.5),
            v_right: Point2::new(1.0, 0.5),
            theta: 0.3,
        };
        let trace = vec![record(0, 1.0, 1.0), record(1, 4.0, 4.0), record(0, 1.5, 1.0)];
        let disks = [Disk {
            center: Point2::new(3.0, 3.0),
            radius: 0.8,
        }];
        let a = render_svg(&g, &[c], &trace, &disks);
        assert_eq!(a, render_svg(&g, &[c], &trace, &disks));
        assert_eq!(a.matches("<polygon").count(), 1);
        assert_eq!(a.matches("<polyline").count(), 2);
        assert!(a.contains(r#"<circle cx="120" cy="80" r="32"/>"#));
        assert!(a.contains(r#"points="40,160 60,160""#));
        assert!(a.ends_with("</svg>\n"));
    }
}
