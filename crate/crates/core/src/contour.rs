//! Contour polylines over the center-vertex triangulation, and a minimal SVG
//! plot writer.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::areafn::Point;
use crate::grid::ScalarField;

/// One connected piece of a level curve, oriented with `{w >= c}` on its left.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    pub level: f64,
    pub points: Vec<Point>,
    pub closed: bool,
}

type EdgeKey = (usize, usize);

fn edge_key(a: usize, b: usize) -> EdgeKey {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

struct Segment {
    start: (EdgeKey, Point),
    end: (EdgeKey, Point),
}

/// Level-`c` segments of every triangle, keyed by the triangulation edge each
/// endpoint lies on.
fn segments(field: &ScalarField, c: f64) -> Vec<Segment> {
    let grid = field.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    let n = grid.len();
    let mut out = Vec::new();
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let ids = [
                grid.index(i, j),
                grid.index(i + 1, j),
                grid.index(i + 1, j + 1),
                grid.index(i, j + 1),
            ];
            let pts = [
                grid.point(i, j),
                grid.point(i + 1, j),
                grid.point(i + 1, j + 1),
                grid.point(i, j + 1),
            ];
            let vals = ids.map(|k| field.values()[k]);
            let center_id = n + j * (nx - 1) + i;
            let pc = (0.5 * (pts[0].0 + pts[1].0), 0.5 * (pts[0].1 + pts[3].1));
            let fc = 0.25 * vals.iter().sum::<f64>();
            for k in 0..4 {
                let m = (k + 1) % 4;
                let tri_ids = [center_id, ids[k], ids[m]];
                let tri_pts = [pc, pts[k], pts[m]];
                let tri_vals = [fc, vals[k], vals[m]];
                if let Some(s) = triangle_segment(tri_ids, tri_pts, tri_vals, c) {
                    out.push(s);
                }
            }
        }
    }
    out
}

fn triangle_segment(ids: [usize; 3], p: [Point; 3], f: [f64; 3], c: f64) -> Option<Segment> {
    let inside = f.map(|v| v >= c);
    let mut hits: Vec<(EdgeKey, Point)> = Vec::with_capacity(2);
    for k in 0..3 {
        let m = (k + 1) % 3;
        if inside[k] != inside[m] {
            // interpolate from the lower id so both triangles agree bitwise
            let (a, b) = if ids[k] < ids[m] { (k, m) } else { (m, k) };
            let t = (c - f[a]) / (f[b] - f[a]);
            let pt = (
                p[a].0 + t * (p[b].0 - p[a].0),
                p[a].1 + t * (p[b].1 - p[a].1),
            );
            hits.push((edge_key(ids[k], ids[m]), pt));
        }
    }
    if hits.len() != 2 {
        return None;
    }
    let (s, e) = (hits[0], hits[1]);
    if s.1 == e.1 {
        return None;
    }
    // orient so the inside lies to the left
    let d = (e.1 .0 - s.1 .0, e.1 .1 - s.1 .1);
    let side = |q: Point| d.0 * (q.1 - s.1 .1) - d.1 * (q.0 - s.1 .0);
    let lone = if inside.iter().filter(|x| **x).count() == 1 {
        (0..3).find(|&k| inside[k]).map(|k| (k, 1.0))
    } else {
        (0..3).find(|&k| !inside[k]).map(|k| (k, -1.0))
    };
    let (k, sign) = lone?;
    if side(p[k]) * sign >= 0.0 {
        Some(Segment { start: s, end: e })
    } else {
        Some(Segment { start: e, end: s })
    }
}

/// Chains the level-`c` segments into polylines.
pub fn contour_lines(field: &ScalarField, c: f64) -> Vec<Polyline> {
    let segs = segments(field, c);
    let mut by_start: HashMap<EdgeKey, usize> = HashMap::with_capacity(segs.len());
    let mut by_end: HashMap<EdgeKey, usize> = HashMap::with_capacity(segs.len());
    for (k, s) in segs.iter().enumerate() {
        by_start.insert(s.start.0, k);
        by_end.insert(s.end.0, k);
    }
    let mut used = vec![false; segs.len()];
    let mut lines = Vec::new();
    for first in 0..segs.len() {
        if used[first] {
            continue;
        }
        // walk back to the start of an open chain, or around a closed one
        let mut head = first;
        loop {
            match by_end.get(&segs[head].start.0) {
                Some(&prev) if prev != first && !used[prev] => head = prev,
                _ => break,
            }
        }
        let mut points = vec![segs[head].start.1];
        let mut cur = head;
        let mut closed = false;
        loop {
            used[cur] = true;
            points.push(segs[cur].end.1);
            match by_start.get(&segs[cur].end.0) {
                Some(&next) if next == head => {
                    closed = true;
                    points.pop();
                    break;
                }
                Some(&next) if !used[next] => cur = next,
                _ => break,
            }
        }
        lines.push(Polyline {
            level: c,
            points,
            closed,
        });
    }
    lines
}

/// SVG contour plot of `field` at `levels` over the unit square.
pub fn svg_plot(field: &ScalarField, levels: &[f64], title: &str) -> String {
    const SIZE: f64 = 480.0;
    const PAD: f64 = 40.0;
    let tx = |p: Point| (PAD + p.0 * SIZE, PAD + (1.0 - p.1) * SIZE);
    let total = SIZE + 2.0 * PAD;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total}" height="{total}" viewBox="0 0 {total} {total}">"#
    );
    let _ = writeln!(
        s,
        r#"<rect x="{PAD}" y="{PAD}" width="{SIZE}" height="{SIZE}" fill="none" stroke="black"/>"#
    );
    for k in 0..=4 {
        let v = k as f64 / 4.0;
        let (x, y0) = tx((v, 0.0));
        let (x0, y) = tx((0.0, v));
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{}" font-size="11" text-anchor="middle">{v}</text>"#,
            y0 + 16.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="11" text-anchor="end">{v}</text>"#,
            x0 - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="13" text-anchor="middle">{}</text>"#,
        total / 2.0,
        PAD - 14.0,
        escape(title)
    );
    let (lo, hi) = levels
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &c| {
            (a.min(c), b.max(c))
        });
    for &c in levels {
        let frac = if hi > lo { (c - lo) / (hi - lo) } else { 0.5 };
        let color = format!(
            "rgb({},{},{})",
            (40.0 + 200.0 * frac) as u8,
            40,
            (240.0 - 200.0 * frac) as u8
        );
        for line in contour_lines(field, c) {
            let mut d = String::new();
            for (k, p) in line.points.iter().enumerate() {
                let (x, y) = tx(*p);
                let _ = write!(d, "{}{:.3},{:.3} ", if k == 0 { "M" } else { "L" }, x, y);
            }
            if line.closed {
                d.push('Z');
            }
            let _ = writeln!(
                s,
                r#"<path class="contour" data-level="{c}" d="{}" fill="none" stroke="{color}" stroke-width="1.2"/>"#,
                d.trim_end()
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::areafn::{area_at_level, polygon_area};
    use crate::grid::{Analytic, Grid};

    #[test]
    fn blob_levels_are_single_closed_curves() {
        let g = Grid::square(20).unwrap();
        let w = ScalarField::sample(g, &Analytic::BLOB, true).unwrap();
        for k in 1..=9 {
            let c = k as f64 / 10.0;
            let lines = contour_lines(&w, c);
            assert_eq!(lines.len(), 1, "level {c}");
            assert!(lines[0].closed);
            // enclosed polygon area equals the superlevel area
            let a = polygon_area(&lines[0].points).unwrap();
            assert!((a - area_at_level(&w, c)).abs() < 1e-12);
        }
    }

    #[test]
    fn open_curve_hits_boundary() {
        let g = Grid::square(6).unwrap();
        let w = ScalarField::sample(
            g,
            &Analytic::Affine {
                a: 0.0,
                b: 1.0,
                c: 0.0,
            },
            false,
        )
        .unwrap();
        let lines = contour_lines(&w, 0.55);
        assert_eq!(lines.len(), 1);
        assert!(!lines[0].closed);
        for p in &lines[0].points {
            assert!((p.0 - 0.55).abs() < 1e-14);
        }
        // {x >= c} lies to the left: the curve runs downward
        let (a, b) = (lines[0].points[0], *lines[0].points.last().unwrap());
        assert!(a.1 > b.1);
    }

    #[test]
    fn svg_has_one_path_per_component() {
        let g = Grid::square(20).unwrap();
        let w = ScalarField::sample(g, &Analytic::BLOB, true).unwrap();
        let levels: Vec<f64> = (1..=9).map(|k| k as f64 / 10.0).collect();
        let svg = svg_plot(&w, &levels, "t = 0");
        assert_eq!(svg.matches("<path").count(), 9);
        assert_eq!(svg.matches("Z\"").count(), 9);
        assert!(svg.starts_with("<svg"));
    }
}
