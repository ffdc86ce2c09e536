//! Contour-area functions of gridded fields.
//!
//! A field is read as the piecewise-linear interpolant on the triangulation
//! that splits every grid cell into four triangles around an extra center
//! vertex carrying the mean of the four corners. `A(c)` is the area of the
//! closed superlevel set `{x : w(x) >= c}`.
//!
//! Two routes compute it. [`area_at_level`] clips each triangle against the
//! half-plane and sums polygon areas. [`areas_at_levels`] scans the triangles
//! once, accumulates `x1 x x2 / 2` over the contour segment inside each
//! triangle (signed by the orientation of the triangle taken in increasing
//! value order), and closes the curves along the domain boundary.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{fmt_f64, Grid, ScalarField};

pub type Point = (f64, f64);

#[inline]
fn cross(a: Point, b: Point) -> f64 {
    a.0 * b.1 - a.1 * b.0
}

#[inline]
fn lerp(a: Point, b: Point, t: f64) -> Point {
    (a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1))
}

/// Signed shoelace area; positive for counterclockwise vertex order.
pub fn polygon_area(vertices: &[Point]) -> Result<f64> {
    if vertices.len() < 3 {
        return Err(Error::Input(format!(
            "polygon needs at least 3 vertices, got {}",
            vertices.len()
        )));
    }
    Ok(shoelace(vertices))
}

fn shoelace(vertices: &[Point]) -> f64 {
    let n = vertices.len();
    let mut s = 0.0;
    for k in 0..n {
        s += cross(vertices[k], vertices[(k + 1) % n]);
    }
    0.5 * s
}

/// Visits the four counterclockwise triangles `(center, corner, next corner)`
/// of every cell.
pub fn for_each_triangle(field: &ScalarField, mut visit: impl FnMut([Point; 3], [f64; 3])) {
    let grid = field.grid();
    for j in 0..grid.ny() - 1 {
        for i in 0..grid.nx() - 1 {
            let p00 = grid.point(i, j);
            let p10 = grid.point(i + 1, j);
            let p11 = grid.point(i + 1, j + 1);
            let p01 = grid.point(i, j + 1);
            let f00 = field.at(i, j);
            let f10 = field.at(i + 1, j);
            let f11 = field.at(i + 1, j + 1);
            let f01 = field.at(i, j + 1);
            let pc = (0.5 * (p00.0 + p10.0), 0.5 * (p00.1 + p01.1));
            let fc = 0.25 * (f00 + f10 + f11 + f01);
            visit([pc, p00, p10], [fc, f00, f10]);
            visit([pc, p10, p11], [fc, f10, f11]);
            visit([pc, p11, p01], [fc, f11, f01]);
            visit([pc, p01, p00], [fc, f01, f00]);
        }
    }
}

/// Area of `{f >= c}` inside one triangle with linear `f`, by clipping.
pub fn clip_triangle(p: [Point; 3], f: [f64; 3], c: f64) -> f64 {
    let mut poly: [Point; 4] = [(0.0, 0.0); 4];
    let mut n = 0;
    for k in 0..3 {
        let m = (k + 1) % 3;
        let (ink, inm) = (f[k] >= c, f[m] >= c);
        if ink {
            poly[n] = p[k];
            n += 1;
        }
        if ink != inm {
            let t = (c - f[k]) / (f[m] - f[k]);
            poly[n] = lerp(p[k], p[m], t);
            n += 1;
        }
    }
    if n < 3 {
        0.0
    } else {
        shoelace(&poly[..n]).abs()
    }
}

/// Exact area of the closed superlevel set `{w >= c}` of the piecewise-linear
/// interpolant, by per-triangle clipping.
pub fn area_at_level(field: &ScalarField, c: f64) -> f64 {
    if let Some(a) = trivial_area(field, c) {
        return a;
    }
    let mut total = 0.0;
    for_each_triangle(field, |p, f| total += clip_triangle(p, f, c));
    total
}

/// Oriented contour segment of level `c` inside one triangle, with the
/// superlevel region on its left. `None` when the contour misses the triangle.
pub fn contour_segment(p: [Point; 3], f: [f64; 3], c: f64) -> Option<(Point, Point)> {
    let mut ord = [0usize, 1, 2];
    ord.sort_by(|&a, &b| f[a].total_cmp(&f[b]));
    let [lo, mid, hi] = ord;
    if !(c > f[lo] && c <= f[hi]) {
        return None;
    }
    let b = lerp(p[lo], p[hi], (c - f[lo]) / (f[hi] - f[lo]));
    let x = if c < f[mid] {
        lerp(p[lo], p[mid], (c - f[lo]) / (f[mid] - f[lo]))
    } else if f[hi] > f[mid] {
        lerp(p[mid], p[hi], (c - f[mid]) / (f[hi] - f[mid]))
    } else {
        p[mid]
    };
    let (vm, vh) = (
        (p[mid].0 - p[lo].0, p[mid].1 - p[lo].1),
        (p[hi].0 - p[lo].0, p[hi].1 - p[lo].1),
    );
    if cross(vm, vh) > 0.0 {
        Some((b, x))
    } else {
        Some((x, b))
    }
}

/// Counterclockwise boundary edges of the domain with their end values.
fn for_each_boundary_edge(field: &ScalarField, mut visit: impl FnMut(Point, Point, f64, f64)) {
    let grid = field.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut edge = |a: (usize, usize), b: (usize, usize)| {
        visit(
            grid.point(a.0, a.1),
            grid.point(b.0, b.1),
            field.at(a.0, a.1),
            field.at(b.0, b.1),
        )
    };
    for i in 0..nx - 1 {
        edge((i, 0), (i + 1, 0));
    }
    for j in 0..ny - 1 {
        edge((nx - 1, j), (nx - 1, j + 1));
    }
    for i in (1..nx).rev() {
        edge((i, ny - 1), (i - 1, ny - 1));
    }
    for j in (1..ny).rev() {
        edge((0, j), (0, j - 1));
    }
}

/// Part of the boundary edge `a -> b` where `f >= c`, as an oriented segment.
fn boundary_piece(a: Point, b: Point, fa: f64, fb: f64, c: f64) -> Option<(Point, Point)> {
    match (fa >= c, fb >= c) {
        (true, true) => Some((a, b)),
        (false, false) => None,
        (true, false) => Some((a, lerp(a, b, (c - fa) / (fb - fa)))),
        (false, true) => Some((lerp(a, b, (c - fa) / (fb - fa)), b)),
    }
}

/// Area of `{w >= c}` for many levels in one pass over the triangulation,
/// by signed contour-segment accumulation.
pub fn areas_at_levels(field: &ScalarField, levels: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..levels.len()).collect();
    order.sort_by(|&a, &b| levels[a].total_cmp(&levels[b]));
    let sorted: Vec<f64> = order.iter().map(|&k| levels[k]).collect();

    const PAR_CHUNK: usize = 64;
    let acc: Vec<f64> = if sorted.len() > PAR_CHUNK {
        sorted
            .par_chunks(PAR_CHUNK)
            .flat_map_iter(|chunk| scan_sorted(field, chunk))
            .collect()
    } else {
        scan_sorted(field, &sorted)
    };

    let mut out = vec![0.0; levels.len()];
    for (k, &dst) in order.iter().enumerate() {
        out[dst] = trivial_area(field, sorted[k]).unwrap_or(acc[k]);
    }
    out
}

fn scan_sorted(field: &ScalarField, sorted: &[f64]) -> Vec<f64> {
    let n = sorted.len();
    let mut acc = vec![0.0; n];
    // Full boundary edges are shared by every level below the edge minimum.
    let mut full = vec![0.0; n + 1];

    for_each_triangle(field, |p, f| {
        let lo = f[0].min(f[1]).min(f[2]);
        let hi = f[0].max(f[1]).max(f[2]);
        let start = sorted.partition_point(|&c| c <= lo);
        let end = sorted.partition_point(|&c| c <= hi);
        for k in start..end {
            if let Some((a, b)) = contour_segment(p, f, sorted[k]) {
                acc[k] += 0.5 * cross(a, b);
            }
        }
    });

    for_each_boundary_edge(field, |a, b, fa, fb| {
        let (lo, hi) = (fa.min(fb), fa.max(fb));
        let below = sorted.partition_point(|&c| c <= lo);
        let w = 0.5 * cross(a, b);
        full[0] += w;
        full[below] -= w;
        let end = sorted.partition_point(|&c| c <= hi);
        for k in below..end {
            if let Some((s, e)) = boundary_piece(a, b, fa, fb, sorted[k]) {
                acc[k] += 0.5 * cross(s, e);
            }
        }
    });

    let mut running = 0.0;
    for k in 0..n {
        running += full[k];
        acc[k] += running;
    }
    acc
}

/// Single-level form of [`areas_at_levels`].
pub fn area_at_level_fast(field: &ScalarField, c: f64) -> f64 {
    areas_at_levels(field, &[c])[0]
}

/// Replaces `values` by their least-squares nonincreasing fit (pool adjacent
/// violators, equal weights).
pub fn isotonic_nonincreasing(values: &mut [f64]) {
    // (mean, count) blocks
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(values.len());
    for &v in values.iter() {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (m1, n1) = blocks[blocks.len() - 1];
            let (m0, n0) = blocks[blocks.len() - 2];
            if m0 >= m1 {
                break;
            }
            blocks.pop();
            let n = n0 + n1;
            *blocks.last_mut().unwrap() = ((m0 * n0 as f64 + m1 * n1 as f64) / n as f64, n);
        }
    }
    let mut k = 0;
    for (m, n) in blocks {
        for v in &mut values[k..k + n] {
            *v = m;
        }
        k += n;
    }
}

/// Monotone table of `c -> A(c)` with a monotone piecewise-cubic interpolant.
#[derive(Debug, Clone, PartialEq)]
pub struct AreaFunction {
    levels: Vec<f64>,
    areas: Vec<f64>,
    slopes: Vec<f64>,
}

impl AreaFunction {
    /// Levels must be strictly increasing and areas nonincreasing.
    pub fn from_samples(levels: Vec<f64>, areas: Vec<f64>) -> Result<Self> {
        if levels.is_empty() || levels.len() != areas.len() {
            return Err(Error::Input(format!(
                "area table needs matching nonempty columns ({} levels, {} areas)",
                levels.len(),
                areas.len()
            )));
        }
        if levels.iter().chain(&areas).any(|v| !v.is_finite()) {
            return Err(Error::Input("area table has non-finite entries".into()));
        }
        if levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Input(
                "area table levels not strictly increasing".into(),
            ));
        }
        if areas.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::Input("area table areas not nonincreasing".into()));
        }
        let slopes = pchip_slopes(&levels, &areas);
        Ok(Self {
            levels,
            areas,
            slopes,
        })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn c_min(&self) -> f64 {
        self.levels[0]
    }

    pub fn c_max(&self) -> f64 {
        *self.levels.last().unwrap()
    }

    pub fn a_first(&self) -> f64 {
        self.areas[0]
    }

    pub fn a_last(&self) -> f64 {
        *self.areas.last().unwrap()
    }

    /// Interpolated area, clamped to the end values outside the table.
    pub fn evaluate(&self, c: f64) -> f64 {
        let n = self.levels.len();
        if c <= self.levels[0] {
            return self.areas[0];
        }
        if c >= self.levels[n - 1] {
            return self.areas[n - 1];
        }
        let k = self.levels.partition_point(|&x| x <= c) - 1;
        let (c0, c1) = (self.levels[k], self.levels[k + 1]);
        let (a0, a1) = (self.areas[k], self.areas[k + 1]);
        let h = c1 - c0;
        let t = (c - c0) / h;
        let t2 = t * t;
        let s = 1.0 - t;
        let v = a0 * (1.0 + 2.0 * t) * s * s
            + h * self.slopes[k] * t * s * s
            + a1 * t2 * (3.0 - 2.0 * t)
            - h * self.slopes[k + 1] * t2 * s;
        v.clamp(a1, a0)
    }

    /// Smallest level whose interpolated area does not exceed `a`, found by
    /// bisection to `1e-13` of the level range. Areas above the first sample
    /// map to the lowest level, areas below the last to the highest.
    pub fn invert(&self, a: f64) -> f64 {
        let n = self.levels.len();
        if n == 1 || a >= self.areas[0] {
            return self.levels[0];
        }
        if a < self.areas[n - 1] {
            return self.levels[n - 1];
        }
        let k = self.areas.partition_point(|&x| x > a);
        let (mut lo, mut hi) = (self.levels[k - 1], self.levels[k]);
        let tol = 1e-13 * (self.c_max() - self.c_min());
        for _ in 0..200 {
            if hi - lo <= tol {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.evaluate(mid) <= a {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("c,area\n");
        for (c, a) in self.levels.iter().zip(&self.areas) {
            let _ = writeln!(out, "{},{}", fmt_f64(*c), fmt_f64(*a));
        }
        out
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == "c,area" => {}
            other => {
                return Err(Error::Input(format!("bad area table header {other:?}")));
            }
        }
        let (mut levels, mut areas) = (Vec::new(), Vec::new());
        for (row, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let mut it = line.split(',');
            let mut next = || -> Result<f64> {
                it.next()
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| Error::Input(format!("area table row {row}: '{line}'")))
            };
            levels.push(next()?);
            areas.push(next()?);
        }
        Self::from_samples(levels, areas)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Fritsch-Butland slopes: weighted harmonic means of adjacent secants, zero
/// at extrema, with the shape-preserving three-point end rule.
fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 1 {
        return vec![0.0];
    }
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let d: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
    if n == 2 {
        return vec![d[0], d[0]];
    }
    let mut m = vec![0.0; n];
    for k in 1..n - 1 {
        let (d0, d1) = (d[k - 1], d[k]);
        if d0 == 0.0 || d1 == 0.0 || d0.signum() != d1.signum() {
            m[k] = 0.0;
        } else {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            m[k] = (w1 + w2) / (w1 / d0 + w2 / d1);
        }
    }
    m[0] = end_slope(h[0], h[1], d[0], d[1]);
    m[n - 1] = end_slope(h[n - 2], h[n - 3], d[n - 2], d[n - 3]);
    m
}

fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let m = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if m.signum() != d0.signum() || d0 == 0.0 {
        0.0
    } else if d0.signum() != d1.signum() && m.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        m
    }
}

/// Adaptive sampling of a nonincreasing area function on `[lo, hi]`.
///
/// Starts from a uniform grid and bisects every interval whose area jump
/// exceeds `domain_area / budget` until the jump criterion holds or the
/// interval is narrower than `1e-12 (hi - lo)`.
pub fn tabulate_with<F>(lo: f64, hi: f64, budget: usize, domain_area: f64, eval: F) -> AreaFunction
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    if hi <= lo {
        let a = eval(&[lo])[0];
        let above = lo.next_up();
        return AreaFunction::from_samples(vec![lo, above], vec![a, 0.0])
            .expect("two-knot degenerate table");
    }
    let budget = budget.max(8);
    let m0 = (budget / 4).max(2);
    let mut levels: Vec<f64> = (0..=m0)
        .map(|k| lo + (hi - lo) * k as f64 / m0 as f64)
        .collect();
    levels[m0] = hi;
    let mut areas = eval(&levels);

    let jump = domain_area / budget as f64;
    let min_dc = 1e-12 * (hi - lo);
    for _ in 0..256 {
        let mids: Vec<f64> = levels
            .windows(2)
            .zip(areas.windows(2))
            .filter(|(c, a)| (a[0] - a[1]).abs() > jump && c[1] - c[0] > 2.0 * min_dc)
            .map(|(c, _)| 0.5 * (c[0] + c[1]))
            .collect();
        if mids.is_empty() {
            break;
        }
        let new_areas = eval(&mids);
        let mut merged: Vec<(f64, f64)> = levels
            .iter()
            .copied()
            .zip(areas.iter().copied())
            .chain(mids.into_iter().zip(new_areas))
            .collect();
        merged.sort_by(|a, b| a.0.total_cmp(&b.0));
        merged.dedup_by(|a, b| a.0 == b.0);
        levels = merged.iter().map(|p| p.0).collect();
        areas = merged.iter().map(|p| p.1).collect();
    }
    isotonic_nonincreasing(&mut areas);
    for a in areas.iter_mut() {
        *a = a.clamp(0.0, domain_area);
    }
    AreaFunction::from_samples(levels, areas).expect("adaptive table is monotone")
}

/// Area of the unit square the grids cover.
pub const DOMAIN_AREA: f64 = 1.0;

/// Exact answers for levels outside the field range, where summing triangle
/// pieces would only add rounding.
fn trivial_area(field: &ScalarField, c: f64) -> Option<f64> {
    if c <= field.min() {
        Some(DOMAIN_AREA)
    } else if c > field.max() {
        Some(0.0)
    } else {
        None
    }
}

/// Adaptive table of the piecewise-linear area function of `field`.
pub fn tabulate(field: &ScalarField, budget: usize) -> AreaFunction {
    tabulate_with(field.min(), field.max(), budget, DOMAIN_AREA, |levels| {
        areas_at_levels(field, levels)
    })
}

/// Extrapolated combination `(r^2 A_h - A_H) / (r^2 - 1)` of two tables,
/// sampled on the union of knots inside the fine table's range and made
/// monotone again by isotonic regression.
pub fn richardson_with_ratio(
    fine: &AreaFunction,
    coarse: &AreaFunction,
    ratio: f64,
) -> Result<AreaFunction> {
    if ratio.is_nan() || ratio <= 1.0 {
        return Err(Error::Input(format!(
            "refinement ratio must exceed 1, got {ratio}"
        )));
    }
    if coarse.c_max() < fine.c_min() || coarse.c_min() > fine.c_max() {
        return Err(Error::Input(format!(
            "area tables cover disjoint ranges [{}, {}] and [{}, {}]",
            fine.c_min(),
            fine.c_max(),
            coarse.c_min(),
            coarse.c_max()
        )));
    }
    let (lo, hi) = (fine.c_min(), fine.c_max());
    let mut levels: Vec<f64> = fine
        .levels()
        .iter()
        .chain(coarse.levels())
        .copied()
        .filter(|c| *c >= lo && *c <= hi)
        .collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let r2 = ratio * ratio;
    let top = fine.a_first().max(coarse.a_first());
    let mut areas: Vec<f64> = levels
        .iter()
        .map(|&c| (r2 * fine.evaluate(c) - coarse.evaluate(c)) / (r2 - 1.0))
        .collect();
    isotonic_nonincreasing(&mut areas);
    for a in areas.iter_mut() {
        *a = a.clamp(0.0, top);
    }
    AreaFunction::from_samples(levels, areas)
}

/// [`richardson_with_ratio`] for a coarse grid of twice the spacing.
pub fn richardson(fine: &AreaFunction, coarse: &AreaFunction) -> Result<AreaFunction> {
    richardson_with_ratio(fine, coarse, 2.0)
}

/// Grid with about half as many cells per direction.
pub fn coarse_grid(grid: &Grid) -> Grid {
    let cx = (grid.nx() - 1).div_ceil(2);
    let cy = (grid.ny() - 1).div_ceil(2);
    Grid::new(cx.max(2) + 1, cy.max(2) + 1).expect("coarse grid has at least 3 vertices")
}

/// Restriction to [`coarse_grid`]: samples of the fine piecewise-linear
/// interpolant, which is plain injection when the cell counts are even.
pub fn restrict(field: &ScalarField) -> ScalarField {
    field.resample(coarse_grid(field.grid()))
}

/// Adaptive table of the extrapolated area function, evaluating the exact
/// piecewise-linear areas of both fields at every sampled level.
pub fn tabulate_extrapolated(
    fine: &ScalarField,
    coarse: &ScalarField,
    budget: usize,
) -> AreaFunction {
    let (gf, gc) = (fine.grid(), coarse.grid());
    let r2 = (gc.hx() * gc.hy()) / (gf.hx() * gf.hy());
    tabulate_with(fine.min(), fine.max(), budget, DOMAIN_AREA, |levels| {
        let af = areas_at_levels(fine, levels);
        let ac = areas_at_levels(coarse, levels);
        af.iter()
            .zip(&ac)
            .map(|(f, c)| (r2 * f - c) / (r2 - 1.0))
            .collect()
    })
}

/// How area functions are built during a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AreaConfig {
    pub budget: usize,
    pub richardson: bool,
}

impl Default for AreaConfig {
    fn default() -> Self {
        Self {
            budget: 200,
            richardson: true,
        }
    }
}

impl AreaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.budget < 8 {
            return Err(Error::Config(format!(
                "area budget must be at least 8, got {}",
                self.budget
            )));
        }
        Ok(())
    }

    pub fn tabulate(&self, field: &ScalarField) -> AreaFunction {
        if self.richardson {
            tabulate_extrapolated(field, &restrict(field), self.budget)
        } else {
            tabulate(field, self.budget)
        }
    }
}

/// `sup |A0(c) - A1(c)|` over the knots of both tables.
pub fn area_defect(a0: &AreaFunction, a1: &AreaFunction) -> f64 {
    a0.levels()
        .iter()
        .chain(a1.levels())
        .map(|&c| (a0.evaluate(c) - a1.evaluate(c)).abs())
        .fold(0.0, f64::max)
}
