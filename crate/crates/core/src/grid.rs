//! Uniform vertex grids over the unit square and the scalar fields that live on them.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Boundary {
    #[default]
    DirichletZero,
}

/// Vertex grid on `[0,1]^2`. A "20x20 grid" means 20x20 vertices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    nx: usize,
    ny: usize,
    boundary: Boundary,
}

impl Grid {
    pub fn new(nx: usize, ny: usize) -> Result<Self> {
        if nx < 3 || ny < 3 {
            return Err(Error::Config(format!(
                "grid needs at least 3x3 vertices, got {nx}x{ny}"
            )));
        }
        Ok(Self {
            nx,
            ny,
            boundary: Boundary::DirichletZero,
        })
    }

    pub fn square(n: usize) -> Result<Self> {
        Self::new(n, n)
    }

    #[inline]
    pub fn nx(&self) -> usize {
        self.nx
    }

    #[inline]
    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// Spacing in x, `1/(nx-1)`.
    #[inline]
    pub fn h(&self) -> f64 {
        1.0 / (self.nx - 1) as f64
    }

    #[inline]
    pub fn hx(&self) -> f64 {
        self.h()
    }

    #[inline]
    pub fn hy(&self) -> f64 {
        1.0 / (self.ny - 1) as f64
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Coordinates of vertex `(i, j)`. The last vertex in each direction is exactly 1.
    #[inline]
    pub fn point(&self, i: usize, j: usize) -> (f64, f64) {
        (coord(i, self.nx), coord(j, self.ny))
    }

    #[inline]
    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i + 1 == self.nx || j + 1 == self.ny
    }

    /// Cell area `hx * hy`, the quadrature weight of a vertex sum.
    pub fn cell_area(&self) -> f64 {
        self.hx() * self.hy()
    }
}

#[inline]
fn coord(i: usize, n: usize) -> f64 {
    if i + 1 == n {
        1.0
    } else {
        i as f64 / (n - 1) as f64
    }
}

/// Named analytic functions on the unit square.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Analytic {
    Zero,
    Constant {
        value: f64,
    },
    /// `amp * exp(-ax (x-x0)^2 - ay (y-y0)^2)`
    Gaussian {
        amp: f64,
        x0: f64,
        y0: f64,
        ax: f64,
        ay: f64,
    },
    /// `amp * sin(pi x) sin(pi y)`
    SinStream {
        amp: f64,
    },
    /// `-scale ((x-x0)^2 + (y-y0)^2)`
    Paraboloid {
        scale: f64,
        x0: f64,
        y0: f64,
    },
    /// `a + b x + c y`
    Affine {
        a: f64,
        b: f64,
        c: f64,
    },
}

impl Analytic {
    /// Initial vorticity of the rotating-blob test problem.
    pub const BLOB: Analytic = Analytic::Gaussian {
        amp: 1.0,
        x0: 0.75,
        y0: 0.5,
        ax: 45.0,
        ay: 15.0,
    };

    /// Stream function `sin(pi x) sin(pi y)`.
    pub const CELL_STREAM: Analytic = Analytic::SinStream { amp: 1.0 };

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match *self {
            Analytic::Zero => 0.0,
            Analytic::Constant { value } => value,
            Analytic::Gaussian {
                amp,
                x0,
                y0,
                ax,
                ay,
            } => {
                let (dx, dy) = (x - x0, y - y0);
                amp * (-ax * dx * dx - ay * dy * dy).exp()
            }
            Analytic::SinStream { amp } => amp * (PI * x).sin() * (PI * y).sin(),
            Analytic::Paraboloid { scale, x0, y0 } => {
                let (dx, dy) = (x - x0, y - y0);
                -scale * (dx * dx + dy * dy)
            }
            Analytic::Affine { a, b, c } => a + b * x + c * y,
        }
    }

    pub fn gradient(&self, x: f64, y: f64) -> (f64, f64) {
        match *self {
            Analytic::Zero | Analytic::Constant { .. } => (0.0, 0.0),
            Analytic::Gaussian { x0, y0, ax, ay, .. } => {
                let f = self.eval(x, y);
                (-2.0 * ax * (x - x0) * f, -2.0 * ay * (y - y0) * f)
            }
            Analytic::SinStream { amp } => (
                amp * PI * (PI * x).cos() * (PI * y).sin(),
                amp * PI * (PI * x).sin() * (PI * y).cos(),
            ),
            Analytic::Paraboloid { scale, x0, y0 } => {
                (-2.0 * scale * (x - x0), -2.0 * scale * (y - y0))
            }
            Analytic::Affine { b, c, .. } => (b, c),
        }
    }

    /// Velocity `(psi_y, -psi_x)` when `self` is read as a stream function.
    pub fn velocity(&self, x: f64, y: f64) -> (f64, f64) {
        let (px, py) = self.gradient(x, y);
        (py, -px)
    }
}

/// Vertex-sampled scalar on a [`Grid`], stored row by row (`values[j*nx + i]`).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Input(format!(
                "expected {} values for a {}x{} grid, got {}",
                grid.len(),
                grid.nx(),
                grid.ny(),
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(format!("non-finite value at vertex {k}")));
        }
        Ok(Self { grid, values })
    }

    /// Wraps values without the finiteness check; callers validate later.
    pub(crate) fn from_raw(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn from_fn(grid: Grid, mut f: impl FnMut(f64, f64) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                let (x, y) = grid.point(i, j);
                let v = f(x, y);
                if !v.is_finite() {
                    return Err(Error::Input(format!("non-finite sample {v} at ({x}, {y})")));
                }
                values.push(v);
            }
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at every vertex, then optionally imposes the grid's boundary rule.
    pub fn sample(grid: Grid, f: &Analytic, apply_boundary: bool) -> Result<Self> {
        let mut field = Self::from_fn(grid, |x, y| f.eval(x, y))?;
        if apply_boundary {
            field.apply_boundary();
        }
        Ok(field)
    }

    pub fn apply_boundary(&mut self) {
        match self.grid.boundary() {
            Boundary::DirichletZero => {
                let (nx, ny) = (self.grid.nx(), self.grid.ny());
                for i in 0..nx {
                    self.values[i] = 0.0;
                    self.values[(ny - 1) * nx + i] = 0.0;
                }
                for j in 0..ny {
                    self.values[j * nx] = 0.0;
                    self.values[j * nx + nx - 1] = 0.0;
                }
            }
        }
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.grid.index(i, j);
        self.values[k] = v;
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn same_grid(&self, other: &ScalarField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::Input(format!(
                "grid mismatch: {}x{} vs {}x{}",
                self.grid.nx(),
                self.grid.ny(),
                other.grid.nx(),
                other.grid.ny()
            )));
        }
        Ok(())
    }

    /// Value of the piecewise-linear interpolant on the center-vertex triangulation.
    pub fn interpolate(&self, x: f64, y: f64) -> f64 {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        self.interpolate_index(
            x.clamp(0.0, 1.0) * (nx - 1) as f64,
            y.clamp(0.0, 1.0) * (ny - 1) as f64,
        )
    }

    /// Interpolant at fractional vertex coordinates `(sx, sy)`.
    fn interpolate_index(&self, sx: f64, sy: f64) -> f64 {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let i = (sx.floor().max(0.0) as usize).min(nx - 2);
        let j = (sy.floor().max(0.0) as usize).min(ny - 2);
        let (u, v) = (sx - i as f64, sy - j as f64);
        if (u == 0.0 || u == 1.0) && (v == 0.0 || v == 1.0) {
            return self.at(i + u as usize, j + v as usize);
        }
        let f00 = self.at(i, j);
        let f10 = self.at(i + 1, j);
        let f11 = self.at(i + 1, j + 1);
        let f01 = self.at(i, j + 1);
        let fc = 0.25 * (f00 + f10 + f11 + f01);
        // Local coordinates relative to the cell center, in units of the cell.
        let (p, q) = (u - 0.5, v - 0.5);
        // The four triangles are separated by the cell diagonals.
        if q <= p && q <= -p {
            // bottom: center, (0,0), (1,0)
            let b = -2.0 * q;
            fc + b * (0.5 * (f00 + f10) - fc) + p * (f10 - f00)
        } else if p >= q && p >= -q {
            // right: center, (1,0), (1,1)
            let b = 2.0 * p;
            fc + b * (0.5 * (f10 + f11) - fc) + q * (f11 - f10)
        } else if q >= p && q >= -p {
            // top: center, (1,1), (0,1)
            let b = 2.0 * q;
            fc + b * (0.5 * (f11 + f01) - fc) + p * (f11 - f01)
        } else {
            // left: center, (0,1), (0,0)
            let b = -2.0 * p;
            fc + b * (0.5 * (f01 + f00) - fc) + q * (f01 - f00)
        }
    }

    /// Resamples the piecewise-linear interpolant onto another grid.
    pub fn resample(&self, target: Grid) -> ScalarField {
        let mut values = Vec::with_capacity(target.len());
        let (nx, ny) = (self.grid.nx() - 1, self.grid.ny() - 1);
        let (tx, ty) = (target.nx() - 1, target.ny() - 1);
        for j in 0..=ty {
            for i in 0..=tx {
                // exact when the target vertex coincides with a source vertex
                let sx = (i * nx) as f64 / tx as f64;
                let sy = (j * ny) as f64 / ty as f64;
                values.push(self.interpolate_index(sx, sy));
            }
        }
        ScalarField {
            grid: target,
            values,
        }
    }

    /// Plain-text snapshot: header `nx ny h`, then one line per grid row.
    pub fn to_snapshot(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} {} {}",
            self.grid.nx(),
            self.grid.ny(),
            fmt_f64(self.grid.h())
        );
        for row in self.values.chunks(self.grid.nx()) {
            let line: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn parse_snapshot(text: &str) -> Result<Self> {
        let bad = |m: String| Error::Input(format!("snapshot: {m}"));
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
        let mut it = header.split_whitespace();
        let nx: usize = it
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("bad n_x".into()))?;
        let ny: usize = it
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("bad n_y".into()))?;
        let grid = Grid::new(nx, ny)?;
        let mut values = Vec::with_capacity(grid.len());
        for (row, line) in lines.enumerate() {
            let before = values.len();
            for tok in line.split_whitespace() {
                values.push(
                    tok.parse::<f64>()
                        .map_err(|e| bad(format!("row {row}: {e}")))?,
                );
            }
            if values.len() - before != nx {
                return Err(bad(format!(
                    "row {row} has {} values",
                    values.len() - before
                )));
            }
        }
        Self::from_values(grid, values)
    }

    pub fn write_snapshot(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_snapshot())?;
        Ok(())
    }

    pub fn read_snapshot(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_snapshot(&text).map_err(|e| Error::Parse {
            path: path.to_owned(),
            reason: e.to_string(),
        })
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_sizes() {
        let g = Grid::square(20).unwrap();
        assert_eq!(g.h(), 1.0 / 19.0);
        assert_eq!(Grid::square(3).unwrap().h(), 0.5);
        assert_eq!(Grid::square(41).unwrap().h(), 1.0 / 40.0);
        assert!(matches!(Grid::new(2, 5), Err(Error::Config(_))));
        assert!(Grid::new(5, 2).is_err());
    }

    #[test]
    fn corners_exact() {
        for n in [3, 7, 20, 41] {
            let g = Grid::square(n).unwrap();
            assert_eq!(g.point(0, 0), (0.0, 0.0));
            assert_eq!(g.point(n - 1, n - 1), (1.0, 1.0));
        }
    }

    #[test]
    fn sample_blob_and_stream() {
        let g = Grid::square(21).unwrap();
        let w = ScalarField::sample(g, &Analytic::BLOB, false).unwrap();
        assert_eq!(w.at(15, 10), 1.0);
        assert_eq!(w.max(), 1.0);

        let psi = ScalarField::sample(g, &Analytic::CELL_STREAM, false).unwrap();
        assert!((psi.at(10, 10) - 1.0).abs() < 1e-15);
        for k in 0..21 {
            assert!(psi.at(0, k).abs() < 1e-15);
            assert!(psi.at(k, 20).abs() < 1e-15);
        }

        let z = ScalarField::sample(g, &Analytic::Zero, true).unwrap();
        assert!(z.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn sample_exact_at_vertices() {
        let g = Grid::new(13, 9).unwrap();
        let f = Analytic::Gaussian {
            amp: 2.0,
            x0: 0.3,
            y0: 0.6,
            ax: 5.0,
            ay: 7.0,
        };
        let w = ScalarField::sample(g, &f, false).unwrap();
        for j in 0..9 {
            for i in 0..13 {
                let (x, y) = g.point(i, j);
                assert_eq!(w.at(i, j), f.eval(x, y));
            }
        }
    }

    #[test]
    fn boundary_rule() {
        let g = Grid::square(5).unwrap();
        let w = ScalarField::sample(g, &Analytic::Constant { value: 3.0 }, true).unwrap();
        for j in 0..5 {
            for i in 0..5 {
                let expect = if g.is_boundary(i, j) { 0.0 } else { 3.0 };
                assert_eq!(w.at(i, j), expect);
            }
        }
    }

    #[test]
    fn non_finite_rejected() {
        let g = Grid::square(4).unwrap();
        assert!(ScalarField::from_fn(g, |x, _| 1.0 / x).is_err());
        assert!(ScalarField::from_values(g, vec![f64::NAN; 16]).is_err());
        assert!(ScalarField::from_values(g, vec![0.0; 15]).is_err());
    }

    #[test]
    fn interpolant_reproduces_affine() {
        let g = Grid::new(6, 8).unwrap();
        let f = Analytic::Affine {
            a: 0.3,
            b: -1.7,
            c: 2.2,
        };
        let w = ScalarField::sample(g, &f, false).unwrap();
        for k in 0..50 {
            let x = (k as f64 * 0.137).fract();
            let y = (k as f64 * 0.291 + 0.05).fract();
            assert!((w.interpolate(x, y) - f.eval(x, y)).abs() < 1e-13);
        }
    }

    #[test]
    fn snapshot_round_trip() {
        let g = Grid::new(5, 4).unwrap();
        let w = ScalarField::from_fn(g, |x, y| (x * 7.1).sin() * y + 1e-9 / 3.0).unwrap();
        let text = w.to_snapshot();
        assert!(text.starts_with("5 4 2.5000000000000000e-1\n"));
        assert_eq!(text.lines().count(), 5);
        let back = ScalarField::parse_snapshot(&text).unwrap();
        assert_eq!(back, w);
        assert!(ScalarField::parse_snapshot("3 3 0.5\n1 2 3\n").is_err());
    }
}
