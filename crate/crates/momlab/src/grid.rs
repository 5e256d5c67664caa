//! Uniform grids in dimension 1 and 2, scalar fields over them, trapezoid
//! quadrature and piecewise-linear interpolation.
//!
//! A [`Field`] stores one real per node; `+inf` encodes points outside the
//! effective domain of a potential. `NaN` and `-inf` are rejected on
//! construction.

use crate::error::{Error, Result};
use std::fmt::Write as _;
use std::path::Path;

/// Default cap on the total node count of a grid.
pub const NODE_CAP: usize = 10_000_000;

/// A point in the ambient space; `y` is unused (zero) in dimension 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new1(x: f64) -> Self {
        Point { x, y: 0.0 }
    }

    pub fn new2(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

/// One axis of a uniform grid: `n` equally spaced nodes on `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Axis> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Domain(format!("axis requires lo < hi, got [{lo}, {hi}]")));
        }
        if n < 3 {
            return Err(Error::Domain(format!("axis requires n >= 3, got {n}")));
        }
        Ok(Axis { lo, hi, n })
    }

    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.n - 1) as f64
    }

    pub fn coord(&self, i: usize) -> f64 {
        debug_assert!(i < self.n);
        self.lo + self.spacing() * i as f64
    }

    /// Trapezoid weight of node `i` (half spacing at the endpoints).
    fn weight(&self, i: usize) -> f64 {
        let h = self.spacing();
        if i == 0 || i == self.n - 1 {
            0.5 * h
        } else {
            h
        }
    }
}

/// A uniform tensor-product grid of dimension 1 or 2.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    axes: Vec<Axis>,
}

impl Grid {
    pub fn line(lo: f64, hi: f64, n: usize) -> Result<Grid> {
        let ax = Axis::new(lo, hi, n)?;
        Ok(Grid { axes: vec![ax] })
    }

    pub fn plane(ax: Axis, ay: Axis) -> Result<Grid> {
        if ax.n.saturating_mul(ay.n) > NODE_CAP {
            return Err(Error::Domain(format!(
                "grid node count {} exceeds cap {NODE_CAP}",
                ax.n * ay.n
            )));
        }
        Ok(Grid { axes: vec![ax, ay] })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axis(&self, k: usize) -> Axis {
        self.axes[k]
    }

    /// Total node count.
    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.n).product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinates of node `idx` (row-major: x outer, y inner in 2D).
    pub fn node(&self, idx: usize) -> Point {
        match self.axes.len() {
            1 => Point::new1(self.axes[0].coord(idx)),
            2 => {
                let ny = self.axes[1].n;
                Point::new2(self.axes[0].coord(idx / ny), self.axes[1].coord(idx % ny))
            }
            _ => unreachable!(),
        }
    }

    /// Unit trapezoid coefficient of node `idx` (1/2 at axis endpoints,
    /// products in 2D).
    fn coeff(&self, idx: usize) -> f64 {
        let c = |ax: Axis, i: usize| -> f64 {
            if i == 0 || i == ax.n - 1 {
                0.5
            } else {
                1.0
            }
        };
        match self.axes.len() {
            1 => c(self.axes[0], idx),
            2 => {
                let ny = self.axes[1].n;
                c(self.axes[0], idx / ny) * c(self.axes[1], idx % ny)
            }
            _ => unreachable!(),
        }
    }

    /// Trapezoid quadrature weight of node `idx`.
    pub fn weight(&self, idx: usize) -> f64 {
        match self.axes.len() {
            1 => self.axes[0].weight(idx),
            2 => {
                let ny = self.axes[1].n;
                self.axes[0].weight(idx / ny) * self.axes[1].weight(idx % ny)
            }
            _ => unreachable!(),
        }
    }

    /// True when `p` lies inside the grid box (with a small relative slack).
    pub fn contains(&self, p: Point) -> bool {
        let tol0 = 1e-9 * (self.axes[0].hi - self.axes[0].lo);
        let in_x = p.x >= self.axes[0].lo - tol0 && p.x <= self.axes[0].hi + tol0;
        match self.axes.len() {
            1 => in_x,
            2 => {
                let tol1 = 1e-9 * (self.axes[1].hi - self.axes[1].lo);
                in_x && p.y >= self.axes[1].lo - tol1 && p.y <= self.axes[1].hi + tol1
            }
            _ => unreachable!(),
        }
    }
}

/// A scalar field over a [`Grid`]. `+inf` marks nodes outside the effective
/// domain; `NaN` and `-inf` never appear.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Field> {
        if values.len() != grid.len() {
            return Err(Error::Domain(format!(
                "value count {} does not match grid node count {}",
                values.len(),
                grid.len()
            )));
        }
        let mut any_finite = false;
        for (i, v) in values.iter().enumerate() {
            if v.is_nan() {
                return Err(Error::Domain(format!("NaN at node {i}")));
            }
            if *v == f64::NEG_INFINITY {
                return Err(Error::Domain(format!("-inf at node {i}")));
            }
            any_finite |= v.is_finite();
        }
        if !any_finite {
            return Err(Error::Domain("field has no finite node".into()));
        }
        Ok(Field { grid, values })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(Point) -> f64) -> Result<Field> {
        let values = (0..grid.len()).map(|i| f(grid.node(i))).collect();
        Field::new(grid, values)
    }

    pub fn constant(grid: Grid, c: f64) -> Result<Field> {
        let n = grid.len();
        Field::new(grid, vec![c; n])
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    /// Applies `f` nodewise; the result must still be a valid field.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Field> {
        Field::new(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    /// Combines two fields on the same grid nodewise.
    pub fn zip(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        if self.grid != other.grid {
            return Err(Error::Domain("fields live on different grids".into()));
        }
        let values = self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(&a, &b)| f(a, b))
            .collect();
        Field::new(self.grid.clone(), values)
    }

    /// Trapezoid-rule approximation of the integral over the grid box.
    pub fn integrate(&self) -> Result<f64> {
        // accumulate with unit trapezoid coefficients, scale once at the end;
        // this keeps constants exact
        let mut acc = 0.0;
        let mut cells = 1.0;
        let mut range = 1.0;
        for k in 0..self.grid.dim() {
            let ax = self.grid.axis(k);
            cells *= (ax.n - 1) as f64;
            range *= ax.hi - ax.lo;
        }
        for (i, &v) in self.values.iter().enumerate() {
            acc += self.grid.coeff(i) * v;
        }
        let acc = range * (acc / cells);
        if !acc.is_finite() {
            return Err(Error::Range(format!("integral is not finite ({acc})")));
        }
        Ok(acc)
    }

    /// Piecewise-linear (1D) / bilinear (2D) interpolation at `p`.
    ///
    /// Exact at nodes and for affine fields; `+inf` corner values propagate
    /// as `+inf` only when they carry positive interpolation weight.
    pub fn interp(&self, p: Point) -> Result<f64> {
        if !self.grid.contains(p) {
            return Err(Error::Domain(format!(
                "point ({}, {}) outside grid box",
                p.x, p.y
            )));
        }
        match self.grid.dim() {
            1 => {
                let (i, t) = locate(self.grid.axis(0), p.x);
                Ok(blend(self.values[i], self.values[i + 1], t))
            }
            2 => {
                let ny = self.grid.axis(1).n;
                let (i, tx) = locate(self.grid.axis(0), p.x);
                let (j, ty) = locate(self.grid.axis(1), p.y);
                let v00 = self.values[i * ny + j];
                let v01 = self.values[i * ny + j + 1];
                let v10 = self.values[(i + 1) * ny + j];
                let v11 = self.values[(i + 1) * ny + j + 1];
                Ok(blend(blend(v00, v01, ty), blend(v10, v11, ty), tx))
            }
            _ => unreachable!(),
        }
    }

    /// Serializes to CSV (`x,value` or `x,y,value`, row-major, `inf` for +∞).
    /// Extra comment lines may be prepended via `comments`.
    pub fn to_csv(&self, comments: &[&str]) -> String {
        let mut out = String::new();
        for c in comments {
            let _ = writeln!(out, "# {c}");
        }
        match self.grid.dim() {
            1 => {
                out.push_str("x,value\n");
                for (i, &v) in self.values.iter().enumerate() {
                    let p = self.grid.node(i);
                    let _ = writeln!(out, "{},{}", fmt_num(p.x), fmt_num(v));
                }
            }
            _ => {
                out.push_str("x,y,value\n");
                for (i, &v) in self.values.iter().enumerate() {
                    let p = self.grid.node(i);
                    let _ = writeln!(out, "{},{},{}", fmt_num(p.x), fmt_num(p.y), fmt_num(v));
                }
            }
        }
        out
    }

    pub fn write_csv(&self, path: &Path, comments: &[&str]) -> Result<()> {
        crate::grid::write_atomic(path, &self.to_csv(comments))
    }

    /// Parses a field from CSV text; returns the field and any leading
    /// comment lines (without the `# ` prefix).
    pub fn from_csv(text: &str) -> Result<(Field, Vec<String>)> {
        let mut comments = Vec::new();
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut ncols = 0;
        let mut saw_header = false;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(c) = line.strip_prefix('#') {
                comments.push(c.trim().to_string());
                continue;
            }
            if !saw_header {
                saw_header = true;
                ncols = line.split(',').count();
                if ncols != 2 && ncols != 3 {
                    return Err(Error::Parse {
                        line: lineno + 1,
                        message: format!("expected header `x,value` or `x,y,value`, got `{line}`"),
                    });
                }
                continue;
            }
            let mut row = Vec::with_capacity(ncols);
            for tok in line.split(',') {
                row.push(parse_num(tok).ok_or_else(|| Error::Parse {
                    line: lineno + 1,
                    message: format!("bad number `{tok}`"),
                })?);
            }
            if row.len() != ncols {
                return Err(Error::Parse {
                    line: lineno + 1,
                    message: format!("expected {ncols} columns, got {}", row.len()),
                });
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::Parse {
                line: 0,
                message: "no data rows".into(),
            });
        }
        let field = if ncols == 2 {
            let xs: Vec<f64> = rows.iter().map(|r| r[0]).collect();
            let ax = infer_axis(&xs).ok_or_else(|| Error::Parse {
                line: 0,
                message: "x column is not a uniform grid".into(),
            })?;
            let values = rows.iter().map(|r| r[1]).collect();
            Field::new(Grid { axes: vec![ax] }, values)?
        } else {
            // row-major: x outer, y inner
            let ny = detect_inner_len(&rows).ok_or_else(|| Error::Parse {
                line: 0,
                message: "rows are not row-major over a tensor grid".into(),
            })?;
            if rows.len() % ny != 0 {
                return Err(Error::Parse {
                    line: 0,
                    message: "row count is not a multiple of the inner axis length".into(),
                });
            }
            let nx = rows.len() / ny;
            let xs: Vec<f64> = (0..nx).map(|i| rows[i * ny][0]).collect();
            let ys: Vec<f64> = (0..ny).map(|j| rows[j][1]).collect();
            let ax = infer_axis(&xs).ok_or_else(|| Error::Parse {
                line: 0,
                message: "x column is not a uniform grid".into(),
            })?;
            let ay = infer_axis(&ys).ok_or_else(|| Error::Parse {
                line: 0,
                message: "y column is not a uniform grid".into(),
            })?;
            let values = rows.iter().map(|r| r[2]).collect();
            Field::new(Grid { axes: vec![ax, ay] }, values)?
        };
        Ok((field, comments))
    }

    pub fn read_csv(path: &Path) -> Result<(Field, Vec<String>)> {
        let text = std::fs::read_to_string(path)?;
        Field::from_csv(&text)
    }
}

/// Writes `content` to `path` atomically (write to a temp file, then rename).
pub fn write_atomic(path: &Path, content: &str) -> Result<()> {
    let tmp = path.with_extension("tmp~");
    std::fs::write(&tmp, content)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn fmt_num(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".to_string()
    } else {
        // round-trippable
        format!("{v:?}")
    }
}

fn parse_num(tok: &str) -> Option<f64> {
    let t = tok.trim();
    match t {
        "inf" | "+inf" | "Inf" | "infinity" => Some(f64::INFINITY),
        _ => t.parse::<f64>().ok().filter(|v| !v.is_nan() && *v != f64::NEG_INFINITY),
    }
}

fn infer_axis(xs: &[f64]) -> Option<Axis> {
    let n = xs.len();
    if n < 3 {
        return None;
    }
    let lo = xs[0];
    let hi = xs[n - 1];
    if !(lo < hi) {
        return None;
    }
    let h = (hi - lo) / (n - 1) as f64;
    for (i, &x) in xs.iter().enumerate() {
        if (x - (lo + h * i as f64)).abs() > 1e-9 * (hi - lo) {
            return None;
        }
    }
    Axis::new(lo, hi, n).ok()
}

fn detect_inner_len(rows: &[Vec<f64>]) -> Option<usize> {
    let y0 = rows[0][1];
    for (k, r) in rows.iter().enumerate().skip(1) {
        if r[1] == y0 {
            return Some(k);
        }
    }
    None
}

/// Cell index and fractional offset of `x` along `ax`, clamped to the box.
/// Snaps to node coordinates bit-exactly.
fn locate(ax: Axis, x: f64) -> (usize, f64) {
    let h = ax.spacing();
    let u = ((x - ax.lo) / h).clamp(0.0, (ax.n - 1) as f64);
    let mut i = u.floor() as usize;
    if i >= ax.n - 1 {
        i = ax.n - 2;
    }
    if x == ax.coord(i) {
        (i, 0.0)
    } else if x == ax.coord(i + 1) {
        (i, 1.0)
    } else {
        (i, u - i as f64)
    }
}

/// Linear blend that keeps node values bit-exact and lets +inf win only when
/// it carries positive weight.
fn blend(a: f64, b: f64, t: f64) -> f64 {
    if t == 0.0 {
        a
    } else if t == 1.0 {
        b
    } else if a == f64::INFINITY || b == f64::INFINITY {
        f64::INFINITY
    } else {
        a + (b - a) * t
    }
}
