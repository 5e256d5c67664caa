//! Convex-analysis kernel: discrete Legendre conjugates, convexification,
//! derivatives, strong-convexity estimation and the sup-convolution envelope.
//!
//! A [`Potential`] is a [`Field`] certified convex on its effective domain:
//! along every grid line (axes and, in 2D, both diagonals) the undivided
//! second differences stay above `-convexity_tol`, and the set of finite
//! nodes is an interval (1D) or a grid-connected, line-convex set (2D).

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::numerics::{parabolic_refine, pav_nondecreasing};

pub const DEFAULT_CONVEXITY_TOL: f64 = 1e-9;

/// A field certified convex on its effective domain.
#[derive(Clone, Debug)]
pub struct Potential {
    field: Field,
    convexity_tol: f64,
}

impl Potential {
    pub fn new(field: Field) -> Result<Potential> {
        Potential::with_tol(field, DEFAULT_CONVEXITY_TOL)
    }

    pub fn with_tol(field: Field, convexity_tol: f64) -> Result<Potential> {
        check_convex(&field, convexity_tol)?;
        check_domain(&field)?;
        Ok(Potential { field, convexity_tol })
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn grid(&self) -> &Grid {
        self.field.grid()
    }

    pub fn convexity_tol(&self) -> f64 {
        self.convexity_tol
    }

    /// Adds a constant; convexity is unaffected.
    pub fn shift(&self, c: f64) -> Potential {
        let field = self.field.map(|v| v + c).expect("shift keeps validity");
        Potential {
            field,
            convexity_tol: self.convexity_tol,
        }
    }
}

/// Worst (most negative) undivided second difference along all grid lines.
fn worst_second_difference(field: &Field) -> Option<(usize, f64)> {
    let g = field.grid();
    let v = field.values();
    let mut worst: Option<(usize, f64)> = None;
    let mut consider = |idx: usize, d2: f64| {
        if worst.map(|(_, w)| d2 < w).unwrap_or(true) {
            worst = Some((idx, d2));
        }
    };
    match g.dim() {
        1 => {
            for i in 1..v.len() - 1 {
                if v[i - 1].is_finite() && v[i].is_finite() && v[i + 1].is_finite() {
                    consider(i, v[i - 1] - 2.0 * v[i] + v[i + 1]);
                }
            }
        }
        2 => {
            let nx = g.axis(0).n;
            let ny = g.axis(1).n;
            let at = |i: usize, j: usize| v[i * ny + j];
            for i in 0..nx {
                for j in 0..ny {
                    let c = at(i, j);
                    if !c.is_finite() {
                        continue;
                    }
                    let idx = i * ny + j;
                    // along x
                    if i >= 1 && i + 1 < nx && at(i - 1, j).is_finite() && at(i + 1, j).is_finite() {
                        consider(idx, at(i - 1, j) - 2.0 * c + at(i + 1, j));
                    }
                    // along y
                    if j >= 1 && j + 1 < ny && at(i, j - 1).is_finite() && at(i, j + 1).is_finite() {
                        consider(idx, at(i, j - 1) - 2.0 * c + at(i, j + 1));
                    }
                    // diagonals
                    if i >= 1 && j >= 1 && i + 1 < nx && j + 1 < ny {
                        if at(i - 1, j - 1).is_finite() && at(i + 1, j + 1).is_finite() {
                            consider(idx, at(i - 1, j - 1) - 2.0 * c + at(i + 1, j + 1));
                        }
                        if at(i - 1, j + 1).is_finite() && at(i + 1, j - 1).is_finite() {
                            consider(idx, at(i - 1, j + 1) - 2.0 * c + at(i + 1, j - 1));
                        }
                    }
                }
            }
        }
        _ => unreachable!(),
    }
    worst
}

fn check_convex(field: &Field, tol: f64) -> Result<()> {
    if let Some((idx, d2)) = worst_second_difference(field) {
        if d2 < -tol {
            let p = field.grid().node(idx);
            return Err(Error::Domain(format!(
                "not convex: second difference {d2:.3e} < -{tol:.1e} at ({}, {})",
                p.x, p.y
            )));
        }
    }
    Ok(())
}

/// The finite nodes must form an interval (1D) / a connected, line-convex
/// set (2D).
fn check_domain(field: &Field) -> Result<()> {
    let g = field.grid();
    let v = field.values();
    match g.dim() {
        1 => {
            let first = v.iter().position(|x| x.is_finite()).unwrap();
            let last = v.iter().rposition(|x| x.is_finite()).unwrap();
            if v[first..=last].iter().any(|x| !x.is_finite()) {
                return Err(Error::Domain("effective domain is not an interval".into()));
            }
        }
        2 => {
            let nx = g.axis(0).n;
            let ny = g.axis(1).n;
            // each row / column of finite nodes contiguous
            for i in 0..nx {
                let row: Vec<bool> = (0..ny).map(|j| v[i * ny + j].is_finite()).collect();
                if !contiguous(&row) {
                    return Err(Error::Domain("effective domain not line-convex in y".into()));
                }
            }
            for j in 0..ny {
                let col: Vec<bool> = (0..nx).map(|i| v[i * ny + j].is_finite()).collect();
                if !contiguous(&col) {
                    return Err(Error::Domain("effective domain not line-convex in x".into()));
                }
            }
            // 4-connectivity of the finite set
            if !connected(nx, ny, &|i, j| v[i * ny + j].is_finite()) {
                return Err(Error::Domain("effective domain is disconnected".into()));
            }
        }
        _ => unreachable!(),
    }
    Ok(())
}

fn contiguous(mask: &[bool]) -> bool {
    let mut seen = false;
    let mut ended = false;
    for &m in mask {
        if m {
            if ended {
                return false;
            }
            seen = true;
        } else if seen {
            ended = true;
        }
    }
    true
}

fn connected(nx: usize, ny: usize, fin: &dyn Fn(usize, usize) -> bool) -> bool {
    let total: usize = (0..nx)
        .map(|i| (0..ny).filter(|&j| fin(i, j)).count())
        .sum();
    if total == 0 {
        return false;
    }
    let start = (0..nx * ny).find(|&k| fin(k / ny, k % ny)).unwrap();
    let mut seen = vec![false; nx * ny];
    let mut stack = vec![start];
    seen[start] = true;
    let mut count = 0;
    while let Some(k) = stack.pop() {
        count += 1;
        let (i, j) = (k / ny, k % ny);
        let push = |i2: usize, j2: usize, seen: &mut Vec<bool>, stack: &mut Vec<usize>| {
            let k2 = i2 * ny + j2;
            if fin(i2, j2) && !seen[k2] {
                seen[k2] = true;
                stack.push(k2);
            }
        };
        if i > 0 {
            push(i - 1, j, &mut seen, &mut stack);
        }
        if i + 1 < nx {
            push(i + 1, j, &mut seen, &mut stack);
        }
        if j > 0 {
            push(i, j - 1, &mut seen, &mut stack);
        }
        if j + 1 < ny {
            push(i, j + 1, &mut seen, &mut stack);
        }
    }
    count == total
}

/// Discrete Legendre conjugate `phi*(y) = max_x <x,y> - phi(x)` over grid
/// nodes, evaluated at each node of `dual`.
///
/// 1D uses the monotone-argmax linear scan plus a parabolic refinement of the
/// discrete maximizer (exact for quadratic potentials); 2D factorizes the
/// separable max axis by axis. The output is convex by construction (a final
/// slope-isotonic projection absorbs refinement round-off in 1D).
pub fn legendre_transform(phi: &Potential, dual: &Grid) -> Result<Potential> {
    let field = match phi.grid().dim() {
        1 => {
            if dual.dim() != 1 {
                return Err(Error::Domain("dual grid dimension mismatch".into()));
            }
            let mut vals = conjugate_line(phi.grid().axis(0).lo, phi.grid().axis(0).spacing(), phi.field().values(), dual, true)?;
            reconvexify_line(&mut vals);
            Field::new(dual.clone(), vals)?
        }
        2 => {
            if dual.dim() != 2 {
                return Err(Error::Domain("dual grid dimension mismatch".into()));
            }
            conjugate_2d(phi.field(), dual)?
        }
        _ => unreachable!(),
    };
    Potential::with_tol(field, phi.convexity_tol().max(DEFAULT_CONVEXITY_TOL))
}

/// Unrefined conjugate of an arbitrary field (no convexity requirement on the
/// input, exact max over nodes). Used by [`convexify`].
pub fn legendre_transform_raw(f: &Field, dual: &Grid) -> Result<Field> {
    match f.grid().dim() {
        1 => {
            let vals = conjugate_line_brute(f.grid().axis(0).lo, f.grid().axis(0).spacing(), f.values(), dual)?;
            Field::new(dual.clone(), vals)
        }
        2 => conjugate_2d(f, dual),
        _ => unreachable!(),
    }
}

/// 1D conjugate along a line of values; monotone scan, optional refinement.
fn conjugate_line(lo: f64, h: f64, vals: &[f64], dual: &Grid, refine: bool) -> Result<Vec<f64>> {
    let first = vals
        .iter()
        .position(|v| v.is_finite())
        .ok_or_else(|| Error::Domain("empty effective domain".into()))?;
    let last = vals.iter().rposition(|v| v.is_finite()).unwrap();
    let coord = |i: usize| lo + h * i as f64;
    let m = dual.len();
    let mut out = Vec::with_capacity(m);
    let mut i_star = first;
    for j in 0..m {
        let y = dual.node(j).x;
        let score = |i: usize| coord(i) * y - vals[i];
        // dual nodes come in increasing order, so the argmax never moves left
        while i_star < last && score(i_star + 1) > score(i_star) {
            i_star += 1;
        }
        let mut best = score(i_star);
        if refine && i_star > first && i_star < last {
            let (_, v) = parabolic_refine(score(i_star - 1) - best, 0.0, score(i_star + 1) - best);
            best += v;
        }
        out.push(best);
    }
    Ok(out)
}

fn conjugate_line_brute(lo: f64, h: f64, vals: &[f64], dual: &Grid) -> Result<Vec<f64>> {
    if !vals.iter().any(|v| v.is_finite()) {
        return Err(Error::Domain("empty effective domain".into()));
    }
    let coord = |i: usize| lo + h * i as f64;
    let mut out = Vec::with_capacity(dual.len());
    for j in 0..dual.len() {
        let y = dual.node(j).x;
        let mut best = f64::NEG_INFINITY;
        for (i, &v) in vals.iter().enumerate() {
            if v.is_finite() {
                best = best.max(coord(i) * y - v);
            }
        }
        out.push(best);
    }
    Ok(out)
}

/// Restores exact discrete convexity after refinement round-off: isotonic
/// projection of the slopes, reintegrated from the minimum node.
fn reconvexify_line(vals: &mut [f64]) {
    let n = vals.len();
    if n < 3 {
        return;
    }
    let violated = (1..n - 1).any(|i| vals[i - 1] - 2.0 * vals[i] + vals[i + 1] < 0.0);
    if !violated {
        return;
    }
    let mut slopes: Vec<f64> = (0..n - 1).map(|i| vals[i + 1] - vals[i]).collect();
    pav_nondecreasing(&mut slopes);
    let anchor = vals
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    for i in (0..anchor).rev() {
        vals[i] = vals[i + 1] - slopes[i];
    }
    for i in anchor..n - 1 {
        vals[i + 1] = vals[i] + slopes[i];
    }
}

/// 2D conjugate by axis-wise factorization:
/// `phi*(y1,y2) = max_{x1} [x1 y1 + max_{x2} (x2 y2 - phi(x1,x2))]`.
fn conjugate_2d(f: &Field, dual: &Grid) -> Result<Field> {
    let gx = f.grid().axis(0);
    let gy = f.grid().axis(1);
    let dx = dual.axis(0);
    let dy = dual.axis(1);
    let v = f.values();
    // pass 1: per x1-row, conjugate over x2 at each dual y2
    let inner_dual = Grid::line(dy.lo, dy.hi, dy.n)?;
    let mut inner = vec![f64::NEG_INFINITY; gx.n * dy.n];
    let mut any = false;
    for i in 0..gx.n {
        let row = &v[i * gy.n..(i + 1) * gy.n];
        if row.iter().any(|w| w.is_finite()) {
            any = true;
            let c = conjugate_line_brute(gy.lo, gy.spacing(), row, &inner_dual)?;
            inner[i * dy.n..(i + 1) * dy.n].copy_from_slice(&c);
        }
    }
    if !any {
        return Err(Error::Domain("empty effective domain".into()));
    }
    // pass 2: per dual y2, max over x1 of x1*y1 + inner
    let mut out = vec![0.0; dx.n * dy.n];
    for jy in 0..dy.n {
        for jx in 0..dx.n {
            let y1 = dx.coord(jx);
            let mut best = f64::NEG_INFINITY;
            for i in 0..gx.n {
                let g = inner[i * dy.n + jy];
                if g > f64::NEG_INFINITY {
                    best = best.max(gx.coord(i) * y1 + g);
                }
            }
            out[jx * dy.n + jy] = best;
        }
    }
    Field::new(dual.clone(), out)
}

/// Range of finite-difference slopes of a field along each axis, padded by
/// 5%; this is where the pushforward / conjugate lives.
pub fn slope_range(f: &Field, axis: usize) -> Result<(f64, f64)> {
    let g = f.grid();
    let v = f.values();
    let h = g.axis(axis).spacing();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut consider = |a: f64, b: f64| {
        if a.is_finite() && b.is_finite() {
            let s = (b - a) / h;
            lo = lo.min(s);
            hi = hi.max(s);
        }
    };
    match g.dim() {
        1 => {
            for i in 0..v.len() - 1 {
                consider(v[i], v[i + 1]);
            }
        }
        2 => {
            let nx = g.axis(0).n;
            let ny = g.axis(1).n;
            for i in 0..nx {
                for j in 0..ny {
                    match axis {
                        0 if i + 1 < nx => consider(v[i * ny + j], v[(i + 1) * ny + j]),
                        1 if j + 1 < ny => consider(v[i * ny + j], v[i * ny + j + 1]),
                        _ => {}
                    }
                }
            }
        }
        _ => unreachable!(),
    }
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Domain("no finite slopes".into()));
    }
    if hi - lo < 1e-12 {
        let pad = lo.abs().max(1.0) * 0.05;
        return Ok((lo - pad, hi + pad));
    }
    let pad = 0.05 * (hi - lo);
    Ok((lo - pad, hi + pad))
}

/// Default dual grid for a potential: the (padded) range of its slopes with
/// the same node count per axis.
pub fn default_dual_grid(phi: &Potential) -> Result<Grid> {
    let g = phi.grid();
    match g.dim() {
        1 => {
            let (lo, hi) = slope_range(phi.field(), 0)?;
            Grid::line(lo, hi, g.axis(0).n)
        }
        2 => {
            let (lx, hx) = slope_range(phi.field(), 0)?;
            let (ly, hy) = slope_range(phi.field(), 1)?;
            Grid::plane(
                crate::grid::Axis::new(lx, hx, g.axis(0).n)?,
                crate::grid::Axis::new(ly, hy, g.axis(1).n)?,
            )
        }
        _ => unreachable!(),
    }
}

/// Convex envelope restricted to the grid: the double Legendre conjugate.
/// Idempotent and dominated by the input at the nodes.
pub fn convexify(f: &Field) -> Result<Potential> {
    let g = f.grid();
    let dual = match g.dim() {
        1 => {
            let (lo, hi) = slope_range(f, 0)?;
            Grid::line(lo, hi, g.axis(0).n)?
        }
        2 => {
            let (lx, hx) = slope_range(f, 0)?;
            let (ly, hy) = slope_range(f, 1)?;
            Grid::plane(
                crate::grid::Axis::new(lx, hx, g.axis(0).n)?,
                crate::grid::Axis::new(ly, hy, g.axis(1).n)?,
            )?
        }
        _ => unreachable!(),
    };
    let conj = legendre_transform_raw(f, &dual)?;
    let env = legendre_transform_raw(&conj, g)?;
    // the biconjugate can only lie below the data; restore +inf outside the
    // effective domain of the input when the envelope stayed -inf-free there
    let env = env.zip(f, |e, orig| if orig.is_finite() { e.min(orig) } else { e })?;
    Potential::with_tol(env, DEFAULT_CONVEXITY_TOL.max(1e-12))
}

/// Gradient of a field: central differences at interior finite nodes,
/// one-sided at the edges of the finite region, `+inf` outside it.
pub struct Gradient {
    /// One component per axis.
    pub components: Vec<Field>,
    /// How many nodes fell back to one-sided differences.
    pub one_sided: usize,
}

pub fn gradient_of_field(f: &Field) -> Result<Gradient> {
    let g = f.grid();
    let v = f.values();
    let mut one_sided = 0;
    let mut components = Vec::new();
    for axis in 0..g.dim() {
        let h = g.axis(axis).spacing();
        let (nx, ny) = match g.dim() {
            1 => (g.axis(0).n, 1),
            _ => (g.axis(0).n, g.axis(1).n),
        };
        let idx = |i: usize, j: usize| i * ny + j;
        let mut out = vec![f64::INFINITY; v.len()];
        for i in 0..nx {
            for j in 0..ny {
                let c = v[idx(i, j)];
                if !c.is_finite() {
                    continue;
                }
                let (prev, next) = match axis {
                    0 => (
                        (i > 0).then(|| v[idx(i - 1, j)]).filter(|x| x.is_finite()),
                        (i + 1 < nx).then(|| v[idx(i + 1, j)]).filter(|x| x.is_finite()),
                    ),
                    _ => (
                        (j > 0).then(|| v[idx(i, j - 1)]).filter(|x| x.is_finite()),
                        (j + 1 < ny).then(|| v[idx(i, j + 1)]).filter(|x| x.is_finite()),
                    ),
                };
                out[idx(i, j)] = match (prev, next) {
                    (Some(p), Some(nv)) => (nv - p) / (2.0 * h),
                    (None, Some(nv)) => {
                        one_sided += 1;
                        (nv - c) / h
                    }
                    (Some(p), None) => {
                        one_sided += 1;
                        (c - p) / h
                    }
                    (None, None) => {
                        one_sided += 1;
                        0.0
                    }
                };
            }
        }
        components.push(Field::new(g.clone(), out)?);
    }
    Ok(Gradient { components, one_sided })
}

pub fn gradient(phi: &Potential) -> Result<Gradient> {
    gradient_of_field(phi.field())
}

/// 1D convenience: the single gradient component.
pub fn gradient_1d(phi: &Potential) -> Result<Field> {
    if phi.grid().dim() != 1 {
        return Err(Error::UnsupportedDimension {
            got: phi.grid().dim(),
            context: "gradient_1d".into(),
        });
    }
    Ok(gradient(phi)?.components.remove(0))
}

/// Central second differences; negative values are clamped to 0, values
/// below `-convexity_tol` additionally increment the warning counter.
pub enum SecondDerivative {
    OneD { values: Field, clamp_warnings: usize },
    TwoD {
        xx: Field,
        xy: Field,
        yy: Field,
        clamp_warnings: usize,
    },
}

impl SecondDerivative {
    pub fn as_1d(&self) -> Option<(&Field, usize)> {
        match self {
            SecondDerivative::OneD { values, clamp_warnings } => Some((values, *clamp_warnings)),
            _ => None,
        }
    }
}

pub fn second_derivative(phi: &Potential) -> Result<SecondDerivative> {
    let g = phi.grid();
    let v = phi.field().values();
    let tol = phi.convexity_tol();
    match g.dim() {
        1 => {
            let h2 = g.axis(0).spacing().powi(2);
            let mut warn = 0;
            let n = v.len();
            let mut out = vec![f64::INFINITY; n];
            for i in 0..n {
                if !v[i].is_finite() {
                    continue;
                }
                let d2 = if i >= 1 && i + 1 < n && v[i - 1].is_finite() && v[i + 1].is_finite() {
                    v[i - 1] - 2.0 * v[i] + v[i + 1]
                } else {
                    // one-sided: copy the nearest interior second difference
                    let j = if i == 0 || !(*v.get(i.wrapping_sub(1)).unwrap_or(&f64::INFINITY)).is_finite() {
                        i + 1
                    } else {
                        i - 1
                    };
                    if j >= 1 && j + 1 < n && v[j - 1].is_finite() && v[j].is_finite() && v[j + 1].is_finite() {
                        v[j - 1] - 2.0 * v[j] + v[j + 1]
                    } else {
                        0.0
                    }
                };
                let d2 = d2 / h2;
                if d2 < -tol / h2 {
                    warn += 1;
                }
                out[i] = d2.max(0.0);
            }
            Ok(SecondDerivative::OneD {
                values: Field::new(g.clone(), out)?,
                clamp_warnings: warn,
            })
        }
        2 => {
            let nx = g.axis(0).n;
            let ny = g.axis(1).n;
            let hx = g.axis(0).spacing();
            let hy = g.axis(1).spacing();
            let at = |i: usize, j: usize| v[i * ny + j];
            let mut warn = 0;
            let mut xx = vec![f64::INFINITY; v.len()];
            let mut yy = vec![f64::INFINITY; v.len()];
            let mut xy = vec![f64::INFINITY; v.len()];
            for i in 1..nx - 1 {
                for j in 1..ny - 1 {
                    let c = at(i, j);
                    if !c.is_finite() {
                        continue;
                    }
                    let k = i * ny + j;
                    if at(i - 1, j).is_finite() && at(i + 1, j).is_finite() {
                        let d = (at(i - 1, j) - 2.0 * c + at(i + 1, j)) / (hx * hx);
                        if d < 0.0 && d * hx * hx < -phi.convexity_tol() {
                            warn += 1;
                        }
                        xx[k] = d.max(0.0);
                    }
                    if at(i, j - 1).is_finite() && at(i, j + 1).is_finite() {
                        let d = (at(i, j - 1) - 2.0 * c + at(i, j + 1)) / (hy * hy);
                        if d < 0.0 && d * hy * hy < -phi.convexity_tol() {
                            warn += 1;
                        }
                        yy[k] = d.max(0.0);
                    }
                    if at(i - 1, j - 1).is_finite()
                        && at(i + 1, j + 1).is_finite()
                        && at(i - 1, j + 1).is_finite()
                        && at(i + 1, j - 1).is_finite()
                    {
                        xy[k] = (at(i + 1, j + 1) - at(i + 1, j - 1) - at(i - 1, j + 1) + at(i - 1, j - 1))
                            / (4.0 * hx * hy);
                    }
                }
            }
            Ok(SecondDerivative::TwoD {
                xx: Field::new(g.clone(), xx)?,
                xy: Field::new(g.clone(), xy)?,
                yy: Field::new(g.clone(), yy)?,
                clamp_warnings: warn,
            })
        }
        _ => unreachable!(),
    }
}

/// The sup-convolution envelope
/// `f_delta(z) = max_h  delta*f(z+h) - [phi(z+h)/2 + phi(z-h)/2 - phi(z)]`
/// with the max taken over grid offsets (brute force, parabolic refinement of
/// the discrete maximizer in 1D).
///
/// Precondition: `2*delta*f - phi` concave on the grid. `window` optionally
/// restricts the search to `|h| <= window`.
pub fn sup_convolution_fdelta(
    f: &Field,
    phi: &Potential,
    delta: f64,
    window: Option<f64>,
) -> Result<Field> {
    if f.grid() != phi.grid() {
        return Err(Error::Domain("f and phi live on different grids".into()));
    }
    check_bracket_concavity(f, phi, delta, None)?;
    let g = f.grid();
    match g.dim() {
        1 => {
            let n = g.len();
            let h = g.axis(0).spacing();
            let fv = f.values();
            let pv = phi.field().values();
            let kmax = window
                .map(|w| ((w / h).floor() as usize).min(n - 1))
                .unwrap_or(n - 1);
            let mut out = vec![0.0; n];
            for i in 0..n {
                if !pv[i].is_finite() {
                    out[i] = f64::INFINITY;
                    continue;
                }
                let cand = |k: isize| -> f64 {
                    let ip = i as isize + k;
                    let im = i as isize - k;
                    if ip < 0 || ip >= n as isize || im < 0 || im >= n as isize {
                        return f64::NEG_INFINITY;
                    }
                    let (fp, pp, pm) = (fv[ip as usize], pv[ip as usize], pv[im as usize]);
                    if !fp.is_finite() || !pp.is_finite() || !pm.is_finite() {
                        return f64::NEG_INFINITY;
                    }
                    delta * fp - (0.5 * pp + 0.5 * pm - pv[i])
                };
                let mut best_k = 0isize;
                let mut best = cand(0);
                for k in 1..=kmax as isize {
                    for s in [k, -k] {
                        let c = cand(s);
                        if c > best {
                            best = c;
                            best_k = s;
                        }
                    }
                }
                let (cm, cp) = (cand(best_k - 1), cand(best_k + 1));
                if cm.is_finite() && cp.is_finite() {
                    let (_, v) = parabolic_refine(cm - best, 0.0, cp - best);
                    best += v;
                }
                out[i] = best;
            }
            Field::new(g.clone(), out)
        }
        2 => {
            let nx = g.axis(0).n;
            let ny = g.axis(1).n;
            if nx > 201 || ny > 201 {
                return Err(Error::Domain(
                    "2D sup-convolution capped at 201 nodes per axis".into(),
                ));
            }
            let fv = f.values();
            let pv = phi.field().values();
            let mut out = vec![0.0; nx * ny];
            for i in 0..nx {
                for j in 0..ny {
                    let c0 = pv[i * ny + j];
                    if !c0.is_finite() {
                        out[i * ny + j] = f64::INFINITY;
                        continue;
                    }
                    let mut best = f64::NEG_INFINITY;
                    for ki in -(i as isize)..=(nx - 1 - i) as isize {
                        let im = i as isize - ki;
                        if im < 0 || im >= nx as isize {
                            continue;
                        }
                        for kj in -(j as isize)..=(ny - 1 - j) as isize {
                            let jm = j as isize - kj;
                            if jm < 0 || jm >= ny as isize {
                                continue;
                            }
                            let ip = (i as isize + ki) as usize;
                            let jp = (j as isize + kj) as usize;
                            let (fp, pp, pm) = (
                                fv[ip * ny + jp],
                                pv[ip * ny + jp],
                                pv[im as usize * ny + jm as usize],
                            );
                            if !fp.is_finite() || !pp.is_finite() || !pm.is_finite() {
                                continue;
                            }
                            best = best.max(delta * fp - (0.5 * pp + 0.5 * pm - c0));
                        }
                    }
                    out[i * ny + j] = best;
                }
            }
            Field::new(g.clone(), out)
        }
        _ => unreachable!(),
    }
}

/// Checks that `2*delta*f - phi` is concave on the grid; on failure reports
/// the worst violating node, with `delta0` filled in by the caller when known.
pub fn check_bracket_concavity(f: &Field, phi: &Potential, delta: f64, delta0: Option<f64>) -> Result<()> {
    // concavity of the bracket == convexity of its negation; nodes outside
    // the effective domain become +inf and are skipped by the check
    let neg = f.zip(phi.field(), |fv, pv| {
        if fv.is_finite() && pv.is_finite() {
            pv - 2.0 * delta * fv
        } else {
            f64::INFINITY
        }
    })?;
    if let Some((idx, d2)) = worst_second_difference(&neg) {
        let tol = phi.convexity_tol().max(1e-12);
        if d2 < -tol {
            let p = f.grid().node(idx);
            return Err(Error::Concavity {
                at: p.x,
                violation: -d2,
                delta0,
            });
        }
    }
    Ok(())
}

/// Minimum of the (1D) second derivative over the interior window that
/// excludes `margin` (fraction, default 0.1) of the finite domain per side.
pub fn strong_convexity_modulus(phi: &Potential) -> Result<f64> {
    strong_convexity_modulus_with_margin(phi, 0.1)
}

pub fn strong_convexity_modulus_with_margin(phi: &Potential, margin: f64) -> Result<f64> {
    if phi.grid().dim() != 1 {
        return Err(Error::UnsupportedDimension {
            got: phi.grid().dim(),
            context: "strong_convexity_modulus".into(),
        });
    }
    let v = phi.field().values();
    let first = v.iter().position(|x| x.is_finite()).unwrap();
    let last = v.iter().rposition(|x| x.is_finite()).unwrap();
    let span = last - first;
    let skip = ((span as f64) * margin).round() as usize;
    let a = first + skip;
    let b = last.saturating_sub(skip);
    if a + 1 > b {
        return Err(Error::Domain("strong-convexity window is empty".into()));
    }
    let sd = second_derivative(phi)?;
    let (fld, _) = sd.as_1d().unwrap();
    let mut min = f64::INFINITY;
    for i in a.max(1)..=b.min(v.len() - 2) {
        let d = fld.value(i);
        if d.is_finite() {
            min = min.min(d);
        }
    }
    if !min.is_finite() {
        return Err(Error::Domain("no interior curvature values in window".into()));
    }
    Ok(min)
}
