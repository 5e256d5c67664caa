//! Probability measures on grids: densities, atomic measures, Gibbs
//! normalization, moments, entropy, the moment-measure pushforward, the
//! degeneracy gauge `theta`, and L1 distances (plain and mod translation).

use std::path::Path;

use crate::convexlab::{default_dual_grid, gradient, Potential};
use crate::error::{Error, Result};
use crate::grid::{write_atomic, Axis, Field, Grid, Point};
use crate::numerics::golden_section_min;

/// A probability density sampled on a grid.
#[derive(Clone, Debug)]
pub struct Density {
    field: Field,
    mass_tol: f64,
    log_z: Option<f64>,
}

pub const DEFAULT_MASS_TOL: f64 = 1e-6;

impl Density {
    pub fn new(field: Field) -> Result<Density> {
        Density::with_tol(field, DEFAULT_MASS_TOL)
    }

    pub fn with_tol(field: Field, mass_tol: f64) -> Result<Density> {
        if field.values().iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::Domain("density values must be finite and >= 0".into()));
        }
        let mass = field.integrate()?;
        if (mass - 1.0).abs() > mass_tol {
            return Err(Error::Normalization(format!(
                "density mass {mass} deviates from 1 beyond {mass_tol:.1e}"
            )));
        }
        Ok(Density {
            field,
            mass_tol,
            log_z: None,
        })
    }

    /// Rescales a nonnegative field to unit mass, then validates.
    pub fn normalized(field: Field) -> Result<Density> {
        if field.values().iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::Domain("density values must be finite and >= 0".into()));
        }
        let mass = field.integrate()?;
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::Normalization(format!("cannot normalize mass {mass}")));
        }
        Density::new(field.map(|v| v / mass)?)
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn grid(&self) -> &Grid {
        self.field.grid()
    }

    pub fn mass_tol(&self) -> f64 {
        self.mass_tol
    }

    /// `log Z` of the Gibbs normalization that produced this density, when it
    /// came from [`gibbs`].
    pub fn log_partition(&self) -> Option<f64> {
        self.log_z
    }
}

/// A finite sum of point masses; locations distinct, weights positive and
/// summing to one.
#[derive(Clone, Debug)]
pub struct AtomicMeasure {
    atoms: Vec<(Point, f64)>,
}

impl AtomicMeasure {
    pub fn new(mut atoms: Vec<(Point, f64)>) -> Result<AtomicMeasure> {
        if atoms.is_empty() {
            return Err(Error::Domain("atomic measure needs at least one atom".into()));
        }
        if atoms.iter().any(|&(_, w)| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::Domain("atom weights must be finite and > 0".into()));
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Normalization(format!(
                "atom weights sum to {total}, expected 1"
            )));
        }
        atoms.sort_by(|a, b| (a.0.x, a.0.y).partial_cmp(&(b.0.x, b.0.y)).unwrap());
        for w in atoms.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::Domain(format!(
                    "duplicate atom location ({}, {})",
                    w[0].0.x, w[0].0.y
                )));
            }
        }
        Ok(AtomicMeasure { atoms })
    }

    /// Divides out the total weight first; accepts inputs off by up to 1e-6.
    pub fn renormalized(atoms: Vec<(Point, f64)>) -> Result<AtomicMeasure> {
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if !(total > 0.0) || !total.is_finite() || (total - 1.0).abs() > 1e-6 {
            return Err(Error::Normalization(format!(
                "atom weights sum to {total}, too far from 1"
            )));
        }
        AtomicMeasure::new(atoms.into_iter().map(|(p, w)| (p, w / total)).collect())
    }

    pub fn atoms(&self) -> &[(Point, f64)] {
        &self.atoms
    }

    pub fn dim(&self) -> usize {
        if self.atoms.iter().all(|a| a.0.y == 0.0) {
            1
        } else {
            2
        }
    }
}

/// Either a grid density or an atomic measure.
#[derive(Clone, Debug)]
pub enum Measure {
    Density(Density),
    Atoms(AtomicMeasure),
}

impl From<Density> for Measure {
    fn from(d: Density) -> Measure {
        Measure::Density(d)
    }
}

impl From<AtomicMeasure> for Measure {
    fn from(a: AtomicMeasure) -> Measure {
        Measure::Atoms(a)
    }
}

impl Measure {
    pub fn dim(&self) -> usize {
        match self {
            Measure::Density(d) => d.grid().dim(),
            Measure::Atoms(a) => a.dim(),
        }
    }

    pub fn as_density(&self) -> Option<&Density> {
        match self {
            Measure::Density(d) => Some(d),
            _ => None,
        }
    }

    pub fn as_atoms(&self) -> Option<&AtomicMeasure> {
        match self {
            Measure::Atoms(a) => Some(a),
            _ => None,
        }
    }
}

/// The Gibbs measure `e^{-(phi + alpha|x|^2/2)} / Z` on phi's grid; `log Z`
/// is recorded on the returned density.
pub fn gibbs(phi: &Potential, alpha: f64) -> Result<Density> {
    if alpha < 0.0 {
        return Err(Error::Parameter("alpha must be >= 0".into()));
    }
    let g = phi.grid();
    let aug = Field::from_fn(g.clone(), |p| {
        let v = phi.field().interp(p).unwrap_or(f64::INFINITY);
        v + 0.5 * alpha * (p.x * p.x + p.y * p.y)
    })?;
    // shift by the minimum before exponentiating
    let m = aug
        .values()
        .iter()
        .cloned()
        .filter(|v| v.is_finite())
        .fold(f64::INFINITY, f64::min);
    if !m.is_finite() {
        return Err(Error::Normalization("potential has empty effective domain".into()));
    }
    let unnorm = aug.map(|v| if v.is_finite() { (-(v - m)).exp() } else { 0.0 })?;
    let z_shifted = unnorm.integrate()?;
    if !(z_shifted > 0.0) || !z_shifted.is_finite() {
        return Err(Error::Normalization(format!(
            "partition integral {z_shifted} (shifted) is not positive and finite"
        )));
    }
    let field = unnorm.map(|v| v / z_shifted)?;
    let mut d = Density::new(field)?;
    d.log_z = Some(z_shifted.ln() - m);
    Ok(d)
}

/// Re-evaluates `phi + alpha|x|^2/2` at the grid nodes without interpolation.
/// Used internally where `gibbs` would be wasteful.
fn gibbs_values(phi: &Potential, alpha: f64) -> Vec<f64> {
    let g = phi.grid();
    (0..g.len())
        .map(|i| {
            let p = g.node(i);
            let v = phi.field().value(i);
            if v.is_finite() {
                v + 0.5 * alpha * (p.x * p.x + p.y * p.y)
            } else {
                f64::INFINITY
            }
        })
        .collect()
}

const PLATEAU_TOL: f64 = 1e-6;
const PLATEAU_MIN_CELLS: usize = 3;

/// Pushforward of `gibbs(psi, alpha)` through the gradient of `psi` (the
/// regularization only reweights the Gibbs factor, it does not change the
/// map). Returns an [`AtomicMeasure`] when the gradient is
/// piecewise constant (plateaus of at least three cells carrying nearly all
/// the Gibbs mass), otherwise a [`Density`] on the dual grid built by linear
/// deposition of node masses.
pub fn moment_measure(psi: &Potential, alpha: f64) -> Result<Measure> {
    if psi.grid().dim() != 1 {
        return Err(Error::UnsupportedDimension {
            got: psi.grid().dim(),
            context: "moment_measure".into(),
        });
    }
    let rho = gibbs(psi, alpha)?;
    let g = psi.grid();
    let n = g.len();
    let grad_psi = gradient(psi)?.components.remove(0);
    let grad: Vec<f64> = (0..n).map(|i| grad_psi.value(i)).collect();
    let masses: Vec<f64> = (0..n).map(|i| rho.field().value(i) * g.weight(i)).collect();

    // plateau decomposition of the finite part of the gradient
    let finite: Vec<usize> = (0..n).filter(|&i| grad[i].is_finite()).collect();
    let mut plateaus: Vec<(usize, usize)> = Vec::new(); // inclusive index ranges
    let mut k = 0;
    while k < finite.len() {
        let start = k;
        while k + 1 < finite.len()
            && finite[k + 1] == finite[k] + 1
            && (grad[finite[k + 1]] - grad[finite[k]]).abs() < PLATEAU_TOL
        {
            k += 1;
        }
        if k - start + 1 >= PLATEAU_MIN_CELLS {
            plateaus.push((finite[start], finite[k]));
        }
        k += 1;
    }
    let plateau_mass: f64 = plateaus
        .iter()
        .map(|&(a, b)| masses[a..=b].iter().sum::<f64>())
        .sum();
    let total_mass: f64 = masses.iter().sum();

    if !plateaus.is_empty() && plateau_mass >= 0.95 * total_mass {
        // atoms: one per plateau at its mass-weighted mean slope; transition
        // nodes hand their mass to the nearest plateau
        let mut locs: Vec<f64> = Vec::new();
        let mut wts: Vec<f64> = Vec::new();
        for &(a, b) in &plateaus {
            let m: f64 = masses[a..=b].iter().sum();
            let loc: f64 = (a..=b).map(|i| grad[i] * masses[i]).sum::<f64>() / m.max(1e-300);
            locs.push(loc);
            wts.push(m);
        }
        for i in 0..n {
            if plateaus.iter().any(|&(a, b)| i >= a && i <= b) || masses[i] == 0.0 {
                continue;
            }
            let nearest = plateaus
                .iter()
                .enumerate()
                .min_by_key(|(_, &(a, b))| {
                    let d = if i < a { a - i } else if i > b { i - b } else { 0 };
                    d
                })
                .map(|(j, _)| j)
                .unwrap();
            wts[nearest] += masses[i];
        }
        let atoms: Vec<(Point, f64)> = locs
            .iter()
            .zip(wts.iter())
            .filter(|(_, &w)| w > 0.0)
            .map(|(&l, &w)| (Point::new1(l), w / total_mass))
            .collect();
        // plateaus at indistinguishable slopes merge
        let mut merged: Vec<(Point, f64)> = Vec::new();
        for (p, w) in atoms {
            if let Some(last) = merged.last_mut() {
                if (last.0.x - p.x).abs() < PLATEAU_TOL {
                    last.0.x = (last.0.x * last.1 + p.x * w) / (last.1 + w);
                    last.1 += w;
                    continue;
                }
            }
            merged.push((p, w));
        }
        return Ok(Measure::Atoms(AtomicMeasure::renormalized(merged)?));
    }

    // density branch: deposit node masses linearly onto the dual grid of the
    // regularized potential
    let dual = {
        let lo = grad.iter().cloned().filter(|v| v.is_finite()).fold(f64::INFINITY, f64::min);
        let hi = grad
            .iter()
            .cloned()
            .filter(|v| v.is_finite())
            .fold(f64::NEG_INFINITY, f64::max);
        if !(hi > lo) {
            // constant gradient with sub-plateau support: fall back to dual
            // grid of psi
            default_dual_grid(psi)?
        } else {
            let pad = 0.05 * (hi - lo);
            Grid::line(lo - pad, hi + pad, g.axis(0).n)?
        }
    };
    // cell-interval deposition: cell [x_i, x_{i+1}] carries trapezoid mass
    // and lands uniformly on its image [g_i, g_{i+1}]
    let h = g.axis(0).spacing();
    let cells = (0..n - 1).filter_map(|i| {
        let (a, b) = (grad[i], grad[i + 1]);
        let (ra, rb) = (rho.field().value(i), rho.field().value(i + 1));
        if a.is_finite() && b.is_finite() {
            Some((a.min(b), a.max(b), 0.5 * (ra + rb) * h))
        } else {
            None
        }
    });
    let deposited = deposit_intervals_1d(&dual, cells)?;
    Ok(Measure::Density(deposited))
}

/// Deposits `(lo, hi, mass)` intervals onto the nodes of `dual`: the mass is
/// spread uniformly over the interval and integrated exactly against the
/// linear hat function of each node, which avoids the lattice-alignment
/// artifacts of pure point deposition. Mass landing outside the grid is
/// folded into the end nodes.
pub fn deposit_intervals_1d(
    dual: &Grid,
    intervals: impl Iterator<Item = (f64, f64, f64)>,
) -> Result<Density> {
    let ax = dual.axis(0);
    let hd = ax.spacing();
    let n = ax.n;
    let mut node_mass = vec![0.0; n];
    // antiderivative of the unit hat, in hat-local coordinates
    let hat_cdf = |u: f64| -> f64 {
        let u = u.clamp(-1.0, 1.0);
        if u <= 0.0 {
            0.5 * (u + 1.0) * (u + 1.0)
        } else {
            1.0 - 0.5 * (1.0 - u) * (1.0 - u)
        }
    };
    for (a, b, m) in intervals {
        if m == 0.0 {
            continue;
        }
        if b - a < 1e-14 * hd.max(1.0) {
            // degenerate interval: plain linear split
            let t = ((a - ax.lo) / hd).clamp(0.0, (n - 1) as f64);
            let i = (t.floor() as usize).min(n - 2);
            let frac = t - i as f64;
            node_mass[i] += m * (1.0 - frac);
            node_mass[i + 1] += m * frac;
            continue;
        }
        let j0 = (((a - ax.lo) / hd).floor() as isize - 1).max(0) as usize;
        let j1 = ((((b - ax.lo) / hd).ceil() as isize) + 1).min(n as isize - 1) as usize;
        let mut placed = 0.0;
        for j in j0..=j1 {
            let y = ax.coord(j);
            let w = hd * (hat_cdf((b - y) / hd) - hat_cdf((a - y) / hd)) / (b - a);
            if w > 0.0 {
                node_mass[j] += m * w;
                placed += m * w;
            }
        }
        let leftover = m - placed;
        if leftover > 0.0 {
            // interval sticks out of the box: fold into the nearer end
            if 0.5 * (a + b) < ax.lo + 0.5 * (ax.hi - ax.lo) {
                node_mass[0] += leftover;
            } else {
                node_mass[n - 1] += leftover;
            }
        }
    }
    let vals: Vec<f64> = (0..n).map(|i| node_mass[i] / dual.weight(i)).collect();
    Density::normalized(Field::new(dual.clone(), vals)?)
}

/// Splits each `(location, mass)` pair linearly between the two bracketing
/// nodes of `dual`, then converts node masses to a density.
pub fn deposit_1d(dual: &Grid, pairs: impl Iterator<Item = (f64, f64)>) -> Result<Density> {
    let ax = dual.axis(0);
    let h = ax.spacing();
    let mut node_mass = vec![0.0; ax.n];
    for (x, m) in pairs {
        if m == 0.0 || !x.is_finite() {
            continue;
        }
        let t = (x - ax.lo) / h;
        let i = (t.floor() as isize).clamp(0, ax.n as isize - 2) as usize;
        let frac = (t - i as f64).clamp(0.0, 1.0);
        node_mass[i] += m * (1.0 - frac);
        node_mass[i + 1] += m * frac;
    }
    let vals: Vec<f64> = (0..ax.n).map(|i| node_mass[i] / dual.weight(i)).collect();
    Density::normalized(Field::new(dual.clone(), vals)?)
}

/// `M_p(mu) = \int |x|^p dmu`.
pub fn moments(mu: &Measure, p: f64) -> Result<f64> {
    if p < 1.0 {
        return Err(Error::Parameter("moment order p must be >= 1".into()));
    }
    match mu {
        Measure::Atoms(a) => Ok(a.atoms().iter().map(|&(x, w)| w * x.norm().powf(p)).sum()),
        Measure::Density(d) => {
            let f = d.field().zip(d.field(), |v, _| v)?; // clone via zip
            let g = d.grid();
            let weighted = Field::from_fn(g.clone(), |pt| pt.norm().powf(p))?;
            weighted.zip(&f, |a, b| a * b)?.integrate()
        }
    }
}

/// `H(rho) = \int rho log rho` with `0 log 0 = 0`.
pub fn entropy(rho: &Density) -> Result<f64> {
    rho.field()
        .map(|v| if v > 0.0 { v * v.ln() } else { 0.0 })?
        .integrate()
}

pub fn barycenter(mu: &Measure) -> Result<Point> {
    match mu {
        Measure::Atoms(a) => {
            let mut x = 0.0;
            let mut y = 0.0;
            for &(p, w) in a.atoms() {
                x += w * p.x;
                y += w * p.y;
            }
            Ok(Point { x, y })
        }
        Measure::Density(d) => {
            let g = d.grid();
            let mass = d.field().integrate()?;
            let mx = Field::from_fn(g.clone(), |p| p.x)?
                .zip(d.field(), |a, b| a * b)?
                .integrate()?;
            let my = if g.dim() == 2 {
                Field::from_fn(g.clone(), |p| p.y)?
                    .zip(d.field(), |a, b| a * b)?
                    .integrate()?
            } else {
                0.0
            };
            Ok(Point {
                x: mx / mass,
                y: my / mass,
            })
        }
    }
}

/// Shifts `mu` so its barycenter sits at the origin. Densities are moved by
/// re-registering the grid (same values, translated axes), which is exact.
pub fn center(mu: &Measure) -> Result<Measure> {
    let b = barycenter(mu)?;
    Ok(translate(mu, Point { x: -b.x, y: -b.y })?)
}

/// Rigid translation by `shift` (exact for both representations).
pub fn translate(mu: &Measure, shift: Point) -> Result<Measure> {
    match mu {
        Measure::Atoms(a) => {
            let atoms = a
                .atoms()
                .iter()
                .map(|&(p, w)| {
                    (
                        Point {
                            x: p.x + shift.x,
                            y: p.y + shift.y,
                        },
                        w,
                    )
                })
                .collect();
            Ok(Measure::Atoms(AtomicMeasure::new(atoms)?))
        }
        Measure::Density(d) => {
            let g = d.grid();
            let moved = match g.dim() {
                1 => {
                    let ax = g.axis(0);
                    Grid::line(ax.lo + shift.x, ax.hi + shift.x, ax.n)?
                }
                _ => {
                    let ax = g.axis(0);
                    let ay = g.axis(1);
                    Grid::plane(
                        Axis::new(ax.lo + shift.x, ax.hi + shift.x, ax.n)?,
                        Axis::new(ay.lo + shift.y, ay.hi + shift.y, ay.n)?,
                    )?
                }
            };
            let field = Field::new(moved, d.field().values().to_vec())?;
            let mut nd = Density::with_tol(field, d.mass_tol)?;
            nd.log_z = d.log_z;
            Ok(Measure::Density(nd))
        }
    }
}

/// The degeneracy gauge `Theta(mu) = inf_theta \int |<theta, y>| dmu` over
/// unit directions; in 1D this is just `\int |y| dmu`.
pub fn theta(mu: &Measure) -> Result<f64> {
    let directional = |cs: f64, sn: f64| -> f64 {
        match mu {
            Measure::Atoms(a) => a
                .atoms()
                .iter()
                .map(|&(p, w)| w * (cs * p.x + sn * p.y).abs())
                .sum(),
            Measure::Density(d) => {
                let g = d.grid();
                (0..g.len())
                    .map(|i| {
                        let p = g.node(i);
                        d.field().value(i) * g.weight(i) * (cs * p.x + sn * p.y).abs()
                    })
                    .sum()
            }
        }
    };
    match mu.dim() {
        1 => Ok(directional(1.0, 0.0)),
        _ => {
            let eval = |t: f64| directional(t.cos(), t.sin());
            let m = 720;
            let mut best_t = 0.0;
            let mut best = f64::INFINITY;
            for k in 0..m {
                let t = std::f64::consts::PI * k as f64 / m as f64;
                let v = eval(t);
                if v < best {
                    best = v;
                    best_t = t;
                }
            }
            let half = std::f64::consts::PI / m as f64;
            let (_, refined) = golden_section_min(eval, best_t - half, best_t + half, 1e-10);
            Ok(refined.min(best))
        }
    }
}

/// `\int |mu - nu|` over the union of the two boxes, both inputs linearly
/// resampled to a grid at the finer spacing. Values outside a density's own
/// box count as zero.
pub fn l1_distance(mu: &Density, nu: &Density) -> Result<f64> {
    let ga = mu.grid();
    let gb = nu.grid();
    if ga.dim() != 1 || gb.dim() != 1 {
        return Err(Error::UnsupportedDimension {
            got: ga.dim().max(gb.dim()),
            context: "l1_distance".into(),
        });
    }
    let (a0, a1) = (ga.axis(0).lo, ga.axis(0).hi);
    let (b0, b1) = (gb.axis(0).lo, gb.axis(0).hi);
    if a1 < b0 || b1 < a0 {
        return Err(Error::Domain("density boxes are disjoint".into()));
    }
    let lo = a0.min(b0);
    let hi = a1.max(b1);
    let h = ga.axis(0).spacing().min(gb.axis(0).spacing());
    let n = (((hi - lo) / h).round() as usize + 1).max(3);
    let common = Grid::line(lo, hi, n)?;
    let sample = |d: &Density, x: f64| -> f64 {
        d.field().interp(Point::new1(x)).unwrap_or(0.0)
    };
    let diff = Field::from_fn(common, |p| (sample(mu, p.x) - sample(nu, p.x)).abs())?;
    diff.integrate()
}

/// Result of minimizing the L1 distance over translations.
#[derive(Clone, Copy, Debug)]
pub struct TranslationFit {
    pub distance: f64,
    pub x0: f64,
    /// True when the optimizer sat on the edge of the allowed window
    /// (10% of the box width per side); the reported minimum is then only an
    /// upper bound.
    pub hit_bound: bool,
}

/// `min_{x0} \int |rho - rhobar(. - x0)|`, coarse scan at the grid spacing
/// followed by golden-section refinement. The shift is restricted to 10% of
/// the box width so translates keep their mass on the grid.
pub fn l1_dist_mod_translation(rho: &Density, rhobar: &Density) -> Result<TranslationFit> {
    if rho.grid().dim() != 1 {
        return Err(Error::UnsupportedDimension {
            got: rho.grid().dim(),
            context: "l1_dist_mod_translation".into(),
        });
    }
    let ax = rhobar.grid().axis(0);
    let bound = 0.1 * (ax.hi - ax.lo);
    let h = ax.spacing();
    let eval = |x0: f64| -> f64 {
        let shifted = translate(&Measure::Density(rhobar.clone()), Point::new1(x0)).unwrap();
        l1_distance(rho, shifted.as_density().unwrap()).unwrap_or(f64::INFINITY)
    };
    let mut best_x = 0.0;
    let mut best = f64::INFINITY;
    let steps = (bound / h).floor() as isize;
    for k in -steps..=steps {
        let x0 = k as f64 * h;
        let v = eval(x0);
        if v < best {
            best = v;
            best_x = x0;
        }
    }
    let lo = (best_x - h).max(-bound);
    let hi = (best_x + h).min(bound);
    let (x_ref, v_ref) = golden_section_min(eval, lo, hi, 1e-8);
    let (distance, x0) = if v_ref < best { (v_ref, x_ref) } else { (best, best_x) };
    Ok(TranslationFit {
        distance,
        x0,
        hit_bound: (x0.abs() - bound).abs() < 2.0 * h,
    })
}

/// Writes a measure file: first line `density` or `atoms`, then CSV rows.
pub fn measure_to_string(mu: &Measure) -> String {
    match mu {
        Measure::Density(d) => format!("density\n{}", d.field().to_csv(&[])),
        Measure::Atoms(a) => {
            let mut s = String::from("atoms\n");
            if a.dim() == 1 {
                s.push_str("x,weight\n");
                for &(p, w) in a.atoms() {
                    s.push_str(&format!("{},{}\n", fmt(p.x), fmt(w)));
                }
            } else {
                s.push_str("x,y,weight\n");
                for &(p, w) in a.atoms() {
                    s.push_str(&format!("{},{},{}\n", fmt(p.x), fmt(p.y), fmt(w)));
                }
            }
            s
        }
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.17e}")
}

pub fn measure_from_str(text: &str) -> Result<Measure> {
    let mut lines = text.lines();
    let tag = lines
        .next()
        .ok_or_else(|| Error::Parse {
            line: 1,
            message: "empty measure file".into(),
        })?
        .trim();
    let rest: String = lines.collect::<Vec<_>>().join("\n");
    match tag {
        "density" => {
            let (field, _) = Field::from_csv(&rest)?;
            Ok(Measure::Density(Density::with_tol(field, 1e-3)?))
        }
        "atoms" => {
            let mut atoms = Vec::new();
            for (k, line) in rest.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let cols: Vec<&str> = line.split(',').map(str::trim).collect();
                if k == 0 && cols.iter().any(|c| c.parse::<f64>().is_err()) {
                    continue; // header row
                }
                let parse = |s: &str| -> Result<f64> {
                    s.parse::<f64>().map_err(|_| Error::Parse {
                        line: k + 2,
                        message: format!("bad number {s:?}"),
                    })
                };
                match cols.len() {
                    2 => atoms.push((Point::new1(parse(cols[0])?), parse(cols[1])?)),
                    3 => atoms.push((
                        Point::new2(parse(cols[0])?, parse(cols[1])?),
                        parse(cols[2])?,
                    )),
                    _ => {
                        return Err(Error::Parse {
                            line: k + 2,
                            message: format!("expected 2 or 3 columns, got {}", cols.len()),
                        })
                    }
                }
            }
            Ok(Measure::Atoms(AtomicMeasure::renormalized(atoms)?))
        }
        other => Err(Error::Parse {
            line: 1,
            message: format!("expected `density` or `atoms`, found {other:?}"),
        }),
    }
}

pub fn read_measure(path: &Path) -> Result<Measure> {
    measure_from_str(&std::fs::read_to_string(path)?)
}

pub fn write_measure(path: &Path, mu: &Measure) -> Result<()> {
    write_atomic(path, &measure_to_string(mu))
}

// keep gibbs_values linked until the solver lands
#[allow(dead_code)]
fn _reserved(phi: &Potential) -> Vec<f64> {
    gibbs_values(phi, 0.0)
}
