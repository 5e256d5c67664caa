//! The variational core: the dual functionals `J` and `E`, the duality gap,
//! the Brascamp-Lieb variance deficit with its optimizer manifold, the
//! Prekopa condition and deficit, the sup-convolution triple, first and
//! second variations of `J`, and the backbone integral identity.

use crate::convexlab::{
    check_bracket_concavity, gradient_1d, gradient_of_field, legendre_transform, second_derivative,
    slope_range, sup_convolution_fdelta, Potential,
};
use crate::error::{Error, Result};
use crate::grid::{Field, Grid, Point};
use crate::measures::{entropy, gibbs, moment_measure, moments, Density, Measure};
use crate::numerics::{bracket_convex_min, gauss_legendre_01, golden_section_min};
use crate::transport::max_correlation;

/// Gradients below this magnitude contribute nothing to the Dirichlet term
/// even where the Hessian vanishes.
pub const GRAD_TOL: f64 = 1e-10;

/// Grid-derived default tolerance, surfaced in reports.
pub fn grid_tol(g: &Grid) -> f64 {
    let mut h = g.axis(0).spacing();
    if g.dim() == 2 {
        h = h.max(g.axis(1).spacing());
    }
    10.0 * h + 1e-8
}

/// Brascamp-Lieb deficit decomposition.
#[derive(Clone, Copy, Debug)]
pub struct DeficitReport {
    pub deficit: f64,
    pub dirichlet_term: f64,
    pub variance_term: f64,
    pub clamp_warnings: usize,
    pub grid_tol: f64,
}

impl DeficitReport {
    pub fn csv_header() -> &'static str {
        "deficit,dirichlet_term,variance_term,clamp_warnings,grid_tol"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.deficit, self.dirichlet_term, self.variance_term, self.clamp_warnings, self.grid_tol
        )
    }
}

/// First and second variations of `J` with finite-difference cross-checks.
#[derive(Clone, Copy, Debug)]
pub struct VariationReport {
    pub first: f64,
    pub second: f64,
    pub fd_first: f64,
    pub fd_second: f64,
    pub grid_tol: f64,
    /// Set for `alpha > 0`, where the second-variation formula drops the
    /// alpha-correction of the conjugate Hessian.
    pub approximate: bool,
}

impl VariationReport {
    pub fn csv_header() -> &'static str {
        "first,second,fd_first,fd_second,grid_tol,approximate"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.first, self.second, self.fd_first, self.fd_second, self.grid_tol, self.approximate
        )
    }
}

/// Evaluates `f` at `x` with nearest-edge extension outside its box.
fn eval_clamped(f: &Field, x: f64) -> f64 {
    let ax = f.grid().axis(0);
    let xc = x.clamp(ax.lo, ax.hi);
    f.interp(Point::new1(xc)).unwrap_or(f64::INFINITY)
}

/// `\int f dmu`. Density masses where `f` is infinite raise a domain error
/// unless negligible; atoms must sit strictly inside `f`'s box.
pub fn integrate_against(f: &Field, mu: &Measure) -> Result<f64> {
    match mu {
        Measure::Atoms(a) => {
            let ax = f.grid().axis(0);
            let mut acc = 0.0;
            for &(p, w) in a.atoms() {
                if !(p.x > ax.lo && p.x < ax.hi) {
                    return Err(Error::Domain(format!(
                        "atom at {} not strictly inside the box [{}, {}]",
                        p.x, ax.lo, ax.hi
                    )));
                }
                let v = f.interp(Point::new1(p.x))?;
                if !v.is_finite() {
                    return Err(Error::Domain(format!(
                        "integrand is infinite at atom {}",
                        p.x
                    )));
                }
                acc += w * v;
            }
            Ok(acc)
        }
        Measure::Density(d) => {
            let g = d.grid();
            let mut acc = 0.0;
            for i in 0..g.len() {
                let m = d.field().value(i) * g.weight(i);
                if m == 0.0 {
                    continue;
                }
                let v = eval_clamped(f, g.node(i).x);
                if !v.is_finite() {
                    if m > 1e-12 {
                        return Err(Error::Domain(format!(
                            "measure charges a region where the integrand is infinite (x = {}, mass {m:.2e})",
                            g.node(i).x
                        )));
                    }
                    continue;
                }
                acc += m * v;
            }
            Ok(acc)
        }
    }
}

/// Dual grid for evaluating `log \int e^{-phi*}`: starts from the slope
/// range and widens until the conjugate rises 40 above its minimum at both
/// edges, so the Gibbs tail is fully captured even for indicator-like
/// potentials whose slope range is degenerate.
fn j_dual_grid(phi: &Potential) -> Result<Grid> {
    let g = phi.grid();
    let h = g.axis(0).spacing();
    let (mut lo, mut hi) = slope_range(phi.field(), 0)?;
    for _ in 0..40 {
        let n = (((hi - lo) / h).round() as usize + 1).clamp(g.axis(0).n, 100_001);
        let dual = Grid::line(lo, hi, n)?;
        let conj = legendre_transform(phi, &dual)?;
        let vals = conj.field().values();
        let m = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let edge = vals[0].min(vals[n - 1]);
        if edge - m >= 40.0 || hi - lo > 1e5 {
            return Ok(dual);
        }
        let c = 0.5 * (lo + hi);
        let w = hi - lo;
        lo = c - w;
        hi = c + w;
    }
    Grid::line(lo, hi, ((hi - lo) / h) as usize + 1)
}

/// The conjugate of `phi` on the widened dual grid used by `J`.
pub fn conjugate_for_j(phi: &Potential) -> Result<Potential> {
    if phi.grid().dim() != 1 {
        return Err(Error::UnsupportedDimension {
            got: phi.grid().dim(),
            context: "conjugate_for_j".into(),
        });
    }
    let dual = j_dual_grid(phi)?;
    legendre_transform(phi, &dual)
}

/// `J_{mu,alpha}(phi) = log \int e^{-(phi* + alpha|x|^2/2)} - \int phi dmu`.
pub fn j_functional(phi: &Potential, mu: &Measure, alpha: f64) -> Result<f64> {
    let conj = conjugate_for_j(phi)?;
    let lz = gibbs(&conj, alpha)?
        .log_partition()
        .expect("gibbs records log Z");
    let lin = integrate_against(phi.field(), mu)?;
    Ok(lz - lin)
}

/// `J` of a field that may narrowly miss discrete convexity (used for
/// finite-difference probes around a potential).
fn j_of_field(field: Field, mu: &Measure, alpha: f64, tol: f64) -> Result<f64> {
    let phi = Potential::with_tol(field, tol)?;
    j_functional(&phi, mu, alpha)
}

/// `E_{mu,alpha}(rho) = H(rho) + T(rho, mu) + (alpha/2) M2(rho)`.
pub fn e_functional(rho: &Density, mu: &Measure, alpha: f64) -> Result<f64> {
    let rm = Measure::Density(rho.clone());
    let h = entropy(rho)?;
    let t = max_correlation(&rm, mu)?;
    let m2 = if alpha > 0.0 { moments(&rm, 2.0)? } else { 0.0 };
    Ok(h + t + 0.5 * alpha * m2)
}

/// `J + E`; nonnegative by weak duality, zero at an optimal pair.
pub fn duality_gap(phi: &Potential, rho: &Density, mu: &Measure, alpha: f64) -> Result<f64> {
    Ok(j_functional(phi, mu, alpha)? + e_functional(rho, mu, alpha)?)
}

fn bl_deficit_weighted(f: &Field, phi: &Potential, alpha: f64) -> Result<DeficitReport> {
    if f.grid().dim() != 1 {
        return Err(Error::UnsupportedDimension {
            got: f.grid().dim(),
            context: "bl_deficit".into(),
        });
    }
    if f.grid() != phi.grid() {
        return Err(Error::Domain("f and phi live on different grids".into()));
    }
    let rho = gibbs(phi, alpha)?;
    let grad = gradient_of_field(f)?.components.remove(0);
    let sd = second_derivative(phi)?;
    let (hess, clamp_warnings) = sd.as_1d().expect("1D second derivative");
    let g = f.grid();
    let mut dirichlet = 0.0;
    let mut mean = 0.0;
    let mut mean_sq = 0.0;
    for i in 0..g.len() {
        let m = rho.field().value(i) * g.weight(i);
        if m == 0.0 {
            continue;
        }
        let fi = f.value(i);
        let gi = grad.value(i);
        let hi = hess.value(i);
        mean += m * fi;
        mean_sq += m * fi * fi;
        if gi.abs() <= GRAD_TOL {
            continue;
        }
        if !(hi > 0.0) {
            // a vanishing Hessian under a real gradient makes the Dirichlet
            // term infinite, but only where the Gibbs measure carries mass:
            // box truncation flattens conjugates in regions of negligible
            // weight and must not poison the integral
            if m > 1e-12 {
                dirichlet = f64::INFINITY;
            }
            continue;
        }
        dirichlet += m * gi * gi / hi;
    }
    let variance = mean_sq - mean * mean;
    Ok(DeficitReport {
        deficit: dirichlet - variance,
        dirichlet_term: dirichlet,
        variance_term: variance,
        clamp_warnings,
        grid_tol: grid_tol(g),
    })
}

/// Brascamp-Lieb deficit
/// `delta_BL(f) = \int (D^2 phi)^{-1} (f')^2 drho_phi - Var_{rho_phi}(f)`.
/// The Dirichlet term is `+inf` where the clamped Hessian vanishes under a
/// non-negligible gradient.
pub fn bl_deficit(f: &Field, phi: &Potential) -> Result<DeficitReport> {
    bl_deficit_weighted(f, phi, 0.0)
}

/// L1(rho_phi) distance from `f` to the optimizer manifold
/// `{a phi' + b}` with `b` pinned to the mean of `f`; returns
/// `(distance, a)`.
pub fn dist_to_bl_optimizers(f: &Field, phi: &Potential) -> Result<(f64, f64)> {
    if f.grid().dim() != 1 {
        return Err(Error::UnsupportedDimension {
            got: f.grid().dim(),
            context: "dist_to_bl_optimizers".into(),
        });
    }
    let rho = gibbs(phi, 0.0)?;
    let grad = gradient_1d(phi)?;
    let g = f.grid();
    let masses: Vec<f64> = (0..g.len()).map(|i| rho.field().value(i) * g.weight(i)).collect();
    let b: f64 = (0..g.len()).map(|i| masses[i] * f.value(i)).sum();
    let objective = |a: f64| -> f64 {
        (0..g.len())
            .map(|i| masses[i] * (f.value(i) - a * grad.value(i) - b).abs())
            .sum()
    };
    let (lo, hi) = bracket_convex_min(objective, 1.0);
    let (a, dist) = golden_section_min(objective, lo, hi, 1e-9);
    Ok((dist, a))
}

/// Worst violation found by [`prekopa_condition_check`].
#[derive(Clone, Copy, Debug)]
pub struct PrekopaCheck {
    pub holds: bool,
    pub worst_violation: f64,
    pub at: (f64, f64),
}

/// Brute-force check of `f(x)^s g(y)^{1-s} <= h(sx + (1-s)y)` over all grid
/// pairs; `h` is interpolated and counts as zero outside its box.
pub fn prekopa_condition_check(f: &Field, g: &Field, h: &Field, s: f64) -> Result<PrekopaCheck> {
    if !(0.0 < s && s < 1.0) {
        return Err(Error::Parameter(format!("Prekopa weight s={s} outside (0,1)")));
    }
    if f.grid().dim() != 1 || g.grid().dim() != 1 || h.grid().dim() != 1 {
        return Err(Error::UnsupportedDimension {
            got: 2,
            context: "prekopa_condition_check".into(),
        });
    }
    let tol = 1e-8;
    let gf = f.grid();
    let gg = g.grid();
    let hax = h.grid().axis(0);
    let fs: Vec<f64> = f.values().iter().map(|&v| v.max(0.0).powf(s)).collect();
    let gs: Vec<f64> = g.values().iter().map(|&v| v.max(0.0).powf(1.0 - s)).collect();
    let mut worst = f64::NEG_INFINITY;
    let mut at = (f64::NAN, f64::NAN);
    for i in 0..gf.len() {
        if fs[i] == 0.0 {
            continue;
        }
        let x = gf.node(i).x;
        for j in 0..gg.len() {
            if gs[j] == 0.0 {
                continue;
            }
            let lhs = fs[i] * gs[j];
            if lhs <= worst.max(tol) && worst > 0.0 {
                // cannot beat the current worst violation even if h = 0
                continue;
            }
            let y = gg.node(j).x;
            let z = s * x + (1.0 - s) * y;
            let hz = if z >= hax.lo && z <= hax.hi {
                h.interp(Point::new1(z)).unwrap_or(0.0)
            } else {
                0.0
            };
            let v = lhs - hz;
            if v > worst {
                worst = v;
                at = (x, y);
            }
        }
    }
    Ok(PrekopaCheck {
        holds: worst <= tol,
        worst_violation: worst.max(0.0),
        at,
    })
}

/// Prekopa-Leindler deficit `eps = \int h / ((\int f)^s (\int g)^{1-s}) - 1`
/// after verifying the Prekopa condition.
pub fn pl_deficit(f: &Field, g: &Field, h: &Field, s: f64) -> Result<f64> {
    let check = prekopa_condition_check(f, g, h, s)?;
    if !check.holds {
        return Err(Error::ClassMembership(format!(
            "Prekopa condition fails by {:.3e} at (x, y) = ({}, {})",
            check.worst_violation, check.at.0, check.at.1
        )));
    }
    pl_deficit_unchecked(f, g, h, s)
}

/// The deficit formula alone (callers that construct the triple so the
/// condition holds by design can skip the quadratic check).
pub fn pl_deficit_unchecked(f: &Field, g: &Field, h: &Field, s: f64) -> Result<f64> {
    let intf = f.integrate()?;
    let intg = g.integrate()?;
    if !(intf > 0.0) || !(intg > 0.0) {
        return Err(Error::Domain("pl_deficit needs positive masses for f and g".into()));
    }
    let inth = h.integrate()?;
    Ok(inth / (intf.powf(s) * intg.powf(1.0 - s)) - 1.0)
}

/// The sup-convolution triple `u = e^{2 delta f - phi}`, `v = e^{-phi}`,
/// `w = e^{f_delta - phi}` with `phi` pre-normalized to unit Gibbs mass.
#[derive(Debug)]
pub struct BlTriple {
    pub u: Field,
    pub v: Field,
    pub w: Field,
    pub fdelta: Field,
}

pub fn bl_triple(f: &Field, phi: &Potential, delta: f64) -> Result<BlTriple> {
    if delta < 0.0 {
        return Err(Error::Parameter("delta must be >= 0".into()));
    }
    let lz = gibbs(phi, 0.0)?.log_partition().expect("gibbs records log Z");
    let phin = phi.shift(lz); // now \int e^{-phin} = 1
    if let Err(Error::Concavity { at, violation, .. }) =
        check_bracket_concavity(f, &phin, delta, None)
    {
        // bisect for the largest admissible delta
        let concave = |d: f64| check_bracket_concavity(f, &phin, d, None).is_ok();
        let mut lo = 0.0;
        let mut hi = delta;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if concave(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        return Err(Error::Concavity {
            at,
            violation,
            delta0: Some(lo),
        });
    }
    let fdelta = sup_convolution_fdelta(f, &phin, delta, None)?;
    let expf = |v: f64| if v.is_finite() { v.exp() } else { 0.0 };
    let u = f.zip(phin.field(), |fv, pv| expf(2.0 * delta * fv - pv))?;
    let v = phin.field().map(|pv| expf(-pv))?;
    let w = fdelta.zip(phin.field(), |fd, pv| expf(fd - pv))?;
    Ok(BlTriple { u, v, w, fdelta })
}

/// Pushforward of the Gibbs measure of `phi*` (the "moment measure of the
/// conjugate"), shared by the first variation and the solver.
pub fn conjugate_moment_measure(phi: &Potential, alpha: f64) -> Result<Measure> {
    let conj = conjugate_for_j(phi)?;
    moment_measure(&conj, alpha)
}

/// First variation `dJ/dt = \int v d(mu_{phi*,alpha} - mu)`.
pub fn variation_first(phi: &Potential, v: &Field, mu: &Measure, alpha: f64) -> Result<f64> {
    let pushed = conjugate_moment_measure(phi, alpha)?;
    Ok(integrate_against(v, &pushed)? - integrate_against(v, mu)?)
}

/// Second variation `d^2J/dt^2 = Var(w) - \int (D^2 phi*)^{-1} (w')^2 drho`
/// with `w = v(grad phi*)`; equals `-delta_BL(w)` under the conjugate
/// potential. For `alpha > 0` the Gibbs weight is alpha-regularized but the
/// Hessian correction is dropped (the result is approximate).
pub fn variation_second(phi: &Potential, v: &Field, alpha: f64) -> Result<f64> {
    let conj = conjugate_for_j(phi)?;
    let grad = gradient_1d(&conj)?;
    let w = Field::from_fn(conj.grid().clone(), |p| {
        let y = grad.interp(p).unwrap_or(f64::INFINITY);
        if y.is_finite() {
            eval_clamped(v, y)
        } else {
            f64::INFINITY
        }
    })?;
    let rep = bl_deficit_weighted(&w, &conj, alpha)?;
    Ok(-rep.deficit)
}

/// Variations plus centered finite-difference cross-checks of `J` at step
/// `t_fd`.
pub fn variation_report(
    phi: &Potential,
    v: &Field,
    mu: &Measure,
    alpha: f64,
    t_fd: f64,
) -> Result<VariationReport> {
    if !(t_fd > 0.0) {
        return Err(Error::Parameter("finite-difference step must be > 0".into()));
    }
    let first = variation_first(phi, v, mu, alpha)?;
    let second = variation_second(phi, v, alpha)?;
    let tol = phi.convexity_tol().max(1e-6);
    let jp = j_of_field(phi.field().zip(v, |p, w| p + t_fd * w)?, mu, alpha, tol)?;
    let jm = j_of_field(phi.field().zip(v, |p, w| p - t_fd * w)?, mu, alpha, tol)?;
    let j0 = j_functional(phi, mu, alpha)?;
    Ok(VariationReport {
        first,
        second,
        fd_first: (jp - jm) / (2.0 * t_fd),
        fd_second: (jp - 2.0 * j0 + jm) / (t_fd * t_fd),
        grid_tol: grid_tol(phi.grid()),
        approximate: alpha > 0.0,
    })
}

/// Backbone identity: `J(phi) - J(phibar)` against
/// `-\int_0^1 (1-t) delta_BL(v(grad phi_t*), rho_{phi_t*}) dt` along the
/// segment `phi_t = phibar + t(phi - phibar)`, by Gauss-Legendre quadrature.
/// Returns `(lhs, rhs)`.
pub fn backbone_gap(
    phibar: &Potential,
    phi: &Potential,
    mu: &Measure,
    t_nodes: usize,
) -> Result<(f64, f64)> {
    if phibar.grid() != phi.grid() {
        return Err(Error::Domain("potentials live on different grids".into()));
    }
    let v = phi.field().zip(phibar.field(), |a, b| a - b)?;
    let lhs = j_functional(phi, mu, 0.0)? - j_functional(phibar, mu, 0.0)?;
    let tol = phibar.convexity_tol().max(phi.convexity_tol());
    let mut rhs = 0.0;
    for (t, wq) in gauss_legendre_01(t_nodes) {
        let seg = phibar.field().zip(&v, |b, d| b + t * d)?;
        let phit = Potential::with_tol(seg, tol.max(1e-9))?;
        rhs += wq * (1.0 - t) * (-variation_second(&phit, &v, 0.0)?);
    }
    Ok((lhs, -rhs))
}
