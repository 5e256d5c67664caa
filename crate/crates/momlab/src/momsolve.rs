//! Moment-measure solver: a damped monotone-rearrangement fixed point in
//! 1D, the regularization path alpha -> 0 with a log-log rate fit, and
//! regularity probes (alternating-exponent recursion, strong-convexity
//! modulus, even-moment recursion).

use crate::convexlab::{
    default_dual_grid, legendre_transform, second_derivative, strong_convexity_modulus,
    Potential,
};
use crate::error::{Error, Result};
use crate::functionals::{e_functional, integrate_against, j_functional};
use crate::grid::{Field, Grid, Point};
use crate::measures::{
    barycenter, gibbs, l1_dist_mod_translation, moments, theta, Density, Measure,
};
use crate::numerics::{linear_fit, pav_nondecreasing};
use crate::transport::{LevelSet, QuantileFn};

/// Smallest admissible regularization on the path; below this the grid
/// cannot resolve the alpha-dependence of the Gibbs factor.
pub const ALPHA_FLOOR: f64 = 1e-4;

const DIVERGENCE_WINDOW: usize = 50;

#[derive(Clone, Debug)]
pub struct SolveOptions {
    /// Fraction of the rearranged slope mixed into the iterate, in (0, 1].
    pub damping: f64,
    /// Residual target; `None` means half a grid cell (`0.5 h + 1e-9`).
    pub tol: Option<f64>,
    pub max_iter: usize,
    /// Evaluate J every iteration and count ascent violations.
    pub monitor_j: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            damping: 0.5,
            tol: None,
            max_iter: 400,
            monitor_j: false,
        }
    }
}

/// Outcome of one solve. `residual` is the quantile-form W1 distance
/// between the pushforward of `rho` through the slope field of `psi` and
/// the target.
#[derive(Clone, Debug)]
pub struct SolveReport {
    pub psi: Potential,
    pub rho: Density,
    pub alpha: f64,
    pub iterations: usize,
    pub residual: f64,
    pub tol: f64,
    pub j_value: f64,
    pub e_value: f64,
    pub gap: f64,
    pub converged: bool,
    pub m2_rho: f64,
    pub residual_trace: Vec<f64>,
    pub j_ascent_violations: usize,
}

impl SolveReport {
    pub fn csv_header() -> &'static str {
        "alpha,iterations,residual,tol,j_value,e_value,gap,m2_rho,converged"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:e},{:e},{},{},{:e},{},{}",
            self.alpha,
            self.iterations,
            self.residual,
            self.tol,
            self.j_value,
            self.e_value,
            self.gap,
            self.m2_rho,
            self.converged
        )
    }
}

/// Log-log rate fit of the regularization path, plus the square-root-law
/// check anchored at the largest alpha.
#[derive(Clone, Debug)]
pub struct RateFit {
    /// `(alpha, dist)` pairs, alphas strictly decreasing.
    pub samples: Vec<(f64, f64)>,
    /// Slope of `log dist` against `log alpha`; `None` for a single sample.
    pub slope: Option<f64>,
    pub intercept: f64,
    pub r2: f64,
    /// `dist / sqrt(alpha)` at the largest alpha.
    pub c_hat: f64,
    /// Whether every sample satisfies `dist <= 4 c_hat sqrt(alpha)`.
    pub bound_holds: bool,
}

impl RateFit {
    pub fn csv(&self) -> String {
        let mut out = String::from("alpha,dist\n");
        for &(a, d) in &self.samples {
            out.push_str(&format!("{a:e},{d:e}\n"));
        }
        out
    }

    pub fn summary_line(&self) -> String {
        match self.slope {
            Some(s) => format!(
                "fit: slope = {:.4}, intercept = {:.4}, r2 = {:.6}, c_hat = {:.4e}, sqrt-law x4 holds = {}",
                s, self.intercept, self.r2, self.c_hat, self.bound_holds
            ),
            None => format!(
                "fit: slope undefined (single sample), c_hat = {:.4e}",
                self.c_hat
            ),
        }
    }
}

/// Smallest interval carrying all but a negligible sliver of the target.
fn support_interval(mu: &Measure) -> Result<(f64, f64)> {
    match mu {
        Measure::Atoms(a) => {
            let atoms = a.atoms();
            Ok((atoms[0].0.x, atoms[atoms.len() - 1].0.x))
        }
        Measure::Density(d) => {
            let g = d.grid();
            let v = d.field().values();
            let mx = v.iter().cloned().fold(0.0, f64::max);
            let thr = 1e-12 * mx;
            let first = v.iter().position(|&x| x > thr);
            let last = v.iter().rposition(|&x| x > thr);
            match (first, last) {
                (Some(a), Some(b)) => Ok((g.axis(0).coord(a), g.axis(0).coord(b))),
                _ => Err(Error::Normalization("target density vanishes".into())),
            }
        }
    }
}

/// Antiderivative of a nondecreasing slope array by the trapezoid rule,
/// anchored at 0 on the first node; convex by construction.
fn potential_from_slopes(grid: &Grid, s: &[f64]) -> Result<Potential> {
    let h = grid.axis(0).spacing();
    let mut v = Vec::with_capacity(s.len());
    let mut acc = 0.0;
    v.push(0.0);
    for i in 1..s.len() {
        acc += 0.5 * (s[i - 1] + s[i]) * h;
        v.push(acc);
    }
    Potential::with_tol(Field::new(grid.clone(), v)?, 1e-7)
}

/// W1 between the pushforward of `rho` through the piecewise-linear slope
/// field and the target, in quantile form on the shared level set.
fn pushforward_residual(
    slope_field: &Field,
    rho_qf: &QuantileFn,
    mu_qf: &QuantileFn,
    levels: &LevelSet,
) -> Result<f64> {
    let mut acc = 0.0;
    for (&t, &w) in levels.t.iter().zip(levels.w.iter()) {
        let x = rho_qf.at(t);
        let pushed = slope_field.interp(Point::new1(x))?;
        acc += w * (pushed - mu_qf.at(t)).abs();
    }
    Ok(acc)
}

/// `J` of the current iterate without forming the full report:
/// `log Z(psi, alpha) - \int psi* dmu`.
fn j_of_iterate(psi: &Potential, rho: &Density, mu: &Measure) -> Result<f64> {
    let conj = legendre_transform(psi, &default_dual_grid(psi)?)?;
    let lz = rho.log_partition().expect("gibbs records log Z");
    Ok(lz - integrate_against(conj.field(), mu)?)
}

fn validate_target(mu: &Measure, alpha: f64, grid: &Grid) -> Result<f64> {
    if grid.dim() != 1 || mu.dim() != 1 {
        return Err(Error::UnsupportedDimension {
            got: grid.dim().max(mu.dim()),
            context: "solve_moment_measure".into(),
        });
    }
    if !(alpha >= 0.0) {
        return Err(Error::Parameter(format!("alpha must be >= 0, got {alpha}")));
    }
    let ax = grid.axis(0);
    let h = ax.spacing();
    let b = barycenter(mu)?.x;
    if b.abs() > 2.0 * h {
        return Err(Error::Domain(format!(
            "target barycenter {b:.4} exceeds the 2h = {:.4} centering tolerance",
            2.0 * h
        )));
    }
    let (lo, hi) = support_interval(mu)?;
    if !(lo > ax.lo && hi < ax.hi) {
        return Err(Error::Domain(format!(
            "target support [{lo:.3}, {hi:.3}] must lie strictly inside the grid interval [{:.3}, {:.3}]",
            ax.lo, ax.hi
        )));
    }
    if alpha == 0.0 && theta(mu)? <= 1e-12 {
        return Err(Error::DegenerateTarget(
            "Theta(mu) = 0: the unregularized problem has no representation".into(),
        ));
    }
    Ok(h)
}

/// Damped monotone-rearrangement fixed point for the (regularized)
/// moment-measure representation of a centered 1D target. The iterate is
/// the slope array of `psi`; each step rearranges the current Gibbs
/// density onto the target, mixes with damping, and projects back onto
/// nondecreasing slopes (the derivative-side convexification).
pub fn solve_moment_measure(
    mu: &Measure,
    alpha: f64,
    grid: &Grid,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(Error::Parameter(format!(
            "damping must be in (0, 1], got {}",
            opts.damping
        )));
    }
    let h = validate_target(mu, alpha, grid)?;
    let tol = opts.tol.unwrap_or(0.5 * h + 1e-9);
    let levels = LevelSet::default_set();
    let mu_qf = QuantileFn::new(mu)?;
    let n = grid.len();

    let mut s: Vec<f64> = (0..n).map(|i| grid.node(i).x).collect();
    let mut trace: Vec<f64> = Vec::new();
    let mut rises = 0usize;
    let mut iterations = 0usize;
    let mut j_prev = f64::NEG_INFINITY;
    let mut j_violations = 0usize;

    let (mut psi, mut rho, mut residual);
    loop {
        psi = potential_from_slopes(grid, &s)?;
        rho = gibbs(&psi, alpha)?;
        let rho_qf = QuantileFn::new(&Measure::Density(rho.clone()))?;
        let slope_field = Field::new(grid.clone(), s.clone())?;
        residual = pushforward_residual(&slope_field, &rho_qf, &mu_qf, &levels)?;
        if let Some(&prev) = trace.last() {
            if residual > prev {
                rises += 1;
            } else {
                rises = 0;
            }
        }
        trace.push(residual);
        if opts.monitor_j {
            if let Ok(j) = j_of_iterate(&psi, &rho, mu) {
                if j < j_prev - 10.0 * tol {
                    j_violations += 1;
                }
                j_prev = j;
            }
        }
        if residual <= tol || iterations >= opts.max_iter {
            break;
        }
        if rises >= DIVERGENCE_WINDOW {
            return Err(Error::NonConvergence {
                iterations,
                residual,
                trace,
            });
        }

        // monotone rearrangement: target slope at x is the mu-quantile of
        // the Gibbs mass to the left of x
        let cum = match &rho_qf {
            QuantileFn::Density { cum, .. } => cum,
            _ => unreachable!(),
        };
        for i in 0..n {
            let g = mu_qf.at(cum[i]);
            s[i] = (1.0 - opts.damping) * s[i] + opts.damping * g;
        }
        pav_nondecreasing(&mut s);
        iterations += 1;
    }

    // translation gauge for the unregularized problem: shift the grid by a
    // whole number of cells so the Gibbs barycenter is within 2h of 0
    if alpha == 0.0 {
        let b = barycenter(&Measure::Density(rho.clone()))?.x;
        let shift = (b / h).round() * h;
        if shift != 0.0 {
            let ax = grid.axis(0);
            let shifted = Grid::line(ax.lo - shift, ax.hi - shift, ax.n)?;
            psi = Potential::with_tol(
                Field::new(shifted, psi.field().values().to_vec())?,
                1e-7,
            )?;
            rho = gibbs(&psi, alpha)?;
        }
    }

    // additive gauge: absorb log Z into psi so the Gibbs factor itself is
    // normalized
    let lz = rho.log_partition().expect("gibbs records log Z");
    psi = psi.shift(lz);
    rho = gibbs(&psi, alpha)?;

    let phi = legendre_transform(&psi, &default_dual_grid(&psi)?)?;
    let j_value = j_functional(&phi, mu, alpha)?;
    let e_value = e_functional(&rho, mu, alpha)?;
    let gap = j_value + e_value;
    let m2_rho = moments(&Measure::Density(rho.clone()), 2.0)?;
    let converged = residual <= tol && gap.abs() <= 10.0 * tol;

    Ok(SolveReport {
        psi,
        rho,
        alpha,
        iterations,
        residual,
        tol,
        j_value,
        e_value,
        gap,
        converged,
        m2_rho,
        residual_trace: trace,
        j_ascent_violations: j_violations,
    })
}

/// Fully discrete objective for the ascent backend:
/// `J(phi) = log sum_i w_i e^{-(psi_i + alpha x_i^2/2)} - sum_j m_j phi_j`
/// with `psi_i = max_j (x_i y_j - phi_j)` and `m_j` the exact hat masses of
/// the target. Concave in the node values, and its exact gradient is the
/// argmax-assigned Gibbs mass minus the target mass.
struct DualObjective<'a> {
    xs: Vec<f64>,
    xw: Vec<f64>,
    ys: Vec<f64>,
    mu_mass: &'a [f64],
    alpha: f64,
    /// entropic smoothing of the conjugate max; keeps `J` differentiable
    /// so the line search cannot stall at an assignment kink
    tau: f64,
}

struct DualEval {
    j: f64,
    psi: Vec<f64>,
    /// exact gradient of the smoothed `J` per dual node
    grad: Vec<f64>,
}

impl DualObjective<'_> {
    fn eval(&self, phi: &[f64]) -> DualEval {
        let n = self.xs.len();
        let dn = self.ys.len();
        // lower convex hull of (y_j, phi_j): the hard argmax lives on it
        // and is monotone in x; the soft weights concentrate around it
        let mut hull: Vec<usize> = Vec::with_capacity(dn);
        for j in 0..dn {
            while hull.len() >= 2 {
                let b = hull[hull.len() - 1];
                let a = hull[hull.len() - 2];
                let lhs = (phi[j] - phi[b]) * (self.ys[b] - self.ys[a]);
                let rhs = (phi[b] - phi[a]) * (self.ys[j] - self.ys[b]);
                if lhs <= rhs {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(j);
        }
        let score = |j: usize, x: f64| x * self.ys[j] - phi[j];
        let mut psi = Vec::with_capacity(n);
        let mut soft: Vec<(usize, Vec<f64>)> = Vec::with_capacity(n);
        let cut = 40.0 * self.tau;
        let mut k = 0usize;
        for i in 0..n {
            let x = self.xs[i];
            while k + 1 < hull.len() && score(hull[k + 1], x) >= score(hull[k], x) {
                k += 1;
            }
            let top = score(hull[k], x);
            // soft-max over the nodes whose score is within the cutoff of
            // the hard max
            let center = hull[k];
            let mut lo = center;
            while lo > 0 && top - score(lo - 1, x) < cut {
                lo -= 1;
            }
            let mut hi = center;
            while hi + 1 < dn && top - score(hi + 1, x) < cut {
                hi += 1;
            }
            let mut ws: Vec<f64> = (lo..=hi)
                .map(|j| ((score(j, x) - top) / self.tau).exp())
                .collect();
            let s: f64 = ws.iter().sum();
            for w in ws.iter_mut() {
                *w /= s;
            }
            psi.push(top + self.tau * s.ln());
            soft.push((lo, ws));
        }
        // Gibbs masses under the current psi
        let vals: Vec<f64> = (0..n)
            .map(|i| psi[i] + 0.5 * self.alpha * self.xs[i] * self.xs[i])
            .collect();
        let m = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let weights: Vec<f64> = (0..n)
            .map(|i| self.xw[i] * (-(vals[i] - m)).exp())
            .collect();
        let z: f64 = weights.iter().sum();
        let log_z = z.ln() - m;
        let lin: f64 = self
            .mu_mass
            .iter()
            .zip(phi.iter())
            .map(|(&mm, &p)| mm * p)
            .sum();
        let mut grad = self.mu_mass.iter().map(|&mm| -mm).collect::<Vec<f64>>();
        for i in 0..n {
            let (lo, ws) = &soft[i];
            let gm = weights[i] / z;
            for (off, &w) in ws.iter().enumerate() {
                grad[lo + off] += gm * w;
            }
        }
        DualEval {
            j: log_z - lin,
            psi,
            grad,
        }
    }
}

/// Gradient ascent on the fully discrete dual functional, kept as an
/// independent backend for cross-checking the fixed point. The objective
/// is concave in the dual-side node values, so backtracked steepest
/// ascent converges without damping heuristics.
pub fn solve_moment_measure_ascent(
    mu: &Measure,
    alpha: f64,
    grid: &Grid,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    let h = validate_target(mu, alpha, grid)?;
    let tol = opts.tol.unwrap_or(0.5 * h + 1e-9);
    let levels = LevelSet::default_set();
    let mu_qf = QuantileFn::new(mu)?;

    // dual grid: padded target support, resolution tied to the primal grid
    let (slo, shi) = support_interval(mu)?;
    let pad = 0.35 * (shi - slo).max(1.0);
    let dn = (grid.len() / 2).clamp(201, 4001) | 1;
    let dual = Grid::line(slo - pad, shi + pad, dn)?;

    // exact hat masses of the target on the dual nodes
    let mut mu_mass = vec![0.0; dn];
    match mu {
        Measure::Atoms(a) => {
            for &(p, w) in a.atoms() {
                deposit_hat(&mut mu_mass, &dual, p.x, w);
            }
        }
        Measure::Density(d) => {
            let g = d.grid();
            for i in 0..g.len() {
                deposit_hat(
                    &mut mu_mass,
                    &dual,
                    g.node(i).x,
                    g.weight(i) * d.field().value(i),
                );
            }
        }
    }

    let hd = dual.axis(0).spacing();
    let obj = DualObjective {
        xs: (0..grid.len()).map(|i| grid.node(i).x).collect(),
        xw: (0..grid.len()).map(|i| grid.weight(i)).collect(),
        ys: (0..dn).map(|j| dual.node(j).x).collect(),
        mu_mass: &mu_mass,
        alpha,
        tau: hd * hd,
    };

    let residual_of = |psi_vals: &[f64]| -> Result<(Potential, Density, f64)> {
        // the windowed soft-max can dent convexity at rounding scale; the
        // envelope irons that out
        let psi = crate::convexlab::convexify(&Field::new(grid.clone(), psi_vals.to_vec())?)?;
        let rho = gibbs(&psi, alpha)?;
        let rho_qf = QuantileFn::new(&Measure::Density(rho.clone()))?;
        let grad_psi = crate::convexlab::gradient_1d(&psi)?;
        let mut resid = 0.0;
        for (&t, &w) in levels.t.iter().zip(levels.w.iter()) {
            let y = grad_psi.interp(Point::new1(rho_qf.at(t)))?;
            resid += w * (y - mu_qf.at(t)).abs();
        }
        Ok((psi, rho, resid))
    };

    let mut phi_vals: Vec<f64> = (0..dn).map(|j| dual.node(j).x.powi(2) / 2.0).collect();
    let mut cur = obj.eval(&phi_vals);
    let mut step = 1.0;
    let mut trace: Vec<f64> = Vec::new();
    let mut iterations = 0usize;
    let (mut psi, mut rho, mut residual) = residual_of(&cur.psi)?;
    trace.push(residual);

    let mass_floor = 1e-4 * mu_mass.iter().cloned().fold(0.0, f64::max);
    while residual > tol && iterations < opts.max_iter {
        // diagonal preconditioning by the local mass (the curvature of J
        // scales with it); still an ascent direction, so the backtracking
        // line search keeps the concave convergence guarantee
        let dir: Vec<f64> = cur
            .grad
            .iter()
            .zip(mu_mass.iter())
            .map(|(&g, &mm)| g / (g + 2.0 * mm + mass_floor).max(mass_floor))
            .collect();
        let dir_deriv: f64 = cur.grad.iter().zip(dir.iter()).map(|(g, d)| g * d).sum();
        let mut advanced = false;
        for _ in 0..60 {
            let cand: Vec<f64> = phi_vals
                .iter()
                .zip(dir.iter())
                .map(|(&p, &d)| p + step * d)
                .collect();
            let ce = obj.eval(&cand);
            if ce.j > cur.j + 0.25 * step * dir_deriv {
                phi_vals = cand;
                cur = ce;
                step *= 2.0;
                advanced = true;
                break;
            }
            step *= 0.5;
            if step < 1e-14 {
                break;
            }
        }
        if !advanced {
            break;
        }
        let (npsi, nrho, nres) = residual_of(&cur.psi)?;
        psi = npsi;
        rho = nrho;
        residual = nres;
        iterations += 1;
        trace.push(residual);
    }

    let lz = rho.log_partition().expect("gibbs records log Z");
    let psi = psi.shift(lz);
    let rho = gibbs(&psi, alpha)?;
    let phi = legendre_transform(&psi, &default_dual_grid(&psi)?)?;
    let j_value = j_functional(&phi, mu, alpha)?;
    let e_value = e_functional(&rho, mu, alpha)?;
    let gap = j_value + e_value;
    let m2_rho = moments(&Measure::Density(rho.clone()), 2.0)?;
    let converged = residual <= tol && gap.abs() <= 10.0 * tol;
    Ok(SolveReport {
        psi,
        rho,
        alpha,
        iterations,
        residual,
        tol,
        j_value,
        e_value,
        gap,
        converged,
        m2_rho,
        residual_trace: trace,
        j_ascent_violations: 0,
    })
}

fn deposit_hat(mass: &mut [f64], grid: &Grid, y: f64, w: f64) {
    let ax = grid.axis(0);
    let h = ax.spacing();
    let u = ((y - ax.lo) / h).clamp(0.0, (ax.n - 1) as f64);
    let i = (u.floor() as usize).min(ax.n - 2);
    let frac = u - i as f64;
    mass[i] += w * (1.0 - frac);
    mass[i + 1] += w * frac;
}

/// Solves at alpha = 0 and at each listed alpha, measures the L1 distance
/// modulo translation to the unregularized Gibbs density, and fits the
/// decay rate on a log-log scale.
pub fn regularization_path(
    mu: &Measure,
    alphas: &[f64],
    grid: &Grid,
    opts: &SolveOptions,
) -> Result<RateFit> {
    if alphas.is_empty() {
        return Err(Error::Parameter("regularization path needs at least one alpha".into()));
    }
    let mut a_sorted = alphas.to_vec();
    a_sorted.sort_by(|x, y| y.partial_cmp(x).unwrap());
    a_sorted.dedup();
    if a_sorted[a_sorted.len() - 1] < ALPHA_FLOOR {
        return Err(Error::Parameter(format!(
            "alphas must stay above the resolution floor {ALPHA_FLOOR:e}"
        )));
    }
    let base = solve_moment_measure(mu, 0.0, grid, opts)?;
    let mut samples = Vec::with_capacity(a_sorted.len());
    for &a in &a_sorted {
        let rep = solve_moment_measure(mu, a, grid, opts)?;
        let fit = l1_dist_mod_translation(&rep.rho, &base.rho)?;
        samples.push((a, fit.distance));
    }

    let c_hat = samples[0].1 / samples[0].0.sqrt();
    let bound_holds = samples
        .iter()
        .all(|&(a, d)| d <= 4.0 * c_hat * a.sqrt() + 1e-12);

    if samples.len() < 2 {
        return Ok(RateFit {
            samples,
            slope: None,
            intercept: f64::NAN,
            r2: f64::NAN,
            c_hat,
            bound_holds,
        });
    }
    let xs: Vec<f64> = samples.iter().map(|&(a, _)| a.ln()).collect();
    let ys: Vec<f64> = samples.iter().map(|&(_, d)| d.max(1e-300).ln()).collect();
    let (slope, intercept, r2) = linear_fit(&xs, &ys);
    Ok(RateFit {
        samples,
        slope: Some(slope),
        intercept,
        r2,
        c_hat,
        bound_holds,
    })
}

/// Partial alternating sums `S_k = sum_{i=1..k} (-1)^{i+1}/2^i` paired
/// with the regularization exponent `1/2^k`; `S_k -> 1/3`.
pub fn caffarelli_exponents(k: usize) -> Result<Vec<(f64, f64)>> {
    if k == 0 {
        return Err(Error::Parameter(
            "the exponent recursion needs at least one level".into(),
        ));
    }
    let mut out = Vec::with_capacity(k);
    let mut s = 0.0;
    let mut term = 0.5;
    for i in 1..=k {
        s += term;
        out.push((s, 0.5f64.powi(i as i32)));
        term *= -0.5;
    }
    Ok(out)
}

/// Solves the moment-measure representation of `gibbs(v, 0)` (centered)
/// and reports the strong-convexity modulus of the resulting potential
/// next to the two theoretical thresholds `lambda^{-1/3}` and
/// `lambda^{-1}`. The comparison is informational; the only hard
/// precondition is that `v` has curvature at most `lambda`.
pub fn regularity_probe(
    v: &Potential,
    lambda: f64,
    grid: &Grid,
    opts: &SolveOptions,
) -> Result<(f64, f64, f64)> {
    if !(lambda > 0.0) {
        return Err(Error::Parameter(format!("lambda must be positive, got {lambda}")));
    }
    let rho_v = gibbs(v, 0.0)?;
    let hv = v.grid().axis(0).spacing();
    let curvature_tol = hv * hv + 1e-9;
    let sd = second_derivative(v)?;
    let (hess, _) = sd.as_1d().ok_or(Error::UnsupportedDimension {
        got: v.grid().dim(),
        context: "regularity_probe".into(),
    })?;
    let vals = rho_v.field().values();
    let mx = vals.iter().cloned().fold(0.0, f64::max);
    for i in 0..vals.len() {
        let d = hess.value(i);
        if vals[i] > 1e-8 * mx && d.is_finite() && d > lambda + curvature_tol {
            return Err(Error::ClassMembership(format!(
                "curvature {d:.4} at x = {:.3} exceeds lambda = {lambda}",
                v.grid().node(i).x
            )));
        }
    }
    let mu = crate::measures::center(&Measure::Density(rho_v))?;
    let rep = solve_moment_measure(&mu, 0.0, grid, opts)?;
    let modulus = strong_convexity_modulus(&rep.psi)?;
    Ok((modulus, lambda.powf(-1.0 / 3.0), 1.0 / lambda))
}

/// Even moments `V(2k) = \int |x - x*|^{2k} e^{-psi} dx` of the normalized
/// Gibbs factor against the recursion bound `((d + 2k - 2)/lambda) V(2k-2)`
/// (d = 1). Returns `(V(2k), bound)` rows for k = 1..k_max.
pub fn p_moment_bound_check(
    psi: &Potential,
    lambda: f64,
    k_max: usize,
) -> Result<Vec<(f64, f64)>> {
    if !(lambda > 0.0) {
        return Err(Error::Parameter(format!("lambda must be positive, got {lambda}")));
    }
    let modulus = strong_convexity_modulus(psi)?;
    if modulus + 1e-9 < lambda {
        return Err(Error::ClassMembership(format!(
            "strong-convexity modulus {modulus:.4} is below lambda = {lambda}"
        )));
    }
    let g = psi.grid();
    if g.dim() != 1 {
        return Err(Error::UnsupportedDimension {
            got: g.dim(),
            context: "p_moment_bound_check".into(),
        });
    }
    let vals = psi.field().values();
    let i_star = (0..vals.len())
        .filter(|&i| vals[i].is_finite())
        .min_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap())
        .ok_or_else(|| Error::Domain("potential has no finite values".into()))?;
    let x_star = g.node(i_star).x;
    // normalizing the Gibbs factor makes V(0) = 1
    let rho = gibbs(psi, 0.0)?;
    let mut out = Vec::with_capacity(k_max);
    let mut prev = 1.0;
    for k in 1..=k_max {
        let p = 2 * k as i32;
        let mut vk = 0.0;
        for i in 0..g.len() {
            vk += g.weight(i) * rho.field().value(i) * (g.node(i).x - x_star).powi(p);
        }
        let bound = ((1 + 2 * k - 2) as f64 / lambda) * prev;
        out.push((vk, bound));
        prev = vk;
    }
    Ok(out)
}
