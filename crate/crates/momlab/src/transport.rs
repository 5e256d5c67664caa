//! One-dimensional optimal transport in quantile form: Wasserstein
//! distances, maximal correlation, constant-speed geodesics, the second
//! moment's geodesic convexity gap, and the L1-moment coupling bound.

use crate::error::{Error, Result};
use crate::grid::Point;
use crate::measures::{l1_distance, moments, AtomicMeasure, Density, Measure};
use crate::numerics::{bracket_convex_min, golden_section_min};

/// Probability levels in (0,1) with cell weights. The default is 4096
/// midpoint cells whose two end cells are refined geometrically, so that
/// quantile integrals of log-tailed measures converge at the stated
/// tolerances. All widths are dyadic and the weights sum to 1 exactly.
#[derive(Clone, Debug)]
pub struct LevelSet {
    pub t: Vec<f64>,
    pub w: Vec<f64>,
}

pub const DEFAULT_LEVELS: usize = 4096;
const TAIL_SPLITS: usize = 24;

impl LevelSet {
    /// `n` uniform midpoint cells with geometrically refined end cells.
    /// `n` must be a power of two so all arithmetic stays exact.
    pub fn graded(n: usize) -> LevelSet {
        assert!(n >= 4 && n.is_power_of_two());
        let base = 1.0 / n as f64;
        let mut t = Vec::new();
        let mut w = Vec::new();
        let push_cell = |lo: f64, width: f64, t: &mut Vec<f64>, w: &mut Vec<f64>| {
            t.push(lo + 0.5 * width);
            w.push(width);
        };
        // first cell split into halves shrinking towards 0
        let mut widths = vec![base / 2f64.powi(TAIL_SPLITS as i32)];
        for k in (1..=TAIL_SPLITS).rev() {
            widths.push(base / 2f64.powi(k as i32));
        }
        let mut lo = 0.0;
        for &width in &widths {
            push_cell(lo, width, &mut t, &mut w);
            lo += width;
        }
        // interior uniform cells
        for k in 1..n - 1 {
            push_cell(k as f64 * base, base, &mut t, &mut w);
        }
        // last cell split with widths shrinking towards 1
        lo = 1.0 - base;
        for &width in widths.iter().rev() {
            push_cell(lo, width, &mut t, &mut w);
            lo += width;
        }
        LevelSet { t, w }
    }

    pub fn default_set() -> LevelSet {
        LevelSet::graded(DEFAULT_LEVELS)
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

/// Quantile values of a measure on a level set; nondecreasing by
/// construction (leftmost CDF inverse).
#[derive(Clone, Debug)]
pub struct QuantileRep {
    pub levels: LevelSet,
    pub q: Vec<f64>,
}

impl QuantileRep {
    /// Second moment of the measure computed from the quantiles.
    pub fn second_moment(&self) -> f64 {
        self.levels
            .w
            .iter()
            .zip(self.q.iter())
            .map(|(&w, &q)| w * q * q)
            .sum()
    }
}

/// Leftmost quantile function of a 1D measure, evaluable at any level.
/// Atoms invert the cumulative weights exactly; densities invert the
/// cumulative trapezoid mass with linear interpolation inside cells.
#[derive(Clone, Debug)]
pub enum QuantileFn {
    Atoms { x: Vec<f64>, cum: Vec<f64> },
    Density { lo: f64, h: f64, cum: Vec<f64> },
}

impl QuantileFn {
    pub fn new(mu: &Measure) -> Result<QuantileFn> {
        if mu.dim() != 1 {
            return Err(Error::UnsupportedDimension {
                got: mu.dim(),
                context: "quantile function".into(),
            });
        }
        match mu {
            Measure::Atoms(a) => {
                let atoms = a.atoms();
                let x = atoms.iter().map(|&(p, _)| p.x).collect();
                let cum = atoms
                    .iter()
                    .scan(0.0, |acc, &(_, w)| {
                        *acc += w;
                        Some(*acc)
                    })
                    .collect();
                Ok(QuantileFn::Atoms { x, cum })
            }
            Measure::Density(d) => {
                let g = d.grid();
                let n = g.len();
                let h = g.axis(0).spacing();
                let v = d.field();
                // cumulative trapezoid mass at nodes, scaled to total 1
                let mut cum = Vec::with_capacity(n);
                let mut acc = 0.0;
                cum.push(0.0);
                for i in 1..n {
                    acc += 0.5 * (v.value(i - 1) + v.value(i)) * h;
                    cum.push(acc);
                }
                if !(acc > 0.0) {
                    return Err(Error::Normalization("density has zero mass".into()));
                }
                for c in cum.iter_mut() {
                    *c /= acc;
                }
                Ok(QuantileFn::Density {
                    lo: g.axis(0).lo,
                    h,
                    cum,
                })
            }
        }
    }

    /// Leftmost CDF inverse at level `t` (clamped to (0, 1]).
    pub fn at(&self, t: f64) -> f64 {
        match self {
            QuantileFn::Atoms { x, cum } => {
                let k = cum.partition_point(|&c| c < t);
                x[k.min(x.len() - 1)]
            }
            QuantileFn::Density { lo, h, cum } => {
                let n = cum.len();
                // leftmost node index with cum >= t
                let i = cum.partition_point(|&c| c < t).min(n - 1).max(1);
                let (c0, c1) = (cum[i - 1], cum[i]);
                let frac = if c1 > c0 { (t - c0) / (c1 - c0) } else { 0.0 };
                lo + (i - 1) as f64 * h + frac.clamp(0.0, 1.0) * h
            }
        }
    }
}

/// Leftmost CDF inversion on the level set.
pub fn quantiles(mu: &Measure, levels: &LevelSet) -> Result<QuantileRep> {
    let qf = QuantileFn::new(mu)?;
    Ok(QuantileRep {
        levels: levels.clone(),
        q: levels.t.iter().map(|&t| qf.at(t)).collect(),
    })
}

/// `W_p` via the quantile formula on the default level set.
pub fn wasserstein_1d(mu: &Measure, nu: &Measure, p: f64) -> Result<f64> {
    wasserstein_levels(mu, nu, p, &LevelSet::default_set())
}

pub fn wasserstein_levels(mu: &Measure, nu: &Measure, p: f64, levels: &LevelSet) -> Result<f64> {
    if p < 1.0 {
        return Err(Error::Parameter("Wasserstein order p must be >= 1".into()));
    }
    let a = quantiles(mu, levels)?;
    let b = quantiles(nu, levels)?;
    let s: f64 = levels
        .w
        .iter()
        .zip(a.q.iter().zip(b.q.iter()))
        .map(|(&w, (&x, &y))| w * (x - y).abs().powf(p))
        .sum();
    Ok(s.powf(1.0 / p))
}

/// Maximal correlation `T(rho, mu) = (M2(rho) + M2(mu))/2 - W2^2/2`,
/// with every term computed on one shared level set so the combination
/// equals the monotone correlation integral to rounding.
pub fn max_correlation(rho: &Measure, mu: &Measure) -> Result<f64> {
    let levels = LevelSet::default_set();
    let a = quantiles(rho, &levels)?;
    let b = quantiles(mu, &levels)?;
    let w2sq: f64 = levels
        .w
        .iter()
        .zip(a.q.iter().zip(b.q.iter()))
        .map(|(&w, (&x, &y))| w * (x - y) * (x - y))
        .sum();
    Ok(0.5 * (a.second_moment() + b.second_moment()) - 0.5 * w2sq)
}

/// Constant-speed geodesic by quantile interpolation; the result is atomic
/// on the level set, with coincident locations merged.
pub fn geodesic(mu0: &Measure, mu1: &Measure, t: f64) -> Result<Measure> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Parameter(format!("geodesic time {t} outside [0,1]")));
    }
    let levels = LevelSet::default_set();
    let a = quantiles(mu0, &levels)?;
    let b = quantiles(mu1, &levels)?;
    let mut atoms: Vec<(Point, f64)> = Vec::with_capacity(levels.len());
    for k in 0..levels.len() {
        let x = (1.0 - t) * a.q[k] + t * b.q[k];
        match atoms.last_mut() {
            Some(last) if last.0.x == x => last.1 += levels.w[k],
            _ => atoms.push((Point::new1(x), levels.w[k])),
        }
    }
    // interpolated quantiles are nondecreasing, but merge any remaining
    // coincidences from rounding
    atoms.dedup_by(|b, a| {
        if a.0.x == b.0.x {
            a.1 += b.1;
            true
        } else {
            false
        }
    });
    Ok(Measure::Atoms(AtomicMeasure::new(atoms)?))
}

/// Convexity gap of the second moment along the geodesic:
/// `(1-t)M2(mu0) + t M2(mu1) - t(1-t)W2^2/2 - M2(mu_t)`, all terms on one
/// shared level set (the exact value is `t(1-t)W2^2/2`, so the gap is
/// nonnegative to rounding).
pub fn m2_geodesic_gap(mu0: &Measure, mu1: &Measure, t: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Parameter(format!("geodesic time {t} outside [0,1]")));
    }
    let levels = LevelSet::default_set();
    let a = quantiles(mu0, &levels)?;
    let b = quantiles(mu1, &levels)?;
    let mut m2_0 = 0.0;
    let mut m2_1 = 0.0;
    let mut m2_t = 0.0;
    let mut w2sq = 0.0;
    for k in 0..levels.len() {
        let (w, x, y) = (levels.w[k], a.q[k], b.q[k]);
        let z = (1.0 - t) * x + t * y;
        m2_0 += w * x * x;
        m2_1 += w * y * y;
        m2_t += w * z * z;
        w2sq += w * (x - y) * (x - y);
    }
    Ok((1.0 - t) * m2_0 + t * m2_1 - 0.5 * t * (1.0 - t) * w2sq - m2_t)
}

/// The L1-moment coupling bound on `W_q`:
/// `((2R)^q eps/2 + 2^{q-1} R^{q-p} (M_p(mu) + M_p(nu)))^{1/q}`, minimized
/// over `R > 0` by golden-section in `log R`. Returns 0 when the densities
/// coincide in L1.
pub fn l1_moment_coupling_bound(mu: &Density, nu: &Density, p: f64, q: f64) -> Result<f64> {
    if !(p > 1.0) {
        return Err(Error::Parameter("coupling bound needs p > 1".into()));
    }
    if !(1.0..p).contains(&q) {
        return Err(Error::Parameter(format!(
            "coupling bound needs q in [1, p); got q={q}, p={p}"
        )));
    }
    let eps = l1_distance(mu, nu)?;
    if eps == 0.0 {
        return Ok(0.0);
    }
    let alpha = 0.5 * eps;
    let mp = moments(&Measure::Density(mu.clone()), p)?
        + moments(&Measure::Density(nu.clone()), p)?;
    let obj = |r: f64| -> f64 {
        let big_r = r.exp();
        (2.0 * big_r).powf(q) * alpha + 2f64.powf(q - 1.0) * big_r.powf(q - p) * mp
    };
    let (lo, hi) = bracket_convex_min(obj, 1.0);
    let (_, fmin) = golden_section_min(obj, lo, hi, 1e-10);
    Ok(fmin.powf(1.0 / q))
}
