//! Small numerical utilities shared across modules: golden-section search,
//! Gauss-Legendre nodes, isotonic projection, least-squares line fits.

const INVPHI: f64 = 0.618_033_988_749_894_9; // 1/phi
const INVPHI2: f64 = 0.381_966_011_250_105_1; // 1/phi^2

/// Minimizes a unimodal function on `[a, b]` by golden-section search.
/// Returns `(argmin, min)`.
pub fn golden_section_min<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    if a > b {
        std::mem::swap(&mut a, &mut b);
    }
    let mut h = b - a;
    if h <= tol {
        let m = 0.5 * (a + b);
        return (m, f(m));
    }
    let mut c = a + INVPHI2 * h;
    let mut d = a + INVPHI * h;
    let mut fc = f(c);
    let mut fd = f(d);
    // enough steps to shrink the bracket below tol
    let steps = ((tol / h).ln() / INVPHI.ln()).ceil().max(1.0) as usize;
    for _ in 0..steps {
        if fc < fd {
            d = c;
            fd = fc;
            h = INVPHI * h;
            c = a + INVPHI2 * h;
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            h = INVPHI * h;
            d = a + INVPHI * h;
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Finds a bracket `[lo, hi]` containing a minimizer of a convex function by
/// doubling outwards from `[-r0, r0]` until the interior beats both ends.
pub fn bracket_convex_min<F: FnMut(f64) -> f64>(mut f: F, r0: f64) -> (f64, f64) {
    let mut r = r0.abs().max(1e-12);
    for _ in 0..80 {
        let fm = f(-r);
        let fc = f(0.0);
        let fp = f(r);
        if fc <= fm && fc <= fp {
            return (-r, r);
        }
        r *= 2.0;
    }
    (-r, r)
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre_01(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1);
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        // initial guess: Chebyshev-like
        let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        // Newton iteration on P_n(x)
        for _ in 0..100 {
            let (p, dp) = legendre_pair(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_pair(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (1.0 - x), 0.5 * w)); // map [-1,1] -> [0,1]
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    out
}

fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Pool-adjacent-violators projection onto nondecreasing sequences
/// (uniform weights). This is the derivative-side view of taking the
/// convex envelope of the antiderivative.
pub fn pav_nondecreasing(v: &mut [f64]) {
    let n = v.len();
    if n < 2 {
        return;
    }
    // blocks of (sum, count)
    let mut sums: Vec<f64> = Vec::with_capacity(n);
    let mut counts: Vec<usize> = Vec::with_capacity(n);
    for &x in v.iter() {
        sums.push(x);
        counts.push(1);
        while sums.len() > 1 {
            let m = sums.len();
            let mean_last = sums[m - 1] / counts[m - 1] as f64;
            let mean_prev = sums[m - 2] / counts[m - 2] as f64;
            if mean_prev <= mean_last {
                break;
            }
            let s = sums.pop().unwrap();
            let c = counts.pop().unwrap();
            sums[m - 2] += s;
            counts[m - 2] += c;
        }
    }
    let mut i = 0;
    for (s, c) in sums.iter().zip(counts.iter()) {
        let mean = s / *c as f64;
        for _ in 0..*c {
            v[i] = mean;
            i += 1;
        }
    }
}

/// Least-squares line fit `y = slope * x + intercept`; returns
/// `(slope, intercept, r_squared)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys.iter()) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (slope, intercept, r2)
}

/// Weighted median of `(value, weight)` pairs: minimizer of
/// `b -> sum w_i |v_i - b|`. Ties broken towards the smaller value.
pub fn weighted_median(pairs: &mut Vec<(f64, f64)>) -> f64 {
    assert!(!pairs.is_empty());
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    let mut acc = 0.0;
    for &(v, w) in pairs.iter() {
        acc += w;
        if acc >= 0.5 * total {
            return v;
        }
    }
    pairs.last().unwrap().0
}

/// Vertex of the parabola through `(-1, fm), (0, f0), (1, fp)` restricted to
/// `[-1, 1]`; returns `(offset, value)`. Falls back to the midpoint sample
/// when the three points are collinear or concave-up data is degenerate.
pub fn parabolic_refine(fm: f64, f0: f64, fp: f64) -> (f64, f64) {
    let denom = fm - 2.0 * f0 + fp;
    if !(denom < 0.0) || !fm.is_finite() || !fp.is_finite() {
        // not strictly concave around the max: keep the discrete sample
        return (0.0, f0);
    }
    let t = 0.5 * (fm - fp) / denom;
    let t = t.clamp(-1.0, 1.0);
    let val = f0 - 0.25 * (fm - fp) * t;
    (t, val.max(f0))
}
