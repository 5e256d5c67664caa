//! Command-line front end: wires the library into reproducible experiments
//! with config files, CSV outputs, and a uniform exit-code contract
//! (0 ok, 1 input error, 2 non-convergence, 3 probe infrastructure failure).

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use momlab::convexlab::{gradient_1d, Potential};
use momlab::functionals::{bl_deficit, dist_to_bl_optimizers, e_functional, j_functional, pl_deficit};
use momlab::grid::write_atomic;
use momlab::measures::{l1_dist_mod_translation, read_measure, Density, Measure};
use momlab::momsolve::{
    caffarelli_exponents, p_moment_bound_check, regularity_probe, regularization_path,
    solve_moment_measure, SolveOptions, SolveReport,
};
use momlab::numerics::linear_fit;
use momlab::transport::wasserstein_1d;
use momlab::{Error, Field, Grid};

#[derive(Parser)]
#[command(name = "momlab", version, about = "Desk-scale numerical laboratory for moment measures")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

/// Options shared by every command that runs the solver or writes files.
/// Values may also come from a `key = value` config file; explicit flags
/// win over file values.
#[derive(Args, Clone, Default)]
struct CommonOpts {
    /// Uniform solver grid as lo,hi,n
    #[arg(long, allow_hyphen_values = true)]
    grid: Option<String>,
    /// Damping factor in (0, 1]
    #[arg(long)]
    damping: Option<f64>,
    /// Residual tolerance (default: half a grid cell)
    #[arg(long)]
    tol: Option<f64>,
    /// Iteration cap
    #[arg(long)]
    max_iter: Option<usize>,
    /// Output directory (default: $MOMLAB_OUT, else the working directory)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Config file with `key = value` lines and `#` comments
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the moment-measure representation of a target measure
    Solve {
        /// Measure file (`density` or `atoms` format)
        #[arg(long)]
        mu: Option<PathBuf>,
        /// Regularization strength
        #[arg(long)]
        alpha: Option<f64>,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Variance deficit of a test function under a convex potential
    BlDeficit {
        /// Potential field file
        #[arg(long)]
        phi: PathBuf,
        /// Test function field file on the same grid
        #[arg(long)]
        f: PathBuf,
    },
    /// Deficit-distance sweep along f = phi' + eps * g with an exponent fit
    BlStability {
        #[arg(long)]
        phi: PathBuf,
        /// Perturbation direction field file
        #[arg(long)]
        g: PathBuf,
        /// Geometric sweep as lo:hi:n
        #[arg(long)]
        eps: String,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Prekopa-Leindler deficit of a triple (f, g, h)
    PlDeficit {
        #[arg(long)]
        f: PathBuf,
        #[arg(long)]
        g: PathBuf,
        #[arg(long = "h", value_name = "H")]
        h_file: PathBuf,
        /// Interpolation weight in (0, 1)
        #[arg(long, default_value_t = 0.5)]
        s: f64,
    },
    /// Duality gap J + E of a candidate pair (phi, rho) against a target
    Duality {
        #[arg(long)]
        phi: PathBuf,
        /// Density field file
        #[arg(long)]
        rho: PathBuf,
        #[arg(long)]
        mu: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        alpha: f64,
    },
    /// Regularization path with a log-log decay-rate fit
    RegPath {
        #[arg(long)]
        mu: Option<PathBuf>,
        /// Comma-separated list of alphas
        #[arg(long)]
        alphas: Option<String>,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Strong-convexity probe of the representation of gibbs(V)
    ProbeRegularity {
        /// Potential field file for V
        #[arg(long)]
        v: PathBuf,
        /// Curvature bound on V
        #[arg(long)]
        lambda: f64,
        /// Also check the even-moment recursion of V up to this order
        #[arg(long, default_value_t = 0)]
        kmax: usize,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Partial sums of the exponent recursion and their alpha exponents
    CaffarelliExponents {
        #[arg(long, default_value_t = 20)]
        k: usize,
    },
    /// Solve two targets and compare their Gibbs densities against W1
    CompactStability {
        #[arg(long)]
        mu: PathBuf,
        #[arg(long)]
        nu: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
}

struct Failure {
    code: u8,
    message: String,
}

fn fail(code: u8, message: impl Into<String>) -> Failure {
    Failure {
        code,
        message: message.into(),
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        let code = match e {
            Error::NonConvergence { .. } => 2,
            _ => 1,
        };
        fail(code, e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    // clap exits with 2 on usage errors by default; keep 2 for
    // non-convergence and report bad usage as an input error instead
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = u8::from(e.use_stderr());
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cmd: Cmd) -> CmdResult {
    match cmd {
        Cmd::Solve { mu, alpha, common } => cmd_solve(mu, alpha, &common),
        Cmd::BlDeficit { phi, f } => cmd_bl_deficit(&phi, &f),
        Cmd::BlStability { phi, g, eps, common } => cmd_bl_stability(&phi, &g, &eps, &common),
        Cmd::PlDeficit { f, g, h_file, s } => cmd_pl_deficit(&f, &g, &h_file, s),
        Cmd::Duality { phi, rho, mu, alpha } => cmd_duality(&phi, &rho, &mu, alpha),
        Cmd::RegPath { mu, alphas, common } => cmd_reg_path(mu, alphas, &common),
        Cmd::ProbeRegularity { v, lambda, kmax, common } => {
            cmd_probe_regularity(&v, lambda, kmax, &common)
        }
        Cmd::CaffarelliExponents { k } => cmd_caffarelli(k),
        Cmd::CompactStability { mu, nu, common } => cmd_compact_stability(&mu, &nu, &common),
    }
}

// ---------------------------------------------------------------- config

const CONFIG_KEYS: &[&str] = &[
    "grid", "damping", "tol", "max_iter", "out", "mu", "nu", "alpha", "alphas", "lambda", "kmax",
    "eps", "seed",
];

fn load_config(path: Option<&Path>) -> Result<HashMap<String, String>, Failure> {
    let mut map = HashMap::new();
    let Some(path) = path else {
        return Ok(map);
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| fail(1, format!("cannot read config {}: {e}", path.display())))?;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(fail(
                1,
                format!("config line {}: expected `key = value`, got `{line}`", lineno + 1),
            ));
        };
        let key = key.trim().to_string();
        if !CONFIG_KEYS.contains(&key.as_str()) {
            return Err(fail(1, format!("config line {}: unknown key `{key}`", lineno + 1)));
        }
        map.insert(key, value.trim().to_string());
    }
    Ok(map)
}

fn cfg_parse<T: std::str::FromStr>(cfg: &HashMap<String, String>, key: &str) -> Result<Option<T>, Failure> {
    match cfg.get(key) {
        None => Ok(None),
        Some(v) => v
            .parse::<T>()
            .map(Some)
            .map_err(|_| fail(1, format!("config: bad value `{v}` for `{key}`"))),
    }
}

struct Resolved {
    grid: Grid,
    opts: SolveOptions,
    out: PathBuf,
}

fn resolve(common: &CommonOpts) -> Result<(Resolved, HashMap<String, String>), Failure> {
    let cfg = load_config(common.config.as_deref())?;
    let spec = common
        .grid
        .clone()
        .or_else(|| cfg.get("grid").cloned())
        .ok_or_else(|| fail(1, "missing --grid lo,hi,n"))?;
    let grid = parse_grid(&spec)?;
    let mut opts = SolveOptions::default();
    if let Some(d) = common.damping.or(cfg_parse(&cfg, "damping")?) {
        opts.damping = d;
    }
    if let Some(t) = common.tol.or(cfg_parse(&cfg, "tol")?) {
        opts.tol = Some(t);
    }
    if let Some(m) = common.max_iter.or(cfg_parse(&cfg, "max_iter")?) {
        opts.max_iter = m;
    }
    let out = common
        .out
        .clone()
        .or_else(|| cfg.get("out").map(PathBuf::from))
        .or_else(|| std::env::var_os("MOMLAB_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out)
        .map_err(|e| fail(1, format!("cannot create output dir {}: {e}", out.display())))?;
    Ok((Resolved { grid, opts, out }, cfg))
}

fn parse_grid(spec: &str) -> Result<Grid, Failure> {
    let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(fail(1, format!("grid spec `{spec}` is not lo,hi,n")));
    }
    let lo: f64 = parts[0].parse().map_err(|_| fail(1, format!("bad grid lo `{}`", parts[0])))?;
    let hi: f64 = parts[1].parse().map_err(|_| fail(1, format!("bad grid hi `{}`", parts[1])))?;
    let n: usize = parts[2].parse().map_err(|_| fail(1, format!("bad grid n `{}`", parts[2])))?;
    Ok(Grid::line(lo, hi, n)?)
}

fn read_potential(path: &Path) -> Result<Potential, Failure> {
    let (field, _) = Field::read_csv(path)
        .map_err(|e| fail(1, format!("{}: {e}", path.display())))?;
    Potential::new(field).map_err(|e| fail(1, format!("{}: {e}", path.display())))
}

fn read_field(path: &Path) -> Result<Field, Failure> {
    Field::read_csv(path)
        .map(|(f, _)| f)
        .map_err(|e| fail(1, format!("{}: {e}", path.display())))
}

fn read_target(path: &Path) -> Result<Measure, Failure> {
    read_measure(path).map_err(|e| fail(1, format!("{}: {e}", path.display())))
}

// ------------------------------------------------------------- commands

fn cmd_solve(mu: Option<PathBuf>, alpha: Option<f64>, common: &CommonOpts) -> CmdResult {
    let (r, cfg) = resolve(common)?;
    let mu_path = mu
        .or_else(|| cfg.get("mu").map(PathBuf::from))
        .ok_or_else(|| fail(1, "missing --mu <measure-file>"))?;
    let alpha = match alpha {
        Some(a) => a,
        None => cfg_parse(&cfg, "alpha")?.unwrap_or(0.0),
    };
    let target = read_target(&mu_path)?;
    let rep = solve_moment_measure(&target, alpha, &r.grid, &r.opts)?;
    write_report(&r.out, &rep)?;
    println!("{}", SolveReport::csv_header());
    println!("{}", rep.csv_row());
    if !rep.converged {
        return Err(fail(
            2,
            format!("no convergence after {} iterations (residual {:e}, tol {:e})",
                rep.iterations, rep.residual, rep.tol),
        ));
    }
    Ok(())
}

fn write_report(out: &Path, rep: &SolveReport) -> CmdResult {
    let csv = format!("{}\n{}\n", SolveReport::csv_header(), rep.csv_row());
    write_atomic(&out.join("solve_report.csv"), &csv)?;
    let note = format!("alpha = {}, residual tol = {:e}", rep.alpha, rep.tol);
    rep.psi.field().write_csv(&out.join("psi.csv"), &["potential psi", &note])?;
    rep.rho.field().write_csv(&out.join("rho.csv"), &["gibbs density rho", &note])?;
    Ok(())
}

fn cmd_bl_deficit(phi_path: &Path, f_path: &Path) -> CmdResult {
    let phi = read_potential(phi_path)?;
    let f = read_field(f_path)?;
    let rep = bl_deficit(&f, &phi)?;
    println!("{}", momlab::functionals::DeficitReport::csv_header());
    println!("{}", rep.csv_row());
    println!("deficit = {:.6}", rep.deficit);
    Ok(())
}

fn cmd_bl_stability(phi_path: &Path, g_path: &Path, eps_spec: &str, common: &CommonOpts) -> CmdResult {
    let cfg = load_config(common.config.as_deref())?;
    let out = common
        .out
        .clone()
        .or_else(|| cfg.get("out").map(PathBuf::from))
        .or_else(|| std::env::var_os("MOMLAB_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out)
        .map_err(|e| fail(1, format!("cannot create output dir {}: {e}", out.display())))?;
    let phi = read_potential(phi_path)?;
    let g = read_field(g_path)?;
    let grad = gradient_1d(&phi)?;
    let eps = parse_sweep(eps_spec)?;
    let mut csv = String::from("eps,deficit,distance\n");
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &e in &eps {
        let f = grad.zip(&g, |d, gv| d + e * gv)?;
        let rep = bl_deficit(&f, &phi)?;
        let (dist, _) = dist_to_bl_optimizers(&f, &phi)?;
        csv.push_str(&format!("{e:e},{:e},{dist:e}\n", rep.deficit));
        if rep.deficit > 0.0 && dist > 0.0 {
            xs.push(rep.deficit.ln());
            ys.push(dist.ln());
        }
    }
    write_atomic(&out.join("bl_stability.csv"), &csv)?;
    print!("{csv}");
    if xs.len() >= 2 {
        let (slope, _, r2) = linear_fit(&xs, &ys);
        println!("fit: distance ~ deficit^p with p = {slope:.4} (r2 = {r2:.6})");
    } else {
        println!("fit: not enough positive samples for an exponent");
    }
    Ok(())
}

fn parse_sweep(spec: &str) -> Result<Vec<f64>, Failure> {
    let parts: Vec<&str> = spec.split(':').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(fail(1, format!("sweep `{spec}` is not lo:hi:n")));
    }
    let lo: f64 = parts[0].parse().map_err(|_| fail(1, format!("bad sweep lo `{}`", parts[0])))?;
    let hi: f64 = parts[1].parse().map_err(|_| fail(1, format!("bad sweep hi `{}`", parts[1])))?;
    let n: usize = parts[2].parse().map_err(|_| fail(1, format!("bad sweep n `{}`", parts[2])))?;
    if !(lo > 0.0 && hi > lo && n >= 2) {
        return Err(fail(1, "sweep needs 0 < lo < hi and n >= 2"));
    }
    let ratio = (hi / lo).powf(1.0 / (n - 1) as f64);
    Ok((0..n).map(|k| lo * ratio.powi(k as i32)).collect())
}

fn cmd_pl_deficit(f_path: &Path, g_path: &Path, h_path: &Path, s: f64) -> CmdResult {
    let f = read_field(f_path)?;
    let g = read_field(g_path)?;
    let h = read_field(h_path)?;
    let eps = pl_deficit(&f, &g, &h, s)?;
    println!("s,epsilon");
    println!("{s},{eps:e}");
    println!("pl deficit = {eps:.6}");
    Ok(())
}

fn cmd_duality(phi_path: &Path, rho_path: &Path, mu_path: &Path, alpha: f64) -> CmdResult {
    let phi = read_potential(phi_path)?;
    let rho_field = read_field(rho_path)?;
    let rho = Density::with_tol(rho_field, 1e-3)
        .map_err(|e| fail(1, format!("{}: {e}", rho_path.display())))?;
    let mu = read_target(mu_path)?;
    let j = j_functional(&phi, &mu, alpha)?;
    let e = e_functional(&rho, &mu, alpha)?;
    println!("alpha,j,e,gap");
    println!("{alpha},{j},{e},{:e}", j + e);
    println!("duality gap = {:.6e}", j + e);
    Ok(())
}

fn cmd_reg_path(mu: Option<PathBuf>, alphas: Option<String>, common: &CommonOpts) -> CmdResult {
    let (r, cfg) = resolve(common)?;
    let mu_path = mu
        .or_else(|| cfg.get("mu").map(PathBuf::from))
        .ok_or_else(|| fail(1, "missing --mu <measure-file>"))?;
    let spec = alphas
        .or_else(|| cfg.get("alphas").cloned())
        .ok_or_else(|| fail(1, "missing --alphas a1,a2,..."))?;
    let mut list = Vec::new();
    for tok in spec.split(',') {
        list.push(
            tok.trim()
                .parse::<f64>()
                .map_err(|_| fail(1, format!("bad alpha `{}`", tok.trim())))?,
        );
    }
    let target = read_target(&mu_path)?;
    let fit = regularization_path(&target, &list, &r.grid, &r.opts)?;
    write_atomic(&r.out.join("rate_fit.csv"), &fit.csv())?;
    print!("{}", fit.csv());
    println!("{}", fit.summary_line());
    Ok(())
}

fn cmd_probe_regularity(v_path: &Path, lambda: f64, kmax: usize, common: &CommonOpts) -> CmdResult {
    let (r, _) = resolve(common)?;
    let v = read_potential(v_path)?;
    let (modulus, cube_root, inverse) = regularity_probe(&v, lambda, &r.grid, &r.opts)
        .map_err(|e| match e {
            Error::Parameter(_) | Error::ClassMembership(_) | Error::Domain(_) => {
                Failure::from(e)
            }
            Error::NonConvergence { .. } => Failure::from(e),
            other => fail(3, format!("probe infrastructure failure: {other}")),
        })?;
    println!("lambda,modulus,lambda_cuberoot_threshold,lambda_inverse_threshold,meets_cuberoot");
    println!("{lambda},{modulus},{cube_root},{inverse},{}", modulus >= cube_root);
    println!(
        "probe: modulus {modulus:.6} {} the Lambda^(-1/3) threshold {cube_root:.6}",
        if modulus >= cube_root { "meets" } else { "misses" }
    );
    if kmax > 0 {
        let rows = p_moment_bound_check(&v, lambda.min(modulus_of(&v)?), kmax)
            .map_err(|e| fail(3, format!("moment recursion check failed: {e}")))?;
        println!("k,moment,recursion_bound");
        for (k, &(m, b)) in rows.iter().enumerate() {
            println!("{},{m},{b}", k + 1);
        }
    }
    Ok(())
}

fn modulus_of(v: &Potential) -> Result<f64, Failure> {
    Ok(momlab::convexlab::strong_convexity_modulus(v)?)
}

fn cmd_caffarelli(k: usize) -> CmdResult {
    let rows = caffarelli_exponents(k)?;
    println!("k,partial_sum,alpha_exponent");
    for (i, &(s, e)) in rows.iter().enumerate() {
        println!("{},{s},{e}", i + 1);
    }
    Ok(())
}

fn cmd_compact_stability(mu_path: &Path, nu_path: &Path, common: &CommonOpts) -> CmdResult {
    let (r, _) = resolve(common)?;
    let mu = read_target(mu_path)?;
    let nu = read_target(nu_path)?;
    let a = solve_moment_measure(&mu, 0.0, &r.grid, &r.opts)?;
    let b = solve_moment_measure(&nu, 0.0, &r.grid, &r.opts)?;
    if !a.converged || !b.converged {
        return Err(fail(2, "one of the two solves did not converge"));
    }
    let dist = l1_dist_mod_translation(&a.rho, &b.rho)?.distance;
    let w1 = wasserstein_1d(&mu, &nu, 1.0)?;
    let ratio = dist / w1.sqrt();
    let csv = format!(
        "l1_dist_mod_translation,w1,ratio_dist_over_sqrt_w1\n{dist:e},{w1:e},{ratio:e}\n"
    );
    write_atomic(&r.out.join("compact_stability.csv"), &csv)?;
    print!("{csv}");
    println!("stability ratio = {ratio:.4}");
    Ok(())
}
