//! End-to-end tests of the binary: fixture files in a temp dir, one process
//! per invocation, exit codes checked against the documented contract.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use momlab::convexlab::Potential;
use momlab::measures::{gibbs, write_measure, AtomicMeasure, Measure};
use momlab::{Field, Grid, Point};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_momlab"))
}

fn run(args: &[&str], out_dir: &Path) -> Output {
    bin()
        .args(args)
        .env("MOMLAB_OUT", out_dir)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

struct Fixtures {
    dir: tempfile::TempDir,
}

impl Fixtures {
    fn new() -> Fixtures {
        Fixtures {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn write_field(&self, name: &str, lo: f64, hi: f64, n: usize, f: impl Fn(f64) -> f64) -> PathBuf {
        let field = Field::from_fn(Grid::line(lo, hi, n).unwrap(), |p| f(p.x)).unwrap();
        let path = self.path(name);
        field.write_csv(&path, &[]).unwrap();
        path
    }

    fn write_gaussian_measure(&self, name: &str, lo: f64, hi: f64, n: usize) -> PathBuf {
        let phi = Potential::new(
            Field::from_fn(Grid::line(lo, hi, n).unwrap(), |p| p.x * p.x / 2.0).unwrap(),
        )
        .unwrap();
        let mu = Measure::Density(gibbs(&phi, 0.0).unwrap());
        let path = self.path(name);
        write_measure(&path, &mu).unwrap();
        path
    }

    fn write_atoms(&self, name: &str, atoms: &[(f64, f64)]) -> PathBuf {
        let mu = Measure::Atoms(
            AtomicMeasure::new(atoms.iter().map(|&(x, w)| (Point::new1(x), w)).collect()).unwrap(),
        );
        let path = self.path(name);
        write_measure(&path, &mu).unwrap();
        path
    }
}

#[test]
fn solve_gaussian_fixture_converges_to_machine_residual() {
    let fx = Fixtures::new();
    let mu = fx.write_gaussian_measure("gauss.csv", -8.0, 8.0, 1601);
    let o = run(
        &["solve", "--mu", mu.to_str().unwrap(), "--alpha", "0", "--grid", "-8,8,1601"],
        fx.dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = std::fs::read_to_string(fx.path("solve_report.csv")).unwrap();
    let row = report.lines().nth(1).unwrap();
    let residual: f64 = row.split(',').nth(2).unwrap().parse().unwrap();
    assert!(residual <= 1e-6, "residual {residual}");
    assert!(fx.path("psi.csv").exists() && fx.path("rho.csv").exists());
}

#[test]
fn solve_two_atom_fixture_exits_cleanly() {
    let fx = Fixtures::new();
    let mu = fx.write_atoms("two.csv", &[(-1.0, 0.5), (1.0, 0.5)]);
    let o = run(
        &["solve", "--mu", mu.to_str().unwrap(), "--alpha", "0", "--grid", "-16,16,1601"],
        fx.dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("converged"));
}

#[test]
fn solve_degenerate_single_atom_is_an_input_error() {
    let fx = Fixtures::new();
    let mu = fx.write_atoms("one.csv", &[(0.0, 1.0)]);
    let o = run(
        &["solve", "--mu", mu.to_str().unwrap(), "--alpha", "0", "--grid", "-8,8,801"],
        fx.dir.path(),
    );
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("degenerate"), "{}", stderr(&o));
}

#[test]
fn solve_reports_non_convergence_with_exit_two() {
    let fx = Fixtures::new();
    let mu = fx.write_atoms("two.csv", &[(-1.0, 0.5), (1.0, 0.5)]);
    let o = run(
        &[
            "solve", "--mu", mu.to_str().unwrap(), "--alpha", "0", "--grid", "-16,16,1601",
            "--tol", "1e-12", "--max-iter", "3",
        ],
        fx.dir.path(),
    );
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn bl_deficit_of_x_squared_under_the_gaussian_is_two() {
    let fx = Fixtures::new();
    let phi = fx.write_field("phi.csv", -8.0, 8.0, 3201, |x| x * x / 2.0);
    let f = fx.write_field("f.csv", -8.0, 8.0, 3201, |x| x * x);
    let o = run(
        &["bl-deficit", "--phi", phi.to_str().unwrap(), "--f", f.to_str().unwrap()],
        fx.dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let line = stdout(&o)
        .lines()
        .find(|l| l.starts_with("deficit = "))
        .unwrap()
        .to_string();
    let v: f64 = line.trim_start_matches("deficit = ").parse().unwrap();
    assert!((v - 2.0).abs() <= 1e-2, "{v}");
}

#[test]
fn bl_deficit_without_phi_is_a_usage_error() {
    let fx = Fixtures::new();
    let f = fx.write_field("f.csv", -8.0, 8.0, 401, |x| x * x);
    let o = run(&["bl-deficit", "--f", f.to_str().unwrap()], fx.dir.path());
    assert_eq!(code(&o), 1);
}

#[test]
fn bl_stability_sweep_recovers_the_half_exponent() {
    let fx = Fixtures::new();
    let phi = fx.write_field("phi.csv", -8.0, 8.0, 3201, |x| x * x / 2.0);
    let g = fx.write_field("g.csv", -8.0, 8.0, 3201, f64::sin);
    let o = run(
        &[
            "bl-stability", "--phi", phi.to_str().unwrap(), "--g", g.to_str().unwrap(),
            "--eps", "1e-3:1e-1:9",
        ],
        fx.dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    let fit = out.lines().find(|l| l.starts_with("fit:")).unwrap();
    let p: f64 = fit
        .split("p = ")
        .nth(1)
        .unwrap()
        .split_whitespace()
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!((p - 0.5).abs() <= 0.05, "{fit}");
    assert!(fx.path("bl_stability.csv").exists());
}

#[test]
fn pl_deficit_of_the_disjoint_interval_triple_is_two() {
    let fx = Fixtures::new();
    let ind = |lo: f64, hi: f64| move |x: f64| if x >= lo && x <= hi { 1.0 } else { 0.0 };
    let f = fx.write_field("f.csv", -1.0, 4.0, 5001, ind(0.0, 1.0));
    let g = fx.write_field("g.csv", -1.0, 4.0, 5001, ind(2.0, 3.0));
    let h = fx.write_field("h.csv", -1.0, 4.0, 5001, ind(0.0, 3.0));
    let o = run(
        &[
            "pl-deficit", "--f", f.to_str().unwrap(), "--g", g.to_str().unwrap(),
            "--h", h.to_str().unwrap(), "--s", "0.5",
        ],
        fx.dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let line = stdout(&o)
        .lines()
        .find(|l| l.starts_with("pl deficit = "))
        .unwrap()
        .to_string();
    let v: f64 = line.trim_start_matches("pl deficit = ").parse().unwrap();
    assert!((v - 2.0).abs() <= 1e-2, "{v}");
}

#[test]
fn duality_gap_of_the_solved_gaussian_pair_is_small() {
    let fx = Fixtures::new();
    let phi = fx.write_field("phi.csv", -8.0, 8.0, 3201, |x| x * x / 2.0);
    let mu = fx.write_gaussian_measure("mu.csv", -8.0, 8.0, 3201);
    let rho_field = gibbs(
        &Potential::new(
            Field::from_fn(Grid::line(-8.0, 8.0, 3201).unwrap(), |p| p.x * p.x / 2.0).unwrap(),
        )
        .unwrap(),
        0.0,
    )
    .unwrap();
    let rho = fx.path("rho.csv");
    rho_field.field().write_csv(&rho, &[]).unwrap();
    let o = run(
        &[
            "duality", "--phi", phi.to_str().unwrap(), "--rho", rho.to_str().unwrap(),
            "--mu", mu.to_str().unwrap(),
        ],
        fx.dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let line = stdout(&o)
        .lines()
        .find(|l| l.starts_with("duality gap = "))
        .unwrap()
        .to_string();
    let v: f64 = line.trim_start_matches("duality gap = ").parse().unwrap();
    assert!(v.abs() <= 2e-3, "{v}");
}

#[test]
fn reg_path_reports_the_decay_slope() {
    let fx = Fixtures::new();
    let mu = fx.write_gaussian_measure("mu.csv", -8.0, 8.0, 1601);
    let o = run(
        &[
            "reg-path", "--mu", mu.to_str().unwrap(), "--alphas", "1e-1,1e-2,1e-3",
            "--grid", "-8,8,1601",
        ],
        fx.dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    let fit = out.lines().find(|l| l.starts_with("fit:")).unwrap();
    let slope: f64 = fit
        .split("slope = ")
        .nth(1)
        .unwrap()
        .trim_end_matches(',')
        .split(',')
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!(slope >= 0.5, "{fit}");
    assert!(fx.path("rate_fit.csv").exists());
}

#[test]
fn caffarelli_exponents_start_at_one_half_and_reject_zero() {
    let fx = Fixtures::new();
    let o = run(&["caffarelli-exponents", "--k", "2"], fx.dir.path());
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert!(out.contains("1,0.5,0.5"), "{out}");
    assert!(out.contains("2,0.25,0.25"), "{out}");
    let bad = run(&["caffarelli-exponents", "--k", "0"], fx.dir.path());
    assert_eq!(code(&bad), 1);
}

#[test]
fn probe_regularity_logs_the_thresholds() {
    let fx = Fixtures::new();
    let v = fx.write_field("v.csv", -7.0, 7.0, 1401, |x| x * x / 2.0);
    let o = run(
        &[
            "probe-regularity", "--v", v.to_str().unwrap(), "--lambda", "1",
            "--grid", "-8,8,1601", "--kmax", "2",
        ],
        fx.dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("probe: modulus"), "{out}");
    assert!(out.contains("k,moment,recursion_bound"), "{out}");
}

#[test]
fn compact_stability_prints_the_ratio() {
    let fx = Fixtures::new();
    let mu = fx.write_atoms("mu.csv", &[(-0.8, 0.5), (0.8, 0.5)]);
    let nu = fx.write_atoms("nu.csv", &[(-0.5, 0.5), (0.5, 0.5)]);
    let o = run(
        &[
            "compact-stability", "--mu", mu.to_str().unwrap(), "--nu", nu.to_str().unwrap(),
            "--grid", "-40,40,2001",
        ],
        fx.dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("stability ratio = "), "{}", stdout(&o));
    assert!(fx.path("compact_stability.csv").exists());
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let fx = Fixtures::new();
    let mu = fx.write_gaussian_measure("mu.csv", -8.0, 8.0, 801);
    let cfg = fx.path("exp.conf");
    std::fs::write(
        &cfg,
        format!(
            "# experiment setup\ngrid = -8,8,801\nalpha = 0\nmu = {}\nmax_iter = 400\n",
            mu.display()
        ),
    )
    .unwrap();
    let o = run(&["solve", "--config", cfg.to_str().unwrap()], fx.dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    // a flag overrides the config: alpha 1 shows up in the report
    let o2 = run(
        &["solve", "--config", cfg.to_str().unwrap(), "--alpha", "1"],
        fx.dir.path(),
    );
    assert_eq!(code(&o2), 0, "{}", stderr(&o2));
    let report = std::fs::read_to_string(fx.path("solve_report.csv")).unwrap();
    assert!(report.lines().nth(1).unwrap().starts_with("1,"), "{report}");
}

#[test]
fn unknown_config_keys_are_rejected() {
    let fx = Fixtures::new();
    let cfg = fx.path("bad.conf");
    std::fs::write(&cfg, "grid = -8,8,801\ncolour = blue\n").unwrap();
    let o = run(&["solve", "--config", cfg.to_str().unwrap()], fx.dir.path());
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("unknown key"), "{}", stderr(&o));
}

#[test]
fn malformed_measure_files_report_the_line() {
    let fx = Fixtures::new();
    let bad = fx.path("bad.csv");
    std::fs::write(&bad, "atoms\nx,weight\n-1,oops\n").unwrap();
    let o = run(
        &["solve", "--mu", bad.to_str().unwrap(), "--alpha", "0", "--grid", "-8,8,801"],
        fx.dir.path(),
    );
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("line"), "{}", stderr(&o));
}
