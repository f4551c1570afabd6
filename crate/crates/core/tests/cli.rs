use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sde_descent::cli::output::read_density_bin;
use sde_descent::problem::TerminalCost;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sde-descent"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn run(sub: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .arg(sub)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .arg("--quiet")
        .args(extra)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn read_rows(path: &Path) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines().map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn column(rows: &[Vec<String>], name: &str) -> Vec<f64> {
    let k = rows[0].iter().position(|h| h == name).unwrap();
    rows[1..].iter().map(|r| r[k].parse().unwrap()).collect()
}

const SMALL_THETA: &str = r#"
[problem]
horizon = 1.0

[grid]
n_x = 32
n_eta = 4

[simulation]
n_paths = 2000
dt_sim = 0.01
needle_points = 5
probe_paths = 2000
"#;

#[test]
fn default_theta_solve_writes_a_decreasing_history() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("solve", &configs().join("theta.toml"), dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_rows(&dir.path().join("cost_history.csv"));
    assert_eq!(rows[0].join(","), "k,total,terminal,running,penalty,residual,wall_time");
    let totals = column(&rows, "total");
    assert!((3..=5).contains(&totals.len()), "{totals:?}");
    assert!(totals.windows(2).all(|w| w[1] < w[0]), "{totals:?}");
    assert_eq!(rows[1][5], "");

    for label in ["0", "0.5", "6"] {
        let csv = read_rows(&dir.path().join(format!("density_t{label}.csv")));
        assert_eq!(csv[0].join(","), "x,eta,eta_weight,density");
        assert_eq!(csv.len(), 1 + 128 * 16);
        let density = column(&csv, "density");
        assert!(density.iter().all(|d| *d >= 0.0));
        let (n_x, n_eta, values) = read_density_bin(&dir.path().join(format!("density_t{label}.bin"))).unwrap();
        assert_eq!((n_x, n_eta), (128, 16));
        for (a, b) in values.iter().zip(&density) {
            assert_eq!(a, b);
        }
    }
    let control = read_rows(&dir.path().join("control.csv"));
    assert_eq!(control[0].join(","), "t,x,u");
}

#[test]
fn infinite_epsilon_gives_two_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", &format!("{SMALL_THETA}\n[algorithm]\nepsilon = inf\n"));
    let out = run("solve", &cfg, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(read_rows(&dir.path().join("cost_history.csv")).len(), 3);
}

#[test]
fn negative_beta_is_a_config_error_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", "[problem]\nhorizon = 1.0\nbeta = -0.5\n");
    let out = run("solve", &cfg, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("problem.beta"), "{err}");
    assert!(err.contains("bad.toml:3"), "{err}");
}

#[test]
fn unknown_keys_and_missing_files_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "typo.toml", "[grid]\nnx = 64\n");
    let out = run("solve", &cfg, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nx"));

    let out = run("verify", &dir.path().join("absent.toml"), dir.path(), &[]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unstable_time_grid_is_rejected_before_solving() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL_THETA.replace("n_eta = 4", "n_eta = 4\nn_t = 10");
    let cfg = write_config(dir.path(), "dt.toml", &text);
    let out = run("solve", &cfg, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("grid.n_t") && err.contains("dt.toml:8"), "{err}");
    assert!(!dir.path().join("cost_history.csv").exists());
}

#[test]
fn heat_verify_probes_agree_within_three_standard_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("verify", &configs().join("heat.toml"), dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_rows(&dir.path().join("verify_report.csv"));
    assert_eq!(rows[0].join(","), "check,measured_error,tolerance,pass");
    let allowance = 2.0 * 0.01 * TerminalCost::new(|x: f64| x.cos()).lipschitz_estimate();
    let probes: Vec<&Vec<String>> = rows.iter().filter(|r| r[0].starts_with("fk_probe")).collect();
    assert_eq!(probes.len(), 16);
    for r in probes {
        let err: f64 = r[1].parse().unwrap();
        let three_se = r[2].parse::<f64>().unwrap() - allowance;
        assert!(err < three_se, "{r:?}");
    }
}

#[test]
fn coarse_grid_has_larger_increment_error() {
    let dir = tempfile::tempdir().unwrap();
    let error_at = |n_x: usize| {
        let text = format!(
            "[problem]\nhorizon = 1.0\n[grid]\nn_x = {n_x}\nn_eta = 4\n[simulation]\nn_paths = 200\nprobe_paths = 200\nneedle_points = 2\n"
        );
        let cfg = write_config(dir.path(), &format!("g{n_x}.toml"), &text);
        let out_dir = dir.path().join(format!("o{n_x}"));
        let out = run("verify", &cfg, &out_dir, &[]);
        assert!(matches!(out.status.code(), Some(0 | 2)));
        let rows = read_rows(&out_dir.join("verify_report.csv"));
        let row = rows.iter().find(|r| r[0] == "increment_identity").unwrap();
        row[1].parse::<f64>().unwrap()
    };
    let (coarse, fine) = (error_at(16), error_at(128));
    assert!(coarse > fine, "coarse {coarse:e}, fine {fine:e}");
}

#[test]
fn simulate_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.toml", SMALL_THETA);
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    for (out, seed) in [(&a, "5"), (&b, "5"), (&c, "6")] {
        let res = run("simulate", &cfg, out, &["--seed", seed]);
        assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    }
    for file in ["mc_report.csv", "needle_curve.csv"] {
        let read = |d: &Path| std::fs::read(d.join(file)).unwrap();
        assert_eq!(read(&a), read(&b), "{file}");
        assert_ne!(read(&a), read(&c), "{file}");
    }
    let resolved = std::fs::read_to_string(a.join("run_config.toml")).unwrap();
    assert!(resolved.contains("seed = 5"), "{resolved}");
}

#[test]
fn needle_endpoints_bracket_the_two_costs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.toml", SMALL_THETA);
    assert_eq!(run("simulate", &cfg, dir.path(), &[]).status.code(), Some(0));
    let mc = read_rows(&dir.path().join("mc_report.csv"));
    let pde_terminal = |control: &str| -> f64 {
        let r = mc.iter().find(|r| r[0] == "terminal" && r[1] == control).unwrap();
        r[5].parse().unwrap()
    };
    let curve = read_rows(&dir.path().join("needle_curve.csv"));
    assert_eq!(curve[0].join(","), "s,mean,std_error");
    let (mean, se) = (column(&curve, "mean"), column(&curve, "std_error"));
    let allowance = 2.0 * 0.01 * 1.0;
    let last = mean.len() - 1;
    assert!((mean[0] - pde_terminal("reference")).abs() < 3.0 * se[0] + allowance);
    assert!((mean[last] - pde_terminal("target")).abs() < 3.0 * se[last] + allowance);
}

#[test]
fn doubling_paths_shrinks_standard_error() {
    let dir = tempfile::tempdir().unwrap();
    let se_for = |n: usize| {
        let text = SMALL_THETA.replace("n_paths = 2000", &format!("n_paths = {n}"));
        let cfg = write_config(dir.path(), &format!("n{n}.toml"), &text);
        let out = dir.path().join(format!("n{n}"));
        assert_eq!(run("simulate", &cfg, &out, &[]).status.code(), Some(0));
        let rows = read_rows(&out.join("mc_report.csv"));
        column(&rows, "std_error")
    };
    let (small, large) = (se_for(4000), se_for(8000));
    for (s, l) in small.iter().zip(&large) {
        let ratio = l / s;
        assert!((ratio - 0.5f64.sqrt()).abs() < 0.2 * 0.5f64.sqrt(), "ratio {ratio}");
    }
}

#[test]
fn resolved_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", SMALL_THETA);
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    assert_eq!(run("solve", &cfg, &first, &[]).status.code(), Some(0));
    assert_eq!(run("solve", &first.join("run_config.toml"), &second, &[]).status.code(), Some(0));
    let totals = |d: &Path| column(&read_rows(&d.join("cost_history.csv")), "total");
    assert_eq!(totals(&first), totals(&second));
    assert_eq!(
        std::fs::read(first.join("control.csv")).unwrap(),
        std::fs::read(second.join("control.csv")).unwrap()
    );
}

#[test]
fn open_loop_config_writes_a_time_only_control() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("solve", &configs().join("openloop.toml"), dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let control = read_rows(&dir.path().join("control.csv"));
    assert_eq!(control[0].join(","), "t,u");
    assert!(column(&control, "u").iter().all(|u| (-2.0..=2.0).contains(u)));
    let totals = column(&read_rows(&dir.path().join("cost_history.csv")), "total");
    assert!(totals.windows(2).all(|w| w[1] <= w[0] + 1e-9));
}
