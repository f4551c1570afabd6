use sde_descent::descent::DescentOptions;
use sde_descent::problem::ControlField;
use sde_descent::theta::{run_benchmark, theta_grid, ThetaConfig};

fn control_norm_sq(control: &ControlField, dx: f64, dt: f64, n_t: usize, n_x: usize) -> f64 {
    (0..n_t - 1).map(|j| control.slab(j, n_x).iter().map(|v| v * v).sum::<f64>() * dx).sum::<f64>() * dt
}

#[test]
fn converged_control_norm_is_non_increasing_in_alpha() {
    let mut norms = Vec::new();
    for alpha in [0.5, 1.0, 2.0] {
        let cfg = ThetaConfig { alpha, ..ThetaConfig::default() };
        let grid = theta_grid(&cfg, 64, 8).unwrap();
        let report = run_benchmark(&cfg, &grid, &DescentOptions::default(), &[]).unwrap();
        let totals: Vec<f64> = report.run.history.iter().map(|r| r.cost.total).collect();
        assert!(totals.windows(2).all(|w| w[1] <= w[0] + 1e-9), "{totals:?}");
        assert!(report.run.density.max_mass_drift(&grid) < 1e-6);
        norms.push(control_norm_sq(&report.run.control, grid.dx(), grid.dt(), grid.n_t(), grid.n_x()));
    }
    assert!(norms[0] >= norms[1] && norms[1] >= norms[2], "{norms:?}");
    assert!(norms[2] > 0.0);
}

#[test]
fn benchmark_snapshots_sit_on_requested_times() {
    let cfg = ThetaConfig::default();
    let grid = theta_grid(&cfg, 32, 4).unwrap();
    let opts = DescentOptions { epsilon: f64::INFINITY, ..DescentOptions::default() };
    let report = run_benchmark(&cfg, &grid, &opts, &[0.0, 0.5, 6.0]).unwrap();
    assert_eq!(report.run.history.len(), 2);
    let times: Vec<f64> = report.snapshots.iter().map(|s| s.0).collect();
    assert_eq!(times[0], 0.0);
    assert!((times[1] - 0.5).abs() <= grid.dt() / 2.0);
    assert_eq!(times[2], 6.0);
    assert_eq!(report.snapshots[0].1, report.run.density.slab(0));
}
