//! Markovian descent on the Theta-neuron benchmark.
//!
//! Usage: `theta_benchmark [n_x] [n_eta] [alpha]`, defaults 128, 16, 1.

use sde_descent::descent::DescentOptions;
use sde_descent::theta::{default_snapshot_times, run_benchmark, theta_grid, ThetaConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let n_x = args.first().and_then(|a| a.parse().ok()).unwrap_or(128);
    let n_eta = args.get(1).and_then(|a| a.parse().ok()).unwrap_or(16);
    let alpha = args.get(2).and_then(|a| a.parse().ok()).unwrap_or(1.0);
    let cfg = ThetaConfig { alpha, ..ThetaConfig::default() };
    let grid = theta_grid(&cfg, n_x, n_eta)?;
    println!("n_x = {n_x}, n_eta = {n_eta}, n_t = {}, alpha = {alpha}", grid.n_t());

    let report = run_benchmark(&cfg, &grid, &DescentOptions::default(), &default_snapshot_times(&cfg))?;
    for r in &report.run.history {
        println!(
            "k = {}  I = {:.5}  terminal {:.5}  penalty {:.5}  residual {}  {:.1}s",
            r.index,
            r.cost.total,
            r.cost.terminal_part,
            r.cost.penalty_part,
            r.residual.map_or("-".to_string(), |v| format!("{v:.3e}")),
            r.wall_time
        );
    }
    for (t, _) in &report.snapshots {
        let j = grid.nearest_time_index(*t);
        println!(
            "t = {t:.3}: circular mean phase {:.4}, mass {:.10}",
            report.run.density.circular_mean(&grid, j),
            report.run.density.mass(&grid, j)
        );
    }
    Ok(())
}
