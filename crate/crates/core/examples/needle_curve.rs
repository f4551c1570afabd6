//! Needle curve `s ↦ E ℓ(γ_s)` between the zero control and the first
//! descent iterate: the target runs on `[0, s)`, the reference afterwards.

use sde_descent::descent::{evaluate_needle_curve, run_algorithm_1, uniform_switch_times, DescentOptions};
use sde_descent::montecarlo::{InitialLaw, SimulationConfig};
use sde_descent::problem::{ControlClass, ControlField};
use sde_descent::theta::{build_theta_spec, initial_density, theta_grid, ThetaConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n_paths = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(4000);
    let cfg = ThetaConfig { horizon: 3.0, ..ThetaConfig::default() };
    let spec = build_theta_spec(&cfg)?;
    let grid = theta_grid(&cfg, 64, 8)?;
    let rho0 = initial_density(&cfg, &grid)?;

    let reference = ControlField::constant(&grid, ControlClass::Markovian, 0.0);
    let once = DescentOptions { epsilon: f64::INFINITY, max_iters: 1, guard: true };
    let run = run_algorithm_1(&spec, &grid, &rho0, &reference, &once)?;
    let (before, after) = (run.history[0].cost, run.history[1].cost);
    println!("PDE terminal cost: reference {:.5}, target {:.5}", before.terminal_part, after.terminal_part);

    let sim = SimulationConfig::new(n_paths, 0.01, 3);
    let s_values = uniform_switch_times(grid.horizon(), 13);
    let curve = evaluate_needle_curve(
        &spec,
        &grid,
        &InitialLaw::from_density(&grid, &rho0)?,
        &run.control,
        &reference,
        &s_values,
        &sim,
    )?;
    println!("{:>6} {:>10} {:>9}", "s", "mean", "std_err");
    for p in &curve {
        println!("{:6.3} {:10.5} {:9.5}", p.s, p.expected_terminal_cost, p.std_error);
    }
    Ok(())
}
