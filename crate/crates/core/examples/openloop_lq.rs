//! Open-loop descent on the scalar linear-quadratic problem
//! `dX = u dt + √(2β) dW`, cost `E (X_T − c)² + (α/2)∫u² dt`.
//!
//! The optimal open-loop control is the constant `2(c − m₀)/(α + 2T)`.

use std::f64::consts::PI;

use sde_descent::descent::{run_algorithm_2, DescentOptions};
use sde_descent::problem::{
    normalize_slab, ControlClass, ControlField, ControlSet, Drift, Penalty, ProblemSpec, TensorGrid, TerminalCost,
};
use sde_descent::theta::wrapped_gaussian;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n_x: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(128);
    let (horizon, beta, alpha, center, m0) = (1.0, 0.05, 1.0, PI, PI - 1.0);

    let spec = ProblemSpec::builder(
        Drift::autonomous(|_, _| 0.0, |_, _| 1.0),
        beta,
        TerminalCost::periodic_quadratic(center, 0.5),
    )
    .penalty(Penalty::DirectL2(alpha))
    .control_set(ControlSet::new(-5.0, 5.0)?)
    .control_class(ControlClass::OpenLoop)
    .build()?;
    let n_t = TensorGrid::stable_time_nodes(n_x, horizon, beta);
    let grid = TensorGrid::without_eta(n_x, n_t, horizon)?;
    let mut rho: Vec<f64> = grid.x_nodes().iter().map(|&x| wrapped_gaussian(x, m0, 0.2)).collect();
    normalize_slab(&grid, &mut rho)?;

    let options = DescentOptions { epsilon: 1e-10, max_iters: 60, guard: true };
    let guess = ControlField::constant(&grid, ControlClass::OpenLoop, 0.0);
    let run = run_algorithm_2(&spec, &grid, &rho, &guess, &options)?;
    for r in &run.history {
        println!("k = {:2}  I = {:.8}  residual = {:?}", r.index, r.cost.total, r.residual);
    }

    let exact = 2.0 * (center - m0) / (alpha + 2.0 * horizon);
    let u = &run.control.values()[..n_t - 1];
    let err = u.iter().map(|v| (v - exact).powi(2)).sum::<f64>().sqrt();
    let norm = exact.abs() * ((n_t - 1) as f64).sqrt();
    println!("optimal constant {exact:.6}; u(0) = {:.6}, u(T−) = {:.6}", u[0], u[u.len() - 1]);
    println!("relative L2 error {:.3e}", err / norm);
    Ok(())
}
