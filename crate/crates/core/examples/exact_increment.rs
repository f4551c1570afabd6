//! The increment formula predicts `I[u] − I[ū]` from the adjoint of `ū` and
//! the density of `u` alone; compare it with two direct cost evaluations.

use sde_descent::descent::exact_increment;
use sde_descent::problem::{evaluate_cost, ControlField};
use sde_descent::spectral::PdeSolver;
use sde_descent::theta::{build_theta_spec, initial_density, theta_grid, ThetaConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = ThetaConfig { horizon: 2.0, ..ThetaConfig::default() };
    let spec = build_theta_spec(&cfg)?;
    for n_x in [32, 64, 128] {
        let grid = theta_grid(&cfg, n_x, 6)?;
        let rho0 = initial_density(&cfg, &grid)?;
        let reference = ControlField::from_fn_markovian(&grid, |t, x| 0.3 * (x + t).cos());
        let target = ControlField::from_fn_markovian(&grid, |t, x| 0.8 * x.sin() - 0.2 * t);

        let mut solver = PdeSolver::new(&spec, &grid)?;
        let rho_ref = solver.solve_forward(&rho0, &reference)?;
        let rho_target = solver.solve_forward(&rho0, &target)?;
        let adjoint_ref = solver.solve_backward(&reference)?;
        let direct = evaluate_cost(&spec, &grid, &rho_target, &target)?.total
            - evaluate_cost(&spec, &grid, &rho_ref, &reference)?.total;
        let predicted = exact_increment(&spec, &grid, &adjoint_ref, &rho_target, &target, &reference)?;
        println!(
            "n_x = {n_x:3}, n_t = {:5}: direct {direct:+.8}  formula {predicted:+.8}  gap {:.2e}",
            grid.n_t(),
            (direct - predicted).abs()
        );
    }
    Ok(())
}
