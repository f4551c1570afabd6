//! Forward Fokker-Planck solve with zero drift. A wrapped Gaussian of
//! variance `s²` stays wrapped Gaussian with variance `s² + 2βt`, which
//! gives an exact reference at every resolution.

use sde_descent::problem::{ControlClass, ControlField, Drift, ProblemSpec, TensorGrid, TerminalCost};
use sde_descent::spectral::solve_forward;
use sde_descent::theta::wrapped_gaussian;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (beta, horizon, mean, std) = (0.5, 1.0, 2.0, 0.17);
    let spec = ProblemSpec::builder(Drift::zero(), beta, TerminalCost::constant(0.0)).build()?;
    let std_t = (std * std + 2.0 * beta * horizon).sqrt();
    let mut previous: Option<f64> = None;
    for n_x in [8, 16, 32, 64] {
        let grid = TensorGrid::without_eta(n_x, 4001, horizon)?;
        let init: Vec<f64> = grid.x_nodes().iter().map(|&x| wrapped_gaussian(x, mean, std)).collect();
        let init = normalized(&grid, init);
        let control = ControlField::constant(&grid, ControlClass::OpenLoop, 0.0);
        let rho = solve_forward(&spec, &grid, &init, &control)?;
        let err = grid
            .x_nodes()
            .iter()
            .zip(rho.terminal())
            .map(|(&x, r)| (r - wrapped_gaussian(x, mean, std_t)).abs())
            .fold(0.0, f64::max);
        let ratio = previous.map_or(String::new(), |p| format!("  ratio {:.1e}", p / err));
        println!("n_x = {n_x:3}  max error {err:.3e}  mass drift {:.1e}{ratio}", rho.max_mass_drift(&grid));
        previous = Some(err);
    }
    Ok(())
}

/// Sampled initial law rescaled to unit discrete mass.
fn normalized(grid: &TensorGrid, mut slab: Vec<f64>) -> Vec<f64> {
    sde_descent::problem::normalize_slab(grid, &mut slab).expect("positive mass");
    slab
}
