//! Backward (cost-to-go) solve on the Theta model under a fixed feedback,
//! checked pointwise against Monte-Carlo path averages.

use std::f64::consts::PI;

use sde_descent::montecarlo::{feynman_kac_probe, Probe, SimulationConfig};
use sde_descent::problem::ControlField;
use sde_descent::spectral::solve_backward;
use sde_descent::theta::{build_theta_spec, theta_grid, ThetaConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n_paths = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(20_000);
    let cfg = ThetaConfig { horizon: 2.0, ..ThetaConfig::default() };
    let spec = build_theta_spec(&cfg)?;
    let grid = theta_grid(&cfg, 64, 5)?;
    // a feedback pushing the phase toward π
    let control = ControlField::from_fn_markovian(&grid, |_, x| -0.5 * (x - PI).sin());
    let adjoint = solve_backward(&spec, &grid, &control)?;

    let sim = SimulationConfig::new(n_paths, 0.005, 11);
    let mut probes = Vec::new();
    let mut nodes = Vec::new();
    for &j in &[0, grid.n_t() / 2] {
        for &(i, e) in &[(0, 2), (16, 0), (32, 4), (48, 2)] {
            probes.push(Probe { t: grid.t(j), x: grid.x(i), eta: grid.eta_nodes()[e] });
            nodes.push((j, i, e));
        }
    }
    // probe starts must sit on the Euler grid
    for p in &mut probes {
        p.t = (p.t / sim.dt_sim).round() * sim.dt_sim;
    }
    let estimates = feynman_kac_probe(&spec, &grid, &control, &probes, &sim)?;
    println!("{:>6} {:>7} {:>6} {:>10} {:>10} {:>9}", "t", "x", "eta", "pde", "mc", "z");
    for ((p, (j, i, e)), est) in probes.iter().zip(&nodes).zip(&estimates) {
        let pde = adjoint.p_at(*j, *i, *e);
        println!(
            "{:6.3} {:7.4} {:6.2} {:10.5} {:10.5} {:9.2}",
            p.t,
            p.x,
            p.eta,
            pde,
            est.mean,
            (est.mean - pde) / est.std_error
        );
    }
    Ok(())
}
