use serde::Serialize;

use super::{ControlField, DensityField, Penalty, ProblemSpec, TensorGrid};
use crate::error::{Error, Result};

/// Objective value split into its parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostReport {
    pub total: f64,
    pub terminal_part: f64,
    pub running_part: f64,
    pub penalty_part: f64,
}

impl CostReport {
    pub fn new(terminal_part: f64, running_part: f64, penalty_part: f64) -> Self {
        Self {
            total: terminal_part + running_part + penalty_part,
            terminal_part,
            running_part,
            penalty_part,
        }
    }
}

/// Σ_η w_η Σ_x g(x)·ρ(x, η)·Δx for an η-independent weight `g`.
pub(crate) fn x_weighted(grid: &TensorGrid, slab: &[f64], g: &[f64]) -> f64 {
    let n_x = grid.n_x();
    grid.eta_weights()
        .iter()
        .enumerate()
        .map(|(e, w)| {
            w * slab[e * n_x..(e + 1) * n_x]
                .iter()
                .zip(g)
                .map(|(r, gi)| r * gi)
                .sum::<f64>()
        })
        .sum::<f64>()
        * grid.dx()
}

/// Density-weighted running cost sampled at `t` under the held control slab.
pub(crate) fn running_slab(spec: &ProblemSpec, grid: &TensorGrid, t: f64, w: &[f64]) -> Vec<f64> {
    (0..grid.n_x())
        .map(|i| spec.weighted_running(t, grid.x(i), w[i]))
        .collect()
}

/// Penalty that does not enter the backward equation, for the step held
/// over `[t_j, t_{j+1})`.
pub(crate) fn direct_penalty_step(
    spec: &ProblemSpec,
    grid: &TensorGrid,
    class_open_loop: bool,
    w: &[f64],
) -> f64 {
    match spec.penalty() {
        Penalty::DirectL2(a) => {
            let sq = if class_open_loop {
                w[0] * w[0]
            } else {
                w.iter().map(|v| v * v).sum::<f64>() * grid.dx()
            };
            0.5 * a * sq * grid.dt()
        }
        _ => 0.0,
    }
}

/// Evaluates the objective on a forward solution.
///
/// Terminal part: Σ ℓ·ρ_T·Δx·w_η. Running and density-weighted penalty
/// parts: trapezoid over each step with that step's held control. The
/// direct L2 penalty integrates ‖w_t‖² over `[0, 2π)` (for an open-loop
/// control, |u(t)|²) with the same held-control rule.
pub fn evaluate_cost(
    spec: &ProblemSpec,
    grid: &TensorGrid,
    density: &DensityField,
    control: &ControlField,
) -> Result<CostReport> {
    density.check_grid(grid)?;
    control.check_grid(grid)?;
    if control.class() != spec.control_class() {
        return Err(Error::ShapeMismatch(format!(
            "control is {:?}, problem expects {:?}",
            control.class(),
            spec.control_class()
        )));
    }
    let n_x = grid.n_x();
    let ell: Vec<f64> = grid.x_nodes().iter().map(|&x| spec.terminal_cost().value(x)).collect();
    let terminal = x_weighted(grid, density.terminal(), &ell);

    let h = grid.dt();
    let open_loop = matches!(control, ControlField::OpenLoop { .. });
    let mut running = 0.0;
    let mut penalty = 0.0;
    let measure_alpha = match spec.penalty() {
        Penalty::MeasureWeighted(a) => Some(a),
        _ => None,
    };
    for j in 0..grid.n_t() - 1 {
        let w = control.slab(j, n_x);
        penalty += direct_penalty_step(spec, grid, open_loop, &w);
        let (t0, t1) = (grid.t(j), grid.t(j + 1));
        if let Some(r) = spec.running_cost() {
            let r0: Vec<f64> = (0..n_x).map(|i| r.value(t0, grid.x(i), w[i])).collect();
            let r1: Vec<f64> = (0..n_x).map(|i| r.value(t1, grid.x(i), w[i])).collect();
            running += 0.5
                * h
                * (x_weighted(grid, density.slab(j), &r0) + x_weighted(grid, density.slab(j + 1), &r1));
        }
        if let Some(a) = measure_alpha {
            let q: Vec<f64> = w.iter().map(|v| 0.5 * a * v * v).collect();
            penalty += 0.5
                * h
                * (x_weighted(grid, density.slab(j), &q) + x_weighted(grid, density.slab(j + 1), &q));
        }
    }
    Ok(CostReport::new(terminal, running, penalty))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::problem::{normalize_slab, ControlClass, Drift, TerminalCost};

    fn random_density(grid: &TensorGrid, rng: &mut ChaCha8Rng) -> DensityField {
        let mut values = Vec::new();
        for _ in 0..grid.n_t() {
            let mut slab: Vec<f64> = (0..grid.slab_len()).map(|_| rng.gen_range(0.1..2.0)).collect();
            normalize_slab(grid, &mut slab).unwrap();
            values.extend(slab);
        }
        DensityField::from_values(grid, values).unwrap()
    }

    #[test]
    fn constant_terminal_cost_is_mass() {
        let grid = TensorGrid::with_uniform_eta(16, 5, 1.0, 3, -1.0, 1.0).unwrap();
        let spec = ProblemSpec::builder(Drift::theta(), 0.5, TerminalCost::constant(2.5))
            .build()
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rho = random_density(&grid, &mut rng);
        let c = ControlField::constant(&grid, ControlClass::Markovian, 0.0);
        let report = evaluate_cost(&spec, &grid, &rho, &c).unwrap();
        assert!((report.total - 2.5).abs() < 1e-12);
    }

    #[test]
    fn direct_l2_penalty_of_unit_control() {
        let grid = TensorGrid::without_eta(32, 11, 1.0).unwrap();
        let spec = ProblemSpec::builder(Drift::theta(), 0.5, TerminalCost::constant(0.0))
            .penalty(Penalty::DirectL2(2.0))
            .build()
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rho = random_density(&grid, &mut rng);
        let c = ControlField::constant(&grid, ControlClass::Markovian, 1.0);
        let report = evaluate_cost(&spec, &grid, &rho, &c).unwrap();
        assert!((report.penalty_part - 2.0 * PI).abs() < 1e-12);
        assert!((report.total - report.terminal_part - report.running_part - report.penalty_part).abs() < 1e-12);
    }

    #[test]
    fn class_mismatch_is_rejected() {
        let grid = TensorGrid::without_eta(8, 3, 1.0).unwrap();
        let spec = ProblemSpec::builder(Drift::theta(), 0.5, TerminalCost::constant(0.0))
            .build()
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rho = random_density(&grid, &mut rng);
        let c = ControlField::constant(&grid, ControlClass::OpenLoop, 0.0);
        assert!(evaluate_cost(&spec, &grid, &rho, &c).is_err());
    }

    #[test]
    fn cost_is_linear_in_terminal_cost_and_affine_in_density() {
        let grid = TensorGrid::with_uniform_eta(16, 6, 0.7, 4, -1.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ell = |x: f64| 1.0 + 0.3 * x.sin() - 0.2 * (2.0 * x).cos();
        let single = ProblemSpec::builder(Drift::theta(), 0.5, TerminalCost::new(ell))
            .running_cost(crate::problem::RunningCost::state_only(|t, x| t * x.cos()))
            .penalty(Penalty::MeasureWeighted(0.7))
            .build()
            .unwrap();
        let double = ProblemSpec::builder(Drift::theta(), 0.5, TerminalCost::new(move |x| 2.0 * ell(x)))
            .build()
            .unwrap();
        let control = ControlField::from_fn_markovian(&grid, |t, x| (t + x).sin());
        for _ in 0..10 {
            let a = random_density(&grid, &mut rng);
            let b = random_density(&grid, &mut rng);
            let ra = evaluate_cost(&single, &grid, &a, &control).unwrap();
            let rd = evaluate_cost(&double, &grid, &a, &control).unwrap();
            assert!((rd.terminal_part - 2.0 * ra.terminal_part).abs() < 1e-12);

            let lam: f64 = rng.gen_range(0.0..1.0);
            let mixed: Vec<f64> = a
                .values()
                .iter()
                .zip(b.values())
                .map(|(x, y)| lam * x + (1.0 - lam) * y)
                .collect();
            let m = DensityField::from_values(&grid, mixed).unwrap();
            let rb = evaluate_cost(&single, &grid, &b, &control).unwrap();
            let rm = evaluate_cost(&single, &grid, &m, &control).unwrap();
            assert!((rm.total - (lam * ra.total + (1.0 - lam) * rb.total)).abs() < 1e-12);
        }
    }
}
