//! Exact-increment descent: comparison controls, the two descent loops and
//! the increment identity they rest on.
//!
//! The comparison control at step `j` minimizes the Hamiltonian built from
//! the reference adjoint at node `j + 1` against the density at node `j`,
//! which is the first-order part of the one-step discrete cost-to-go.

mod needle;

pub use needle::{evaluate_needle_curve, uniform_switch_times, NeedleCurveSample};

use std::time::Instant;

use crate::error::{Error, Result};
use crate::problem::{
    cost::direct_penalty_step,
    evaluate_cost, AdjointField, ControlClass, ControlField, CostReport, DensityField,
    NodeObjective, Penalty, ProblemSpec, TensorGrid,
};
use crate::spectral::{DescentGuard, FeedbackRule, PdeSolver};

/// Slack allowed on `I^{k+1} ≤ I^k` before a run is aborted.
pub const MONOTONICITY_TOLERANCE: f64 = 1e-9;

/// Adjoint node paired with control node `j`.
fn adjoint_node(grid: &TensorGrid, j: usize) -> usize {
    (j + 1).min(grid.n_t() - 1)
}

/// Pointwise argmin over `U` at one (node, x) pair.
fn markovian_node_value(
    spec: &ProblemSpec,
    grid: &TensorGrid,
    adjoint: &AdjointField,
    j: usize,
    i: usize,
    rho: Option<&[f64]>,
) -> Result<f64> {
    let n_x = grid.n_x();
    let grad = adjoint.grad_x_p(adjoint_node(grid, j));
    let density = rho.map(|slab| move |e: usize| slab[e * n_x + i]);
    let obj = NodeObjective::aggregate(
        spec,
        grid,
        grid.t(j),
        grid.x(i),
        |e| grad[e * n_x + i],
        density.as_ref().map(|d| d as &dyn Fn(usize) -> f64),
    )?;
    Ok(obj.argmin(spec.control_set()))
}

/// Comparison control of the Markovian descent: at every node, the
/// minimizer over `U` of the η-aggregated Hamiltonian.
///
/// A density is required for [`Penalty::DirectL2`], where the minimizer
/// depends on it; other modes use it when given.
pub fn comparison_control_markovian(
    spec: &ProblemSpec,
    grid: &TensorGrid,
    adjoint: &AdjointField,
    density: Option<&DensityField>,
) -> Result<ControlField> {
    adjoint.check_grid(grid)?;
    if let Some(d) = density {
        d.check_grid(grid)?;
    }
    if density.is_none() && matches!(spec.penalty(), Penalty::DirectL2(_)) {
        return Err(Error::MissingDensity);
    }
    let mut values = Vec::with_capacity(grid.n_t() * grid.n_x());
    for j in 0..grid.n_t() {
        let rho = density.map(|d| d.slab(j));
        for i in 0..grid.n_x() {
            values.push(markovian_node_value(spec, grid, adjoint, j, i, rho)?);
        }
    }
    ControlField::markovian(grid, values)
}

/// Coefficients of `½·q·υ² + a·υ`, the density-averaged Hamiltonian at node
/// `j` as a function of a spatially constant control.
fn openloop_objective(
    spec: &ProblemSpec,
    grid: &TensorGrid,
    adjoint: &AdjointField,
    density_slab: &[f64],
    j: usize,
) -> NodeObjective {
    let n_x = grid.n_x();
    let t = grid.t(j);
    let grad = adjoint.grad_x_p(adjoint_node(grid, j));
    let mut linear = 0.0;
    let mut r2_mass = 0.0;
    let mut mass = 0.0;
    for (e, (&eta, &w)) in grid.eta_nodes().iter().zip(grid.eta_weights()).enumerate() {
        for i in 0..n_x {
            let x = grid.x(i);
            let m = w * density_slab[e * n_x + i];
            let (r1, r2) = spec
                .running_cost()
                .map_or((0.0, 0.0), |r| (r.linear(t, x), r.quadratic(t, x)));
            linear += m * (spec.drift().gain(t, x, eta) * grad[e * n_x + i] + r1);
            r2_mass += m * r2;
            mass += m;
        }
    }
    let dx = grid.dx();
    let quadratic = r2_mass * dx
        + match spec.penalty() {
            Penalty::None => 0.0,
            Penalty::MeasureWeighted(a) => a * mass * dx,
            Penalty::DirectL2(a) => a,
        };
    NodeObjective {
        quadratic,
        linear: linear * dx,
    }
}

/// Feedback value of the open-loop descent at time `t`: the minimizer over
/// `U` of the Hamiltonian averaged against `density_slab`.
pub fn comparison_control_openloop(
    spec: &ProblemSpec,
    grid: &TensorGrid,
    adjoint: &AdjointField,
    density_slab: &[f64],
    t: f64,
) -> Result<f64> {
    adjoint.check_grid(grid)?;
    if density_slab.len() != grid.slab_len() {
        return Err(Error::ShapeMismatch(format!(
            "density slab has {} values, grid needs {}",
            density_slab.len(),
            grid.slab_len()
        )));
    }
    let j = grid.nearest_time_index(t);
    Ok(openloop_objective(spec, grid, adjoint, density_slab, j).argmin(spec.control_set()))
}

/// Markovian comparison control as a feedback rule on the evolving density.
pub struct MarkovianComparisonRule<'a> {
    spec: &'a ProblemSpec,
    grid: &'a TensorGrid,
    adjoint: &'a AdjointField,
}

impl<'a> MarkovianComparisonRule<'a> {
    pub fn new(spec: &'a ProblemSpec, grid: &'a TensorGrid, adjoint: &'a AdjointField) -> Self {
        Self { spec, grid, adjoint }
    }
}

impl FeedbackRule for MarkovianComparisonRule<'_> {
    fn class(&self) -> ControlClass {
        ControlClass::Markovian
    }

    fn evaluate(&mut self, j: usize, _t: f64, density: &[f64]) -> Result<Vec<f64>> {
        (0..self.grid.n_x())
            .map(|i| markovian_node_value(self.spec, self.grid, self.adjoint, j, i, Some(density)))
            .collect()
    }
}

/// Open-loop comparison control as a feedback rule: one value per step,
/// read off the current density.
pub struct OpenLoopComparisonRule<'a> {
    spec: &'a ProblemSpec,
    grid: &'a TensorGrid,
    adjoint: &'a AdjointField,
}

impl<'a> OpenLoopComparisonRule<'a> {
    pub fn new(spec: &'a ProblemSpec, grid: &'a TensorGrid, adjoint: &'a AdjointField) -> Self {
        Self { spec, grid, adjoint }
    }
}

impl FeedbackRule for OpenLoopComparisonRule<'_> {
    fn class(&self) -> ControlClass {
        ControlClass::OpenLoop
    }

    fn evaluate(&mut self, j: usize, _t: f64, density: &[f64]) -> Result<Vec<f64>> {
        let v = openloop_objective(self.spec, self.grid, self.adjoint, density, j)
            .argmin(self.spec.control_set());
        Ok(vec![v; self.grid.n_x()])
    }
}

/// Predicted `I[u] − I[ū]` from the reference adjoint and the target density:
/// `∫ E^{μ_s}[H̄_s(u) − H̄_s(ū)] ds` plus the direct-penalty difference.
///
/// Each step `[t_j, t_{j+1})` is integrated with the trapezoid rule, both
/// ends evaluated with the controls held on that step.
pub fn exact_increment(
    spec: &ProblemSpec,
    grid: &TensorGrid,
    adjoint_ref: &AdjointField,
    density_target: &DensityField,
    control_target: &ControlField,
    control_ref: &ControlField,
) -> Result<f64> {
    adjoint_ref.check_grid(grid)?;
    density_target.check_grid(grid)?;
    control_target.check_grid(grid)?;
    control_ref.check_grid(grid)?;
    if control_target.class() != control_ref.class() {
        return Err(Error::ShapeMismatch("controls of different classes".into()));
    }
    if control_target == control_ref {
        return Ok(0.0);
    }
    let n_x = grid.n_x();
    let h = grid.dt();
    let open_loop = control_ref.class() == ControlClass::OpenLoop;
    let drift = spec.drift();
    let mut total = 0.0;
    let mut diff = vec![0.0; grid.slab_len()];
    for j in 0..grid.n_t() - 1 {
        let w = control_target.slab(j, n_x);
        let w_ref = control_ref.slab(j, n_x);
        let mut step = 0.0;
        for node in [j, j + 1] {
            let t = grid.t(node);
            let psi = adjoint_ref.grad_x_p(node);
            for (e, &eta) in grid.eta_nodes().iter().enumerate() {
                for i in 0..n_x {
                    let x = grid.x(i);
                    let idx = e * n_x + i;
                    diff[idx] = psi[idx] * drift.gain(t, x, eta) * (w[i] - w_ref[i])
                        + spec.weighted_running(t, x, w[i])
                        - spec.weighted_running(t, x, w_ref[i]);
                }
            }
            step += crate::problem::slab_inner(grid, &diff, density_target.slab(node));
        }
        total += 0.5 * h * step;
        let k = if open_loop { 1 } else { n_x };
        total += direct_penalty_step(spec, grid, open_loop, &w[..k])
            - direct_penalty_step(spec, grid, open_loop, &w_ref[..k]);
    }
    Ok(total)
}

/// Stopping and safety options for the descent loops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentOptions {
    /// Stop once a single iteration lowers the cost by less than this.
    pub epsilon: f64,
    pub max_iters: usize,
    /// Keep the reference control on steps where the comparison control
    /// would raise the one-step cost-to-go.
    pub guard: bool,
}

impl Default for DescentOptions {
    fn default() -> Self {
        Self {
            epsilon: 0.05,
            max_iters: 20,
            guard: true,
        }
    }
}

/// One row of a descent history; row 0 is the initial guess.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub index: usize,
    pub cost: CostReport,
    /// `I^{k−1} − I^k` predicted by the increment formula; absent for row 0.
    pub residual: Option<f64>,
    /// Seconds since the run started.
    pub wall_time: f64,
    pub held_steps: usize,
}

/// Outcome of a descent run.
#[derive(Debug, Clone)]
pub struct DescentRun {
    pub control: ControlField,
    pub density: DensityField,
    pub history: Vec<IterationRecord>,
}

impl DescentRun {
    pub fn final_cost(&self) -> f64 {
        self.history.last().map_or(f64::NAN, |r| r.cost.total)
    }
}

fn run_descent(
    spec: &ProblemSpec,
    grid: &TensorGrid,
    initial_density: &[f64],
    initial_guess: &ControlField,
    options: &DescentOptions,
    class: ControlClass,
) -> Result<DescentRun> {
    if !(options.epsilon > 0.0) {
        return Err(Error::InvalidProblem(format!(
            "epsilon = {} must be positive",
            options.epsilon
        )));
    }
    if options.max_iters == 0 {
        return Err(Error::InvalidProblem("max_iters must be at least 1".into()));
    }
    if initial_guess.class() != class || spec.control_class() != class {
        return Err(Error::InvalidProblem(format!(
            "descent over {class:?} controls needs a {class:?} problem and initial guess"
        )));
    }
    initial_guess.check_grid(grid)?;
    initial_guess.check_admissible(spec.control_set())?;

    let start = Instant::now();
    let mut solver = PdeSolver::new(spec, grid)?;
    let mut density = solver.solve_forward(initial_density, initial_guess)?;
    let mut control = initial_guess.clone();
    let mut cost = evaluate_cost(spec, grid, &density, &control)?;
    let mut history = vec![IterationRecord {
        index: 0,
        cost,
        residual: None,
        wall_time: start.elapsed().as_secs_f64(),
        held_steps: 0,
    }];

    for k in 1..=options.max_iters {
        let adjoint = solver.solve_backward(&control)?;
        let guard = options.guard.then_some(DescentGuard {
            adjoint: &adjoint,
            reference: &control,
        });
        let solution = match class {
            ControlClass::Markovian => {
                let mut rule = MarkovianComparisonRule::new(spec, grid, &adjoint);
                solver.solve_forward_feedback(initial_density, &mut rule, guard)?
            }
            ControlClass::OpenLoop => {
                let mut rule = OpenLoopComparisonRule::new(spec, grid, &adjoint);
                solver.solve_forward_feedback(initial_density, &mut rule, guard)?
            }
        };
        let next_cost = evaluate_cost(spec, grid, &solution.density, &solution.control)?;
        let residual = -exact_increment(spec, grid, &adjoint, &solution.density, &solution.control, &control)?;
        if next_cost.total > cost.total + MONOTONICITY_TOLERANCE {
            return Err(Error::MonotonicityViolation {
                iteration: k,
                previous: cost.total,
                current: next_cost.total,
            });
        }
        history.push(IterationRecord {
            index: k,
            cost: next_cost,
            residual: Some(residual),
            wall_time: start.elapsed().as_secs_f64(),
            held_steps: solution.held_steps,
        });
        let decrease = cost.total - next_cost.total;
        control = solution.control;
        density = solution.density;
        cost = next_cost;
        if decrease < options.epsilon {
            break;
        }
    }
    Ok(DescentRun {
        control,
        density,
        history,
    })
}

/// Descent over Markovian controls `w(t, x)`.
///
/// Each iteration solves the adjoint under `w^k`, then realizes `w^{k+1}`
/// through a sample-and-hold feedback forward solve of the comparison
/// control. Stops when the cost drops by less than `epsilon`.
pub fn run_algorithm_1(
    spec: &ProblemSpec,
    grid: &TensorGrid,
    initial_density: &[f64],
    initial_guess: &ControlField,
    options: &DescentOptions,
) -> Result<DescentRun> {
    run_descent(spec, grid, initial_density, initial_guess, options, ControlClass::Markovian)
}

/// Descent over open-loop controls `u(t)`; the comparison control is the
/// density-averaged Hamiltonian minimizer, realized along the backfed
/// forward solve.
pub fn run_algorithm_2(
    spec: &ProblemSpec,
    grid: &TensorGrid,
    initial_density: &[f64],
    initial_guess: &ControlField,
    options: &DescentOptions,
) -> Result<DescentRun> {
    run_descent(spec, grid, initial_density, initial_guess, options, ControlClass::OpenLoop)
}
