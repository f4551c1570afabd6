//! Batch front-end: `solve`, `verify` and `simulate` over a TOML run config.
//!
//! Exit codes: 0 success, 1 config or I/O error, 2 numerical failure or a
//! failed verification check.

pub mod config;
pub mod output;

use std::fs;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::descent::{
    evaluate_needle_curve, exact_increment, run_algorithm_1, run_algorithm_2, uniform_switch_times,
    DescentOptions, DescentRun,
};
use crate::error::{Error, Result};
use crate::montecarlo::{
    feynman_kac_probe, simulate_terminal_cost, Functional, InitialLaw, Policy, Probe, SimulationConfig,
};
use crate::problem::{
    AdjointField, ControlClass, ControlField, CostReport, Penalty, ProblemSpec, TensorGrid,
};
use crate::spectral::PdeSolver;

pub use config::{RunConfig, RunPlan};
use output::{Check, McRow};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "sde-descent", version, about = "Exact-increment descent for controlled diffusions on the circle")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output.directory`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overrides `simulation.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Suppress progress messages.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Run the descent and write the cost history, density snapshots and control.
    Solve,
    /// Cross-check the PDE solvers against the increment identity and Monte Carlo.
    Verify,
    /// Monte-Carlo estimates of the objective and the needle curve.
    Simulate,
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let result = load(cli).and_then(|plan| match cli.command {
        Command::Solve => cmd_solve(&plan, cli.quiet),
        Command::Verify => cmd_verify(&plan, cli.quiet),
        Command::Simulate => cmd_simulate(&plan, cli.quiet),
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                EXIT_NUMERICAL
            } else {
                EXIT_CONFIG
            }
        }
    }
}

fn load(cli: &Cli) -> Result<RunPlan> {
    let cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            RunConfig::parse(&text, &path.display().to_string())?
        }
        None => RunConfig::default(),
    };
    let mut plan = cfg.plan(cli.seed)?;
    if let Some(out) = &cli.out {
        plan.output_dir = out.clone();
    }
    fs::create_dir_all(&plan.output_dir)?;
    let mut resolved = cfg;
    resolved.simulation.seed = plan.simulation.seed;
    resolved.output.directory = plan.output_dir.clone();
    fs::write(plan.output_dir.join("run_config.toml"), resolved.to_toml())?;
    Ok(plan)
}

fn progress(quiet: bool, msg: impl FnOnce() -> String) {
    if !quiet {
        eprintln!("{}", msg());
    }
}

fn initial_guess(plan: &RunPlan) -> ControlField {
    let u0 = plan.spec.control_set().clamp(0.0);
    ControlField::constant(&plan.grid, plan.spec.control_class(), u0)
}

fn descend(plan: &RunPlan, guess: &ControlField, options: &DescentOptions) -> Result<DescentRun> {
    match plan.spec.control_class() {
        ControlClass::Markovian => run_algorithm_1(&plan.spec, &plan.grid, &plan.initial, guess, options),
        ControlClass::OpenLoop => run_algorithm_2(&plan.spec, &plan.grid, &plan.initial, guess, options),
    }
}

/// Reference `u⁰` and the first descent iterate from it.
struct Pair {
    reference: ControlField,
    target: ControlField,
    cost_ref: CostReport,
    cost_target: CostReport,
}

fn first_pair(plan: &RunPlan) -> Result<Pair> {
    let reference = initial_guess(plan);
    let once = DescentOptions {
        epsilon: f64::INFINITY,
        max_iters: 1,
        guard: plan.options.guard,
    };
    let run = descend(plan, &reference, &once)?;
    Ok(Pair {
        reference,
        target: run.control,
        cost_ref: run.history[0].cost,
        cost_target: run.history[1].cost,
    })
}

/// Runs the descent and writes its artifacts.
pub fn cmd_solve(plan: &RunPlan, quiet: bool) -> Result<i32> {
    let (grid, out) = (&plan.grid, &plan.output_dir);
    progress(quiet, || {
        format!(
            "solve: n_x = {}, n_eta = {}, n_t = {}, {:?}",
            grid.n_x(),
            grid.n_eta(),
            grid.n_t(),
            plan.spec.control_class()
        )
    });
    let run = descend(plan, &initial_guess(plan), &plan.options)?;
    for r in &run.history {
        progress(quiet, || {
            format!(
                "  k = {}  I = {:.6}  residual = {}  held = {}  {:.1}s",
                r.index,
                r.cost.total,
                r.residual.map_or("-".into(), |v| format!("{v:.3e}")),
                r.held_steps,
                r.wall_time
            )
        });
    }
    output::write_cost_history(&out.join("cost_history.csv"), &run.history)?;
    for &t in &plan.snapshot_times {
        let j = grid.nearest_time_index(t);
        let label = output::time_label(t);
        let slab = run.density.slab(j);
        output::write_density_csv(&out.join(format!("density_t{label}.csv")), grid, slab)?;
        if plan.binary_densities {
            output::write_density_bin(&out.join(format!("density_t{label}.bin")), grid, slab)?;
        }
    }
    output::write_control(&out.join("control.csv"), grid, &run.control, plan.control_stride)?;
    let converged = run
        .history
        .windows(2)
        .last()
        .is_none_or(|w| w[0].cost.total - w[1].cost.total < plan.options.epsilon);
    if !converged {
        progress(quiet, || "solve: max_iters reached before the decrease fell below epsilon".into());
    }
    progress(quiet, || format!("solve: wrote artifacts to {}", out.display()));
    Ok(EXIT_OK)
}

/// PDE cost-to-go at an arbitrary time, linear between time nodes.
fn adjoint_at(grid: &TensorGrid, adjoint: &AdjointField, t: f64, i: usize, e: usize) -> f64 {
    let s = (t / grid.dt()).clamp(0.0, (grid.n_t() - 1) as f64);
    let j = (s.floor() as usize).min(grid.n_t() - 2);
    let frac = s - j as f64;
    (1.0 - frac) * adjoint.p_at(j, i, e) + frac * adjoint.p_at(j + 1, i, e)
}

/// Sixteen probe points: four times (multiples of `dt_sim`) by four phases,
/// each phase paired with a different η node.
fn probe_points(grid: &TensorGrid, dt_sim: f64) -> Vec<(Probe, usize, usize)> {
    let n_x = grid.n_x();
    let n_eta = grid.n_eta();
    let mut probes = Vec::with_capacity(16);
    for k in 0..4 {
        let t = (grid.horizon() * k as f64 / 4.0 / dt_sim).round() * dt_sim;
        for m in 0..4 {
            let i = ((2 * m + 1) * n_x / 8) % n_x;
            let e = ((m * (n_eta - 1)) as f64 / 3.0).round() as usize;
            let probe = Probe {
                t,
                x: grid.x(i),
                eta: grid.eta_nodes()[e],
            };
            probes.push((probe, i, e));
        }
    }
    probes
}

/// Bias allowance of the Euler scheme on a terminal functional.
fn euler_allowance(spec: &ProblemSpec, dt_sim: f64) -> f64 {
    2.0 * dt_sim * spec.terminal_cost().lipschitz_estimate()
}

/// Terminal-cost-only version of `spec`, used for the needle slope bound.
fn terminal_only(spec: &ProblemSpec) -> Result<ProblemSpec> {
    ProblemSpec::builder(spec.drift().clone(), spec.beta(), spec.terminal_cost().clone())
        .penalty(Penalty::None)
        .control_set(*spec.control_set())
        .control_class(spec.control_class())
        .build()
}

/// `sup |∂ₓp| · sup |b| · sup |u − ū|` with `p` the terminal-only
/// cost-to-go under `reference`: bounds `|d/ds E ℓ(γ_s)|`.
fn needle_slope_bound(plan: &RunPlan, pair: &Pair) -> Result<f64> {
    let grid = &plan.grid;
    let spec = terminal_only(&plan.spec)?;
    let adjoint = PdeSolver::new(&spec, grid)?.solve_backward(&pair.reference)?;
    let grad = (0..grid.n_t())
        .flat_map(|j| adjoint.grad_x_p(j).iter().copied())
        .fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut gain = 0.0_f64;
    for j in 0..grid.n_t() {
        for &eta in grid.eta_nodes() {
            for i in 0..grid.n_x() {
                gain = gain.max(spec.drift().gain(grid.t(j), grid.x(i), eta).abs());
            }
        }
    }
    let gap = pair
        .target
        .values()
        .iter()
        .zip(pair.reference.values())
        .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    Ok(grad * gain * gap)
}

/// Runs the cross-oracle checks and writes `verify_report.csv`.
pub fn cmd_verify(plan: &RunPlan, quiet: bool) -> Result<i32> {
    let (spec, grid) = (&plan.spec, &plan.grid);
    let sim = plan.simulation;
    let allowance = euler_allowance(spec, sim.dt_sim);
    let mut checks = Vec::new();

    progress(quiet, || "verify: first descent step".into());
    let pair = first_pair(plan)?;
    let mut solver = PdeSolver::new(spec, grid)?;
    let adjoint_ref = solver.solve_backward(&pair.reference)?;
    let density_target = solver.solve_forward(&plan.initial, &pair.target)?;
    let predicted = exact_increment(spec, grid, &adjoint_ref, &density_target, &pair.target, &pair.reference)?;
    let actual = pair.cost_target.total - pair.cost_ref.total;
    checks.push(Check::new("increment_identity", (predicted - actual).abs(), 1e-3));

    progress(quiet, || format!("verify: Feynman-Kac probes, {} paths each", plan.probe_paths));
    let adjoint_target = solver.solve_backward(&pair.target)?;
    let points = probe_points(grid, sim.dt_sim);
    let probes: Vec<Probe> = points.iter().map(|p| p.0).collect();
    let probe_cfg = SimulationConfig {
        n_paths: plan.probe_paths,
        ..sim
    };
    let estimates = feynman_kac_probe(spec, grid, &pair.target, &probes, &probe_cfg)?;
    for ((probe, i, e), est) in points.iter().zip(&estimates) {
        let pde = adjoint_at(grid, &adjoint_target, probe.t, *i, *e);
        checks.push(Check::new(
            format!("fk_probe t={} x={:.4} eta={:.4}", probe.t, probe.x, probe.eta),
            (pde - est.mean).abs(),
            3.0 * est.std_error + allowance,
        ));
    }

    progress(quiet, || format!("verify: needle curve, {} switch times", plan.needle_points));
    let initial = InitialLaw::from_density(grid, &plan.initial)?;
    let s_values = uniform_switch_times(grid.horizon(), plan.needle_points);
    let curve = evaluate_needle_curve(spec, grid, &initial, &pair.target, &pair.reference, &s_values, &sim)?;
    let (first, last) = (curve[0], curve[curve.len() - 1]);
    checks.push(Check::new(
        "needle_start",
        (first.expected_terminal_cost - pair.cost_ref.terminal_part).abs(),
        3.0 * first.std_error + allowance,
    ));
    checks.push(Check::new(
        "needle_end",
        (last.expected_terminal_cost - pair.cost_target.terminal_part).abs(),
        3.0 * last.std_error + allowance,
    ));
    let bound = needle_slope_bound(plan, &pair)?;
    let (mut slope, mut noise) = (0.0_f64, 0.0_f64);
    for w in curve.windows(2) {
        let ds = w[1].s - w[0].s;
        slope = slope.max((w[1].expected_terminal_cost - w[0].expected_terminal_cost).abs() / ds);
        noise = noise.max(3.0 * w[0].std_error.hypot(w[1].std_error) / ds);
    }
    checks.push(Check::new("needle_slope", slope, bound + noise));

    output::write_verify_report(&plan.output_dir.join("verify_report.csv"), &checks)?;
    let failed: Vec<&Check> = checks.iter().filter(|c| !c.pass()).collect();
    for c in &failed {
        eprintln!("verify: FAILED {}: error {:.3e} > tolerance {:.3e}", c.name, c.measured_error, c.tolerance);
    }
    progress(quiet, || format!("verify: {} of {} checks passed", checks.len() - failed.len(), checks.len()));
    Ok(if failed.is_empty() { EXIT_OK } else { EXIT_NUMERICAL })
}

/// Monte-Carlo estimates for `u⁰` and the first iterate, and the needle
/// curve between them.
pub fn cmd_simulate(plan: &RunPlan, quiet: bool) -> Result<i32> {
    let (spec, grid) = (&plan.spec, &plan.grid);
    let sim = plan.simulation;
    progress(quiet, || "simulate: first descent step".into());
    let pair = first_pair(plan)?;
    let initial = InitialLaw::from_density(grid, &plan.initial)?;

    let mut rows = Vec::new();
    for (name, control, cost) in [
        ("reference", &pair.reference, pair.cost_ref),
        ("target", &pair.target, pair.cost_target),
    ] {
        for (functional, kind, pde) in [
            ("terminal", Functional::Terminal, cost.terminal_part),
            ("total", Functional::Total, cost.total),
        ] {
            let est = simulate_terminal_cost(spec, grid, Policy::Fixed(control), &initial, &sim, kind)?;
            progress(quiet, || {
                format!("  {name} {functional}: {:.5} ± {:.5} (pde {pde:.5})", est.mean, est.std_error)
            });
            rows.push(McRow {
                functional,
                control: name,
                estimate: est.mean,
                std_error: est.std_error,
                n_paths: sim.n_paths,
                pde_value: pde,
            });
        }
    }
    output::write_mc_report(&plan.output_dir.join("mc_report.csv"), &rows)?;

    progress(quiet, || format!("simulate: needle curve, {} switch times", plan.needle_points));
    let s_values = uniform_switch_times(grid.horizon(), plan.needle_points);
    let curve = evaluate_needle_curve(spec, grid, &initial, &pair.target, &pair.reference, &s_values, &sim)?;
    output::write_needle_curve(&plan.output_dir.join("needle_curve.csv"), &curve)?;
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probe_points_sit_on_simulation_steps() {
        let grid = TensorGrid::with_uniform_eta(32, 200, 6.0, 16, -2.0, 2.0).unwrap();
        let pts = probe_points(&grid, 0.01);
        assert_eq!(pts.len(), 16);
        for (p, i, e) in &pts {
            let n = p.t / 0.01;
            assert!((n - n.round()).abs() < 1e-9);
            assert_eq!(p.x, grid.x(*i));
            assert_eq!(p.eta, grid.eta_nodes()[*e]);
            assert!(p.t < grid.horizon());
        }
        let etas: std::collections::BTreeSet<usize> = pts.iter().map(|p| p.2).collect();
        assert_eq!(etas.into_iter().collect::<Vec<_>>(), vec![0, 5, 10, 15]);
    }
}
