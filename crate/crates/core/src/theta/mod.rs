//! Theta-neuron benchmark: phase `x` on the circle, excitability `η` as a
//! random parameter, drift `(1 − cos x) + (1 + cos x)(η + u)`, terminal cost
//! `1 − cos(x − x̌)` and an L2 control penalty.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::descent::{run_algorithm_1, DescentOptions, DescentRun};
use crate::error::{Error, Result};
use crate::problem::{
    normalize_slab, ControlClass, ControlField, ControlSet, Drift, Penalty, ProblemSpec,
    TensorGrid, TerminalCost,
};

/// Initial law: wrapped Gaussian in x times a Gaussian in η truncated to
/// `[eta_min, eta_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialDensity {
    pub x_mean: f64,
    /// Standard deviation of the unwrapped Gaussian, radians.
    pub x_std: f64,
    pub eta_mean: f64,
    pub eta_std: f64,
    pub eta_min: f64,
    pub eta_max: f64,
}

impl Default for InitialDensity {
    fn default() -> Self {
        Self {
            x_mean: 0.0,
            x_std: 0.5,
            eta_mean: 0.0,
            eta_std: 0.5,
            eta_min: -2.0,
            eta_max: 2.0,
        }
    }
}

/// Benchmark parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThetaConfig {
    pub horizon: f64,
    pub alpha: f64,
    pub beta: f64,
    pub x_check: f64,
    pub init: InitialDensity,
}

impl Default for ThetaConfig {
    fn default() -> Self {
        Self {
            horizon: 6.0,
            alpha: 1.0,
            beta: 0.5,
            x_check: PI,
            init: InitialDensity::default(),
        }
    }
}

impl ThetaConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, v: f64| Err(Error::InvalidProblem(format!("{field} = {v} is not allowed")));
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return bad("horizon", self.horizon);
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return bad("alpha", self.alpha);
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return bad("beta", self.beta);
        }
        if !self.x_check.is_finite() {
            return bad("x_check", self.x_check);
        }
        let i = &self.init;
        if !(i.x_std.is_finite() && i.x_std > 0.0) {
            return bad("init.x_std", i.x_std);
        }
        if !(i.eta_std.is_finite() && i.eta_std > 0.0) {
            return bad("init.eta_std", i.eta_std);
        }
        if !(i.eta_max > i.eta_min) {
            return bad("init.eta_max", i.eta_max);
        }
        Ok(())
    }
}

/// Problem data of the benchmark: `DirectL2(α)`, Markovian, `U = [−25, 25]`.
pub fn build_theta_spec(cfg: &ThetaConfig) -> Result<ProblemSpec> {
    cfg.validate()?;
    ProblemSpec::builder(Drift::theta(), cfg.beta, TerminalCost::cosine_well(cfg.x_check))
        .penalty(Penalty::DirectL2(cfg.alpha))
        .control_set(ControlSet::penalized_default())
        .control_class(ControlClass::Markovian)
        .build()
}

/// Grid with `n_eta` uniform η nodes on the configured range and the
/// smallest stable time step.
pub fn theta_grid(cfg: &ThetaConfig, n_x: usize, n_eta: usize) -> Result<TensorGrid> {
    let n_t = TensorGrid::stable_time_nodes(n_x, cfg.horizon, cfg.beta);
    TensorGrid::with_uniform_eta(n_x, n_t, cfg.horizon, n_eta, cfg.init.eta_min, cfg.init.eta_max)
}

/// Wrapped Gaussian density on `[0, 2π)` sampled at `x`.
pub fn wrapped_gaussian(x: f64, mean: f64, std: f64) -> f64 {
    let var = std * std;
    let reach = (8.0 * std / TAU).ceil() as i64 + 1;
    (-reach..=reach)
        .map(|m| {
            let d = x - mean + TAU * m as f64;
            (-0.5 * d * d / var).exp()
        })
        .sum::<f64>()
        / (TAU * var).sqrt()
}

/// Initial density slab on `grid`, normalized to unit mass.
pub fn initial_density(cfg: &ThetaConfig, grid: &TensorGrid) -> Result<Vec<f64>> {
    let i = &cfg.init;
    let mut slab = Vec::with_capacity(grid.slab_len());
    for &eta in grid.eta_nodes() {
        let g = (-0.5 * ((eta - i.eta_mean) / i.eta_std).powi(2)).exp();
        slab.extend((0..grid.n_x()).map(|k| g * wrapped_gaussian(grid.x(k), i.x_mean, i.x_std)));
    }
    normalize_slab(grid, &mut slab)?;
    Ok(slab)
}

/// Outcome of the benchmark run.
#[derive(Debug, Clone)]
pub struct BenchmarkReport {
    pub run: DescentRun,
    /// `(t, density slab)` at the requested times, under the final control.
    pub snapshots: Vec<(f64, Vec<f64>)>,
}

/// Snapshot times shown for the benchmark.
pub fn default_snapshot_times(cfg: &ThetaConfig) -> Vec<f64> {
    vec![0.0, 0.5, cfg.horizon]
}

/// Runs the Markovian descent from `u⁰ ≡ 0`.
pub fn run_benchmark(
    cfg: &ThetaConfig,
    grid: &TensorGrid,
    options: &DescentOptions,
    snapshot_times: &[f64],
) -> Result<BenchmarkReport> {
    let spec = build_theta_spec(cfg)?;
    let init = initial_density(cfg, grid)?;
    let guess = ControlField::constant(grid, ControlClass::Markovian, 0.0);
    let run = run_algorithm_1(&spec, grid, &init, &guess, options)?;
    let snapshots = snapshot_times
        .iter()
        .map(|&t| {
            let j = grid.nearest_time_index(t);
            (grid.t(j), run.density.slab(j).to_vec())
        })
        .collect();
    Ok(BenchmarkReport { run, snapshots })
}
