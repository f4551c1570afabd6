use serde::Serialize;

use crate::error::{Error, Result};
use crate::montecarlo::{simulate_terminal_cost, Functional, InitialLaw, Policy, SimulationConfig};
use crate::problem::{ControlField, ProblemSpec, TensorGrid};

/// One point of the needle curve `s ↦ E ℓ(γ_s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NeedleCurveSample {
    pub s: f64,
    pub expected_terminal_cost: f64,
    pub std_error: f64,
}

/// Monte-Carlo estimate of `E ℓ(γ_s)`, the terminal cost when paths follow
/// `control_target` on `[0, s)` and `control_ref` on `[s, T]`.
///
/// Every `s` reuses the same seed, so neighbouring values share their noise
/// and differences along the curve are far less noisy than the values.
pub fn evaluate_needle_curve(
    spec: &ProblemSpec,
    grid: &TensorGrid,
    initial: &InitialLaw,
    control_target: &ControlField,
    control_ref: &ControlField,
    s_values: &[f64],
    config: &SimulationConfig,
) -> Result<Vec<NeedleCurveSample>> {
    s_values
        .iter()
        .map(|&s| {
            if !(0.0..=grid.horizon()).contains(&s) {
                return Err(Error::InvalidSimulation(format!(
                    "switch time {s} outside [0, {}]",
                    grid.horizon()
                )));
            }
            let policy = Policy::Switched {
                target: control_target,
                reference: control_ref,
                s,
            };
            let stats = simulate_terminal_cost(spec, grid, policy, initial, config, Functional::Terminal)?;
            Ok(NeedleCurveSample {
                s,
                expected_terminal_cost: stats.mean,
                std_error: stats.std_error,
            })
        })
        .collect()
}

/// `n` uniform switch times on `[0, T]`.
pub fn uniform_switch_times(horizon: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|i| horizon * i as f64 / (n - 1) as f64).collect(),
    }
}
