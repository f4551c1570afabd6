//! Euler–Maruyama path simulation on the circle, used as an independent
//! oracle for the PDE solvers.
//!
//! Randomness comes from a seeded ChaCha8 generator; path batches use
//! disjoint streams of the same seed, so results depend only on the seed and
//! the configuration.

mod stats;

pub use stats::{PathBatchStats, RunningStats};

use std::f64::consts::TAU;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::problem::{ControlField, Penalty, ProblemSpec, TensorGrid};

/// Paths per RNG stream.
const BATCH: usize = 4096;

/// Sampling parameters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub n_paths: usize,
    pub dt_sim: f64,
    pub seed: u64,
    #[serde(default)]
    pub antithetic: bool,
}

impl SimulationConfig {
    pub fn new(n_paths: usize, dt_sim: f64, seed: u64) -> Self {
        Self {
            n_paths,
            dt_sim,
            seed,
            antithetic: false,
        }
    }

    pub fn with_antithetic(mut self, on: bool) -> Self {
        self.antithetic = on;
        self
    }

    /// Number of Euler steps covering `span`; `dt_sim` must divide it.
    pub fn steps_for(&self, span: f64) -> Result<usize> {
        if self.n_paths < 2 {
            return Err(Error::InvalidSimulation(format!(
                "n_paths = {} must be at least 2",
                self.n_paths
            )));
        }
        if self.antithetic && self.n_paths % 2 != 0 {
            return Err(Error::InvalidSimulation(format!(
                "antithetic sampling needs an even n_paths, got {}",
                self.n_paths
            )));
        }
        if !(self.dt_sim.is_finite() && self.dt_sim > 0.0) {
            return Err(Error::InvalidSimulation(format!(
                "dt_sim = {} must be positive",
                self.dt_sim
            )));
        }
        let n = (span / self.dt_sim).round();
        if n < 1.0 || (n * self.dt_sim - span).abs() > 1e-12 * span.max(1.0) {
            return Err(Error::InvalidSimulation(format!(
                "dt_sim = {} does not divide the interval length {span}",
                self.dt_sim
            )));
        }
        Ok(n as usize)
    }
}

/// Law of the starting state `(X_0, η)`.
#[derive(Debug, Clone)]
pub enum InitialLaw {
    Point { x: f64, eta: f64 },
    /// Density slab on a grid: an (x-cell, η-node) pair is drawn with
    /// probability ρ·Δx·w_η (negative undershoot clamped), then x is spread
    /// uniformly over the cell.
    Density { cells: Vec<(f64, f64)>, cumulative: Vec<f64>, dx: f64 },
}

impl InitialLaw {
    pub fn point(x: f64, eta: f64) -> Self {
        InitialLaw::Point { x, eta }
    }

    pub fn from_density(grid: &TensorGrid, slab: &[f64]) -> Result<Self> {
        if slab.len() != grid.slab_len() {
            return Err(Error::ShapeMismatch(format!(
                "density slab has {} values, grid needs {}",
                slab.len(),
                grid.slab_len()
            )));
        }
        let n_x = grid.n_x();
        let mut cells = Vec::with_capacity(slab.len());
        let mut cumulative = Vec::with_capacity(slab.len());
        let mut acc = 0.0;
        for (e, (&eta, &w)) in grid.eta_nodes().iter().zip(grid.eta_weights()).enumerate() {
            for i in 0..n_x {
                acc += slab[e * n_x + i].max(0.0) * w * grid.dx();
                cells.push((grid.x(i), eta));
                cumulative.push(acc);
            }
        }
        if !(acc.is_finite() && acc > 0.0) {
            return Err(Error::InvalidSimulation("initial density has no mass".into()));
        }
        cumulative.iter_mut().for_each(|c| *c /= acc);
        Ok(InitialLaw::Density { cells, cumulative, dx: grid.dx() })
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> (f64, f64) {
        match self {
            InitialLaw::Point { x, eta } => (*x, *eta),
            InitialLaw::Density { cells, cumulative, dx } => {
                let u: f64 = rng.gen();
                let k = cumulative.partition_point(|c| *c < u).min(cells.len() - 1);
                let (x, eta) = cells[k];
                let jitter: f64 = rng.gen_range(-0.5..0.5);
                (wrap(x + jitter * dx), eta)
            }
        }
    }
}

/// Maps into `[0, 2π)`.
pub fn wrap(x: f64) -> f64 {
    let y = x.rem_euclid(TAU);
    if y >= TAU {
        0.0
    } else {
        y
    }
}

/// Scalar SDE `dX = a(t, X, η) dt + σ dW` with a path functional
/// `g(X_T) + ∫ c(t, X, η) dt`.
pub struct PathModel<'a> {
    pub drift: &'a (dyn Fn(f64, f64, f64) -> f64 + Sync),
    pub sigma: f64,
    pub terminal: &'a (dyn Fn(f64) -> f64 + Sync),
    pub running: Option<&'a (dyn Fn(f64, f64, f64) -> f64 + Sync)>,
    /// Wrap the state into `[0, 2π)` after every step.
    pub periodic: bool,
}

/// Simulates `config.n_paths` paths on `[t0, t1]` and returns statistics of
/// the path functional. `stream` separates independent calls sharing a seed.
pub fn simulate_paths(
    model: &PathModel<'_>,
    initial: &InitialLaw,
    t0: f64,
    t1: f64,
    config: &SimulationConfig,
    stream: u32,
) -> Result<PathBatchStats> {
    let n_steps = config.steps_for(t1 - t0)?;
    let dt = config.dt_sim;
    let sq = model.sigma * dt.sqrt();
    let samples = if config.antithetic { config.n_paths / 2 } else { config.n_paths };
    let mut total = RunningStats::default();
    let mut noise = vec![0.0; n_steps];
    let mut done = 0;
    let mut batch = 0u64;
    while done < samples {
        let len = BATCH.min(samples - done);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(((stream as u64) << 32) | batch);
        let mut stats = RunningStats::default();
        for _ in 0..len {
            let start = initial.sample(&mut rng);
            for z in noise.iter_mut() {
                *z = rng.sample(StandardNormal);
            }
            let mut value = run_path(model, start, t0, dt, sq, &noise, 1.0)?;
            if config.antithetic {
                value = 0.5 * (value + run_path(model, start, t0, dt, sq, &noise, -1.0)?);
            }
            stats.push(value);
        }
        total.merge(&stats);
        done += len;
        batch += 1;
    }
    Ok(total.finish())
}

fn run_path(
    model: &PathModel<'_>,
    (x0, eta): (f64, f64),
    t0: f64,
    dt: f64,
    sq: f64,
    noise: &[f64],
    sign: f64,
) -> Result<f64> {
    let mut x = x0;
    let mut integral = 0.0;
    for (k, z) in noise.iter().enumerate() {
        let t = t0 + dt * k as f64;
        if let Some(c) = model.running {
            integral += c(t, x, eta) * dt;
        }
        x += model.drift(t, x, eta) * dt + sign * sq * z;
        if model.periodic {
            x = wrap(x);
        }
        if !x.is_finite() {
            return Err(Error::NonFinitePath { time: t + dt });
        }
    }
    Ok((model.terminal)(x) + integral)
}

impl PathModel<'_> {
    fn drift(&self, t: f64, x: f64, eta: f64) -> f64 {
        (self.drift)(t, x, eta)
    }
}

/// Reads a grid control at arbitrary `(t, x)`: left-constant in t, linear in
/// x with periodic wrap.
#[derive(Debug, Clone, Copy)]
pub struct ControlLookup<'a> {
    grid: &'a TensorGrid,
    control: &'a ControlField,
}

impl<'a> ControlLookup<'a> {
    pub fn new(grid: &'a TensorGrid, control: &'a ControlField) -> Result<Self> {
        control.check_grid(grid)?;
        Ok(Self { grid, control })
    }

    pub fn value(&self, t: f64, x: f64) -> f64 {
        // tiny slack keeps t_j itself on node j despite rounding
        let j = ((t / self.grid.dt() + 1e-9).floor().max(0.0) as usize).min(self.grid.n_t() - 2);
        match self.control {
            ControlField::OpenLoop { values } => values[j],
            ControlField::Markovian { n_x, values } => {
                let s = wrap(x) / self.grid.dx();
                let i = (s.floor() as usize).min(n_x - 1);
                let frac = s - i as f64;
                let row = &values[j * n_x..(j + 1) * n_x];
                (1.0 - frac) * row[i] + frac * row[(i + 1) % n_x]
            }
        }
    }
}

/// Control used along simulated paths.
#[derive(Debug, Clone, Copy)]
pub enum Policy<'a> {
    Fixed(&'a ControlField),
    /// `target` on `[0, s)`, `reference` on `[s, T]`.
    Switched {
        target: &'a ControlField,
        reference: &'a ControlField,
        s: f64,
    },
}

/// Which path functional to estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Functional {
    /// `ℓ(X_T)`.
    Terminal,
    /// `ℓ(X_T) + ∫ R + (α/2)u² dt`, plus the density-free L2 penalty of the
    /// control under [`Penalty::DirectL2`].
    Total,
}

struct PolicyLookup<'a> {
    first: ControlLookup<'a>,
    second: ControlLookup<'a>,
    s: f64,
}

impl PolicyLookup<'_> {
    fn value(&self, t: f64, x: f64) -> f64 {
        if t < self.s {
            self.first.value(t, x)
        } else {
            self.second.value(t, x)
        }
    }
}

fn policy_lookup<'a>(grid: &'a TensorGrid, policy: Policy<'a>) -> Result<PolicyLookup<'a>> {
    Ok(match policy {
        Policy::Fixed(c) => PolicyLookup {
            first: ControlLookup::new(grid, c)?,
            second: ControlLookup::new(grid, c)?,
            s: f64::INFINITY,
        },
        Policy::Switched { target, reference, s } => {
            if !(0.0..=grid.horizon()).contains(&s) {
                return Err(Error::InvalidSimulation(format!(
                    "switch time {s} outside [0, {}]",
                    grid.horizon()
                )));
            }
            // switching exactly at the horizon means the target runs throughout
            let s = if s >= grid.horizon() { f64::INFINITY } else { s };
            PolicyLookup {
                first: ControlLookup::new(grid, target)?,
                second: ControlLookup::new(grid, reference)?,
                s,
            }
        }
    })
}

/// Direct L2 penalty of a grid control (density-free).
fn direct_penalty(spec: &ProblemSpec, grid: &TensorGrid, control: &ControlField) -> f64 {
    match spec.penalty() {
        Penalty::DirectL2(a) => {
            let n_x = grid.n_x();
            let open = matches!(control, ControlField::OpenLoop { .. });
            (0..grid.n_t() - 1)
                .map(|j| {
                    let w = control.slab(j, n_x);
                    if open {
                        w[0] * w[0]
                    } else {
                        w.iter().map(|v| v * v).sum::<f64>() * grid.dx()
                    }
                })
                .sum::<f64>()
                * 0.5
                * a
                * grid.dt()
        }
        _ => 0.0,
    }
}

fn spec_model_parts<'a>(
    spec: &'a ProblemSpec,
    lookup: &'a PolicyLookup<'a>,
) -> (
    impl Fn(f64, f64, f64) -> f64 + Sync + 'a,
    impl Fn(f64) -> f64 + Sync + 'a,
    impl Fn(f64, f64, f64) -> f64 + Sync + 'a,
) {
    let drift = move |t: f64, x: f64, eta: f64| spec.drift().eval(t, x, eta, lookup.value(t, x));
    let terminal = move |x: f64| spec.terminal_cost().value(x);
    let running = move |t: f64, x: f64, _eta: f64| spec.weighted_running(t, x, lookup.value(t, x));
    (drift, terminal, running)
}

/// Monte-Carlo estimate of the objective (or its terminal part) under a
/// policy, starting from `initial` at time 0.
pub fn simulate_terminal_cost(
    spec: &ProblemSpec,
    grid: &TensorGrid,
    policy: Policy<'_>,
    initial: &InitialLaw,
    config: &SimulationConfig,
    functional: Functional,
) -> Result<PathBatchStats> {
    let lookup = policy_lookup(grid, policy)?;
    let (drift, terminal, running) = spec_model_parts(spec, &lookup);
    let with_running = functional == Functional::Total && spec.has_weighted_running();
    let model = PathModel {
        drift: &drift,
        sigma: (2.0 * spec.beta()).sqrt(),
        terminal: &terminal,
        running: if with_running { Some(&running) } else { None },
        periodic: true,
    };
    let mut stats = simulate_paths(&model, initial, 0.0, grid.horizon(), config, 0)?;
    if functional == Functional::Total {
        stats.mean += match policy {
            Policy::Fixed(c) => direct_penalty(spec, grid, c),
            Policy::Switched { .. } => 0.0,
        };
    }
    Ok(stats)
}

/// Starting point of a Feynman-Kac probe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Probe {
    pub t: f64,
    pub x: f64,
    pub eta: f64,
}

/// Feynman-Kac estimates of the cost-to-go
/// `p_t(x, η) = E[ℓ(X_T) + ∫_t^T q_s ds | X_t = x]` under `control_ref`,
/// `q` the density-weighted running cost. Probe `k` uses RNG stream `k`.
pub fn feynman_kac_probe(
    spec: &ProblemSpec,
    grid: &TensorGrid,
    control_ref: &ControlField,
    probes: &[Probe],
    config: &SimulationConfig,
) -> Result<Vec<PathBatchStats>> {
    let lookup = policy_lookup(grid, Policy::Fixed(control_ref))?;
    let (drift, terminal, running) = spec_model_parts(spec, &lookup);
    let model = PathModel {
        drift: &drift,
        sigma: (2.0 * spec.beta()).sqrt(),
        terminal: &terminal,
        running: if spec.has_weighted_running() { Some(&running) } else { None },
        periodic: true,
    };
    probes
        .iter()
        .enumerate()
        .map(|(k, p)| {
            if !(0.0..grid.horizon()).contains(&p.t) {
                return Err(Error::InvalidSimulation(format!(
                    "probe time {} outside [0, {})",
                    p.t,
                    grid.horizon()
                )));
            }
            simulate_paths(&model, &InitialLaw::point(p.x, p.eta), p.t, grid.horizon(), config, k as u32)
        })
        .collect()
}
