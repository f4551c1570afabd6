use std::f64::consts::PI;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::descent::DescentOptions;
use crate::error::{Error, Result};
use crate::montecarlo::SimulationConfig;
use crate::problem::{
    ControlClass, ControlSet, Drift, FourierSeries, Penalty, ProblemSpec, RunningCost, TensorGrid,
    TerminalCost,
};
use crate::theta::{self, InitialDensity, ThetaConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    Theta,
    CustomAffine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PenaltyKind {
    None,
    MeasureWeighted,
    DirectL2,
}

/// Drift `a(x) + η·c(x) + b(x)·u` and costs of the custom model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CustomAffine {
    pub base: FourierSeries,
    pub eta_coupling: FourierSeries,
    pub gain: FourierSeries,
    pub terminal: FourierSeries,
    /// State-only running cost; empty means none.
    pub running: FourierSeries,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProblemSection {
    pub model: Model,
    pub horizon: f64,
    pub beta: f64,
    pub alpha: f64,
    pub penalty: PenaltyKind,
    pub x_check: f64,
    pub control_lo: f64,
    pub control_hi: f64,
    pub init: InitialDensity,
    pub custom: Option<CustomAffine>,
}

impl Default for ProblemSection {
    fn default() -> Self {
        let t = ThetaConfig::default();
        Self {
            model: Model::Theta,
            horizon: t.horizon,
            beta: t.beta,
            alpha: t.alpha,
            penalty: PenaltyKind::DirectL2,
            x_check: PI,
            control_lo: -25.0,
            control_hi: 25.0,
            init: InitialDensity::default(),
            custom: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub n_x: usize,
    pub n_eta: usize,
    /// 0 picks the smallest count satisfying the step bound.
    pub n_t: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            n_x: 128,
            n_eta: 16,
            n_t: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlgorithmSection {
    pub class: ControlClass,
    pub epsilon: f64,
    pub max_iters: usize,
    pub guard: bool,
}

impl Default for AlgorithmSection {
    fn default() -> Self {
        let d = DescentOptions::default();
        Self {
            class: ControlClass::Markovian,
            epsilon: d.epsilon,
            max_iters: d.max_iters,
            guard: d.guard,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    pub n_paths: usize,
    pub dt_sim: f64,
    pub seed: u64,
    pub antithetic: bool,
    pub needle_points: usize,
    pub probe_paths: usize,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            n_paths: 10_000,
            dt_sim: 0.01,
            seed: 1,
            antithetic: false,
            needle_points: 33,
            probe_paths: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub directory: PathBuf,
    /// Empty means `0, 0.5, T`.
    pub snapshot_times: Vec<f64>,
    pub control_stride: usize,
    pub binary_densities: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            snapshot_times: Vec::new(),
            control_stride: 1,
            binary_densities: true,
        }
    }
}

/// Parsed configuration file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub problem: ProblemSection,
    pub grid: GridSection,
    pub algorithm: AlgorithmSection,
    pub simulation: SimulationSection,
    pub output: OutputSection,
}

/// Everything a command needs, validated.
#[derive(Debug, Clone)]
pub struct RunPlan {
    pub spec: ProblemSpec,
    pub grid: TensorGrid,
    pub initial: Vec<f64>,
    pub options: DescentOptions,
    pub simulation: SimulationConfig,
    pub needle_points: usize,
    pub probe_paths: usize,
    pub snapshot_times: Vec<f64>,
    pub control_stride: usize,
    pub binary_densities: bool,
    pub output_dir: PathBuf,
}

impl RunConfig {
    /// Parses TOML text; `origin` names the source in messages.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
            match line {
                Some(l) => Error::Config(format!("{origin}:{l}: {}", e.message())),
                None => Error::Config(format!("{origin}: {}", e.message())),
            }
        })?;
        cfg.validate().map_err(|(section, key, msg)| {
            let at = locate(text, section, key).map_or(String::new(), |l| format!(":{l}"));
            Error::Config(format!("{origin}{at}: {section}.{key}: {msg}"))
        })?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    fn validate(&self) -> std::result::Result<(), (&'static str, &'static str, String)> {
        let p = &self.problem;
        let fail = |s: &'static str, k: &'static str, m: String| Err((s, k, m));
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(p.horizon) {
            return fail("problem", "horizon", format!("{} must be positive", p.horizon));
        }
        if !positive(p.beta) {
            return fail("problem", "beta", format!("{} must be positive", p.beta));
        }
        if p.penalty != PenaltyKind::None && !positive(p.alpha) {
            return fail("problem", "alpha", format!("{} must be positive", p.alpha));
        }
        if !p.x_check.is_finite() {
            return fail("problem", "x_check", "must be finite".into());
        }
        if !(p.control_lo.is_finite() && p.control_hi.is_finite()) {
            return fail("problem", "control_lo", "control bounds must be finite".into());
        }
        if p.control_lo > p.control_hi {
            return fail(
                "problem",
                "control_hi",
                format!("{} is below control_lo = {}", p.control_hi, p.control_lo),
            );
        }
        let i = &p.init;
        if !positive(i.x_std) {
            return fail("problem.init", "x_std", format!("{} must be positive", i.x_std));
        }
        if !positive(i.eta_std) {
            return fail("problem.init", "eta_std", format!("{} must be positive", i.eta_std));
        }
        if !(i.eta_min.is_finite() && i.eta_max.is_finite() && i.eta_max >= i.eta_min) {
            return fail("problem.init", "eta_max", "eta range is empty".into());
        }
        if i.eta_max == i.eta_min && self.grid.n_eta != 1 {
            return fail("problem.init", "eta_max", "a point eta range needs grid.n_eta = 1".into());
        }
        match (p.model, &p.custom) {
            (Model::Theta, Some(_)) => {
                return fail("problem", "custom", "only allowed with model = \"custom-affine\"".into())
            }
            (Model::CustomAffine, None) => {
                return fail("problem", "model", "custom-affine needs a [problem.custom] section".into())
            }
            (Model::CustomAffine, Some(c)) => {
                for (key, s) in [
                    ("base", &c.base),
                    ("eta_coupling", &c.eta_coupling),
                    ("gain", &c.gain),
                    ("terminal", &c.terminal),
                    ("running", &c.running),
                ] {
                    if !s.is_finite() {
                        return fail("problem.custom", key, "coefficients must be finite".into());
                    }
                }
            }
            _ => {}
        }

        let g = &self.grid;
        if g.n_x < 4 || !g.n_x.is_power_of_two() {
            return fail("grid", "n_x", format!("{} must be a power of two and at least 4", g.n_x));
        }
        if g.n_eta == 0 {
            return fail("grid", "n_eta", "must be at least 1".into());
        }
        let needed = TensorGrid::stable_time_nodes(g.n_x, p.horizon, p.beta);
        if g.n_t != 0 && g.n_t < needed {
            return fail(
                "grid",
                "n_t",
                format!("{} violates the RK4 step bound; need at least {needed} (or 0 for automatic)", g.n_t),
            );
        }

        let a = &self.algorithm;
        if a.epsilon.is_nan() || a.epsilon <= 0.0 {
            return fail("algorithm", "epsilon", format!("{} must be positive", a.epsilon));
        }
        if a.max_iters == 0 {
            return fail("algorithm", "max_iters", "must be at least 1".into());
        }

        let s = &self.simulation;
        let sim = SimulationConfig {
            n_paths: s.n_paths,
            dt_sim: s.dt_sim,
            seed: s.seed,
            antithetic: s.antithetic,
        };
        if let Err(e) = sim.steps_for(p.horizon) {
            let key = if s.n_paths < 2 || (s.antithetic && s.n_paths % 2 != 0) {
                "n_paths"
            } else {
                "dt_sim"
            };
            return fail("simulation", key, e.to_string());
        }
        if s.probe_paths < 2 {
            return fail("simulation", "probe_paths", "must be at least 2".into());
        }
        if s.needle_points < 2 {
            return fail("simulation", "needle_points", "must be at least 2".into());
        }

        let o = &self.output;
        if let Some(t) = o.snapshot_times.iter().find(|t| !(0.0..=p.horizon).contains(*t)) {
            return fail("output", "snapshot_times", format!("{t} is outside [0, {}]", p.horizon));
        }
        if o.control_stride == 0 {
            return fail("output", "control_stride", "must be at least 1".into());
        }
        Ok(())
    }

    fn penalty(&self) -> Penalty {
        match self.problem.penalty {
            PenaltyKind::None => Penalty::None,
            PenaltyKind::MeasureWeighted => Penalty::MeasureWeighted(self.problem.alpha),
            PenaltyKind::DirectL2 => Penalty::DirectL2(self.problem.alpha),
        }
    }

    fn theta_config(&self) -> ThetaConfig {
        ThetaConfig {
            horizon: self.problem.horizon,
            alpha: self.problem.alpha,
            beta: self.problem.beta,
            x_check: self.problem.x_check,
            init: self.problem.init,
        }
    }

    pub fn build_spec(&self) -> Result<ProblemSpec> {
        let p = &self.problem;
        let builder = match (&p.model, &p.custom) {
            (Model::CustomAffine, Some(c)) => {
                let (base, coupling, gain) = (c.base.clone(), c.eta_coupling.clone(), c.gain.clone());
                let terminal = c.terminal.clone();
                let drift = Drift::autonomous(move |x, eta| base.eval(x) + eta * coupling.eval(x), move |x, _| gain.eval(x));
                let mut b = ProblemSpec::builder(drift, p.beta, TerminalCost::new(move |x| terminal.eval(x)));
                if !c.running.cos.is_empty() || !c.running.sin.is_empty() {
                    let running = c.running.clone();
                    b = b.running_cost(RunningCost::state_only(move |_, x| running.eval(x)));
                }
                b
            }
            _ => ProblemSpec::builder(Drift::theta(), p.beta, TerminalCost::cosine_well(p.x_check)),
        };
        builder
            .penalty(self.penalty())
            .control_set(ControlSet::new(p.control_lo, p.control_hi)?)
            .control_class(self.algorithm.class)
            .build()
    }

    pub fn build_grid(&self) -> Result<TensorGrid> {
        let p = &self.problem;
        let n_t = if self.grid.n_t == 0 {
            TensorGrid::stable_time_nodes(self.grid.n_x, p.horizon, p.beta)
        } else {
            self.grid.n_t
        };
        TensorGrid::with_uniform_eta(self.grid.n_x, n_t, p.horizon, self.grid.n_eta, p.init.eta_min, p.init.eta_max)
    }

    /// Validated run plan; `seed` overrides the configured seed.
    pub fn plan(&self, seed: Option<u64>) -> Result<RunPlan> {
        let spec = self.build_spec()?;
        let grid = self.build_grid()?;
        let initial = theta::initial_density(&self.theta_config(), &grid)?;
        let s = &self.simulation;
        let snapshot_times = if self.output.snapshot_times.is_empty() {
            vec![0.0, 0.5_f64.min(self.problem.horizon), self.problem.horizon]
        } else {
            self.output.snapshot_times.clone()
        };
        Ok(RunPlan {
            spec,
            grid,
            initial,
            options: DescentOptions {
                epsilon: self.algorithm.epsilon,
                max_iters: self.algorithm.max_iters,
                guard: self.algorithm.guard,
            },
            simulation: SimulationConfig {
                n_paths: s.n_paths,
                dt_sim: s.dt_sim,
                seed: seed.unwrap_or(s.seed),
                antithetic: s.antithetic,
            },
            needle_points: s.needle_points,
            probe_paths: s.probe_paths,
            snapshot_times,
            control_stride: self.output.control_stride,
            binary_densities: self.output.binary_densities,
            output_dir: self.output.directory.clone(),
        })
    }
}

/// 1-based line of `key` inside `[section]`, if written explicitly.
fn locate(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(h) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = h.trim().to_string();
            continue;
        }
        let Some((k, _)) = line.split_once('=') else { continue };
        let k = k.trim();
        let dotted = if current.is_empty() { k.to_string() } else { format!("{current}.{k}") };
        if dotted == format!("{section}.{key}") {
            return Some(n + 1);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_theta_defaults() {
        let cfg = RunConfig::parse("", "t.toml").unwrap();
        assert_eq!(cfg, RunConfig::default());
        let plan = cfg.plan(None).unwrap();
        assert_eq!(plan.grid.n_x(), 128);
        assert_eq!(plan.grid.n_eta(), 16);
        assert_eq!(plan.spec.penalty(), Penalty::DirectL2(1.0));
    }

    #[test]
    fn negative_beta_names_field_and_line() {
        let text = "[grid]\nn_x = 64\n\n[problem]\nhorizon = 2.0\nbeta = -0.5\n";
        let err = RunConfig::parse(text, "bad.toml").unwrap_err().to_string();
        assert!(err.contains("bad.toml:6"), "{err}");
        assert!(err.contains("problem.beta"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::parse("[grid]\nn_z = 3\n", "x.toml").unwrap_err().to_string();
        assert!(err.contains("x.toml:2"), "{err}");
        assert!(err.contains("n_z"), "{err}");
    }

    #[test]
    fn round_trip_preserves_plan() {
        let text = "[problem]\nhorizon = 1.5\nbeta = 0.4\n[algorithm]\nclass = \"open-loop\"\nepsilon = inf\n[simulation]\nseed = 9\ndt_sim = 0.05\n";
        let cfg = RunConfig::parse(text, "a").unwrap();
        let again = RunConfig::parse(&cfg.to_toml(), "b").unwrap();
        assert_eq!(cfg, again);
        let (p, q) = (cfg.plan(None).unwrap(), again.plan(None).unwrap());
        assert_eq!(p.grid, q.grid);
        assert_eq!(p.initial, q.initial);
        assert_eq!(p.options, q.options);
        assert_eq!(p.simulation, q.simulation);
    }

    #[test]
    fn custom_model_builds_theta_equivalent_drift() {
        let text = "[problem]\nmodel = \"custom-affine\"\n[problem.custom]\nbase = { cos = [1.0, -1.0] }\neta_coupling = { cos = [1.0, 1.0] }\ngain = { cos = [1.0, 1.0] }\nterminal = { cos = [1.0, 1.0] }\n";
        let cfg = RunConfig::parse(text, "c").unwrap();
        let spec = cfg.build_spec().unwrap();
        let theta = Drift::theta();
        for &(x, eta, u) in &[(0.3, 0.5, -1.0), (2.0, -1.0, 3.0)] {
            assert!((spec.drift().eval(0.0, x, eta, u) - theta.eval(0.0, x, eta, u)).abs() < 1e-14);
        }
        assert!((spec.terminal_cost().value(PI)).abs() < 1e-15);
    }

    #[test]
    fn unstable_time_grid_is_a_config_error() {
        let err = RunConfig::parse("[grid]\nn_t = 100\n", "g").unwrap_err().to_string();
        assert!(err.contains("g:2"), "{err}");
        assert!(err.contains("grid.n_t"), "{err}");
    }

    #[test]
    fn seed_override() {
        let plan = RunConfig::default().plan(Some(77)).unwrap();
        assert_eq!(plan.simulation.seed, 77);
    }
}
