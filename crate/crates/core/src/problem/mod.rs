//! Problem data: drift, diffusion, costs, control constraints and penalty,
//! together with the Hamiltonian algebra shared by all solvers.
//!
//! The drift is control-affine, `f(t, x, η, υ) = a(t, x, η) + b(t, x, η)·υ`,
//! and the running cost is quadratic in the control,
//! `R(t, x, υ) = r₀(t, x) + r₁(t, x)·υ + ½·r₂(t, x)·υ²`. Both restrictions
//! keep every pointwise minimization in closed form.

pub(crate) mod cost;
mod fields;
mod grid;

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cost::{evaluate_cost, CostReport};
pub use fields::{
    normalize_slab, slab_inner, slab_mass, AdjointField, ControlClass, ControlField,
    DensityField, MASS_TOLERANCE,
};
pub use grid::{max_stable_dt, TensorGrid};

type TimeSpaceParam = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;
type TimeSpace = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Control-affine drift `a(t, x, η) + b(t, x, η)·υ`.
#[derive(Clone)]
pub struct Drift {
    base: TimeSpaceParam,
    gain: TimeSpaceParam,
    autonomous: bool,
}

impl Drift {
    /// Time-dependent drift from its control-free part and control gain.
    pub fn new(
        base: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
        gain: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            base: Arc::new(base),
            gain: Arc::new(gain),
            autonomous: false,
        }
    }

    /// Drift with no explicit time dependence; `base(x, η)`, `gain(x, η)`.
    pub fn autonomous(
        base: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        gain: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            base: Arc::new(move |_, x, eta| base(x, eta)),
            gain: Arc::new(move |_, x, eta| gain(x, eta)),
            autonomous: true,
        }
    }

    pub fn zero() -> Self {
        Self::autonomous(|_, _| 0.0, |_, _| 0.0)
    }

    /// Theta neuron: `(1 − cos x) + (1 + cos x)(η + υ)`.
    pub fn theta() -> Self {
        Self::autonomous(
            |x, eta| (1.0 - x.cos()) + (1.0 + x.cos()) * eta,
            |x, _| 1.0 + x.cos(),
        )
    }

    pub fn base(&self, t: f64, x: f64, eta: f64) -> f64 {
        (self.base)(t, x, eta)
    }

    /// ∂f/∂υ.
    pub fn gain(&self, t: f64, x: f64, eta: f64) -> f64 {
        (self.gain)(t, x, eta)
    }

    pub fn eval(&self, t: f64, x: f64, eta: f64, u: f64) -> f64 {
        self.base(t, x, eta) + self.gain(t, x, eta) * u
    }

    pub fn is_autonomous(&self) -> bool {
        self.autonomous
    }
}

impl fmt::Debug for Drift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Drift")
            .field("autonomous", &self.autonomous)
            .finish_non_exhaustive()
    }
}

/// Truncated real Fourier series `Σ_k a_k cos(kx) + b_k sin(kx)`, k from 0.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FourierSeries {
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl FourierSeries {
    pub fn new(cos: Vec<f64>, sin: Vec<f64>) -> Self {
        Self { cos, sin }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let c: f64 = self.cos.iter().enumerate().map(|(k, a)| a * (k as f64 * x).cos()).sum();
        let s: f64 = self.sin.iter().enumerate().map(|(k, b)| b * (k as f64 * x).sin()).sum();
        c + s
    }

    /// Upper bound of |f| from the coefficients.
    pub fn sup_bound(&self) -> f64 {
        self.cos.iter().chain(&self.sin).map(|v| v.abs()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.cos.iter().chain(&self.sin).all(|v| v.is_finite())
    }
}

/// Running cost `r₀(t, x) + r₁(t, x)·υ + ½·r₂(t, x)·υ²` with `r₂ ≥ 0`.
#[derive(Clone)]
pub struct RunningCost {
    state: TimeSpace,
    linear: TimeSpace,
    quadratic: TimeSpace,
}

impl RunningCost {
    pub fn new(
        state: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        linear: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        quadratic: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            state: Arc::new(state),
            linear: Arc::new(linear),
            quadratic: Arc::new(quadratic),
        }
    }

    /// Control-independent running cost.
    pub fn state_only(state: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(state, |_, _| 0.0, |_, _| 0.0)
    }

    pub fn value(&self, t: f64, x: f64, u: f64) -> f64 {
        (self.state)(t, x) + (self.linear)(t, x) * u + 0.5 * (self.quadratic)(t, x) * u * u
    }

    pub fn linear(&self, t: f64, x: f64) -> f64 {
        (self.linear)(t, x)
    }

    pub fn quadratic(&self, t: f64, x: f64) -> f64 {
        (self.quadratic)(t, x)
    }
}

impl fmt::Debug for RunningCost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RunningCost").finish_non_exhaustive()
    }
}

/// Terminal cost ℓ(x) on the circle.
#[derive(Clone)]
pub struct TerminalCost(Arc<dyn Fn(f64) -> f64 + Send + Sync>);

impl TerminalCost {
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }

    pub fn constant(c: f64) -> Self {
        Self::new(move |_| c)
    }

    /// `1 − cos(x − target)`.
    pub fn cosine_well(target: f64) -> Self {
        Self::new(move |x| 1.0 - (x - target).cos())
    }

    /// Squared wrapped distance `d(x, center)²`, blended into the constant
    /// π² over the last `blend` radians before the antipode so that it stays
    /// C² on the circle. Equal to `(x − center)²` for `|x − center| ≤ π − blend`.
    pub fn periodic_quadratic(center: f64, blend: f64) -> Self {
        let blend = blend.clamp(1e-3, PI);
        Self::new(move |x| {
            let y = (x - center + PI).rem_euclid(2.0 * PI) - PI;
            let s = ((y.abs() - (PI - blend)) / blend).clamp(0.0, 1.0);
            let chi = s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
            y * y * (1.0 - chi) + PI * PI * chi
        })
    }

    pub fn value(&self, x: f64) -> f64 {
        (self.0)(x)
    }

    /// Largest |ℓ'| estimated by differences on a fine periodic sample.
    pub fn lipschitz_estimate(&self) -> f64 {
        let n = 4096;
        let h = 2.0 * PI / n as f64;
        (0..n)
            .map(|i| {
                let x = h * i as f64;
                ((self.value(x + h) - self.value(x)) / h).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Finite-difference probe for twice-differentiability on the circle.
    ///
    /// Second differences of a C² function converge under refinement; at a
    /// kink or jump they grow like 1/h. Returns the max second difference on
    /// the finer sample.
    pub fn smoothness_probe(&self) -> Result<f64> {
        let second = |n: usize| {
            let h = 2.0 * PI / n as f64;
            let mut worst: f64 = 0.0;
            for i in 0..n {
                let x = h * i as f64;
                let d2 = (self.value(x + h) - 2.0 * self.value(x) + self.value(x - h)) / (h * h);
                if !d2.is_finite() {
                    return f64::INFINITY;
                }
                worst = worst.max(d2.abs());
            }
            worst
        };
        let coarse = second(1024);
        let fine = second(4096);
        if !fine.is_finite() || fine > 2.0 * coarse + 1.0 {
            return Err(Error::InvalidProblem(format!(
                "terminal cost is not twice differentiable (second differences {coarse:.3e} -> {fine:.3e})"
            )));
        }
        Ok(fine)
    }
}

impl fmt::Debug for TerminalCost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("TerminalCost")
    }
}

/// Admissible control values `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlSet {
    lo: f64,
    hi: f64,
}

impl ControlSet {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::InvalidProblem(format!(
                "control set [{lo}, {hi}] is empty or unbounded"
            )));
        }
        Ok(Self { lo, hi })
    }

    /// Large box standing in for an unconstrained penalized problem.
    pub fn penalized_default() -> Self {
        Self { lo: -25.0, hi: 25.0 }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lo, self.hi)
    }

    /// Admissible value of smallest magnitude, the smaller one on a tie.
    pub fn tie_break(&self) -> f64 {
        if self.contains(0.0) {
            0.0
        } else if self.lo > 0.0 {
            self.lo
        } else {
            self.hi
        }
    }

    /// Minimizer of `½·q·υ² + a·υ` over the set, `q ≥ 0`.
    pub fn minimize_quadratic(&self, q: f64, a: f64) -> f64 {
        if q > 0.0 {
            return self.clamp(-a / q);
        }
        if a > 0.0 {
            self.lo
        } else if a < 0.0 {
            self.hi
        } else {
            self.tie_break()
        }
    }
}

/// Control penalty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "alpha", rename_all = "kebab-case")]
pub enum Penalty {
    None,
    /// `E^μ[(α/2)|υ|²]`, a density-weighted running cost.
    MeasureWeighted(f64),
    /// `(α/2)∫‖w_t‖²_{L2} dt`, independent of the density.
    DirectL2(f64),
}

impl Penalty {
    pub fn alpha(&self) -> Option<f64> {
        match self {
            Penalty::None => None,
            Penalty::MeasureWeighted(a) | Penalty::DirectL2(a) => Some(*a),
        }
    }
}

/// Full problem data.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    drift: Drift,
    beta: f64,
    terminal_cost: TerminalCost,
    running_cost: Option<RunningCost>,
    control_set: ControlSet,
    penalty: Penalty,
    control_class: ControlClass,
}

/// Builder for [`ProblemSpec`]; `build` validates every invariant.
#[derive(Debug, Clone)]
pub struct ProblemBuilder {
    spec: ProblemSpec,
}

impl ProblemBuilder {
    pub fn running_cost(mut self, r: RunningCost) -> Self {
        self.spec.running_cost = Some(r);
        self
    }

    pub fn control_set(mut self, set: ControlSet) -> Self {
        self.spec.control_set = set;
        self
    }

    pub fn penalty(mut self, penalty: Penalty) -> Self {
        self.spec.penalty = penalty;
        self
    }

    pub fn control_class(mut self, class: ControlClass) -> Self {
        self.spec.control_class = class;
        self
    }

    pub fn build(self) -> Result<ProblemSpec> {
        let s = self.spec;
        if !(s.beta.is_finite() && s.beta > 0.0) {
            return Err(Error::InvalidProblem(format!("beta = {} must be positive", s.beta)));
        }
        if let Some(a) = s.penalty.alpha() {
            if !(a.is_finite() && a > 0.0) {
                return Err(Error::InvalidProblem(format!("alpha = {a} must be positive")));
            }
        }
        s.terminal_cost.smoothness_probe()?;
        Ok(s)
    }
}

impl ProblemSpec {
    /// Starts a problem with `U = [−25, 25]`, no penalty, Markovian class.
    pub fn builder(drift: Drift, beta: f64, terminal_cost: TerminalCost) -> ProblemBuilder {
        ProblemBuilder {
            spec: ProblemSpec {
                drift,
                beta,
                terminal_cost,
                running_cost: None,
                control_set: ControlSet::penalized_default(),
                penalty: Penalty::None,
                control_class: ControlClass::Markovian,
            },
        }
    }

    pub fn drift(&self) -> &Drift {
        &self.drift
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn terminal_cost(&self) -> &TerminalCost {
        &self.terminal_cost
    }

    pub fn running_cost(&self) -> Option<&RunningCost> {
        self.running_cost.as_ref()
    }

    pub fn control_set(&self) -> &ControlSet {
        &self.control_set
    }

    pub fn penalty(&self) -> Penalty {
        self.penalty
    }

    pub fn control_class(&self) -> ControlClass {
        self.control_class
    }

    /// Same problem with another control class.
    pub fn with_control_class(&self, class: ControlClass) -> Self {
        Self {
            control_class: class,
            ..self.clone()
        }
    }

    /// Same problem with another penalty.
    pub fn with_penalty(&self, penalty: Penalty) -> Result<Self> {
        ProblemBuilder {
            spec: Self {
                penalty,
                ..self.clone()
            },
        }
        .build()
    }

    /// Density-weighted running cost actually integrated against ρ:
    /// `R(t, x, υ)` plus `(α/2)υ²` under [`Penalty::MeasureWeighted`].
    pub fn weighted_running(&self, t: f64, x: f64, u: f64) -> f64 {
        let r = self.running_cost.as_ref().map_or(0.0, |r| r.value(t, x, u));
        match self.penalty {
            Penalty::MeasureWeighted(a) => r + 0.5 * a * u * u,
            _ => r,
        }
    }

    /// True when the backward equation has a source term.
    pub fn has_weighted_running(&self) -> bool {
        self.running_cost.is_some() || matches!(self.penalty, Penalty::MeasureWeighted(_))
    }
}

/// Hamilton-Pontryagin function `ψ·f(t, x, η, υ) + R(t, x, υ)`.
pub fn hamiltonian(spec: &ProblemSpec, t: f64, x: f64, eta: f64, psi: f64, upsilon: f64) -> f64 {
    let h = psi * spec.drift.eval(t, x, eta, upsilon);
    match &spec.running_cost {
        Some(r) => h + r.value(t, x, upsilon),
        None => h,
    }
}

/// Minimizer of the pointwise penalized Hamiltonian given the aggregated
/// coefficient of υ.
///
/// `eta_aggregate` is the coefficient of υ in the objective per unit x (or,
/// for [`Penalty::MeasureWeighted`], per unit mass): the penalty then
/// contributes `(α/2)υ²` and the minimizer is `clamp(−eta_aggregate/α)`.
/// Without a penalty the objective is affine and the minimizer bang-bang.
pub fn argmin_hamiltonian_pointwise(spec: &ProblemSpec, eta_aggregate: f64) -> f64 {
    let q = spec.penalty.alpha().unwrap_or(0.0);
    spec.control_set.minimize_quadratic(q, eta_aggregate)
}

/// Coefficients of the x-pointwise objective `½·q·υ² + a·υ` at one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeObjective {
    pub quadratic: f64,
    pub linear: f64,
}

impl NodeObjective {
    /// Aggregates over η at node `(t, x)`.
    ///
    /// `psi[e]` is ∂ₓp̄ and `rho[e]` the density at η-node `e`. Without a
    /// density the η-weights alone are used (normalized to unit mass).
    pub fn aggregate(
        spec: &ProblemSpec,
        grid: &TensorGrid,
        t: f64,
        x: f64,
        psi: impl Fn(usize) -> f64,
        rho: Option<&dyn Fn(usize) -> f64>,
    ) -> Result<Self> {
        let weights = grid.eta_weights();
        let total_w: f64 = weights.iter().sum();
        let (r1, r2) = spec
            .running_cost
            .as_ref()
            .map_or((0.0, 0.0), |r| (r.linear(t, x), r.quadratic(t, x)));
        let mut linear = 0.0;
        let mut mass = 0.0;
        for (e, (&eta, &w)) in grid.eta_nodes().iter().zip(weights).enumerate() {
            let m = match rho {
                Some(rho) => w * rho(e),
                None => w / total_w,
            };
            linear += m * (spec.drift.gain(t, x, eta) * psi(e) + r1);
            mass += m;
        }
        let mut quadratic = mass * r2;
        match spec.penalty {
            Penalty::None => {}
            Penalty::MeasureWeighted(a) => quadratic += a * mass,
            Penalty::DirectL2(a) => {
                if rho.is_none() {
                    return Err(Error::MissingDensity);
                }
                quadratic += a;
            }
        }
        Ok(Self { quadratic, linear })
    }

    pub fn argmin(&self, set: &ControlSet) -> f64 {
        // Nodes without mass carry no information about the objective.
        let q = if self.quadratic.abs() < 1e-300 { 0.0 } else { self.quadratic };
        set.minimize_quadratic(q.max(0.0), self.linear)
    }

    pub fn value(&self, v: f64) -> f64 {
        0.5 * self.quadratic * v * v + self.linear * v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn theta_spec(penalty: Penalty, set: ControlSet) -> ProblemSpec {
        ProblemSpec::builder(Drift::theta(), 0.5, TerminalCost::cosine_well(PI))
            .penalty(penalty)
            .control_set(set)
            .build()
            .unwrap()
    }

    #[test]
    fn periodic_quadratic_is_exact_in_the_bulk_and_smooth() {
        let l = TerminalCost::periodic_quadratic(PI, 0.5);
        for &x in &[PI, PI - 1.0, PI + 2.5, 0.7] {
            assert!((l.value(x) - (x - PI).powi(2)).abs() < 1e-13, "x = {x}");
        }
        assert!((l.value(0.0) - PI * PI).abs() < 1e-12);
        assert!((l.value(0.1) - l.value(2.0 * PI - 0.1)).abs() < 1e-12);
        assert!(l.smoothness_probe().is_ok());
        let kinked = TerminalCost::new(|x: f64| (x.rem_euclid(2.0 * PI) - PI).powi(2));
        assert!(kinked.smoothness_probe().is_err());
    }

    #[test]
    fn fourier_series_values() {
        let f = FourierSeries::new(vec![1.0, -1.0, 0.5], vec![0.0, 2.0]);
        let x = 0.7_f64;
        let direct = 1.0 - x.cos() + 0.5 * (2.0 * x).cos() + 2.0 * x.sin();
        assert!((f.eval(x) - direct).abs() < 1e-15);
        assert_eq!(f.sup_bound(), 4.5);
        assert_eq!(FourierSeries::default().eval(1.0), 0.0);
        assert!(!FourierSeries::new(vec![f64::NAN], vec![]).is_finite());
    }

    #[test]
    fn hamiltonian_zero_drift() {
        let spec = ProblemSpec::builder(Drift::zero(), 1.0, TerminalCost::constant(0.0))
            .build()
            .unwrap();
        assert_eq!(hamiltonian(&spec, 0.3, 1.0, 0.2, 7.0, 3.0), 0.0);
    }

    #[test]
    fn hamiltonian_theta_values() {
        let spec = theta_spec(Penalty::None, ControlSet::penalized_default());
        let h = hamiltonian(&spec, 0.0, PI, 0.0, 1.0, 0.0);
        assert!((h - 2.0).abs() < 1e-15);
        let h = hamiltonian(&spec, 0.0, 0.0, 0.5, 2.0, 1.0);
        assert!((h - 6.0).abs() < 1e-15);
    }

    #[test]
    fn hamiltonian_bolza_adds_running_cost() {
        let plain = theta_spec(Penalty::None, ControlSet::penalized_default());
        let bolza = ProblemSpec::builder(Drift::theta(), 0.5, TerminalCost::cosine_well(PI))
            .running_cost(RunningCost::new(|t, x| t + x.sin(), |_, x| x.cos(), |_, _| 2.0))
            .build()
            .unwrap();
        let r = bolza.running_cost().unwrap();
        for &(t, x, eta, psi, u) in &[(0.1, 0.2, 0.3, 0.4, 0.5), (1.0, 4.0, -1.0, 2.0, -3.0)] {
            let d = hamiltonian(&bolza, t, x, eta, psi, u) - hamiltonian(&plain, t, x, eta, psi, u);
            assert!((d - r.value(t, x, u)).abs() < 1e-14);
        }
    }

    #[test]
    fn argmin_examples() {
        let none = theta_spec(Penalty::None, ControlSet::new(-1.0, 1.0).unwrap());
        assert_eq!(argmin_hamiltonian_pointwise(&none, 0.0), 0.0);
        assert_eq!(argmin_hamiltonian_pointwise(&none, 2.0), -1.0);
        assert_eq!(argmin_hamiltonian_pointwise(&none, -2.0), 1.0);
        let wide = theta_spec(Penalty::DirectL2(1.0), ControlSet::new(-10.0, 10.0).unwrap());
        assert_eq!(argmin_hamiltonian_pointwise(&wide, 3.0), -3.0);
        let narrow = theta_spec(Penalty::DirectL2(1.0), ControlSet::new(-1.0, 1.0).unwrap());
        assert_eq!(argmin_hamiltonian_pointwise(&narrow, 3.0), -1.0);
    }

    #[test]
    fn argmin_matches_grid_search_example() {
        // (α/2)υ² + 3υ on [−1, 1] sampled at 10⁴ points
        let (best, _) = (0..10_000)
            .map(|i| -1.0 + 2.0 * i as f64 / 9_999.0)
            .map(|v| (v, 0.5 * v * v + 3.0 * v))
            .fold((0.0, f64::INFINITY), |acc, (v, f)| if f < acc.1 { (v, f) } else { acc });
        assert!((best - -1.0).abs() < 1e-12);
    }

    #[test]
    fn tie_break_prefers_smallest_magnitude() {
        assert_eq!(ControlSet::new(-2.0, 3.0).unwrap().tie_break(), 0.0);
        assert_eq!(ControlSet::new(1.0, 3.0).unwrap().tie_break(), 1.0);
        assert_eq!(ControlSet::new(-3.0, -1.0).unwrap().tie_break(), -1.0);
    }

    #[test]
    fn builder_rejects_bad_parameters() {
        let b = || ProblemSpec::builder(Drift::theta(), 0.5, TerminalCost::cosine_well(PI));
        assert!(ProblemSpec::builder(Drift::theta(), -0.5, TerminalCost::constant(1.0))
            .build()
            .is_err());
        assert!(b().penalty(Penalty::DirectL2(0.0)).build().is_err());
        assert!(ControlSet::new(1.0, -1.0).is_err());
        let kinked = TerminalCost::new(|x: f64| (x - PI).abs());
        assert!(ProblemSpec::builder(Drift::theta(), 0.5, kinked).build().is_err());
    }

    #[test]
    fn missing_density_for_direct_l2() {
        let spec = theta_spec(Penalty::DirectL2(1.0), ControlSet::penalized_default());
        let grid = TensorGrid::without_eta(8, 2, 1.0).unwrap();
        let r = NodeObjective::aggregate(&spec, &grid, 0.0, 0.0, |_| 1.0, None);
        assert!(matches!(r, Err(Error::MissingDensity)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn argmin_agrees_with_grid_search(
            alpha in 0.05f64..5.0,
            agg in -20.0f64..20.0,
            lo in -10.0f64..0.5,
            width in 0.1f64..15.0,
            penalized in proptest::bool::ANY,
        ) {
            let set = ControlSet::new(lo, lo + width).unwrap();
            let penalty = if penalized { Penalty::DirectL2(alpha) } else { Penalty::None };
            let spec = theta_spec(penalty, set);
            let v = argmin_hamiltonian_pointwise(&spec, agg);
            let q = if penalized { alpha } else { 0.0 };
            let obj = |u: f64| 0.5 * q * u * u + agg * u;
            let n = 10_000;
            let step = width / (n - 1) as f64;
            let (arg_best, best) = (0..n)
                .map(|i| set.clamp(lo + step * i as f64))
                .map(|u| (u, obj(u)))
                .fold((f64::NAN, f64::INFINITY), |acc, (u, f)| if f < acc.1 { (u, f) } else { acc });
            prop_assert!(set.contains(v));
            // No worse than the sampled minimum, and located within one
            // sample spacing of it.
            prop_assert!(obj(v) <= best + 1e-12 * (1.0 + best.abs()));
            if agg != 0.0 {
                prop_assert!((v - arg_best).abs() <= step * (1.0 + 1e-9));
            }
        }
    }
}
