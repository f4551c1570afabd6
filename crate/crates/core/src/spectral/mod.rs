//! Fourier-pseudospectral forward (Fokker-Planck) and backward (adjoint)
//! solvers on the periodic x-grid, one independent problem per η node, with
//! classical RK4 in time.
//!
//! Within a step `[t_j, t_{j+1})` the control is held at its node-`j` value
//! and the drift is evaluated at the step midpoint, so each step applies a
//! frozen linear operator. The backward step is the exact transpose of the
//! forward step, which makes the discrete cost identity hold to roundoff.

mod workspace;

pub use workspace::SpectralWorkspace;

use crate::error::{Error, Result};
use crate::problem::{
    cost::{direct_penalty_step, running_slab},
    max_stable_dt, slab_inner, slab_mass, AdjointField, ControlClass, ControlField, DensityField,
    ProblemSpec, TensorGrid, MASS_TOLERANCE,
};

/// Largest tolerated |mass − 1| before a forward step is declared unstable.
pub const UNSTABLE_MASS_DRIFT: f64 = 1e-4;

/// `L φ = f·∂ₓφ + β ∂ₓₓφ` on one η slice, control held at `control_slab`.
pub fn apply_generator(
    spec: &ProblemSpec,
    ws: &mut SpectralWorkspace,
    phi: &[f64],
    control_slab: &[f64],
    t: f64,
    eta: f64,
) -> Result<Vec<f64>> {
    let drift = slice_drift(spec, ws.len(), phi.len(), control_slab, t, eta)?;
    let mut out = vec![0.0; phi.len()];
    let mut grad = vec![0.0; phi.len()];
    ws.generator(phi, &drift, spec.beta(), &mut out, &mut grad);
    Ok(out)
}

/// `L*ρ = −∂ₓ(f·ρ) + β ∂ₓₓρ` on one η slice, control held at `control_slab`.
pub fn apply_adjoint_generator(
    spec: &ProblemSpec,
    ws: &mut SpectralWorkspace,
    rho: &[f64],
    control_slab: &[f64],
    t: f64,
    eta: f64,
) -> Result<Vec<f64>> {
    let drift = slice_drift(spec, ws.len(), rho.len(), control_slab, t, eta)?;
    let mut out = vec![0.0; rho.len()];
    let mut tmp = vec![0.0; rho.len()];
    ws.adjoint_generator(rho, &drift, spec.beta(), &mut out, &mut tmp);
    Ok(out)
}

fn slice_drift(
    spec: &ProblemSpec,
    n: usize,
    len: usize,
    control_slab: &[f64],
    t: f64,
    eta: f64,
) -> Result<Vec<f64>> {
    if len != n || control_slab.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "slice of length {len} with control of length {} on a {n}-point workspace",
            control_slab.len()
        )));
    }
    let h = 2.0 * std::f64::consts::PI / n as f64;
    Ok((0..n)
        .map(|i| spec.drift().eval(t, h * i as f64, eta, control_slab[i]))
        .collect())
}

/// Markovian feedback law evaluated during a forward solve.
pub trait FeedbackRule {
    /// Class of the control the rule realizes.
    fn class(&self) -> ControlClass;

    /// Control slab over x for the step starting at node `j`, given the
    /// current density slab. Values must lie in the control set.
    fn evaluate(&mut self, j: usize, t: f64, density: &[f64]) -> Result<Vec<f64>>;

    /// When true the control is frozen over the whole step, RK4 stages
    /// included. Otherwise the rule is re-evaluated at each stage.
    fn sample_and_hold(&self) -> bool {
        true
    }
}

/// Reference data for the per-step non-ascent check of a feedback solve.
///
/// At each step the candidate control is compared with the reference control
/// through the one-step cost-to-go built from `adjoint`; the reference value
/// is kept whenever the candidate would be worse.
#[derive(Debug, Clone, Copy)]
pub struct DescentGuard<'a> {
    pub adjoint: &'a AdjointField,
    pub reference: &'a ControlField,
}

/// Result of a feedback forward solve.
#[derive(Debug, Clone)]
pub struct FeedbackSolution {
    pub density: DensityField,
    /// Realized control; node `n_t − 1` repeats the last held value.
    pub control: ControlField,
    /// Steps where the guard kept the reference control.
    pub held_steps: usize,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Direction {
    Forward,
    Backward,
}

/// Reusable solver state for one (problem, grid) pair.
pub struct PdeSolver<'a> {
    spec: &'a ProblemSpec,
    grid: &'a TensorGrid,
    ws: SpectralWorkspace,
    base: Option<Vec<f64>>,
    gain: Option<Vec<f64>>,
    acc: Vec<f64>,
    stage: Vec<f64>,
    k: Vec<f64>,
    tmp: Vec<f64>,
}

impl<'a> PdeSolver<'a> {
    /// Checks the explicit-RK4 step bound and caches autonomous drift parts.
    pub fn new(spec: &'a ProblemSpec, grid: &'a TensorGrid) -> Result<Self> {
        let bound = max_stable_dt(grid.n_x(), spec.beta());
        if grid.dt() > bound * (1.0 + 1e-12) {
            return Err(Error::InvalidGrid(format!(
                "dt = {:.4e} exceeds the stability bound {bound:.4e} for n_x = {}, beta = {}; use n_t >= {}",
                grid.dt(),
                grid.n_x(),
                spec.beta(),
                TensorGrid::stable_time_nodes(grid.n_x(), grid.horizon(), spec.beta())
            )));
        }
        let n = grid.slab_len();
        let (base, gain) = if spec.drift().is_autonomous() {
            let (mut b, mut g) = (Vec::with_capacity(n), Vec::with_capacity(n));
            for &eta in grid.eta_nodes() {
                for i in 0..grid.n_x() {
                    b.push(spec.drift().base(0.0, grid.x(i), eta));
                    g.push(spec.drift().gain(0.0, grid.x(i), eta));
                }
            }
            (Some(b), Some(g))
        } else {
            (None, None)
        };
        Ok(Self {
            spec,
            grid,
            ws: SpectralWorkspace::new(grid.n_x()),
            base,
            gain,
            acc: vec![0.0; n],
            stage: vec![0.0; n],
            k: vec![0.0; n],
            tmp: vec![0.0; grid.n_x()],
        })
    }

    pub fn grid(&self) -> &TensorGrid {
        self.grid
    }

    /// Drift over a whole slab at time `t` under the control slab `w`.
    fn drift_slab(&self, t: f64, w: &[f64], out: &mut [f64]) {
        let n_x = self.grid.n_x();
        match (&self.base, &self.gain) {
            (Some(b), Some(g)) => {
                for (idx, o) in out.iter_mut().enumerate() {
                    *o = b[idx] + g[idx] * w[idx % n_x];
                }
            }
            _ => {
                let drift = self.spec.drift();
                for (e, &eta) in self.grid.eta_nodes().iter().enumerate() {
                    for i in 0..n_x {
                        out[e * n_x + i] = drift.eval(t, self.grid.x(i), eta, w[i]);
                    }
                }
            }
        }
    }

    fn apply(&mut self, dir: Direction, y: &[f64], drift: &[f64], out: &mut [f64]) {
        let n_x = self.grid.n_x();
        let beta = self.spec.beta();
        for e in 0..self.grid.n_eta() {
            let r = e * n_x..(e + 1) * n_x;
            match dir {
                Direction::Forward => {
                    self.ws
                        .adjoint_generator(&y[r.clone()], &drift[r.clone()], beta, &mut out[r], &mut self.tmp)
                }
                Direction::Backward => {
                    self.ws
                        .generator(&y[r.clone()], &drift[r.clone()], beta, &mut out[r], &mut self.tmp)
                }
            }
        }
    }

    /// One classical RK4 step of `y' = A y` with a frozen operator.
    fn rk4(&mut self, dir: Direction, y: &[f64], drift: &[f64], out: &mut [f64]) {
        let h = self.grid.dt();
        let mut acc = std::mem::take(&mut self.acc);
        let mut stage = std::mem::take(&mut self.stage);
        let mut k = std::mem::take(&mut self.k);

        self.apply(dir, y, drift, &mut acc);
        for (s, (yi, ki)) in stage.iter_mut().zip(y.iter().zip(&acc)) {
            *s = yi + 0.5 * h * ki;
        }
        for (c, weight) in [(0.5, 2.0), (1.0, 2.0)] {
            self.apply(dir, &stage, drift, &mut k);
            for ((s, a), (yi, ki)) in stage.iter_mut().zip(acc.iter_mut()).zip(y.iter().zip(&k)) {
                *a += weight * ki;
                *s = yi + c * h * ki;
            }
        }
        self.apply(dir, &stage, drift, &mut k);
        for ((o, a), (yi, ki)) in out.iter_mut().zip(acc.iter()).zip(y.iter().zip(&k)) {
            *o = yi + h / 6.0 * (a + ki);
        }

        self.acc = acc;
        self.stage = stage;
        self.k = k;
    }

    fn check_initial(&self, initial: &[f64]) -> Result<()> {
        if initial.len() != self.grid.slab_len() {
            return Err(Error::ShapeMismatch(format!(
                "initial density has {} values, slab needs {}",
                initial.len(),
                self.grid.slab_len()
            )));
        }
        let m = slab_mass(self.grid, initial);
        if (m - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidProblem(format!("initial density has mass {m}")));
        }
        Ok(())
    }

    fn check_forward_step(&self, j: usize, slab: &[f64]) -> Result<()> {
        let m = slab_mass(self.grid, slab);
        if !m.is_finite() || slab.iter().any(|v| !v.is_finite()) {
            return Err(Error::UnstableStep {
                time: self.grid.t(j),
                reason: "non-finite density".into(),
            });
        }
        if (m - 1.0).abs() > UNSTABLE_MASS_DRIFT {
            return Err(Error::UnstableStep {
                time: self.grid.t(j),
                reason: format!("mass drifted to {m}"),
            });
        }
        Ok(())
    }

    fn midpoint(&self, j: usize) -> f64 {
        self.grid.t(j) + 0.5 * self.grid.dt()
    }

    /// Forward solve under a fixed control field.
    pub fn solve_forward(&mut self, initial: &[f64], control: &ControlField) -> Result<DensityField> {
        self.check_initial(initial)?;
        control.check_grid(self.grid)?;
        let n = self.grid.slab_len();
        let n_t = self.grid.n_t();
        let mut values = vec![0.0; n * n_t];
        values[..n].copy_from_slice(initial);
        let mut drift = vec![0.0; n];
        for j in 0..n_t - 1 {
            let w = control.slab(j, self.grid.n_x());
            self.drift_slab(self.midpoint(j), &w, &mut drift);
            let (head, tail) = values.split_at_mut((j + 1) * n);
            self.rk4(Direction::Forward, &head[j * n..], &drift, &mut tail[..n]);
            self.check_forward_step(j + 1, &tail[..n])?;
        }
        DensityField::from_values_unchecked(self.grid, values)
    }

    /// One-step objective used by [`DescentGuard`]:
    /// `⟨p̄_{j+1} + (h/2)r(t_{j+1}), A(w)ρ_j⟩ + (h/2)⟨r(t_j), ρ_j⟩ + pen(w)`.
    fn step_objective(&self, guard: &DescentGuard, j: usize, w: &[f64], rho: &[f64], next: &[f64]) -> f64 {
        let grid = self.grid;
        let h = grid.dt();
        let n_x = grid.n_x();
        let mut value = slab_inner(grid, guard.adjoint.p(j + 1), next);
        if self.spec.has_weighted_running() {
            let r0 = running_slab(self.spec, grid, grid.t(j), w);
            let r1 = running_slab(self.spec, grid, grid.t(j + 1), w);
            value += 0.5 * h * (x_inner(grid, &r1, next) + x_inner(grid, &r0, rho));
        }
        let open_loop = guard.reference.class() == ControlClass::OpenLoop;
        value + direct_penalty_step(self.spec, grid, open_loop, &w[..if open_loop { 1 } else { n_x }])
    }

    /// Forward solve of the backfed equation: the control at each step is
    /// produced by `rule` from the current density.
    pub fn solve_forward_feedback(
        &mut self,
        initial: &[f64],
        rule: &mut dyn FeedbackRule,
        guard: Option<DescentGuard<'_>>,
    ) -> Result<FeedbackSolution> {
        self.check_initial(initial)?;
        if let Some(g) = &guard {
            g.adjoint.check_grid(self.grid)?;
            g.reference.check_grid(self.grid)?;
            if !rule.sample_and_hold() {
                return Err(Error::InvalidProblem(
                    "the descent guard needs a sample-and-hold rule".into(),
                ));
            }
        }
        let grid = self.grid;
        let n = grid.slab_len();
        let n_x = grid.n_x();
        let n_t = grid.n_t();
        let set = *self.spec.control_set();
        let mut values = vec![0.0; n * n_t];
        values[..n].copy_from_slice(initial);
        let mut realized: Vec<Vec<f64>> = Vec::with_capacity(n_t);
        let mut drift = vec![0.0; n];
        let mut alt = vec![0.0; n];
        let mut held_steps = 0;

        for j in 0..n_t - 1 {
            let (head, tail) = values.split_at_mut((j + 1) * n);
            let rho = &head[j * n..];
            let next = &mut tail[..n];
            let w = rule.evaluate(j, grid.t(j), rho)?;
            if w.len() != n_x {
                return Err(Error::ShapeMismatch(format!(
                    "feedback rule returned {} values, expected {n_x}",
                    w.len()
                )));
            }
            if let Some(v) = w.iter().find(|v| !set.contains(**v)) {
                return Err(Error::InvalidProblem(format!(
                    "feedback value {v} outside [{}, {}]",
                    set.lo(),
                    set.hi()
                )));
            }
            if rule.sample_and_hold() {
                self.drift_slab(self.midpoint(j), &w, &mut drift);
                self.rk4(Direction::Forward, rho, &drift, next);
                let mut chosen = w;
                if let Some(g) = &guard {
                    let w_ref = g.reference.slab(j, n_x);
                    if w_ref.as_ref() != chosen.as_slice() {
                        self.drift_slab(self.midpoint(j), &w_ref, &mut drift);
                        self.rk4(Direction::Forward, rho, &drift, &mut alt);
                        let cand = self.step_objective(g, j, &chosen, rho, next);
                        let reference = self.step_objective(g, j, &w_ref, rho, &alt);
                        if cand > reference {
                            next.copy_from_slice(&alt);
                            chosen = w_ref.into_owned();
                            held_steps += 1;
                        }
                    }
                }
                realized.push(chosen);
            } else {
                self.rk4_stagewise(rule, j, rho, next, &mut drift)?;
                realized.push(w);
            }
            self.check_forward_step(j + 1, next)?;
        }
        let last = realized.last().cloned().unwrap_or_else(|| vec![0.0; n_x]);
        realized.push(last);

        let control = match rule.class() {
            ControlClass::Markovian => ControlField::markovian(grid, realized.concat())?,
            ControlClass::OpenLoop => {
                ControlField::open_loop(grid, realized.iter().map(|w| w[0]).collect())?
            }
        };
        Ok(FeedbackSolution {
            density: DensityField::from_values_unchecked(grid, values)?,
            control,
            held_steps,
        })
    }

    /// RK4 step with the rule re-evaluated on every stage density.
    fn rk4_stagewise(
        &mut self,
        rule: &mut dyn FeedbackRule,
        j: usize,
        y: &[f64],
        out: &mut [f64],
        drift: &mut [f64],
    ) -> Result<()> {
        let h = self.grid.dt();
        let t = self.grid.t(j);
        let n = y.len();
        let mut stage = y.to_vec();
        let mut ks: Vec<Vec<f64>> = Vec::with_capacity(4);
        for (s, c) in [0.0, 0.5, 0.5, 1.0].into_iter().enumerate() {
            if s > 0 {
                let prev = &ks[s - 1];
                for i in 0..n {
                    stage[i] = y[i] + c * h * prev[i];
                }
            }
            let w = rule.evaluate(j, t + c * h, &stage)?;
            self.drift_slab(t + c * h, &w, drift);
            let mut k = vec![0.0; n];
            self.apply(Direction::Forward, &stage, drift, &mut k);
            ks.push(k);
        }
        for i in 0..n {
            out[i] = y[i] + h / 6.0 * (ks[0][i] + 2.0 * ks[1][i] + 2.0 * ks[2][i] + ks[3][i]);
        }
        Ok(())
    }

    /// Backward solve of the adjoint (cost-to-go) equation under a fixed
    /// control, `p_T = ℓ`, with the density-weighted running cost as source.
    pub fn solve_backward(&mut self, control: &ControlField) -> Result<AdjointField> {
        control.check_grid(self.grid)?;
        let grid = self.grid;
        let n = grid.slab_len();
        let n_x = grid.n_x();
        let n_t = grid.n_t();
        let h = grid.dt();
        let mut p = vec![0.0; n * n_t];
        {
            let last = &mut p[(n_t - 1) * n..];
            for e in 0..grid.n_eta() {
                for i in 0..n_x {
                    last[e * n_x + i] = self.spec.terminal_cost().value(grid.x(i));
                }
            }
        }
        let scale = p[(n_t - 1) * n..].iter().fold(0.0f64, |m, v| m.max(v.abs())) + 1.0;
        let mut source_bound = 0.0;
        let bolza = self.spec.has_weighted_running();
        let mut drift = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        for j in (0..n_t - 1).rev() {
            let w = control.slab(j, n_x);
            self.drift_slab(self.midpoint(j), &w, &mut drift);
            let (head, tail) = p.split_at_mut((j + 1) * n);
            let next = &tail[..n];
            let cur = &mut head[j * n..];
            if bolza {
                let r1 = running_slab(self.spec, grid, grid.t(j + 1), &w);
                let r0 = running_slab(self.spec, grid, grid.t(j), &w);
                for (idx, v) in rhs.iter_mut().enumerate() {
                    *v = next[idx] + 0.5 * h * r1[idx % n_x];
                }
                self.rk4(Direction::Backward, &rhs, &drift, cur);
                for (idx, v) in cur.iter_mut().enumerate() {
                    *v += 0.5 * h * r0[idx % n_x];
                }
                let rmax = r0.iter().chain(&r1).fold(0.0f64, |m, v| m.max(v.abs()));
                source_bound += h * rmax;
            } else {
                self.rk4(Direction::Backward, next, &drift, cur);
            }
            let sup = cur.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if !sup.is_finite() || sup > 1e6 * (scale + source_bound) {
                return Err(Error::UnstableStep {
                    time: grid.t(j),
                    reason: format!("adjoint sup-norm {sup:.3e}"),
                });
            }
        }
        let grad = self.dealiased_gradient(&p);
        AdjointField::new(grid, p, grad)
    }

    /// `P ∂ₓ` applied slice by slice to a full trajectory.
    fn dealiased_gradient(&mut self, p: &[f64]) -> Vec<f64> {
        let n_x = self.grid.n_x();
        let mut grad = vec![0.0; p.len()];
        let slices = p.len() / n_x;
        let mut s = 0;
        while s < slices {
            let r = s * n_x..(s + 1) * n_x;
            if s + 1 < slices {
                let r2 = (s + 1) * n_x..(s + 2) * n_x;
                let (ga, gb) = grad[r.start..r2.end].split_at_mut(n_x);
                self.ws.dealiased_derivative_pair(&p[r], &p[r2], ga, gb);
                s += 2;
            } else {
                let mut dummy = vec![0.0; n_x];
                self.ws
                    .dealiased_derivative_pair(&p[r.clone()], &p[r.clone()], &mut grad[r], &mut dummy);
                s += 1;
            }
        }
        grad
    }
}

/// Σ_η w_η Σ_x g(x)·ρ(x, η)·Δx for an η-independent `g`.
fn x_inner(grid: &TensorGrid, g: &[f64], slab: &[f64]) -> f64 {
    crate::problem::cost::x_weighted(grid, slab, g)
}

/// Forward solve under a fixed control.
pub fn solve_forward(
    spec: &ProblemSpec,
    grid: &TensorGrid,
    initial: &[f64],
    control: &ControlField,
) -> Result<DensityField> {
    PdeSolver::new(spec, grid)?.solve_forward(initial, control)
}

/// Forward solve of the backfed equation driven by `rule`.
pub fn solve_forward_feedback(
    spec: &ProblemSpec,
    grid: &TensorGrid,
    initial: &[f64],
    rule: &mut dyn FeedbackRule,
    guard: Option<DescentGuard<'_>>,
) -> Result<FeedbackSolution> {
    PdeSolver::new(spec, grid)?.solve_forward_feedback(initial, rule, guard)
}

/// Backward adjoint solve under a fixed reference control.
pub fn solve_backward(spec: &ProblemSpec, grid: &TensorGrid, control: &ControlField) -> Result<AdjointField> {
    PdeSolver::new(spec, grid)?.solve_backward(control)
}
