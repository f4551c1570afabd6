use std::borrow::Cow;

use crate::error::{Error, Result};
use crate::problem::{ControlSet, TensorGrid};

/// Tolerated deviation of a density slab's mass from one.
pub const MASS_TOLERANCE: f64 = 1e-6;

/// Σ_x Σ_η ρ·Δx·w_η for one slab in η-major, x-fastest layout.
pub fn slab_mass(grid: &TensorGrid, slab: &[f64]) -> f64 {
    let n_x = grid.n_x();
    grid.eta_weights()
        .iter()
        .enumerate()
        .map(|(e, w)| w * slab[e * n_x..(e + 1) * n_x].iter().sum::<f64>())
        .sum::<f64>()
        * grid.dx()
}

/// ⟨a, b⟩ over one slab with the grid's x and η quadrature.
pub fn slab_inner(grid: &TensorGrid, a: &[f64], b: &[f64]) -> f64 {
    let n_x = grid.n_x();
    grid.eta_weights()
        .iter()
        .enumerate()
        .map(|(e, w)| {
            let r = e * n_x..(e + 1) * n_x;
            w * a[r.clone()].iter().zip(&b[r]).map(|(x, y)| x * y).sum::<f64>()
        })
        .sum::<f64>()
        * grid.dx()
}

/// Rescales a slab to unit mass.
pub fn normalize_slab(grid: &TensorGrid, slab: &mut [f64]) -> Result<()> {
    let m = slab_mass(grid, slab);
    if !(m.is_finite() && m > 0.0) {
        return Err(Error::InvalidProblem(format!(
            "initial density has mass {m}, cannot normalize"
        )));
    }
    slab.iter_mut().for_each(|v| *v /= m);
    Ok(())
}

/// Probability density on every stored time node, η-major and x-fastest
/// within each slab.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    n_x: usize,
    n_eta: usize,
    n_t: usize,
    values: Vec<f64>,
}

impl DensityField {
    /// Wraps a full trajectory, checking shape and unit mass on every node.
    pub fn from_values(grid: &TensorGrid, values: Vec<f64>) -> Result<Self> {
        let field = Self::from_values_unchecked(grid, values)?;
        for j in 0..field.n_t {
            let m = slab_mass(grid, field.slab(j));
            if (m - 1.0).abs() > MASS_TOLERANCE {
                return Err(Error::InvalidProblem(format!(
                    "density slab {j} has mass {m}"
                )));
            }
        }
        Ok(field)
    }

    pub(crate) fn from_values_unchecked(grid: &TensorGrid, values: Vec<f64>) -> Result<Self> {
        let expected = grid.n_t() * grid.slab_len();
        if values.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "density has {} values, grid needs {expected}",
                values.len()
            )));
        }
        Ok(Self {
            n_x: grid.n_x(),
            n_eta: grid.n_eta(),
            n_t: grid.n_t(),
            values,
        })
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn slab_len(&self) -> usize {
        self.n_x * self.n_eta
    }

    pub fn slab(&self, j: usize) -> &[f64] {
        let n = self.slab_len();
        &self.values[j * n..(j + 1) * n]
    }

    pub fn terminal(&self) -> &[f64] {
        self.slab(self.n_t - 1)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mass(&self, grid: &TensorGrid, j: usize) -> f64 {
        slab_mass(grid, self.slab(j))
    }

    /// Largest |mass − 1| over all stored nodes.
    pub fn max_mass_drift(&self, grid: &TensorGrid) -> f64 {
        (0..self.n_t)
            .map(|j| (self.mass(grid, j) - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Slab with spectral undershoot clamped to zero, for export.
    pub fn clamped_slab(&self, j: usize) -> Vec<f64> {
        self.slab(j).iter().map(|v| v.max(0.0)).collect()
    }

    /// x-marginal Σ_η ρ·w_η of slab `j`.
    pub fn x_marginal(&self, grid: &TensorGrid, j: usize) -> Vec<f64> {
        let slab = self.slab(j);
        let mut out = vec![0.0; self.n_x];
        for (e, w) in grid.eta_weights().iter().enumerate() {
            for (o, v) in out.iter_mut().zip(&slab[e * self.n_x..(e + 1) * self.n_x]) {
                *o += w * v;
            }
        }
        out
    }

    /// Circular mean of the x-marginal at node `j`, in `[0, 2π)`.
    pub fn circular_mean(&self, grid: &TensorGrid, j: usize) -> f64 {
        let marginal = self.x_marginal(grid, j);
        let (mut c, mut s) = (0.0, 0.0);
        for (i, m) in marginal.iter().enumerate() {
            let x = grid.x(i);
            c += m * x.cos();
            s += m * x.sin();
        }
        s.atan2(c).rem_euclid(std::f64::consts::TAU)
    }

    pub(crate) fn check_grid(&self, grid: &TensorGrid) -> Result<()> {
        if self.n_x != grid.n_x() || self.n_eta != grid.n_eta() || self.n_t != grid.n_t() {
            return Err(Error::ShapeMismatch(format!(
                "density is {}x{}x{}, grid is {}x{}x{}",
                self.n_t,
                self.n_eta,
                self.n_x,
                grid.n_t(),
                grid.n_eta(),
                grid.n_x()
            )));
        }
        Ok(())
    }
}

/// Backward (adjoint) solution and its spectral x-derivative, same layout as
/// [`DensityField`].
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointField {
    n_x: usize,
    n_eta: usize,
    n_t: usize,
    p: Vec<f64>,
    grad_x_p: Vec<f64>,
}

impl AdjointField {
    pub(crate) fn new(grid: &TensorGrid, p: Vec<f64>, grad_x_p: Vec<f64>) -> Result<Self> {
        let expected = grid.n_t() * grid.slab_len();
        if p.len() != expected || grad_x_p.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "adjoint arrays have {} / {} values, grid needs {expected}",
                p.len(),
                grad_x_p.len()
            )));
        }
        Ok(Self {
            n_x: grid.n_x(),
            n_eta: grid.n_eta(),
            n_t: grid.n_t(),
            p,
            grad_x_p,
        })
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    fn range(&self, j: usize) -> std::ops::Range<usize> {
        let n = self.n_x * self.n_eta;
        j * n..(j + 1) * n
    }

    pub fn p(&self, j: usize) -> &[f64] {
        &self.p[self.range(j)]
    }

    pub fn grad_x_p(&self, j: usize) -> &[f64] {
        &self.grad_x_p[self.range(j)]
    }

    /// p at node `j`, x-index `i`, η-index `e`.
    pub fn p_at(&self, j: usize, i: usize, e: usize) -> f64 {
        self.p(j)[e * self.n_x + i]
    }

    pub(crate) fn check_grid(&self, grid: &TensorGrid) -> Result<()> {
        if self.n_x != grid.n_x() || self.n_eta != grid.n_eta() || self.n_t != grid.n_t() {
            return Err(Error::ShapeMismatch("adjoint does not match the grid".into()));
        }
        Ok(())
    }
}

/// Which class of strategies a control belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControlClass {
    Markovian,
    OpenLoop,
}

/// Markovian control `w(t_j, x_i)` or open-loop control `u(t_j)`.
///
/// The value stored at node `j` is held over `[t_j, t_{j+1})`; the last
/// node has no dynamic effect.
#[derive(Debug, Clone, PartialEq)]
pub enum ControlField {
    Markovian { n_x: usize, values: Vec<f64> },
    OpenLoop { values: Vec<f64> },
}

impl ControlField {
    pub fn markovian(grid: &TensorGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_t() * grid.n_x() {
            return Err(Error::ShapeMismatch(format!(
                "Markovian control has {} values, grid needs {}",
                values.len(),
                grid.n_t() * grid.n_x()
            )));
        }
        Ok(ControlField::Markovian {
            n_x: grid.n_x(),
            values,
        })
    }

    pub fn open_loop(grid: &TensorGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_t() {
            return Err(Error::ShapeMismatch(format!(
                "open-loop control has {} values, grid needs {}",
                values.len(),
                grid.n_t()
            )));
        }
        Ok(ControlField::OpenLoop { values })
    }

    pub fn constant(grid: &TensorGrid, class: ControlClass, value: f64) -> Self {
        match class {
            ControlClass::Markovian => ControlField::Markovian {
                n_x: grid.n_x(),
                values: vec![value; grid.n_t() * grid.n_x()],
            },
            ControlClass::OpenLoop => ControlField::OpenLoop {
                values: vec![value; grid.n_t()],
            },
        }
    }

    /// Samples `w(t, x)` on the grid nodes.
    pub fn from_fn_markovian(grid: &TensorGrid, w: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.n_t() * grid.n_x());
        for j in 0..grid.n_t() {
            let t = grid.t(j);
            values.extend((0..grid.n_x()).map(|i| w(t, grid.x(i))));
        }
        ControlField::Markovian {
            n_x: grid.n_x(),
            values,
        }
    }

    pub fn from_fn_open_loop(grid: &TensorGrid, u: impl Fn(f64) -> f64) -> Self {
        ControlField::OpenLoop {
            values: (0..grid.n_t()).map(|j| u(grid.t(j))).collect(),
        }
    }

    pub fn class(&self) -> ControlClass {
        match self {
            ControlField::Markovian { .. } => ControlClass::Markovian,
            ControlField::OpenLoop { .. } => ControlClass::OpenLoop,
        }
    }

    pub fn values(&self) -> &[f64] {
        match self {
            ControlField::Markovian { values, .. } | ControlField::OpenLoop { values } => values,
        }
    }

    pub fn n_t(&self) -> usize {
        match self {
            ControlField::Markovian { n_x, values } => values.len() / n_x,
            ControlField::OpenLoop { values } => values.len(),
        }
    }

    /// Control slab over x at node `j` (constant for open-loop controls).
    pub fn slab(&self, j: usize, n_x: usize) -> Cow<'_, [f64]> {
        match self {
            ControlField::Markovian { n_x: nx, values } => {
                debug_assert_eq!(*nx, n_x);
                Cow::Borrowed(&values[j * nx..(j + 1) * nx])
            }
            ControlField::OpenLoop { values } => Cow::Owned(vec![values[j]; n_x]),
        }
    }

    /// Value at node `j`, x-index `i`.
    pub fn at(&self, j: usize, i: usize) -> f64 {
        match self {
            ControlField::Markovian { n_x, values } => values[j * n_x + i],
            ControlField::OpenLoop { values } => values[j],
        }
    }

    /// Every stored value must lie in the control set.
    pub fn check_admissible(&self, set: &ControlSet) -> Result<()> {
        match self.values().iter().find(|v| !set.contains(**v)) {
            Some(v) => Err(Error::InvalidProblem(format!(
                "control value {v} outside [{}, {}]",
                set.lo(),
                set.hi()
            ))),
            None => Ok(()),
        }
    }

    pub(crate) fn check_grid(&self, grid: &TensorGrid) -> Result<()> {
        let ok = match self {
            ControlField::Markovian { n_x, values } => {
                *n_x == grid.n_x() && values.len() == grid.n_t() * grid.n_x()
            }
            ControlField::OpenLoop { values } => values.len() == grid.n_t(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::ShapeMismatch("control does not match the grid".into()))
        }
    }

    /// Squared L2 distance in (t, x), time held piecewise constant.
    pub fn l2_distance_sq(&self, other: &ControlField, grid: &TensorGrid) -> f64 {
        let n_x = grid.n_x();
        let mut acc = 0.0;
        for j in 0..grid.n_t() - 1 {
            let a = self.slab(j, n_x);
            let b = other.slab(j, n_x);
            acc += a.iter().zip(b.iter()).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
        }
        acc * grid.dx() * grid.dt()
    }
}
