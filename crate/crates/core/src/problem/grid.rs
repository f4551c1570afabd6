use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Periodic x-grid on `[0, 2π)` times a parametric η-grid times a uniform
/// time grid on `[0, T]`.
///
/// The η nodes carry quadrature weights; a single node with weight 1 turns
/// the parameter off.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorGrid {
    n_x: usize,
    n_t: usize,
    horizon: f64,
    eta_nodes: Vec<f64>,
    eta_weights: Vec<f64>,
}

impl TensorGrid {
    pub fn new(
        n_x: usize,
        n_t: usize,
        horizon: f64,
        eta_nodes: Vec<f64>,
        eta_weights: Vec<f64>,
    ) -> Result<Self> {
        if n_x < 4 || !n_x.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "n_x = {n_x} must be a power of two and at least 4"
            )));
        }
        if n_t < 2 {
            return Err(Error::InvalidGrid(format!("n_t = {n_t} must be at least 2")));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidGrid(format!("horizon {horizon} must be positive")));
        }
        if eta_nodes.is_empty() || eta_nodes.len() != eta_weights.len() {
            return Err(Error::InvalidGrid(format!(
                "{} eta nodes but {} eta weights",
                eta_nodes.len(),
                eta_weights.len()
            )));
        }
        if eta_nodes.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid("eta nodes must be finite".into()));
        }
        if eta_weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidGrid(
                "eta weights must be finite and nonnegative".into(),
            ));
        }
        Ok(Self {
            n_x,
            n_t,
            horizon,
            eta_nodes,
            eta_weights,
        })
    }

    /// Grid without the η parameter (one node at 0 with unit weight).
    pub fn without_eta(n_x: usize, n_t: usize, horizon: f64) -> Result<Self> {
        Self::new(n_x, n_t, horizon, vec![0.0], vec![1.0])
    }

    /// Uniform η nodes on `[eta_min, eta_max]` with trapezoid weights.
    pub fn with_uniform_eta(
        n_x: usize,
        n_t: usize,
        horizon: f64,
        n_eta: usize,
        eta_min: f64,
        eta_max: f64,
    ) -> Result<Self> {
        if n_eta == 1 {
            return Self::new(n_x, n_t, horizon, vec![0.5 * (eta_min + eta_max)], vec![1.0]);
        }
        if n_eta == 0 || !(eta_max > eta_min) {
            return Err(Error::InvalidGrid(format!(
                "eta range [{eta_min}, {eta_max}] with {n_eta} nodes"
            )));
        }
        let h = (eta_max - eta_min) / (n_eta - 1) as f64;
        let nodes = (0..n_eta).map(|i| eta_min + h * i as f64).collect();
        let mut weights = vec![h; n_eta];
        weights[0] *= 0.5;
        weights[n_eta - 1] *= 0.5;
        Self::new(n_x, n_t, horizon, nodes, weights)
    }

    /// Smallest time-node count whose step satisfies the explicit RK4 bound
    /// `dt <= 0.8 / (beta * k_max^2)`, `k_max = n_x / 3`.
    pub fn stable_time_nodes(n_x: usize, horizon: f64, beta: f64) -> usize {
        let bound = max_stable_dt(n_x, beta);
        ((horizon / bound).ceil() as usize).max(1) + 1
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn n_eta(&self) -> usize {
        self.eta_nodes.len()
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dt(&self) -> f64 {
        self.horizon / (self.n_t - 1) as f64
    }

    pub fn dx(&self) -> f64 {
        2.0 * PI / self.n_x as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.dx() * i as f64
    }

    pub fn x_nodes(&self) -> Vec<f64> {
        (0..self.n_x).map(|i| self.x(i)).collect()
    }

    pub fn t(&self, j: usize) -> f64 {
        if j + 1 == self.n_t {
            self.horizon
        } else {
            self.dt() * j as f64
        }
    }

    pub fn eta_nodes(&self) -> &[f64] {
        &self.eta_nodes
    }

    pub fn eta_weights(&self) -> &[f64] {
        &self.eta_weights
    }

    /// Values per time slab, `n_x * n_eta`.
    pub fn slab_len(&self) -> usize {
        self.n_x * self.n_eta()
    }

    /// Time node closest to `t`.
    pub fn nearest_time_index(&self, t: f64) -> usize {
        let j = (t / self.dt()).round();
        (j.max(0.0) as usize).min(self.n_t - 1)
    }

    /// Same spatial and parametric grid on a different time axis.
    pub fn with_time_nodes(&self, n_t: usize) -> Result<Self> {
        Self::new(
            self.n_x,
            n_t,
            self.horizon,
            self.eta_nodes.clone(),
            self.eta_weights.clone(),
        )
    }
}

pub fn max_stable_dt(n_x: usize, beta: f64) -> f64 {
    let k_max = n_x as f64 / 3.0;
    0.8 / (beta * k_max * k_max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_power_of_two() {
        assert!(TensorGrid::without_eta(96, 10, 1.0).is_err());
        assert!(TensorGrid::without_eta(128, 10, 1.0).is_ok());
    }

    #[test]
    fn rejects_negative_weights() {
        let err = TensorGrid::new(16, 4, 1.0, vec![0.0, 1.0], vec![0.5, -0.5]);
        assert!(err.is_err());
    }

    #[test]
    fn trapezoid_eta_weights_sum_to_length() {
        let g = TensorGrid::with_uniform_eta(16, 4, 1.0, 9, -2.0, 2.0).unwrap();
        let s: f64 = g.eta_weights().iter().sum();
        assert!((s - 4.0).abs() < 1e-14);
    }

    #[test]
    fn stable_nodes_respect_bound() {
        let n_t = TensorGrid::stable_time_nodes(128, 6.0, 0.5);
        let g = TensorGrid::without_eta(128, n_t, 6.0).unwrap();
        assert!(g.dt() <= max_stable_dt(128, 0.5));
        let g_less = TensorGrid::without_eta(128, n_t - 1, 6.0).unwrap();
        assert!(g_less.dt() > max_stable_dt(128, 0.5));
    }

    #[test]
    fn last_time_node_is_horizon() {
        let g = TensorGrid::without_eta(8, 7, 0.3).unwrap();
        assert_eq!(g.t(6), 0.3);
        assert_eq!(g.nearest_time_index(0.3), 6);
    }
}
