use serde::{Deserialize, Serialize};

use crate::mdp::{Action, State};
use crate::ppl::st::{augment, INPUT_DIM};
use crate::rule::UbrCondition;

pub type Matrix = [[f64; INPUT_DIM]; INPUT_DIM];

/// Entries beyond this magnitude mean the RLS gain matrix has wound up
/// (directions never excited decay by `1 / lambda` per update); it is then
/// re-initialised.
const RLS_RESET_BOUND: f64 = 1e10;

pub fn scaled_identity(d: f64) -> Matrix {
    let mut m = [[0.0; INPUT_DIM]; INPUT_DIM];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = d;
    }
    m
}

/// XCSF macroclassifier with a linear prediction trained by recursive least squares.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classifier {
    pub id: u64,
    pub condition: UbrCondition,
    pub action: Action,
    pub weights: [f64; INPUT_DIM],
    pub rls: Matrix,
    pub error: f64,
    /// Estimate of the environment-induced part of the prediction error.
    pub noise: f64,
    pub fitness: f64,
    pub numerosity: u32,
    pub experience: u64,
    pub action_set_size: f64,
    pub timestamp: u64,
}

impl Classifier {
    pub fn matches(&self, s: State) -> bool {
        self.condition.matches(s)
    }

    pub fn predict(&self, x: &[f64; INPUT_DIM]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum()
    }

    pub fn predict_state(&self, s: State, x0: f64) -> f64 {
        self.predict(&augment(s, x0))
    }

    /// One RLS step with forgetting factor `lambda` towards `target`.
    pub fn rls_update(&mut self, x: &[f64; INPUT_DIM], target: f64, lambda: f64, delta_rls: f64) {
        let (weights, rls) = rls_step(&self.weights, &self.rls, x, target, lambda);
        self.weights = weights;
        self.rls = rls;
        if self
            .rls
            .iter()
            .flatten()
            .any(|v| !v.is_finite() || v.abs() > RLS_RESET_BOUND)
        {
            self.rls = scaled_identity(delta_rls);
        }
    }

    /// Fitness per microclassifier.
    pub fn micro_fitness(&self) -> f64 {
        self.fitness / f64::from(self.numerosity)
    }
}

/// Pure RLS update: returns the new weights and gain matrix.
pub fn rls_step(
    w: &[f64; INPUT_DIM],
    k: &Matrix,
    x: &[f64; INPUT_DIM],
    target: f64,
    lambda: f64,
) -> ([f64; INPUT_DIM], Matrix) {
    let mut kx = [0.0; INPUT_DIM];
    for (i, row) in k.iter().enumerate() {
        kx[i] = row.iter().zip(x).map(|(a, b)| a * b).sum();
    }
    let denom = lambda + x.iter().zip(&kx).map(|(a, b)| a * b).sum::<f64>();
    let gain: Vec<f64> = kx.iter().map(|v| v / denom).collect();
    let err = target - w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    let mut w_new = *w;
    for (wi, g) in w_new.iter_mut().zip(&gain) {
        *wi += g * err;
    }
    // x^T K, K is symmetric up to rounding so use the row form explicitly.
    let mut xk = [0.0; INPUT_DIM];
    for (j, slot) in xk.iter_mut().enumerate() {
        *slot = (0..INPUT_DIM).map(|i| x[i] * k[i][j]).sum();
    }
    let mut k_new = *k;
    for i in 0..INPUT_DIM {
        for j in 0..INPUT_DIM {
            k_new[i][j] = (k[i][j] - gain[i] * xk[j]) / lambda;
        }
    }
    (w_new, k_new)
}
