//! Recursive projection estimator driven by one-bit observations.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::channel::NoiseModel;
use crate::error::{Error, Result};
use crate::topology::EdgeIndex;

/// `Π_W(x)`: clamp to `[-W, W]`.
pub fn project(x: f64, bound: f64) -> f64 {
    x.clamp(-bound, bound)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepPolicy {
    /// `β / k`
    Decaying,
    /// `β`
    Constant,
}

impl StepPolicy {
    /// Step size at iteration `k >= 1`.
    pub fn step(self, beta: f64, k: u64) -> f64 {
        match self {
            StepPolicy::Decaying => beta / k as f64,
            StepPolicy::Constant => beta,
        }
    }
}

/// `Π_W{ x̂ + step · (F(B − x̂) − S) }`.
pub fn rpa_step(prev: f64, bit: bool, threshold: f64, noise: &NoiseModel, step: f64, bound: f64) -> f64 {
    let innovation = noise.cdf(threshold - prev) - if bit { 1.0 } else { 0.0 };
    project(prev + step * innovation, bound)
}

/// One estimate per edge, in edge-index order.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorBank {
    estimates: Vec<f64>,
    bound: f64,
    beta: f64,
    policy: StepPolicy,
}

impl EstimatorBank {
    pub fn new(initial: Vec<f64>, bound: f64, beta: f64, policy: StepPolicy) -> Result<Self> {
        if !(bound > 0.0 && bound.is_finite()) {
            return Err(Error::config("estimator.W", "projection bound must be positive"));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::config("estimator.beta", "must be positive"));
        }
        if let Some(p) = initial.iter().position(|v| !(v.abs() <= bound)) {
            return Err(Error::config(
                format!("estimator.initial_estimates[{p}]"),
                format!("|{}| exceeds the projection bound {bound}", initial[p]),
            ));
        }
        Ok(Self { estimates: initial, bound, beta, policy })
    }

    pub fn estimates(&self) -> &[f64] {
        &self.estimates
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn policy(&self) -> StepPolicy {
        self.policy
    }

    /// Updates every edge estimate from its bit at iteration `k >= 1`.
    pub fn update(&mut self, bits: &[bool], thresholds: &[f64], noise: &NoiseModel, k: u64) {
        let step = self.policy.step(self.beta, k);
        for ((est, &bit), &b) in self.estimates.iter_mut().zip(bits).zip(thresholds) {
            *est = rpa_step(*est, bit, b, noise, step, self.bound);
        }
    }

    pub fn set_estimates(&mut self, values: &[f64]) {
        self.estimates.copy_from_slice(values);
    }
}

/// `θ_ij = x̂_ij − x_j` in edge-index order.
pub fn estimate_error_vector(estimates: &[f64], x: &DVector<f64>, idx: &EdgeIndex) -> Result<DVector<f64>> {
    if estimates.len() != idx.len() {
        return Err(Error::Dimension(format!("{} estimates for {} edges", estimates.len(), idx.len())));
    }
    Ok(DVector::from_iterator(
        idx.len(),
        idx.edges().iter().zip(estimates).map(|(e, est)| est - x[e.observed]),
    ))
}
