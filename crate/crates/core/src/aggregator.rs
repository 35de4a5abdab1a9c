//! Clipped Hedge over `d` predictor sequences with a self-tuning rate.

use std::sync::Arc;

use crate::error::{check_dim, OccoError, Result};
use crate::geometry::{hedge_step, kl_divergence, ClippedSimplex};
use crate::integration::clamp_residual;
use crate::payoff::{MixturePayoff, SharedPayoff};

#[derive(Debug, Clone, PartialEq)]
pub struct AggregatorState {
    simplex: ClippedSimplex,
    horizon: usize,
    epsilon: f64,
    weights: Vec<f64>,
    residual_sum: f64,
    rate: f64,
}

impl AggregatorState {
    /// Uniform weights on `Δ_d^{d/T}` (floor `1/T`), `ζ₁ = ln T/ε`.
    pub fn new(d: usize, horizon: usize, epsilon: f64) -> Result<Self> {
        if d == 0 || horizon < d.max(2) {
            return Err(OccoError::Input(format!("aggregator needs T ≥ max(d, 2), got d = {d}, T = {horizon}")));
        }
        if !(epsilon > 0.0) {
            return Err(OccoError::Input(format!("epsilon {epsilon} must be positive")));
        }
        let simplex = ClippedSimplex::new(d, d as f64 / horizon as f64)?;
        let weights = simplex.uniform();
        let rate = (horizon as f64).ln() / epsilon;
        Ok(Self { simplex, horizon, epsilon, weights, residual_sum: 0.0, rate })
    }

    pub fn dim(&self) -> usize {
        self.simplex.dim()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn simplex(&self) -> &ClippedSimplex {
        &self.simplex
    }

    /// Overwrite the weights, e.g. to start from a non-uniform prior.
    pub fn set_weights(&mut self, w: Vec<f64>) -> Result<()> {
        check_dim(self.dim(), w.len())?;
        if !self.simplex.contains(&w, 1e-12) {
            return Err(OccoError::Domain(format!("{w:?} is not in the clipped simplex")));
        }
        self.weights = w;
        Ok(())
    }

    /// `h_t = Σ ξᵏ hᵏ`; a single predictor is returned as is.
    pub fn aggregate(&self, bank: &[SharedPayoff]) -> Result<SharedPayoff> {
        check_dim(self.dim(), bank.len())?;
        if bank.len() == 1 {
            return Ok(bank[0].clone());
        }
        Ok(Arc::new(MixturePayoff::new(bank.to_vec(), self.weights.clone())?))
    }

    /// Hedge step at the current rate, then `Δ_t`, then the next rate. Returns `Δ_t`.
    pub fn update(&mut self, loss: &[f64]) -> Result<f64> {
        check_dim(self.dim(), loss.len())?;
        if loss.iter().any(|l| !(*l >= 0.0)) {
            return Err(OccoError::Input(format!("aggregator losses must be nonnegative, got {loss:?}")));
        }
        let next = hedge_step(&self.weights, loss, self.rate, &self.simplex)?;
        let delta = residual(loss, &self.weights, &next, self.rate)?;
        self.residual_sum += clamp_residual(delta)?;
        self.weights = next;
        self.rate = (self.horizon as f64).ln() / (self.epsilon + self.residual_sum);
        Ok(delta)
    }
}

/// `Δ = ⟨L, ξ − ξ'⟩ − KL(ξ', ξ)/ζ`.
pub fn residual(loss: &[f64], xi: &[f64], xi_next: &[f64], rate: f64) -> Result<f64> {
    let lin: f64 = loss.iter().zip(xi.iter().zip(xi_next)).map(|(l, (a, b))| l * (a - b)).sum();
    Ok(lin - kl_divergence(xi_next, xi)? / rate)
}
