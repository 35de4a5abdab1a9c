//! Optimistic proximal point baseline with a single predictor and ν-driven rates.

use crate::error::{OccoError, Result};
use crate::geometry::{bregman, BoxDomain, MirrorPoint, Regularizer};
use crate::integration::{clamp_residual, SolverFlag};
use crate::payoff::{Payoff, SharedPayoff};
use crate::prox::{prox_max_y, prox_min_x};
use crate::vi::{fixed_point, FixedPointOptions, ProblemConstants, SaddleContext, SolverPath};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptOppmConfig {
    pub epsilon: f64,
    pub l_b_phi: f64,
    pub l_b_psi: f64,
    /// Path-length budget of the x comparators.
    pub lambda: f64,
    /// Path-length budget of the y comparators.
    pub mu: f64,
    pub constants: ProblemConstants,
    pub tol: f64,
    pub damping: f64,
}

impl OptOppmConfig {
    /// `[−1, 1]²` with budgets `λ = μ = D·T`.
    pub fn experiment(horizon: usize) -> Self {
        Self {
            epsilon: 1.0,
            l_b_phi: 2.0,
            l_b_psi: 2.0,
            lambda: 2.0 * horizon as f64,
            mu: 2.0 * horizon as f64,
            constants: ProblemConstants::experiment(),
            tol: 1e-12,
            damping: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptOppmDecision {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub iterations: usize,
    pub flag: SolverFlag,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptOppmState {
    cfg: OptOppmConfig,
    x_domain: BoxDomain,
    y_domain: BoxDomain,
    x_tilde: MirrorPoint,
    y_tilde: MirrorPoint,
    sums: [f64; 2],
    eta: f64,
    gamma: f64,
}

impl OptOppmState {
    pub fn new(cfg: OptOppmConfig, x_domain: BoxDomain, y_domain: BoxDomain) -> Result<Self> {
        if !(cfg.epsilon > 0.0) || !(cfg.lambda >= 0.0) || !(cfg.mu >= 0.0) {
            return Err(OccoError::Input(format!("invalid baseline configuration {cfg:?}")));
        }
        let x_tilde = MirrorPoint::euclidean(x_domain.center());
        let y_tilde = MirrorPoint::euclidean(y_domain.center());
        let mut s = Self { cfg, x_domain, y_domain, x_tilde, y_tilde, sums: [0.0; 2], eta: 0.0, gamma: 0.0 };
        s.refresh_rates();
        Ok(s)
    }

    fn refresh_rates(&mut self) {
        let c = &self.cfg;
        self.eta = c.l_b_phi * (self.x_domain.diameter() + c.lambda) / (c.epsilon + self.sums[0]);
        self.gamma = c.l_b_psi * (self.y_domain.diameter() + c.mu) / (c.epsilon + self.sums[1]);
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn x_tilde(&self) -> &[f64] {
        &self.x_tilde.primal
    }

    pub fn y_tilde(&self) -> &[f64] {
        &self.y_tilde.primal
    }

    /// `(x_t, y_t)`: saddle point of `η·γ·h + γ·B_φ(·, x̃) − η·B_ψ(·, ỹ)`.
    pub fn decide(&self, h: SharedPayoff) -> Result<OptOppmDecision> {
        let ctx = SaddleContext::new(
            h,
            self.x_domain.clone(),
            self.y_domain.clone(),
            self.x_tilde.primal.clone(),
            self.y_tilde.primal.clone(),
            self.eta,
            self.gamma,
        )?;
        let lip = ctx.lipschitz_bound(&self.cfg.constants);
        let opts = FixedPointOptions { damping: self.cfg.damping, tol: self.cfg.tol, ..FixedPointOptions::default() };
        let r = fixed_point(&ctx, lip, &opts)?;
        let flag = match (r.path, r.certified) {
            (_, false) => SolverFlag::Uncertified,
            (SolverPath::FixedPoint, _) => SolverFlag::FixedPoint,
            (SolverPath::DualExtrapolation, _) => SolverFlag::Fallback,
        };
        let (x, y) = r.point.split_at(ctx.x_dim());
        Ok(OptOppmDecision { x: x.to_vec(), y: y.to_vec(), iterations: r.iterations, flag })
    }

    /// Implicit anchor steps against `f_t`, residuals `(ν^x, ν^y)` and the rate update.
    pub fn update(&mut self, f: &dyn Payoff, h: &dyn Payoff, d: &OptOppmDecision) -> Result<(f64, f64)> {
        let x_next = prox_min_x(f, &[(1.0, d.y.as_slice())], self.eta, &self.x_tilde.primal, &self.x_domain)?.point;
        let y_next = prox_max_y(f, &[(1.0, d.x.as_slice())], self.gamma, &self.y_tilde.primal, &self.y_domain)?.point;
        let (nu_x, nu_y) = residuals(f, h, d, &x_next, &y_next, self.eta, self.gamma)?;
        self.sums[0] += clamp_residual(nu_x)?;
        self.sums[1] += clamp_residual(nu_y)?;
        self.x_tilde = MirrorPoint::euclidean(x_next);
        self.y_tilde = MirrorPoint::euclidean(y_next);
        self.refresh_rates();
        Ok((nu_x, nu_y))
    }
}

/// `ν^x = f(x,y) − h(x,y) + h(x̃',y) − f(x̃',y) − B_φ(x̃', x)/η` and its y counterpart.
pub fn residuals(
    f: &dyn Payoff,
    h: &dyn Payoff,
    d: &OptOppmDecision,
    x_next: &[f64],
    y_next: &[f64],
    eta: f64,
    gamma: f64,
) -> Result<(f64, f64)> {
    let (x, y) = (d.x.as_slice(), d.y.as_slice());
    let bx = bregman(Regularizer::EuclideanHalfSquared, x_next, &MirrorPoint::euclidean(x.to_vec()))?;
    let by = bregman(Regularizer::EuclideanHalfSquared, y_next, &MirrorPoint::euclidean(y.to_vec()))?;
    let nu_x = f.eval(x, y) - h.eval(x, y) + h.eval(x_next, y) - f.eval(x_next, y) - bx / eta;
    let nu_y = f.eval(x, y_next) - h.eval(x, y_next) + h.eval(x, y) - f.eval(x, y) - by / gamma;
    Ok((nu_x, nu_y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::payoff::{PolyPayoff, QuadraticSaddle, ZeroPayoff};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn state(t: usize) -> OptOppmState {
        let u = BoxDomain::interval(-1.0, 1.0).unwrap();
        OptOppmState::new(OptOppmConfig::experiment(t), u.clone(), u).unwrap()
    }

    #[test]
    fn decide_examples() {
        let s = state(10);
        let d = s.decide(Arc::new(ZeroPayoff)).unwrap();
        assert_eq!((d.x.as_slice(), d.y.as_slice()), (s.x_tilde(), s.y_tilde()));

        let u = BoxDomain::interval(-1.0, 1.0).unwrap();
        let mut cfg = OptOppmConfig::experiment(10);
        // η = L_{B_φ}(D_X + λ)/ε = 1
        cfg.lambda = 0.0;
        cfg.mu = 0.0;
        cfg.l_b_phi = 0.5;
        cfg.l_b_psi = 0.5;
        let s = OptOppmState::new(cfg, u.clone(), u).unwrap();
        assert_eq!((s.eta(), s.gamma()), (1.0, 1.0));
        let d = s.decide(Arc::new(PolyPayoff::bilinear())).unwrap();
        assert!(d.x[0].abs() < 1e-12 && d.y[0].abs() < 1e-12);
    }

    #[test]
    fn initial_rate() {
        let s = state(100);
        assert_eq!(s.eta(), 2.0 * (2.0 + 200.0));
    }

    #[test]
    fn perfect_predictor_residuals_vanish() {
        let mut s = state(50);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let f: Arc<dyn Payoff> = Arc::new(QuadraticSaddle::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            let d = s.decide(f.clone()).unwrap();
            let (nx, ny) = s.update(f.as_ref(), f.as_ref(), &d).unwrap();
            assert!(nx.abs() < 1e-9 && ny.abs() < 1e-9, "{nx} {ny}");
        }
    }

    #[test]
    fn residuals_match_duplicate_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let f = QuadraticSaddle::new(rng.gen(), rng.gen());
            let h = QuadraticSaddle::new(rng.gen(), rng.gen());
            let mut r = || rng.gen_range(-1.0..1.0);
            let (x, y, xn, yn) = (r(), r(), r(), r());
            let (eta, gamma) = (3.0, 0.5);
            let d = OptOppmDecision { x: vec![x], y: vec![y], iterations: 0, flag: SolverFlag::FixedPoint };
            let (nx, ny) = residuals(&f, &h, &d, &[xn], &[yn], eta, gamma).unwrap();
            let ex = f.value(x, y) - h.value(x, y) + h.value(xn, y) - f.value(xn, y) - 0.5 * (xn - x).powi(2) / eta;
            let ey = f.value(x, yn) - h.value(x, yn) + h.value(x, y) - f.value(x, y) - 0.5 * (yn - y).powi(2) / gamma;
            assert!((nx - ex).abs() < 1e-13 && (ny - ey).abs() < 1e-13);
        }
    }
}
