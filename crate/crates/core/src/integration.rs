//! The integration module: the prediction-error expert `(x̂, ŷ)` and the two-expert
//! meta layer `(w, ω)`, decided jointly each round, followed by the implicit anchor
//! updates and the self-tuning rates driven by the residuals δ and Δ.

use std::fmt;

use crate::error::{check_dim, OccoError, Result};
use crate::geometry::{hedge_step, kl_divergence, BoxDomain, ClippedSimplex, MirrorPoint};
use crate::payoff::{Payoff, SharedPayoff};
use crate::prox::{prox_max_y, prox_min_x};
use crate::vi::{
    dual_extrapolation, fixed_point, lipschitz_bound, FixedPointOptions, OperatorContext, ProblemConstants, Rates,
    SolveReport, SolverPath,
};

/// 2×2 payoff table, row = x strategy, column = y strategy.
pub type Matrix2 = [[f64; 2]; 2];

/// Residuals at or above this value are treated as rounding and clamped to zero.
pub const RESIDUAL_FLOOR: f64 = -1e-6;

/// `[[f(x̂,ŷ), f(x̂,ȳ)], [f(x̄,ŷ), f(x̄,ȳ)]]`.
pub fn build_matrices(f: &dyn Payoff, x_hat: &[f64], y_hat: &[f64], x_bar: &[f64], y_bar: &[f64]) -> Matrix2 {
    [[f.eval(x_hat, y_hat), f.eval(x_hat, y_bar)], [f.eval(x_bar, y_hat), f.eval(x_bar, y_bar)]]
}

fn times_vec(a: &Matrix2, v: [f64; 2]) -> [f64; 2] {
    [a[0][0] * v[0] + a[0][1] * v[1], a[1][0] * v[0] + a[1][1] * v[1]]
}

fn vec_times(v: [f64; 2], a: &Matrix2) -> [f64; 2] {
    [v[0] * a[0][0] + v[1] * a[1][0], v[0] * a[0][1] + v[1] * a[1][1]]
}

fn pair(p: f64) -> [f64; 2] {
    [p, 1.0 - p]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverPolicy {
    FixedPoint,
    DualExtrapolation,
    /// Run both; the certified answer wins when they disagree by more than 1e-5.
    CrossCheck,
}

/// How a round's joint decision was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverFlag {
    FixedPoint,
    DualExtrapolation,
    /// Fixed point stalled and the certified solver finished the job.
    Fallback,
    /// Cross-check disagreed and the certified answer replaced the fixed point.
    Override,
    /// Dual extrapolation hit its iteration cap before the certificate reached tolerance.
    Uncertified,
}

impl fmt::Display for SolverFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverFlag::FixedPoint => "fixed_point",
            SolverFlag::DualExtrapolation => "dual_extrapolation",
            SolverFlag::Fallback => "fallback",
            SolverFlag::Override => "override",
            SolverFlag::Uncertified => "uncertified",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationConfig {
    pub horizon: usize,
    pub epsilon: f64,
    pub l_b_phi: f64,
    pub l_b_psi: f64,
    pub constants: ProblemConstants,
    pub policy: SolverPolicy,
    /// Target accuracy of the joint decision (distance in `K`).
    pub tol: f64,
    pub damping: f64,
    pub max_iter: usize,
}

impl IntegrationConfig {
    /// The experiment instance on `[−1, 1]²`: `L_{B_φ} = D_X = 2`, same for ψ.
    pub fn experiment(horizon: usize) -> Self {
        Self {
            horizon,
            epsilon: 1.0,
            l_b_phi: 2.0,
            l_b_psi: 2.0,
            constants: ProblemConstants::experiment(),
            policy: SolverPolicy::FixedPoint,
            tol: 1e-12,
            damping: 0.5,
            max_iter: 20_000,
        }
    }
}

/// Output of the joint solve plus the side strategies it was computed against.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub x_hat: Vec<f64>,
    pub y_hat: Vec<f64>,
    pub w: f64,
    pub omega: f64,
    pub x_bar: Vec<f64>,
    pub y_bar: Vec<f64>,
    pub iterations: usize,
    pub flag: SolverFlag,
}

impl Decision {
    /// `x_t = w·x̂ + (1−w)·x̄`.
    pub fn x(&self) -> Vec<f64> {
        self.x_hat.iter().zip(&self.x_bar).map(|(a, b)| self.w * a + (1.0 - self.w) * b).collect()
    }

    /// `y_t = ω·ŷ + (1−ω)·ȳ`.
    pub fn y(&self) -> Vec<f64> {
        self.y_hat.iter().zip(&self.y_bar).map(|(a, b)| self.omega * a + (1.0 - self.omega) * b).collect()
    }
}

/// Residuals of one round, raw (before clamping).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residuals {
    pub delta_x: f64,
    pub delta_y: f64,
    pub meta_x: f64,
    pub meta_y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegrationState {
    cfg: IntegrationConfig,
    x_domain: BoxDomain,
    y_domain: BoxDomain,
    simplex: ClippedSimplex,
    x_tilde: MirrorPoint,
    y_tilde: MirrorPoint,
    w_tilde: Vec<f64>,
    omega_tilde: Vec<f64>,
    sums: [f64; 4],
    rates: Rates,
}

impl IntegrationState {
    /// Anchors at the domain centers, `w̃₁ = ω̃₁ = [½, ½]`, rates from empty sums.
    pub fn new(cfg: IntegrationConfig, x_domain: BoxDomain, y_domain: BoxDomain) -> Result<Self> {
        if cfg.horizon < 3 {
            return Err(OccoError::Input(format!("integration horizon {} must be at least 3", cfg.horizon)));
        }
        if !(cfg.epsilon > 0.0) {
            return Err(OccoError::Input(format!("epsilon {} must be positive", cfg.epsilon)));
        }
        let simplex = ClippedSimplex::new(2, 2.0 / cfg.horizon as f64)?;
        let x_tilde = MirrorPoint::euclidean(x_domain.center());
        let y_tilde = MirrorPoint::euclidean(y_domain.center());
        let mut s = Self {
            cfg,
            x_domain,
            y_domain,
            simplex,
            x_tilde,
            y_tilde,
            w_tilde: vec![0.5, 0.5],
            omega_tilde: vec![0.5, 0.5],
            sums: [0.0; 4],
            rates: Rates { eta: 0.0, gamma: 0.0, theta: 0.0, vartheta: 0.0 },
        };
        s.rates = s.rates_from_sums();
        Ok(s)
    }

    pub fn config(&self) -> &IntegrationConfig {
        &self.cfg
    }

    pub fn rates(&self) -> Rates {
        self.rates
    }

    pub fn x_tilde(&self) -> &[f64] {
        &self.x_tilde.primal
    }

    pub fn y_tilde(&self) -> &[f64] {
        &self.y_tilde.primal
    }

    pub fn w_tilde(&self) -> &[f64] {
        &self.w_tilde
    }

    pub fn omega_tilde(&self) -> &[f64] {
        &self.omega_tilde
    }

    pub fn simplex(&self) -> &ClippedSimplex {
        &self.simplex
    }

    /// Accumulated clamped residuals `[Σδˣ, Σδʸ, ΣΔˣ, ΣΔʸ]`.
    pub fn residual_sums(&self) -> [f64; 4] {
        self.sums
    }

    fn rates_from_sums(&self) -> Rates {
        let c = &self.cfg;
        let t = c.horizon as f64;
        let d_x = self.x_domain.diameter();
        let d_y = self.y_domain.diameter();
        Rates {
            eta: c.l_b_phi * d_x * (t + 1.0) / (c.epsilon + self.sums[0]),
            gamma: c.l_b_psi * d_y * (t + 1.0) / (c.epsilon + self.sums[1]),
            theta: t.ln() / (c.epsilon + self.sums[2]),
            vartheta: t.ln() / (c.epsilon + self.sums[3]),
        }
    }

    pub fn operator_context(&self, h: SharedPayoff, x_bar: &[f64], y_bar: &[f64]) -> Result<OperatorContext> {
        OperatorContext::new(
            h,
            self.x_domain.clone(),
            self.y_domain.clone(),
            self.x_tilde.primal.clone(),
            self.y_tilde.primal.clone(),
            self.w_tilde[0],
            self.omega_tilde[0],
            x_bar.to_vec(),
            y_bar.to_vec(),
            self.rates,
            self.cfg.horizon,
        )
    }

    /// Solve the coupled system for `(x̂_t, ŷ_t, w_t, ω_t)`.
    pub fn joint_decision(&self, h: SharedPayoff, x_bar: &[f64], y_bar: &[f64]) -> Result<Decision> {
        let ctx = self.operator_context(h, x_bar, y_bar)?;
        let lip = lipschitz_bound(&self.rates, self.cfg.horizon, &self.cfg.constants);
        // the certificate bounds distance; the residual test needs it scaled by L·diam K
        let de_tol = self.cfg.tol / (1.0 + lip * crate::vi::VariationalProblem::domain(&ctx).diameter());
        let de = |cap: usize| dual_extrapolation(&ctx, lip, de_tol, cap, None);
        let fp_opts = FixedPointOptions {
            damping: self.cfg.damping,
            tol: self.cfg.tol,
            max_iter: self.cfg.max_iter,
            fallback_iter: 200_000,
        };
        let flag_of = |r: &SolveReport| match (r.path, r.fell_back, r.certified) {
            (_, _, false) => SolverFlag::Uncertified,
            (SolverPath::FixedPoint, _, _) => SolverFlag::FixedPoint,
            (SolverPath::DualExtrapolation, true, _) => SolverFlag::Fallback,
            (SolverPath::DualExtrapolation, false, _) => SolverFlag::DualExtrapolation,
        };
        let (report, flag) = match self.cfg.policy {
            SolverPolicy::FixedPoint => {
                let r = fixed_point(&ctx, lip, &fp_opts)?;
                let flag = flag_of(&r);
                (r, flag)
            }
            SolverPolicy::DualExtrapolation => {
                let r = de(50_000_000)?;
                let flag = flag_of(&r);
                (r, flag)
            }
            SolverPolicy::CrossCheck => {
                let fp = fixed_point(&ctx, lip, &fp_opts)?;
                let cert = de(50_000_000)?;
                let gap = crate::geometry::sq_dist(&fp.point, &cert.point).sqrt();
                if gap > 1e-5 && !cert.certified {
                    log::warn!("fixed point and dual extrapolation disagree by {gap:.3e}; dual extrapolation uncertified, keeping the fixed point");
                    let flag = flag_of(&fp);
                    (fp, flag)
                } else if gap > 1e-5 {
                    log::warn!("fixed point and dual extrapolation disagree by {gap:.3e}; keeping the certified answer");
                    let iters = fp.iterations + cert.iterations;
                    let mut r = cert;
                    r.iterations = iters;
                    (r, SolverFlag::Override)
                } else {
                    let flag = flag_of(&fp);
                    (fp, flag)
                }
            }
        };
        if flag == SolverFlag::Uncertified {
            log::warn!("joint decision uncertified after {} iterations", report.iterations);
        }
        let v = ctx.split(&report.point);
        Ok(Decision {
            x_hat: v.x,
            y_hat: v.y,
            w: v.w,
            omega: v.omega,
            x_bar: x_bar.to_vec(),
            y_bar: y_bar.to_vec(),
            iterations: report.iterations,
            flag,
        })
    }

    /// `x̃_{t+1} = argmin_x η·[f(x,ŷ), f(x,ȳ)]·ω + B_φ(x, x̃_t)`.
    pub fn expert_mirror_step_x(&self, f: &dyn Payoff, d: &Decision) -> Result<Vec<f64>> {
        let out = prox_min_x(
            f,
            &[(d.omega, d.y_hat.as_slice()), (1.0 - d.omega, d.y_bar.as_slice())],
            self.rates.eta,
            &self.x_tilde.primal,
            &self.x_domain,
        )?;
        if !out.converged {
            log::warn!("x anchor step stopped at the iteration cap");
        }
        Ok(out.point)
    }

    /// `ỹ_{t+1} = argmax_y γ·wᵀ[f(x̂,y), f(x̄,y)] − B_ψ(y, ỹ_t)`.
    pub fn expert_mirror_step_y(&self, f: &dyn Payoff, d: &Decision) -> Result<Vec<f64>> {
        let out = prox_max_y(
            f,
            &[(d.w, d.x_hat.as_slice()), (1.0 - d.w, d.x_bar.as_slice())],
            self.rates.gamma,
            &self.y_tilde.primal,
            &self.y_domain,
        )?;
        if !out.converged {
            log::warn!("y anchor step stopped at the iteration cap");
        }
        Ok(out.point)
    }

    /// `w̃_{t+1}`: clipped Hedge on the loss `A·ω` at rate θ.
    pub fn meta_mirror_step_w(&self, a: &Matrix2, omega: f64) -> Result<Vec<f64>> {
        hedge_step(&self.w_tilde, &times_vec(a, pair(omega)), self.rates.theta, &self.simplex)
    }

    /// `ω̃_{t+1}`: clipped Hedge on the gain `Aᵀ·w` at rate ϑ.
    pub fn meta_mirror_step_omega(&self, a: &Matrix2, w: f64) -> Result<Vec<f64>> {
        let gain = vec_times(pair(w), a);
        hedge_step(&self.omega_tilde, &[-gain[0], -gain[1]], self.rates.vartheta, &self.simplex)
    }

    /// Replace the rates by the formulas evaluated at the updated residual sums.
    pub fn advance_rates(&mut self, r: &Residuals) -> Result<()> {
        for (i, v) in [r.delta_x, r.delta_y, r.meta_x, r.meta_y].into_iter().enumerate() {
            self.sums[i] += clamp_residual(v)?;
        }
        self.rates = self.rates_from_sums();
        Ok(())
    }

    /// Everything after `f_t` is revealed: anchor steps, meta steps, residuals, rates.
    pub fn observe(&mut self, f: &dyn Payoff, h: &dyn Payoff, d: &Decision) -> Result<Residuals> {
        check_dim(self.x_domain.dim(), d.x_hat.len())?;
        check_dim(self.y_domain.dim(), d.y_hat.len())?;
        let x_next = self.expert_mirror_step_x(f, d)?;
        let y_next = self.expert_mirror_step_y(f, d)?;
        let a = build_matrices(f, &d.x_hat, &d.y_hat, &d.x_bar, &d.y_bar);
        let lam = build_matrices(h, &d.x_hat, &d.y_hat, &d.x_bar, &d.y_bar);
        let w_next = self.meta_mirror_step_w(&a, d.omega)?;
        let o_next = self.meta_mirror_step_omega(&a, d.w)?;
        let (delta_x, delta_y) = expert_residuals(f, h, d, &x_next, &y_next);
        let (meta_x, meta_y) =
            meta_residuals(&a, &lam, d.w, d.omega, &w_next, &o_next, self.rates.theta, self.rates.vartheta)?;
        let r = Residuals { delta_x, delta_y, meta_x, meta_y };
        self.x_tilde = MirrorPoint::euclidean(x_next);
        self.y_tilde = MirrorPoint::euclidean(y_next);
        self.w_tilde = w_next;
        self.omega_tilde = o_next;
        self.advance_rates(&r)?;
        Ok(r)
    }
}

/// Clamp a residual that is negative only through rounding; reject real violations.
pub fn clamp_residual(v: f64) -> Result<f64> {
    if !v.is_finite() || v < RESIDUAL_FLOOR {
        return Err(OccoError::InvariantViolation(format!("residual {v:e} is below {RESIDUAL_FLOOR:e}")));
    }
    Ok(v.max(0.0))
}

/// `(δ_t^x, δ_t^y)` given the updated anchors `x̃_{t+1}`, `ỹ_{t+1}`.
pub fn expert_residuals(f: &dyn Payoff, h: &dyn Payoff, d: &Decision, x_next: &[f64], y_next: &[f64]) -> (f64, f64) {
    let (xh, yh, xb, yb) = (d.x_hat.as_slice(), d.y_hat.as_slice(), d.x_bar.as_slice(), d.y_bar.as_slice());
    let om = pair(d.omega);
    let w = pair(d.w);
    let row = |g: &dyn Payoff, x: &[f64]| om[0] * g.eval(x, yh) + om[1] * g.eval(x, yb);
    let col = |g: &dyn Payoff, y: &[f64]| w[0] * g.eval(xh, y) + w[1] * g.eval(xb, y);
    let delta_x = row(f, xh) - row(h, xh) + row(h, x_next) - row(f, x_next);
    let delta_y = col(h, yh) - col(f, yh) + col(f, y_next) - col(h, y_next);
    (delta_x, delta_y)
}

/// `(Δ_t^x, Δ_t^y)`.
#[allow(clippy::too_many_arguments)]
pub fn meta_residuals(
    a: &Matrix2,
    lam: &Matrix2,
    w: f64,
    omega: f64,
    w_next: &[f64],
    omega_next: &[f64],
    theta: f64,
    vartheta: f64,
) -> Result<(f64, f64)> {
    check_dim(2, w_next.len())?;
    check_dim(2, omega_next.len())?;
    let diff = [[a[0][0] - lam[0][0], a[0][1] - lam[0][1]], [a[1][0] - lam[1][0], a[1][1] - lam[1][1]]];
    let (wv, ov) = (pair(w), pair(omega));
    let dw = [wv[0] - w_next[0], wv[1] - w_next[1]];
    let dox = times_vec(&diff, ov);
    let meta_x = dw[0] * dox[0] + dw[1] * dox[1] - kl_divergence(w_next, &wv)? / theta;
    let wd = vec_times(wv, &diff);
    let d_o = [ov[0] - omega_next[0], ov[1] - omega_next[1]];
    let meta_y = -(wd[0] * d_o[0] + wd[1] * d_o[1]) - kl_divergence(omega_next, &ov)? / vartheta;
    Ok((meta_x, meta_y))
}

/// Convenience: an integration state for the experiment instance with horizon `t`.
pub fn experiment_state(t: usize) -> Result<IntegrationState> {
    let u = BoxDomain::interval(-1.0, 1.0)?;
    IntegrationState::new(IntegrationConfig::experiment(t), u.clone(), u)
}
