//! The coupled expert/meta system as a variational inequality over a box.
//!
//! The joint decision `(x, y, w, ω)` lives in `K = X × Y × [1/T, 1−1/T]²` and solves
//! `⟨G(v*), v − v*⟩ ≥ 0` for all `v ∈ K`. Two solvers are provided: Nesterov's dual
//! extrapolation with its a-priori error certificate, and a damped block
//! best-response iteration that is much cheaper when the rates (and hence the
//! Lipschitz constant of `G`) are large.
//!
//! Vectors are flattened as `[x…, y…, w, ω]`.

use std::sync::Arc;

use crate::error::{check_dim, OccoError, Result};
use crate::geometry::{norm, sq_dist, BoxDomain};
use crate::payoff::{PolyPayoff, SharedPayoff};
use crate::prox::{prox_max_y, prox_min_x};

/// A variational inequality over a box with an operator `G`.
pub trait VariationalProblem {
    fn domain(&self) -> &BoxDomain;
    fn operator(&self, v: &[f64]) -> Result<Vec<f64>>;
}

/// Problems whose blocks each admit an exact best response with the rest held fixed.
pub trait BestResponse: VariationalProblem {
    /// Simultaneous (Jacobi) best response of every block to `v`.
    fn best_response(&self, v: &[f64]) -> Result<Vec<f64>>;
    /// Starting point for the fixed-point iteration.
    fn warm_start(&self) -> Vec<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates {
    pub eta: f64,
    pub gamma: f64,
    pub theta: f64,
    pub vartheta: f64,
}

/// Constants entering the Lipschitz bound of `G`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemConstants {
    pub g_x: f64,
    pub g_y: f64,
    pub d_x: f64,
    pub d_y: f64,
    pub l_xx: f64,
    pub l_xy: f64,
    pub l_yx: f64,
    pub l_yy: f64,
    pub l_phi: f64,
    pub l_psi: f64,
}

impl ProblemConstants {
    /// Constants of the quadratic experiment family on `[−1, 1]²` with Euclidean mirror maps.
    pub fn experiment() -> Self {
        Self {
            g_x: 4.0,
            g_y: 4.0,
            d_x: 2.0,
            d_y: 2.0,
            l_xx: 1.0,
            l_xy: 1.0,
            l_yx: 1.0,
            l_yy: 1.0,
            l_phi: 1.0,
            l_psi: 1.0,
        }
    }
}

/// `√max{C_x, C_y, C_w, C_ω}`.
pub fn lipschitz_bound(rates: &Rates, horizon: usize, k: &ProblemConstants) -> f64 {
    let Rates { eta, gamma, theta, vartheta } = *rates;
    let t = horizon as f64;
    let c_x = 4.0
        * ((eta * k.l_xx + k.l_phi).powi(2)
            + gamma * gamma * k.l_yx * k.l_yx
            + (theta * theta + 4.0 * vartheta * vartheta) * k.g_x * k.g_x);
    let c_y = 4.0
        * ((gamma * k.l_yy + k.l_psi).powi(2)
            + theta * theta * k.l_xy * k.l_xy
            + (vartheta * vartheta + 4.0 * theta * theta) * k.g_y * k.g_y);
    let c = (k.d_x * k.d_x * (k.l_xx * k.d_x + k.l_xy * k.d_y).powi(2))
        .min(k.d_y * k.d_y * (k.l_yx * k.d_x + k.l_yy * k.d_y).powi(2))
        + t * t;
    let c_w = 2.0 * gamma * gamma * k.l_yx * k.l_yx * k.d_x * k.d_x + 4.0 * vartheta * vartheta * c;
    let c_o = 2.0 * eta * eta * k.l_xy * k.l_xy * k.d_y * k.d_y + 4.0 * theta * theta * c;
    c_x.max(c_y).max(c_w).max(c_o).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointVector {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub w: f64,
    pub omega: f64,
}

impl JointVector {
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.x.len() + self.y.len() + 2);
        v.extend_from_slice(&self.x);
        v.extend_from_slice(&self.y);
        v.push(self.w);
        v.push(self.omega);
        v
    }

    pub fn from_flat(v: &[f64], x_dim: usize) -> Self {
        let n = v.len();
        Self { x: v[..x_dim].to_vec(), y: v[x_dim..n - 2].to_vec(), w: v[n - 2], omega: v[n - 1] }
    }

    pub fn distance(&self, other: &JointVector) -> f64 {
        sq_dist(&self.to_flat(), &other.to_flat()).sqrt()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn check_rate(name: &str, r: f64) -> Result<()> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(OccoError::Input(format!("rate {name} = {r} must be positive and finite")));
    }
    Ok(())
}

/// Everything the operator of the coupled system depends on in one round.
#[derive(Debug, Clone)]
pub struct OperatorContext {
    pub predictor: SharedPayoff,
    pub x_anchor: Vec<f64>,
    pub y_anchor: Vec<f64>,
    /// First coordinate of `w̃_t`.
    pub w_anchor: f64,
    /// First coordinate of `ω̃_t`.
    pub omega_anchor: f64,
    pub x_bar: Vec<f64>,
    pub y_bar: Vec<f64>,
    pub rates: Rates,
    pub horizon: usize,
    x_domain: BoxDomain,
    y_domain: BoxDomain,
    joint: BoxDomain,
}

#[allow(clippy::too_many_arguments)]
impl OperatorContext {
    pub fn new(
        predictor: SharedPayoff,
        x_domain: BoxDomain,
        y_domain: BoxDomain,
        x_anchor: Vec<f64>,
        y_anchor: Vec<f64>,
        w_anchor: f64,
        omega_anchor: f64,
        x_bar: Vec<f64>,
        y_bar: Vec<f64>,
        rates: Rates,
        horizon: usize,
    ) -> Result<Self> {
        if horizon < 3 {
            return Err(OccoError::Input(format!("horizon {horizon} leaves an empty weight interval")));
        }
        check_dim(x_domain.dim(), x_anchor.len())?;
        check_dim(x_domain.dim(), x_bar.len())?;
        check_dim(y_domain.dim(), y_anchor.len())?;
        check_dim(y_domain.dim(), y_bar.len())?;
        for (name, p, d) in [
            ("x anchor", &x_anchor, &x_domain),
            ("x bar", &x_bar, &x_domain),
            ("y anchor", &y_anchor, &y_domain),
            ("y bar", &y_bar, &y_domain),
        ] {
            if !d.contains(p, 1e-12) {
                return Err(OccoError::Input(format!("{name} {p:?} outside its domain")));
            }
        }
        let floor = 1.0 / horizon as f64;
        for (name, a) in [("w anchor", w_anchor), ("omega anchor", omega_anchor)] {
            if !(a >= floor - 1e-12 && a <= 1.0 - floor + 1e-12) {
                return Err(OccoError::Input(format!("{name} {a} outside the clipped simplex")));
            }
        }
        check_rate("eta", rates.eta)?;
        check_rate("gamma", rates.gamma)?;
        check_rate("theta", rates.theta)?;
        check_rate("vartheta", rates.vartheta)?;
        let weights = BoxDomain::cube(2, floor, 1.0 - floor)?;
        let joint = x_domain.product(&y_domain).product(&weights);
        // scalar quadratic predictors are flattened once so every evaluation is a few flops
        let predictor = match (x_domain.dim(), y_domain.dim(), predictor.quadratic()) {
            (1, 1, Some(q)) => match PolyPayoff::new(q, 1.0) {
                Ok(p) => Arc::new(p) as SharedPayoff,
                Err(_) => predictor,
            },
            _ => predictor,
        };
        Ok(Self {
            predictor,
            x_anchor,
            y_anchor,
            w_anchor,
            omega_anchor,
            x_bar,
            y_bar,
            rates,
            horizon,
            x_domain,
            y_domain,
            joint,
        })
    }

    pub fn x_domain(&self) -> &BoxDomain {
        &self.x_domain
    }

    pub fn y_domain(&self) -> &BoxDomain {
        &self.y_domain
    }

    pub fn split(&self, v: &[f64]) -> JointVector {
        JointVector::from_flat(v, self.x_domain.dim())
    }

    /// `(x̃_t, ỹ_t, w̃_t¹, ω̃_t¹)`, the solution when the predictor is zero.
    pub fn anchors(&self) -> JointVector {
        JointVector { x: self.x_anchor.clone(), y: self.y_anchor.clone(), w: self.w_anchor, omega: self.omega_anchor }
    }

    /// `G(v)` evaluated block by block.
    pub fn operator_g(&self, v: &JointVector) -> Result<Vec<f64>> {
        check_dim(self.x_domain.dim(), v.x.len())?;
        check_dim(self.y_domain.dim(), v.y.len())?;
        for (name, p) in [("w", v.w), ("omega", v.omega)] {
            if !(p > 0.0 && p < 1.0) {
                return Err(OccoError::Domain(format!("{name} = {p} is not in (0, 1)")));
            }
        }
        let h = &self.predictor;
        let Rates { eta, gamma, theta, vartheta } = self.rates;
        let (x, y, w, om) = (&v.x, &v.y, v.w, v.omega);
        let (xb, yb) = (&self.x_bar, &self.y_bar);
        let mut out = Vec::with_capacity(x.len() + y.len() + 2);

        let gxy = h.grad_x(x, y);
        let gxb = h.grad_x(x, yb);
        for i in 0..x.len() {
            out.push(eta * om * gxy[i] + eta * (1.0 - om) * gxb[i] + x[i] - self.x_anchor[i]);
        }
        let gyy = h.grad_y_neg(x, y);
        let gyb = h.grad_y_neg(xb, y);
        for i in 0..y.len() {
            out.push(gamma * w * gyy[i] + gamma * (1.0 - w) * gyb[i] + y[i] - self.y_anchor[i]);
        }
        let (h_xy, h_xyb, h_xby, h_xbyb) = (h.eval(x, y), h.eval(x, yb), h.eval(xb, y), h.eval(xb, yb));
        let wa = self.w_anchor;
        out.push(theta * (om * (h_xy - h_xby) + (1.0 - om) * (h_xyb - h_xbyb)) + (w * (1.0 - wa) / (wa * (1.0 - w))).ln());
        let oa = self.omega_anchor;
        out.push(
            vartheta * (w * (h_xyb - h_xy) + (1.0 - w) * (h_xbyb - h_xby))
                + (om * (1.0 - oa) / (oa * (1.0 - om))).ln(),
        );
        Ok(out)
    }

    /// Joint best response to `v`: the four block subproblems with the others frozen.
    pub fn block_best_response(&self, v: &JointVector) -> Result<JointVector> {
        let h = self.predictor.as_ref();
        let Rates { eta, gamma, theta, vartheta } = self.rates;
        let (x, y, w, om) = (&v.x, &v.y, v.w, v.omega);
        let (xb, yb) = (&self.x_bar, &self.y_bar);
        let nx = prox_min_x(h, &[(om, y.as_slice()), (1.0 - om, yb.as_slice())], eta, &self.x_anchor, &self.x_domain)?;
        let ny = prox_max_y(h, &[(w, x.as_slice()), (1.0 - w, xb.as_slice())], gamma, &self.y_anchor, &self.y_domain)?;
        let (h_xy, h_xyb, h_xby, h_xbyb) = (h.eval(x, y), h.eval(x, yb), h.eval(xb, y), h.eval(xb, yb));
        let floor = 1.0 / self.horizon as f64;
        let c_w = om * (h_xy - h_xby) + (1.0 - om) * (h_xyb - h_xbyb);
        let c_o = w * (h_xy - h_xyb) + (1.0 - w) * (h_xby - h_xbyb);
        let nw = sigmoid(logit(self.w_anchor) - theta * c_w).clamp(floor, 1.0 - floor);
        let no = sigmoid(logit(self.omega_anchor) + vartheta * c_o).clamp(floor, 1.0 - floor);
        Ok(JointVector { x: nx.point, y: ny.point, w: nw, omega: no })
    }
}

impl VariationalProblem for OperatorContext {
    fn domain(&self) -> &BoxDomain {
        &self.joint
    }

    fn operator(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.operator_g(&self.split(v))
    }
}

impl BestResponse for OperatorContext {
    fn best_response(&self, v: &[f64]) -> Result<Vec<f64>> {
        Ok(self.block_best_response(&self.split(v))?.to_flat())
    }

    fn warm_start(&self) -> Vec<f64> {
        self.anchors().to_flat()
    }
}

/// The two-block saddle problem `argmin_x max_y η·γ·h + γ·B_φ(x, x̃) − η·B_ψ(y, ỹ)`.
#[derive(Debug, Clone)]
pub struct SaddleContext {
    pub predictor: SharedPayoff,
    pub x_anchor: Vec<f64>,
    pub y_anchor: Vec<f64>,
    pub eta: f64,
    pub gamma: f64,
    x_domain: BoxDomain,
    joint: BoxDomain,
}

impl SaddleContext {
    pub fn new(
        predictor: SharedPayoff,
        x_domain: BoxDomain,
        y_domain: BoxDomain,
        x_anchor: Vec<f64>,
        y_anchor: Vec<f64>,
        eta: f64,
        gamma: f64,
    ) -> Result<Self> {
        check_dim(x_domain.dim(), x_anchor.len())?;
        check_dim(y_domain.dim(), y_anchor.len())?;
        check_rate("eta", eta)?;
        check_rate("gamma", gamma)?;
        let joint = x_domain.product(&y_domain);
        Ok(Self { predictor, x_anchor, y_anchor, eta, gamma, x_domain, joint })
    }

    pub fn x_dim(&self) -> usize {
        self.x_domain.dim()
    }

    /// Frobenius bound on the block Jacobian of the saddle operator.
    pub fn lipschitz_bound(&self, k: &ProblemConstants) -> f64 {
        let (e, g) = (self.eta, self.gamma);
        ((e * k.l_xx + k.l_phi).powi(2) + (e * k.l_xy).powi(2) + (g * k.l_yx).powi(2) + (g * k.l_yy + k.l_psi).powi(2))
            .sqrt()
    }
}

impl VariationalProblem for SaddleContext {
    fn domain(&self) -> &BoxDomain {
        &self.joint
    }

    fn operator(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.joint.dim(), v.len())?;
        let (x, y) = v.split_at(self.x_domain.dim());
        let h = &self.predictor;
        let mut out: Vec<f64> = h.grad_x(x, y).iter().zip(x).zip(&self.x_anchor).map(|((g, a), b)| self.eta * g + a - b).collect();
        out.extend(h.grad_y_neg(x, y).iter().zip(y).zip(&self.y_anchor).map(|((g, a), b)| self.gamma * g + a - b));
        Ok(out)
    }
}

impl BestResponse for SaddleContext {
    fn best_response(&self, v: &[f64]) -> Result<Vec<f64>> {
        let (x, y) = v.split_at(self.x_domain.dim());
        let y_domain = BoxDomain::new(
            self.joint.lower()[self.x_domain.dim()..].to_vec(),
            self.joint.upper()[self.x_domain.dim()..].to_vec(),
        )?;
        let h = self.predictor.as_ref();
        let mut out = prox_min_x(h, &[(1.0, y)], self.eta, &self.x_anchor, &self.x_domain)?.point;
        out.extend(prox_max_y(h, &[(1.0, x)], self.gamma, &self.y_anchor, &y_domain)?.point);
        Ok(out)
    }

    fn warm_start(&self) -> Vec<f64> {
        let mut v = self.x_anchor.clone();
        v.extend_from_slice(&self.y_anchor);
        v
    }
}

/// `‖v − Π_K(v − G(v))‖`.
pub fn natural_residual(p: &(impl VariationalProblem + ?Sized), v: &[f64]) -> Result<f64> {
    let g = p.operator(v)?;
    let mut step: Vec<f64> = v.iter().zip(&g).map(|(a, b)| a - b).collect();
    p.domain().clamp_in_place(&mut step);
    Ok(sq_dist(v, &step).sqrt())
}

/// `max_{z∈K} ⟨G(v), v − z⟩`, exact for a box.
pub fn box_vi_gap(p: &(impl VariationalProblem + ?Sized), v: &[f64]) -> Result<f64> {
    let g = p.operator(v)?;
    let dom = p.domain();
    Ok(g.iter()
        .enumerate()
        .map(|(i, gi)| gi * (v[i] - if *gi > 0.0 { dom.lower()[i] } else { dom.upper()[i] }))
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverPath {
    FixedPoint,
    DualExtrapolation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub point: Vec<f64>,
    pub iterations: usize,
    /// Dual extrapolation: the larger of the a-priori distance bound `‖G(y₀)‖(L/(L+1))^{k/2}`
    /// and `(1 + L)·‖v − Π_K(v − G(v))‖`.
    /// Fixed point: the final best-response residual `‖BR(v) − v‖`.
    pub certificate: f64,
    pub certified: bool,
    pub path: SolverPath,
    /// The fixed-point path gave up and dual extrapolation produced `point`.
    pub fell_back: bool,
}

/// Dual extrapolation for a strongly monotone, `lip`-Lipschitz operator.
///
/// `observer` sees the running λ-weighted average after every iteration.
pub fn dual_extrapolation(
    p: &(impl VariationalProblem + ?Sized),
    lip: f64,
    tol: f64,
    max_iter: usize,
    mut observer: Option<&mut dyn FnMut(usize, &[f64])>,
) -> Result<SolveReport> {
    if !(lip > 0.0) || !lip.is_finite() {
        return Err(OccoError::Input(format!("Lipschitz constant {lip} must be positive and finite")));
    }
    if !(tol > 0.0) {
        return Err(OccoError::Input(format!("tolerance {tol} must be positive")));
    }
    let dom = p.domain();
    let y0 = dom.center();
    let g0 = p.operator(&y0)?;
    let g0_norm = norm(&g0);
    // λ-weighted running averages of y_i and G(y_i); each new λ has share 1/(L+1)
    let mut y_avg = y0;
    let mut g_avg = g0;
    let share = 1.0 / (lip + 1.0);
    let decay = (lip / (lip + 1.0)).sqrt();
    let mut cert = g0_norm;
    let mut k = 0;
    if let Some(obs) = observer.as_mut() {
        obs(0, &y_avg);
    }
    // the a-priori bound presumes strong monotonicity, so it is confirmed a posteriori
    // by the natural residual before the point is reported as certified
    let mut verified = f64::INFINITY;
    loop {
        if cert <= tol {
            verified = (1.0 + lip) * natural_residual(p, &y_avg)?;
            if verified <= tol {
                break;
            }
        }
        if k >= max_iter {
            break;
        }
        let mut xk: Vec<f64> = y_avg.iter().zip(&g_avg).map(|(y, g)| y - g).collect();
        dom.clamp_in_place(&mut xk);
        let gx = p.operator(&xk)?;
        let mut y_next: Vec<f64> = xk.iter().zip(&gx).map(|(x, g)| x - g / lip).collect();
        dom.clamp_in_place(&mut y_next);
        let gy = p.operator(&y_next)?;
        for i in 0..y_avg.len() {
            y_avg[i] += share * (y_next[i] - y_avg[i]);
            g_avg[i] += share * (gy[i] - g_avg[i]);
        }
        dom.clamp_in_place(&mut y_avg);
        k += 1;
        cert *= decay;
        if let Some(obs) = observer.as_mut() {
            obs(k, &y_avg);
        }
    }
    Ok(SolveReport {
        point: y_avg,
        iterations: k,
        certificate: cert.max(verified.min(f64::MAX)),
        certified: cert <= tol && verified <= tol,
        path: SolverPath::DualExtrapolation,
        fell_back: false,
    })
}

/// Dual extrapolation on the coupled system.
pub fn dual_extrapolation_solve(
    ctx: &OperatorContext,
    lip: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(JointVector, SolveReport)> {
    let report = dual_extrapolation(ctx, lip, tol, max_iter, None)?;
    Ok((ctx.split(&report.point), report))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointOptions {
    /// Initial damping `β ∈ (0, 1]`; halved whenever the residual grows.
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Iteration cap for the dual-extrapolation fallback.
    pub fallback_iter: usize,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self { damping: 0.5, tol: 1e-12, max_iter: 20_000, fallback_iter: 200_000 }
    }
}

const MIN_DAMPING: f64 = 1.0 / 4096.0;

/// Damped Jacobi best-response iteration `v ← v + β(BR(v) − v)` from the warm start.
///
/// Falls back to dual extrapolation (distance target `tol`, scaled into the
/// certificate) when the iteration cap is hit.
pub fn fixed_point(p: &(impl BestResponse + ?Sized), lip: f64, opts: &FixedPointOptions) -> Result<SolveReport> {
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(OccoError::Input(format!("damping {} must lie in (0, 1]", opts.damping)));
    }
    let dom = p.domain();
    let mut v = p.warm_start();
    dom.clamp_in_place(&mut v);
    let mut beta = opts.damping;
    let mut prev = f64::INFINITY;
    for it in 0..opts.max_iter {
        let br = p.best_response(&v)?;
        let r: Vec<f64> = br.iter().zip(&v).map(|(a, b)| a - b).collect();
        let res = norm(&r);
        if res <= opts.tol {
            return Ok(SolveReport {
                point: v,
                iterations: it,
                certificate: res,
                certified: true,
                path: SolverPath::FixedPoint,
                fell_back: false,
            });
        }
        if res > prev && beta > MIN_DAMPING {
            beta *= 0.5;
        }
        prev = res;
        for (vi, ri) in v.iter_mut().zip(&r) {
            *vi += beta * ri;
        }
        dom.clamp_in_place(&mut v);
    }
    let mut report = dual_extrapolation(p, lip, opts.tol, opts.fallback_iter, None)?;
    report.iterations += opts.max_iter;
    report.fell_back = true;
    Ok(report)
}

/// Fixed-point path on the coupled system.
pub fn fixed_point_solve(ctx: &OperatorContext, lip: f64, opts: &FixedPointOptions) -> Result<(JointVector, SolveReport)> {
    let report = fixed_point(ctx, lip, opts)?;
    Ok((ctx.split(&report.point), report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::payoff::{QuadPoly, QuadraticSaddle, ZeroPayoff};

    fn unit() -> BoxDomain {
        BoxDomain::interval(-1.0, 1.0).unwrap()
    }

    struct Affine {
        dom: BoxDomain,
        shift: Vec<f64>,
    }

    impl VariationalProblem for Affine {
        fn domain(&self) -> &BoxDomain {
            &self.dom
        }
        fn operator(&self, v: &[f64]) -> Result<Vec<f64>> {
            Ok(v.iter().zip(&self.shift).map(|(a, b)| a - b).collect())
        }
    }

    fn unit_rates() -> Rates {
        Rates { eta: 1.0, gamma: 1.0, theta: 1.0, vartheta: 1.0 }
    }

    fn ctx(h: SharedPayoff, rates: Rates, t: usize) -> OperatorContext {
        OperatorContext::new(h, unit(), unit(), vec![0.0], vec![0.0], 0.5, 0.5, vec![0.0], vec![0.0], rates, t).unwrap()
    }

    #[test]
    fn operator_examples() {
        let zero = ctx(Arc::new(ZeroPayoff), unit_rates(), 8);
        assert_eq!(zero.operator_g(&zero.anchors()).unwrap(), vec![0.0; 4]);

        let xy: SharedPayoff = Arc::new(PolyPayoff::bilinear());
        let c = ctx(xy, unit_rates(), 8);
        // w = ω = 1 is outside K but the x and y blocks are still well defined there
        let g = c.operator_g(&JointVector { x: vec![1.0], y: vec![1.0], w: 1.0 - 1e-15, omega: 1.0 - 1e-15 }).unwrap();
        assert!((g[0] - 2.0).abs() < 1e-12);
        assert!(g[1].abs() < 1e-12);

        let constant = PolyPayoff::new(QuadPoly { c: 0.7, ..QuadPoly::default() }, 1.0).unwrap();
        let c = ctx(Arc::new(constant), unit_rates(), 8);
        let g = c.operator_g(&JointVector { x: vec![0.3], y: vec![-0.2], w: 0.5, omega: 0.9 }).unwrap();
        assert_eq!(g[2], 0.0);

        assert!(matches!(
            c.operator_g(&JointVector { x: vec![0.0], y: vec![0.0], w: 1.0, omega: 0.5 }),
            Err(OccoError::Domain(_))
        ));
    }

    #[test]
    fn lipschitz_examples() {
        let tiny = Rates { eta: 0.0, gamma: 0.0, theta: 0.0, vartheta: 0.0 };
        let k = ProblemConstants { l_phi: 1.0, l_psi: 1.0, ..ProblemConstants::experiment() };
        assert!((lipschitz_bound(&tiny, 10, &k) - 2.0).abs() < 1e-15);

        let zero = ProblemConstants {
            g_x: 0.0,
            g_y: 0.0,
            l_xx: 0.0,
            l_xy: 0.0,
            l_yx: 0.0,
            l_yy: 0.0,
            l_phi: 0.0,
            l_psi: 0.0,
            ..ProblemConstants::experiment()
        };
        let r = Rates { eta: 3.0, gamma: 5.0, theta: 0.7, vartheta: 1.3 };
        assert!((lipschitz_bound(&r, 10, &zero) - 20.0 * 1.3).abs() < 1e-12);
    }

    #[test]
    fn dual_extrapolation_examples() {
        let p = Affine { dom: BoxDomain::cube(3, -1.0, 1.0).unwrap(), shift: vec![0.2, -0.5, 0.7] };
        let r = dual_extrapolation(&p, 1.0, 1e-10, 1_000_000, None).unwrap();
        assert!(r.certified);
        assert!(sq_dist(&r.point, &p.shift).sqrt() <= 1e-9);

        let p = Affine { dom: BoxDomain::interval(0.0, 1.0).unwrap(), shift: vec![-1.0] };
        let r = dual_extrapolation(&p, 1.0, 1e-10, 1_000_000, None).unwrap();
        assert!(r.point[0].abs() <= 1e-9);

        let r = dual_extrapolation(&p, 1.0, 1e-10, 3, None).unwrap();
        assert!(!r.certified);
        assert_eq!(r.iterations, 3);
    }

    #[test]
    fn fixed_point_zero_predictor_is_immediate() {
        let c = OperatorContext::new(
            Arc::new(ZeroPayoff),
            unit(),
            unit(),
            vec![0.3],
            vec![-0.6],
            0.2,
            0.7,
            vec![0.1],
            vec![0.9],
            unit_rates(),
            10,
        )
        .unwrap();
        let (v, r) = fixed_point_solve(&c, 10.0, &FixedPointOptions::default()).unwrap();
        assert_eq!(r.iterations, 0);
        assert_eq!(v, c.anchors());
    }

    #[test]
    fn saddle_bilinear_example() {
        let s = SaddleContext::new(Arc::new(PolyPayoff::bilinear()), unit(), unit(), vec![0.0], vec![0.0], 1.0, 1.0).unwrap();
        let r = fixed_point(&s, s.lipschitz_bound(&ProblemConstants::experiment()), &FixedPointOptions::default()).unwrap();
        assert!(norm(&r.point) <= 1e-10);
    }

    #[test]
    fn solvers_agree_on_quadratic_instance() {
        let h: SharedPayoff = Arc::new(QuadraticSaddle::new(0.4, -0.3));
        let rates = Rates { eta: 2.0, gamma: 1.5, theta: 0.8, vartheta: 1.1 };
        let c = OperatorContext::new(h, unit(), unit(), vec![0.1], vec![0.2], 0.4, 0.6, vec![-0.5], vec![0.3], rates, 8)
            .unwrap();
        let lip = lipschitz_bound(&rates, 8, &ProblemConstants::experiment());
        let (a, _) = fixed_point_solve(&c, lip, &FixedPointOptions::default()).unwrap();
        let (b, rep) = dual_extrapolation_solve(&c, lip, 1e-10, 10_000_000).unwrap();
        assert!(rep.certified);
        assert!(a.distance(&b) <= 1e-8, "{a:?} vs {b:?}");
        assert!(box_vi_gap(&c, &a.to_flat()).unwrap() <= 1e-9);
    }
}
