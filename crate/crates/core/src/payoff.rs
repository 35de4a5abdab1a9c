//! Convex-concave payoff functions, predictors and the predictor distance ρ.

use std::fmt;
use std::sync::Arc;

use crate::error::{check_dim, OccoError, Result};
use crate::geometry::BoxDomain;

/// Assumption-level bounds on a payoff over its domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PayoffBounds {
    /// `|f| ≤ m`
    pub m: f64,
    /// `‖∇ₓf‖ ≤ g_x`
    pub g_x: f64,
    /// `‖∇_y(−f)‖ ≤ g_y`
    pub g_y: f64,
}

/// Lipschitz constants of the partial gradients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Smoothness {
    pub l_xx: f64,
    pub l_xy: f64,
    pub l_yx: f64,
    pub l_yy: f64,
}

impl Smoothness {
    pub const ZERO: Smoothness = Smoothness { l_xx: 0.0, l_xy: 0.0, l_yx: 0.0, l_yy: 0.0 };

    fn max(self, other: Smoothness) -> Smoothness {
        Smoothness {
            l_xx: self.l_xx.max(other.l_xx),
            l_xy: self.l_xy.max(other.l_xy),
            l_yx: self.l_yx.max(other.l_yx),
            l_yy: self.l_yy.max(other.l_yy),
        }
    }
}

/// Bivariate quadratic `xx·x² + yy·y² + xy·x·y + x·x + y·y + c` in scalar `x`, `y`.
///
/// Payoffs that expose this form get exact closed-form proximal steps and an exact
/// ρ when the difference of two forms is affine.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct QuadPoly {
    pub xx: f64,
    pub yy: f64,
    pub xy: f64,
    pub x: f64,
    pub y: f64,
    pub c: f64,
}

impl QuadPoly {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.xx * x * x + self.yy * y * y + self.xy * x * y + self.x * x + self.y * y + self.c
    }

    pub fn grad_x(&self, x: f64, y: f64) -> f64 {
        2.0 * self.xx * x + self.xy * y + self.x
    }

    pub fn grad_y(&self, x: f64, y: f64) -> f64 {
        2.0 * self.yy * y + self.xy * x + self.y
    }

    pub fn scale(&self, s: f64) -> QuadPoly {
        QuadPoly {
            xx: s * self.xx,
            yy: s * self.yy,
            xy: s * self.xy,
            x: s * self.x,
            y: s * self.y,
            c: s * self.c,
        }
    }

    pub fn add(&self, o: &QuadPoly) -> QuadPoly {
        QuadPoly {
            xx: self.xx + o.xx,
            yy: self.yy + o.yy,
            xy: self.xy + o.xy,
            x: self.x + o.x,
            y: self.y + o.y,
            c: self.c + o.c,
        }
    }

    pub fn sub(&self, o: &QuadPoly) -> QuadPoly {
        self.add(&o.scale(-1.0))
    }

    /// True when the second-order coefficients vanish up to rounding relative to
    /// the largest coefficient.
    pub fn is_affine(&self) -> bool {
        let scale = [self.xx, self.yy, self.xy, self.x, self.y, self.c, 1.0]
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        [self.xx, self.yy, self.xy].iter().all(|v| v.abs() <= 1e-12 * scale)
    }
}

/// A payoff `f(x, y)` convex in `x` and concave in `y`.
pub trait Payoff: fmt::Debug + Send + Sync {
    fn eval(&self, x: &[f64], y: &[f64]) -> f64;
    fn grad_x(&self, x: &[f64], y: &[f64]) -> Vec<f64>;
    /// Gradient of `−f` in `y`.
    fn grad_y_neg(&self, x: &[f64], y: &[f64]) -> Vec<f64>;
    fn bounds(&self) -> PayoffBounds;
    fn smoothness(&self) -> Option<Smoothness> {
        None
    }
    /// Exact quadratic expansion, available for scalar-strategy payoffs of degree ≤ 2.
    fn quadratic(&self) -> Option<QuadPoly> {
        None
    }
}

pub type SharedPayoff = Arc<dyn Payoff>;

/// `½(x−a)² − ½(y−b)² + (x−a)(y−b)` on scalar strategies, with saddle point `(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticSaddle {
    pub center_x: f64,
    pub center_y: f64,
}

impl QuadraticSaddle {
    pub fn new(center_x: f64, center_y: f64) -> Self {
        Self { center_x, center_y }
    }

    pub fn value(&self, x: f64, y: f64) -> f64 {
        let u = x - self.center_x;
        let v = y - self.center_y;
        0.5 * u * u - 0.5 * v * v + u * v
    }

    /// `argmin_x f(x, y)` over `[lo, hi]`.
    pub fn best_response_x(&self, y: f64, lo: f64, hi: f64) -> f64 {
        (self.center_x - (y - self.center_y)).clamp(lo, hi)
    }

    /// `argmax_y f(x, y)` over `[lo, hi]`.
    pub fn best_response_y(&self, x: f64, lo: f64, hi: f64) -> f64 {
        (self.center_y + (x - self.center_x)).clamp(lo, hi)
    }
}

impl Payoff for QuadraticSaddle {
    fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        self.value(x[0], y[0])
    }

    fn grad_x(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        vec![(x[0] - self.center_x) + (y[0] - self.center_y)]
    }

    fn grad_y_neg(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        vec![(y[0] - self.center_y) - (x[0] - self.center_x)]
    }

    /// Worst case over `|a|, |b| ≤ 1` on `[−1, 1]²`.
    fn bounds(&self) -> PayoffBounds {
        PayoffBounds { m: 4.5, g_x: 4.0, g_y: 4.0 }
    }

    fn smoothness(&self) -> Option<Smoothness> {
        Some(Smoothness { l_xx: 1.0, l_xy: 1.0, l_yx: 1.0, l_yy: 1.0 })
    }

    fn quadratic(&self) -> Option<QuadPoly> {
        let (a, b) = (self.center_x, self.center_y);
        Some(QuadPoly {
            xx: 0.5,
            yy: -0.5,
            xy: 1.0,
            x: -a - b,
            y: b - a,
            c: 0.5 * a * a - 0.5 * b * b + a * b,
        })
    }
}

/// The identically-zero payoff; stands in for predictors without enough history.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ZeroPayoff;

impl Payoff for ZeroPayoff {
    fn eval(&self, _x: &[f64], _y: &[f64]) -> f64 {
        0.0
    }

    fn grad_x(&self, x: &[f64], _y: &[f64]) -> Vec<f64> {
        vec![0.0; x.len()]
    }

    fn grad_y_neg(&self, _x: &[f64], y: &[f64]) -> Vec<f64> {
        vec![0.0; y.len()]
    }

    fn bounds(&self) -> PayoffBounds {
        PayoffBounds { m: 0.0, g_x: 0.0, g_y: 0.0 }
    }

    fn smoothness(&self) -> Option<Smoothness> {
        Some(Smoothness::ZERO)
    }

    fn quadratic(&self) -> Option<QuadPoly> {
        Some(QuadPoly::default())
    }
}

/// Scalar quadratic payoff given by its coefficients, e.g. the bilinear `x·y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolyPayoff {
    poly: QuadPoly,
    radius: f64,
}

impl PolyPayoff {
    /// `radius` bounds `|x|` and `|y|` on the domain and feeds the bound metadata.
    pub fn new(poly: QuadPoly, radius: f64) -> Result<Self> {
        if poly.xx < 0.0 || poly.yy > 0.0 {
            return Err(OccoError::Input(format!(
                "{poly:?} is not convex in x and concave in y"
            )));
        }
        Ok(Self { poly, radius })
    }

    /// `f(x, y) = x·y` on `[−1, 1]²`.
    pub fn bilinear() -> Self {
        Self { poly: QuadPoly { xy: 1.0, ..QuadPoly::default() }, radius: 1.0 }
    }
}

impl Payoff for PolyPayoff {
    fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        self.poly.eval(x[0], y[0])
    }

    fn grad_x(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        vec![self.poly.grad_x(x[0], y[0])]
    }

    fn grad_y_neg(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        vec![-self.poly.grad_y(x[0], y[0])]
    }

    fn bounds(&self) -> PayoffBounds {
        let p = &self.poly;
        let r = self.radius;
        PayoffBounds {
            m: (p.xx.abs() + p.yy.abs() + p.xy.abs()) * r * r + (p.x.abs() + p.y.abs()) * r + p.c.abs(),
            g_x: 2.0 * p.xx.abs() * r + p.xy.abs() * r + p.x.abs(),
            g_y: 2.0 * p.yy.abs() * r + p.xy.abs() * r + p.y.abs(),
        }
    }

    fn smoothness(&self) -> Option<Smoothness> {
        let p = &self.poly;
        Some(Smoothness {
            l_xx: 2.0 * p.xx.abs(),
            l_xy: p.xy.abs(),
            l_yx: p.xy.abs(),
            l_yy: 2.0 * p.yy.abs(),
        })
    }

    fn quadratic(&self) -> Option<QuadPoly> {
        Some(self.poly)
    }
}

/// Weighted combination `Σ ξₖ hₖ` of payoffs with weights in the simplex.
#[derive(Debug, Clone)]
pub struct MixturePayoff {
    components: Vec<SharedPayoff>,
    weights: Vec<f64>,
}

impl MixturePayoff {
    pub fn new(components: Vec<SharedPayoff>, weights: Vec<f64>) -> Result<Self> {
        check_dim(components.len(), weights.len())?;
        if components.is_empty() {
            return Err(OccoError::Input("mixture needs at least one component".into()));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(OccoError::Input(format!("mixture weights {weights:?} are not a distribution")));
        }
        Ok(Self { components, weights })
    }

    pub fn components(&self) -> &[SharedPayoff] {
        &self.components
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn combine(&self, parts: impl Fn(&SharedPayoff) -> Vec<f64>) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for (c, w) in self.components.iter().zip(&self.weights) {
            let g = parts(c);
            if out.is_empty() {
                out = vec![0.0; g.len()];
            }
            for (o, v) in out.iter_mut().zip(g) {
                *o += w * v;
            }
        }
        out
    }
}

impl Payoff for MixturePayoff {
    fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        self.components.iter().zip(&self.weights).map(|(c, w)| w * c.eval(x, y)).sum()
    }

    fn grad_x(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        self.combine(|c| c.grad_x(x, y))
    }

    fn grad_y_neg(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        self.combine(|c| c.grad_y_neg(x, y))
    }

    fn bounds(&self) -> PayoffBounds {
        self.components.iter().map(|c| c.bounds()).fold(
            PayoffBounds { m: 0.0, g_x: 0.0, g_y: 0.0 },
            |acc, b| PayoffBounds { m: acc.m.max(b.m), g_x: acc.g_x.max(b.g_x), g_y: acc.g_y.max(b.g_y) },
        )
    }

    fn smoothness(&self) -> Option<Smoothness> {
        self.components
            .iter()
            .map(|c| c.smoothness())
            .try_fold(Smoothness::ZERO, |acc, s| s.map(|s| acc.max(s)))
    }

    fn quadratic(&self) -> Option<QuadPoly> {
        self.components
            .iter()
            .zip(&self.weights)
            .try_fold(QuadPoly::default(), |acc, (c, w)| c.quadratic().map(|q| acc.add(&q.scale(*w))))
    }
}

fn check_point(p: &[f64], dom: &BoxDomain, what: &str) -> Result<()> {
    check_dim(dom.dim(), p.len())?;
    if !dom.contains(p, 1e-12) {
        return Err(OccoError::Input(format!("{what} = {p:?} lies outside its domain")));
    }
    Ok(())
}

/// `f(x, y)` with domain checks.
pub fn eval_payoff(f: &dyn Payoff, x: &[f64], y: &[f64], xd: &BoxDomain, yd: &BoxDomain) -> Result<f64> {
    check_point(x, xd, "x")?;
    check_point(y, yd, "y")?;
    Ok(f.eval(x, y))
}

/// `(∇ₓf, ∇_y(−f))` with domain checks.
pub fn saddle_gradients(
    f: &dyn Payoff,
    x: &[f64],
    y: &[f64],
    xd: &BoxDomain,
    yd: &BoxDomain,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_point(x, xd, "x")?;
    check_point(y, yd, "y")?;
    Ok((f.grad_x(x, y), f.grad_y_neg(x, y)))
}

/// Value of `ρ(f, h) = max |f − h|` over `X × Y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoEstimate {
    pub value: f64,
    /// `false` when the value comes from a grid search and may underestimate.
    pub exact: bool,
    /// Grid points per axis when `exact` is false.
    pub grid_points_per_axis: Option<usize>,
}

/// Grid budget for the estimate path: 401 points per axis in two dimensions, the
/// same total (401²) spread evenly across axes otherwise.
pub const RHO_GRID_POINTS_2D: usize = 401;

/// `max_{X×Y} |f − h|`.
///
/// Exact (corner enumeration) when both payoffs expose quadratic forms whose
/// difference is affine; otherwise a documented grid estimate.
pub fn rho_distance(f: &dyn Payoff, h: &dyn Payoff, xd: &BoxDomain, yd: &BoxDomain) -> Result<RhoEstimate> {
    if xd.dim() == 1 && yd.dim() == 1 {
        if let (Some(qf), Some(qh)) = (f.quadratic(), h.quadratic()) {
            let d = qf.sub(&qh);
            if d.is_affine() {
                let value = xd
                    .product(yd)
                    .corners()
                    .iter()
                    .map(|c| d.eval(c[0], c[1]).abs())
                    .fold(0.0, f64::max);
                return Ok(RhoEstimate { value, exact: true, grid_points_per_axis: None });
            }
        }
    }
    let n = xd.dim() + yd.dim();
    let total = (RHO_GRID_POINTS_2D * RHO_GRID_POINTS_2D) as f64;
    let k = (total.powf(1.0 / n as f64).floor() as usize).max(2);
    let joint = xd.product(yd);
    let mut idx = vec![0usize; n];
    let mut point = vec![0.0; n];
    let mut best = 0.0f64;
    loop {
        for i in 0..n {
            let (lo, hi) = (joint.lower()[i], joint.upper()[i]);
            point[i] = lo + (hi - lo) * idx[i] as f64 / (k - 1) as f64;
        }
        let (x, y) = point.split_at(xd.dim());
        best = best.max((f.eval(x, y) - h.eval(x, y)).abs());
        let mut i = 0;
        loop {
            if i == n {
                return Ok(RhoEstimate { value: best, exact: false, grid_points_per_axis: Some(k) });
            }
            idx[i] += 1;
            if idx[i] < k {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
    }
}

/// Loss of each predictor: the largest `|f − hᵏ|` over the 3×3 grid of probe points.
pub fn loss_vector(
    f: &dyn Payoff,
    bank: &[SharedPayoff],
    probe_x: [&[f64]; 3],
    probe_y: [&[f64]; 3],
) -> Result<Vec<f64>> {
    if bank.is_empty() {
        return Err(OccoError::Input("loss vector needs a nonempty predictor bank".into()));
    }
    Ok(bank
        .iter()
        .map(|h| {
            let mut worst = 0.0f64;
            for x in probe_x {
                for y in probe_y {
                    worst = worst.max((f.eval(x, y) - h.eval(x, y)).abs());
                }
            }
            worst
        })
        .collect())
}

/// `[f_{t−d₁}, f_{t−d₂}, …]` from the history `[f₁, …, f_{t−1}]`; the zero payoff
/// where `t − d < 1`.
pub fn delayed_predictor_bank(history: &[SharedPayoff], delays: &[usize], t: usize) -> Result<Vec<SharedPayoff>> {
    validate_delays(delays)?;
    Ok(delays
        .iter()
        .map(|&d| {
            if t > d && t - d <= history.len() {
                history[t - d - 1].clone()
            } else {
                Arc::new(ZeroPayoff) as SharedPayoff
            }
        })
        .collect())
}

pub fn validate_delays(delays: &[usize]) -> Result<()> {
    if delays.is_empty() {
        return Err(OccoError::Input("at least one predictor delay is required".into()));
    }
    if delays.iter().any(|d| *d == 0) || delays.windows(2).any(|w| w[0] >= w[1]) {
        return Err(OccoError::Input(format!("delays {delays:?} must be positive, sorted and unique")));
    }
    Ok(())
}
