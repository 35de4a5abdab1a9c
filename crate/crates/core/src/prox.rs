//! Proximal (implicit) steps against weighted payoff slices.
//!
//! `prox_min_x` solves `argmin_{x∈X} s·Σᵢ cᵢ f(x, yᵢ) + ½‖x − anchor‖²` and `prox_max_y`
//! solves `argmax_{y∈Y} s·Σᵢ cᵢ f(xᵢ, y) − ½‖y − anchor‖²`. Scalar quadratic payoffs take
//! the closed form (zero the derivative, then clamp); anything else runs projected
//! gradient with backtracking until the gradient mapping is below [`PROX_TOL`].

use crate::error::{check_dim, OccoError, Result};
use crate::geometry::{project_box, sq_dist, BoxDomain};
use crate::payoff::Payoff;

pub const PROX_TOL: f64 = 1e-10;
pub const PROX_MAX_ITER: usize = 200_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ProxOutcome {
    pub point: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn check_weights<P: AsRef<[f64]>>(terms: &[(f64, P)], dim: usize) -> Result<()> {
    if terms.is_empty() {
        return Err(OccoError::Input("proximal step needs at least one payoff slice".into()));
    }
    for (c, p) in terms {
        if !(*c >= 0.0) {
            return Err(OccoError::Input(format!("slice weight {c} must be nonnegative")));
        }
        check_dim(dim, p.as_ref().len())?;
    }
    Ok(())
}

fn check_scale(scale: f64) -> Result<()> {
    if !(scale >= 0.0) || !scale.is_finite() {
        return Err(OccoError::Input(format!("proximal scale {scale} must be finite and nonnegative")));
    }
    Ok(())
}

/// `argmin_{x∈X} scale·Σ cᵢ f(x, yᵢ) + ½‖x − anchor‖²`.
pub fn prox_min_x<P: AsRef<[f64]>>(
    f: &dyn Payoff,
    ys: &[(f64, P)],
    scale: f64,
    anchor: &[f64],
    xd: &BoxDomain,
) -> Result<ProxOutcome> {
    check_scale(scale)?;
    check_dim(xd.dim(), anchor.len())?;
    let ydim = ys.first().map(|(_, y)| y.as_ref().len()).unwrap_or(0);
    check_weights(ys, ydim)?;
    if let (Some(q), 1, 1) = (f.quadratic(), xd.dim(), ydim) {
        let cs: f64 = ys.iter().map(|(c, _)| c).sum();
        let ym: f64 = ys.iter().map(|(c, y)| c * y.as_ref()[0]).sum();
        // d/dx: scale·(2·xx·cs·x + xy·ym + x·cs) + x − anchor = 0
        let x = (anchor[0] - scale * (q.xy * ym + q.x * cs)) / (1.0 + 2.0 * scale * q.xx * cs);
        return Ok(ProxOutcome { point: vec![x.clamp(xd.lower()[0], xd.upper()[0])], iterations: 0, converged: true });
    }
    let grad = |x: &[f64]| {
        let mut g: Vec<f64> = x.iter().zip(anchor).map(|(a, b)| a - b).collect();
        for (c, y) in ys {
            for (gi, di) in g.iter_mut().zip(f.grad_x(x, y.as_ref())) {
                *gi += scale * c * di;
            }
        }
        g
    };
    projected_descent(&grad, project_box(anchor, xd)?, xd)
}

/// `argmax_{y∈Y} scale·Σ cᵢ f(xᵢ, y) − ½‖y − anchor‖²`.
pub fn prox_max_y<P: AsRef<[f64]>>(
    f: &dyn Payoff,
    xs: &[(f64, P)],
    scale: f64,
    anchor: &[f64],
    yd: &BoxDomain,
) -> Result<ProxOutcome> {
    check_scale(scale)?;
    check_dim(yd.dim(), anchor.len())?;
    let xdim = xs.first().map(|(_, x)| x.as_ref().len()).unwrap_or(0);
    check_weights(xs, xdim)?;
    if let (Some(q), 1, 1) = (f.quadratic(), yd.dim(), xdim) {
        let cs: f64 = xs.iter().map(|(c, _)| c).sum();
        let xm: f64 = xs.iter().map(|(c, x)| c * x.as_ref()[0]).sum();
        // d/dy of the negated objective: −scale·(2·yy·cs·y + xy·xm + y·cs) + y − anchor = 0
        let y = (anchor[0] + scale * (q.xy * xm + q.y * cs)) / (1.0 - 2.0 * scale * q.yy * cs);
        return Ok(ProxOutcome { point: vec![y.clamp(yd.lower()[0], yd.upper()[0])], iterations: 0, converged: true });
    }
    let grad = |y: &[f64]| {
        let mut g: Vec<f64> = y.iter().zip(anchor).map(|(a, b)| a - b).collect();
        for (c, x) in xs {
            for (gi, di) in g.iter_mut().zip(f.grad_y_neg(x.as_ref(), y)) {
                *gi += scale * c * di;
            }
        }
        g
    };
    projected_descent(&grad, project_box(anchor, yd)?, yd)
}

/// Projected gradient on a 1-strongly convex objective. The step adapts to a local
/// curvature estimate taken from gradient differences, which stays meaningful
/// after function values have stopped resolving progress.
fn projected_descent(grad: &dyn Fn(&[f64]) -> Vec<f64>, start: Vec<f64>, dom: &BoxDomain) -> Result<ProxOutcome> {
    let mut x = start;
    let mut g = grad(&x);
    let mut step = 1.0;
    for it in 0..PROX_MAX_ITER {
        let mapped: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - b).collect();
        let mapped = project_box(&mapped, dom)?;
        if sq_dist(&x, &mapped).sqrt() <= PROX_TOL {
            return Ok(ProxOutcome { point: x, iterations: it, converged: true });
        }
        loop {
            let trial: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - step * b).collect();
            let trial = project_box(&trial, dom)?;
            let gt = grad(&trial);
            let d2 = sq_dist(&trial, &x);
            let curv: f64 = gt.iter().zip(&g).zip(trial.iter().zip(&x)).map(|((p, q), (a, b))| (p - q) * (a - b)).sum();
            if curv * step <= d2 || step < 1e-300 {
                x = trial;
                g = gt;
                step = (step * 2.0).min(1.0);
                break;
            }
            step *= 0.5;
        }
    }
    Ok(ProxOutcome { point: x, iterations: PROX_MAX_ITER, converged: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::payoff::{PolyPayoff, QuadPoly, QuadraticSaddle};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Hides the quadratic form so the iterative path runs.
    #[derive(Debug)]
    struct Opaque(QuadraticSaddle);

    impl Payoff for Opaque {
        fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
            self.0.eval(x, y)
        }
        fn grad_x(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
            self.0.grad_x(x, y)
        }
        fn grad_y_neg(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
            self.0.grad_y_neg(x, y)
        }
        fn bounds(&self) -> crate::payoff::PayoffBounds {
            self.0.bounds()
        }
    }

    fn unit() -> BoxDomain {
        BoxDomain::interval(-1.0, 1.0).unwrap()
    }

    fn grid_argmin(obj: impl Fn(f64) -> f64) -> f64 {
        let n = 100_000;
        (0..=n)
            .map(|i| -1.0 + 2.0 * i as f64 / n as f64)
            .min_by(|a, b| obj(*a).partial_cmp(&obj(*b)).unwrap())
            .unwrap()
    }

    #[test]
    fn linear_slice_example() {
        let lin = PolyPayoff::new(QuadPoly { x: 1.0, ..QuadPoly::default() }, 1.0).unwrap();
        let out = prox_min_x(&lin, &[(0.3, [0.2]), (0.7, [-0.5])], 1.0, &[0.0], &unit()).unwrap();
        assert_eq!(out.point, vec![-1.0]);
    }

    #[test]
    fn vanishing_scale_returns_anchor() {
        let f = QuadraticSaddle::new(0.4, -0.3);
        let out = prox_min_x(&f, &[(1.0, [0.1])], 0.0, &[0.25], &unit()).unwrap();
        assert_eq!(out.point, vec![0.25]);
        let out = prox_max_y(&f, &[(1.0, [0.1])], 0.0, &[-0.6], &unit()).unwrap();
        assert_eq!(out.point, vec![-0.6]);
    }

    #[test]
    fn closed_form_matches_grid_and_iterative_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let f = QuadraticSaddle::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let om: f64 = rng.gen_range(0.0..1.0);
            let (y1, y2) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let s = rng.gen_range(0.01..20.0);
            let anchor = rng.gen_range(-1.0..1.0);
            let terms = [(om, [y1]), (1.0 - om, [y2])];
            let closed = prox_min_x(&f, &terms, s, &[anchor], &unit()).unwrap().point[0];
            let grid = grid_argmin(|x| s * (om * f.value(x, y1) + (1.0 - om) * f.value(x, y2)) + 0.5 * (x - anchor).powi(2));
            assert!((closed - grid).abs() <= 2e-5, "{closed} vs {grid}");
            let iter = prox_min_x(&Opaque(f), &terms, s, &[anchor], &unit()).unwrap();
            assert!(iter.converged);
            assert!((closed - iter.point[0]).abs() <= 1e-8);

            let yc = prox_max_y(&f, &terms, s, &[anchor], &unit()).unwrap().point[0];
            let grid = grid_argmin(|y| -s * (om * f.value(y1, y) + (1.0 - om) * f.value(y2, y)) + 0.5 * (y - anchor).powi(2));
            assert!((yc - grid).abs() <= 2e-5, "{yc} vs {grid}");
            let iter = prox_max_y(&Opaque(f), &terms, s, &[anchor], &unit()).unwrap();
            assert!((yc - iter.point[0]).abs() <= 1e-8);
        }
    }
}
