//! Comparator sequences of increasing non-stationarity.

use std::fmt;
use std::str::FromStr;

use occo::payoff::Payoff;

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Level {
    /// `(0, 0)`.
    I,
    /// Saddle center shrunk by `ln(1 + t)`.
    II,
    /// Per-round best responses to the played strategies.
    III,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::I, Level::II, Level::III];
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::I => "i",
            Level::II => "ii",
            Level::III => "iii",
        })
    }
}

impl FromStr for Level {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "i" | "1" => Ok(Level::I),
            "ii" | "2" => Ok(Level::II),
            "iii" | "3" => Ok(Level::III),
            other => Err(HarnessError::Config(format!("unknown comparator level {other:?}"))),
        }
    }
}

pub const GRID_POINTS: usize = 100_001;

/// `argmin_{x ∈ [lo, hi]} f(x, y)` on scalar strategies; exact for quadratics, grid otherwise.
pub fn argmin_x(f: &dyn Payoff, y: f64, lo: f64, hi: f64) -> f64 {
    if let Some(q) = f.quadratic() {
        let lin = q.xy * y + q.x;
        if q.xx > 0.0 {
            return (-lin / (2.0 * q.xx)).clamp(lo, hi);
        }
        if q.xx == 0.0 {
            return if lin > 0.0 { lo } else if lin < 0.0 { hi } else { 0.0f64.clamp(lo, hi) };
        }
    }
    grid_best(lo, hi, |x| -f.eval(&[x], &[y]))
}

/// `argmax_{y ∈ [lo, hi]} f(x, y)` on scalar strategies.
pub fn argmax_y(f: &dyn Payoff, x: f64, lo: f64, hi: f64) -> f64 {
    if let Some(q) = f.quadratic() {
        let lin = q.xy * x + q.y;
        if q.yy < 0.0 {
            return (lin / (-2.0 * q.yy)).clamp(lo, hi);
        }
        if q.yy == 0.0 {
            return if lin > 0.0 { hi } else if lin < 0.0 { lo } else { 0.0f64.clamp(lo, hi) };
        }
    }
    grid_best(lo, hi, |y| f.eval(&[x], &[y]))
}

fn grid_best(lo: f64, hi: f64, score: impl Fn(f64) -> f64) -> f64 {
    let n = GRID_POINTS - 1;
    let mut best = (f64::NEG_INFINITY, lo);
    for i in 0..=n {
        let p = lo + (hi - lo) * i as f64 / n as f64;
        let s = score(p);
        if s > best.0 {
            best = (s, p);
        }
    }
    best.1
}

/// `(u_t, v_t)` on `[lo, hi]²` for round `t ≥ 1`.
#[allow(clippy::too_many_arguments)]
pub fn comparator(level: Level, f: &dyn Payoff, x: f64, y: f64, x_star: f64, y_star: f64, t: usize, lo: f64, hi: f64) -> (f64, f64) {
    match level {
        Level::I => (0.0f64.clamp(lo, hi), 0.0f64.clamp(lo, hi)),
        Level::II => {
            let s = (t as f64).ln_1p();
            ((x_star / s).clamp(lo, hi), (y_star / s).clamp(lo, hi))
        }
        Level::III => (argmin_x(f, y, lo, hi), argmax_y(f, x, lo, hi)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use occo::payoff::QuadraticSaddle;

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
        fn bounds(&self) -> occo::payoff::PayoffBounds {
            self.0.bounds()
        }
    }

    #[test]
    fn level_examples() {
        let f = QuadraticSaddle::new(0.2, -0.1);
        assert_eq!(comparator(Level::I, &f, 0.5, 0.5, 0.3, 0.3, 7, -1.0, 1.0), (0.0, 0.0));
        let (u, _) = comparator(Level::III, &f, 0.0, 0.3, 0.2, -0.1, 1, -1.0, 1.0);
        assert!((u + 0.2).abs() < 1e-15);
        let (u, v) = comparator(Level::II, &f, 0.0, 0.0, 0.6, -0.3, 1, -1.0, 1.0);
        assert_eq!((u, v), (0.6 / 2f64.ln(), -0.3 / 2f64.ln()));
    }

    #[test]
    fn closed_forms_match_grid() {
        for (a, b, x, y) in [(0.2, -0.1, 0.4, 0.3), (0.8, 0.7, -0.9, -1.0), (-0.5, 0.4, 1.0, 0.9), (0.0, 0.0, 0.0, 0.0)] {
            let f = QuadraticSaddle::new(a, b);
            let spacing = 2.0 / (GRID_POINTS - 1) as f64;
            assert!((argmin_x(&f, y, -1.0, 1.0) - argmin_x(&Opaque(f), y, -1.0, 1.0)).abs() <= spacing);
            assert!((argmax_y(&f, x, -1.0, 1.0) - argmax_y(&Opaque(f), x, -1.0, 1.0)).abs() <= spacing);
            assert!((argmin_x(&f, y, -1.0, 1.0) - f.best_response_x(y, -1.0, 1.0)).abs() < 1e-15);
            assert!((argmax_y(&f, x, -1.0, 1.0) - f.best_response_y(x, -1.0, 1.0)).abs() < 1e-15);
        }
    }
}
