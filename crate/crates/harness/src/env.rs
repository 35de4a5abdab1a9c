//! Non-stationary environments generating the saddle center `p*_t = x*_t + i·y*_t`.
//!
//! Randomness comes from ChaCha8 seeded with the run seed; stream 0 belongs to the
//! environment and stream 1 is reserved for algorithms, so the choice of algorithm
//! never shifts the environment's draws.

use std::f64::consts::{E, PI};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{HarnessError, Result};

pub const ENV_STREAM: u64 = 0;
pub const ALGO_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Case {
    I,
    II,
    III,
    IV,
}

impl Case {
    pub const ALL: [Case; 4] = [Case::I, Case::II, Case::III, Case::IV];
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Case::I => "I",
            Case::II => "II",
            Case::III => "III",
            Case::IV => "IV",
        })
    }
}

impl FromStr for Case {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "I" | "1" => Ok(Case::I),
            "II" | "2" => Ok(Case::II),
            "III" | "3" => Ok(Case::III),
            "IV" | "4" => Ok(Case::IV),
            other => Err(HarnessError::Config(format!("unknown case {other:?}"))),
        }
    }
}

/// `ln(1 + t)`.
pub fn z1(t: usize) -> f64 {
    (t as f64).ln_1p()
}

/// `ln ln(e + t)`.
pub fn z2(t: usize) -> f64 {
    (E + t as f64).ln().ln()
}

pub fn case_i_center(t: usize) -> (f64, f64) {
    let r = z2(t) / 3.0;
    let a = z1(t);
    (r * a.cos(), r * a.sin())
}

pub fn case_ii_center(t: usize) -> (f64, f64) {
    let r = z2(t) / 3.0;
    let a = 2.0 * PI / 3.0 * t as f64 + z2(t);
    (r * a.cos(), r * a.sin())
}

/// `½·e^{(ε + 2πit)/7}`.
pub fn case_iii_center(t: usize, eps: f64) -> (f64, f64) {
    let r = 0.5 * (eps / 7.0).exp();
    let a = 2.0 * PI * t as f64 / 7.0;
    (r * a.cos(), r * a.sin())
}

/// `½·e^{i(φ + arg(x + iy))}`.
pub fn case_iv_center(phi: f64, x: f64, y: f64) -> (f64, f64) {
    let a = phi + y.atan2(x);
    (0.5 * a.cos(), 0.5 * a.sin())
}

/// Standard normal by Box–Muller.
pub fn standard_normal(rng: &mut impl Rng) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

#[derive(Debug, Clone)]
pub struct Environment {
    case: Case,
    rng: ChaCha8Rng,
}

impl Environment {
    pub fn new(case: Case, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(ENV_STREAM);
        Self { case, rng }
    }

    pub fn case(&self) -> Case {
        self.case
    }

    /// Saddle center of round `t`; Case IV reacts to the strategies played this round.
    pub fn saddle_center(&mut self, t: usize, played: Option<(f64, f64)>) -> Result<(f64, f64)> {
        let p = match self.case {
            Case::I => case_i_center(t),
            Case::II => case_ii_center(t),
            Case::III => {
                let eps: f64 = self.rng.gen();
                case_iii_center(t, eps)
            }
            Case::IV => {
                let (x, y) = played
                    .ok_or_else(|| HarnessError::Invariant("Case IV needs the strategies played in this round".into()))?;
                let phi = PI + standard_normal(&mut self.rng);
                case_iv_center(phi, x, y)
            }
        };
        if !(p.0.abs() <= 1.0 && p.1.abs() <= 1.0) {
            return Err(HarnessError::Invariant(format!("saddle center {p:?} at round {t} left [-1, 1]^2")));
        }
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn case_i_first_round() {
        let (x, y) = case_i_center(1);
        assert!((x - 0.0698760926814133469490171539202).abs() < 1e-15);
        assert!((y - 0.0580419389663706829706100348807).abs() < 1e-15);
    }

    #[test]
    fn case_iv_with_fixed_phi() {
        let (x, y) = case_iv_center(PI, 1.0, 0.0);
        assert!((x + 0.5).abs() < 1e-15 && y.abs() < 1e-15);
        let mut env = Environment::new(Case::IV, 0);
        assert!(env.saddle_center(1, None).is_err());
    }

    #[test]
    fn case_ii_lag_three_drift_vanishes() {
        let gap = |t: usize| {
            let (a, b) = case_ii_center(t);
            let (c, d) = case_ii_center(t + 3);
            (a - c).hypot(b - d)
        };
        let probes: Vec<f64> = [10usize, 100, 1_000, 10_000, 100_000, 1_000_000].iter().map(|&t| gap(t)).collect();
        assert!(probes.windows(2).all(|w| w[1] < w[0]), "{probes:?}");
        assert!(probes[5] < 1e-6);
    }

    #[test]
    fn case_iii_lag_seven_bound() {
        let mut env = Environment::new(Case::III, 11);
        let bound = ((1.0f64 / 7.0).exp() - 1.0) / 2.0;
        let centers: Vec<(f64, f64)> = (1..=10_000).map(|t| env.saddle_center(t, None).unwrap()).collect();
        for t in 7..centers.len() {
            let (a, b) = centers[t];
            let (c, d) = centers[t - 7];
            assert!((a - c).hypot(b - d) <= bound + 1e-12);
        }
    }

    #[test]
    fn centers_stay_feasible() {
        for case in Case::ALL {
            let mut env = Environment::new(case, 3);
            for t in 1..=5_000 {
                let played = (((t as f64) * 0.37).sin(), ((t as f64) * 0.11).cos());
                let (x, y) = env.saddle_center(t, Some(played)).unwrap();
                assert!(x.abs() <= 1.0 && y.abs() <= 1.0);
            }
        }
        for t in [1usize, 10, 1_000, 1_000_000] {
            let (x, y) = case_i_center(t);
            assert!(x.hypot(y) <= z2(1_000_000) / 3.0 + 1e-12);
        }
    }

    #[test]
    fn streams_are_reproducible() {
        let draw = |seed| {
            let mut env = Environment::new(Case::III, seed);
            (1..=20).map(|t| env.saddle_center(t, None).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(draw(5), draw(5));
        assert_ne!(draw(5), draw(6));
    }

    #[test]
    fn box_muller_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| standard_normal(&mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.01 && (var - 1.0).abs() < 0.02);
    }
}
