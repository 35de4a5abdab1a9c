//! Mirror-map primitives: box projections, Fenchel couplings, KL divergence and
//! clipped-simplex operations.

use crate::error::{check_dim, OccoError, Result};

/// Axis-aligned box `[lower, upper]` in R^n.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        check_dim(lower.len(), upper.len())?;
        if lower.is_empty() {
            return Err(OccoError::Input("box must have at least one coordinate".into()));
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo > hi {
                return Err(OccoError::Input(format!(
                    "invalid bounds at coordinate {i}: [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// One-dimensional interval `[lo, hi]`.
    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo], vec![hi])
    }

    /// The cube `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Euclidean norm of `upper - lower`.
    pub fn diameter(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| (hi - lo) * (hi - lo))
            .sum::<f64>()
            .sqrt()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| 0.5 * (lo + hi))
            .collect()
    }

    pub fn contains(&self, p: &[f64], tol: f64) -> bool {
        p.len() == self.dim()
            && p
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| *v >= lo - tol && *v <= hi + tol)
    }

    /// Clamp `p` into the box in place. Panics on dimension mismatch.
    pub fn clamp_in_place(&self, p: &mut [f64]) {
        assert_eq!(p.len(), self.dim());
        for (v, (lo, hi)) in p.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(*lo, *hi);
        }
    }

    /// Cartesian product `self × other`.
    pub fn product(&self, other: &BoxDomain) -> BoxDomain {
        let mut lower = self.lower.clone();
        lower.extend_from_slice(&other.lower);
        let mut upper = self.upper.clone();
        upper.extend_from_slice(&other.upper);
        BoxDomain { lower, upper }
    }

    /// Corners of the box, 2^n of them.
    pub fn corners(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..1usize << n)
            .map(|mask| {
                (0..n)
                    .map(|i| if mask >> i & 1 == 1 { self.upper[i] } else { self.lower[i] })
                    .collect()
            })
            .collect()
    }
}

/// Euclidean projection onto a box: coordinate-wise clamp.
pub fn project_box(p: &[f64], dom: &BoxDomain) -> Result<Vec<f64>> {
    check_dim(dom.dim(), p.len())?;
    let mut out = p.to_vec();
    dom.clamp_in_place(&mut out);
    Ok(out)
}

/// Regularizer generating a Fenchel coupling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regularizer {
    /// `‖x‖²/2`; its gradient is the identity, so the dual anchor equals the primal.
    EuclideanHalfSquared,
    /// `Σ xᵢ ln xᵢ` on the simplex; the coupling is the KL divergence.
    NegativeEntropy,
}

/// A primal point together with the regularizer whose subgradient is its dual anchor.
#[derive(Debug, Clone, PartialEq)]
pub struct MirrorPoint {
    pub primal: Vec<f64>,
    pub regularizer: Regularizer,
}

impl MirrorPoint {
    pub fn euclidean(primal: Vec<f64>) -> Self {
        Self { primal, regularizer: Regularizer::EuclideanHalfSquared }
    }

    /// Entropic point; must lie in the clipped simplex `cs`.
    pub fn entropic(primal: Vec<f64>, cs: &ClippedSimplex) -> Result<Self> {
        if !cs.contains(&primal, 1e-12) {
            return Err(OccoError::Domain(format!(
                "{primal:?} is not in the clipped simplex with floor {}",
                cs.floor()
            )));
        }
        Ok(Self { primal, regularizer: Regularizer::NegativeEntropy })
    }

    /// Gradient of the regularizer at the primal point.
    pub fn dual(&self) -> Vec<f64> {
        match self.regularizer {
            Regularizer::EuclideanHalfSquared => self.primal.clone(),
            Regularizer::NegativeEntropy => self.primal.iter().map(|p| p.ln() + 1.0).collect(),
        }
    }
}

/// Fenchel coupling `B(p, anchor^reg)`.
///
/// Euclidean: `‖p − anchor‖²/2`. Negative entropy: `KL(p, anchor)`.
pub fn bregman(reg: Regularizer, p: &[f64], anchor: &MirrorPoint) -> Result<f64> {
    check_dim(anchor.primal.len(), p.len())?;
    match reg {
        Regularizer::EuclideanHalfSquared => Ok(0.5 * sq_dist(p, &anchor.primal)),
        Regularizer::NegativeEntropy => {
            if let Some(i) = anchor.primal.iter().position(|a| *a <= 0.0) {
                return Err(OccoError::Domain(format!(
                    "entropic anchor has nonpositive coordinate {i}"
                )));
            }
            kl_divergence(p, &anchor.primal)
        }
    }
}

/// `Σ aᵢ ln(aᵢ/bᵢ)` with `0·ln 0 = 0`.
pub fn kl_divergence(a: &[f64], b: &[f64]) -> Result<f64> {
    check_dim(a.len(), b.len())?;
    let mut acc = 0.0;
    for (i, (ai, bi)) in a.iter().zip(b).enumerate() {
        if *ai < 0.0 || *bi < 0.0 {
            return Err(OccoError::Domain(format!("negative mass at coordinate {i}")));
        }
        if *ai == 0.0 {
            continue;
        }
        if *bi == 0.0 {
            return Err(OccoError::Domain(format!(
                "KL undefined: b is zero at coordinate {i} where a is positive"
            )));
        }
        acc += ai * (ai / bi).ln();
    }
    // Rounding can push tiny divergences a hair below zero.
    Ok(acc.max(0.0))
}

/// The clipped simplex `{w : Σ wᵢ = 1, wᵢ ≥ α/d}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClippedSimplex {
    dim: usize,
    alpha: f64,
}

impl ClippedSimplex {
    pub fn new(dim: usize, alpha: f64) -> Result<Self> {
        if dim == 0 {
            return Err(OccoError::Input("clipped simplex needs dim ≥ 1".into()));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(OccoError::Input(format!("clipping coefficient {alpha} not in (0, 1]")));
        }
        Ok(Self { dim, alpha })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Per-coordinate lower bound `α/d`.
    pub fn floor(&self) -> f64 {
        self.alpha / self.dim as f64
    }

    pub fn contains(&self, w: &[f64], tol: f64) -> bool {
        w.len() == self.dim
            && w.iter().all(|v| *v >= self.floor() - tol)
            && (w.iter().sum::<f64>() - 1.0).abs() <= tol
    }

    pub fn uniform(&self) -> Vec<f64> {
        vec![1.0 / self.dim as f64; self.dim]
    }
}

/// KL projection of `q/‖q‖₁` onto the clipped simplex.
///
/// The minimizer has the form `wᵢ = max(floor, c·πᵢ)`. Coordinates are pinned at
/// the floor in passes; each pass can only raise `c`, so pinned coordinates never
/// leave the floor and at most `d` passes are needed.
pub fn project_clipped_simplex_kl(q: &[f64], cs: &ClippedSimplex) -> Result<Vec<f64>> {
    check_dim(cs.dim(), q.len())?;
    if let Some(i) = q.iter().position(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(OccoError::Domain(format!(
            "projection input must be strictly positive and finite (coordinate {i} = {})",
            q[i]
        )));
    }
    Ok(project_nonnegative(q, cs))
}

/// Same as [`project_clipped_simplex_kl`] but tolerates zero entries (which end
/// up at the floor). Requires at least one positive entry.
fn project_nonnegative(q: &[f64], cs: &ClippedSimplex) -> Vec<f64> {
    let floor = cs.floor();
    let total: f64 = q.iter().sum();
    debug_assert!(total > 0.0);
    let pi: Vec<f64> = q.iter().map(|v| v / total).collect();
    let mut pinned = vec![false; q.len()];
    loop {
        let n_pinned = pinned.iter().filter(|p| **p).count();
        let free_mass = 1.0 - n_pinned as f64 * floor;
        let free_share: f64 = pi.iter().zip(&pinned).filter(|(_, p)| !**p).map(|(v, _)| v).sum();
        let scale = if free_share > 0.0 { free_mass / free_share } else { 0.0 };
        let mut changed = false;
        for (i, v) in pi.iter().enumerate() {
            if !pinned[i] && scale * v < floor {
                pinned[i] = true;
                changed = true;
            }
        }
        if !changed {
            return pi
                .iter()
                .zip(&pinned)
                .map(|(v, p)| if *p { floor } else { scale * v })
                .collect();
        }
    }
}

/// One clipped-Hedge step: KL projection of `w ⊙ exp(−rate·loss)`.
///
/// Evaluated in the log domain after shifting by the minimum loss, so the result is
/// unchanged by adding a constant to every loss coordinate.
pub fn hedge_step(w: &[f64], loss: &[f64], rate: f64, cs: &ClippedSimplex) -> Result<Vec<f64>> {
    check_dim(cs.dim(), w.len())?;
    check_dim(cs.dim(), loss.len())?;
    if !(rate >= 0.0) || !rate.is_finite() {
        return Err(OccoError::Input(format!("hedge rate must be finite and ≥ 0, got {rate}")));
    }
    if let Some(i) = w.iter().position(|v| !(*v > 0.0)) {
        return Err(OccoError::Domain(format!("hedge weights must be positive (coordinate {i})")));
    }
    if loss.iter().any(|l| !l.is_finite()) {
        return Err(OccoError::Input("hedge loss must be finite".into()));
    }
    let min_loss = loss.iter().cloned().fold(f64::INFINITY, f64::min);
    let logs: Vec<f64> = w
        .iter()
        .zip(loss)
        .map(|(wi, li)| wi.ln() - rate * (li - min_loss))
        .collect();
    let max_log = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let q: Vec<f64> = logs.iter().map(|l| (l - max_log).exp()).collect();
    Ok(project_nonnegative(&q, cs))
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
