//! The adaptive module: ADER, a Hedge meta-learner over projected gradient descent
//! experts with a geometric grid of step sizes.

use crate::error::{check_dim, OccoError, Result};
use crate::geometry::{dot, project_box, BoxDomain};

#[derive(Debug, Clone, PartialEq)]
pub struct AderExpert {
    pub step_size: f64,
    pub iterate: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AderState {
    domain: BoxDomain,
    horizon: usize,
    experts: Vec<AderExpert>,
    meta_weights: Vec<f64>,
    meta_rate: f64,
}

/// `⌈½·log₂(1 + 2T)⌉ + 1`.
pub fn expert_count(horizon: usize) -> usize {
    (0.5 * (1.0 + 2.0 * horizon as f64).log2()).ceil() as usize + 1
}

impl AderState {
    /// Experts start at the domain center with step sizes `2^{i−1}·√(7D²/(2G²T))`;
    /// meta weights start at `∝ 1/(i(i+1))` and the meta rate is `√(8/T)/(G·D)`.
    pub fn new(domain: BoxDomain, grad_bound: f64, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(OccoError::Input("ADER horizon must be at least 1".into()));
        }
        if !(grad_bound > 0.0) || !grad_bound.is_finite() {
            return Err(OccoError::Input(format!("gradient bound {grad_bound} must be positive")));
        }
        let d = domain.diameter();
        let t = horizon as f64;
        let n = expert_count(horizon);
        let base = (7.0 * d * d / (2.0 * grad_bound * grad_bound * t)).sqrt();
        let center = domain.center();
        let experts = (0..n)
            .map(|i| AderExpert { step_size: base * 2f64.powi(i as i32), iterate: center.clone() })
            .collect();
        let raw: Vec<f64> = (1..=n).map(|i| 1.0 / (i * (i + 1)) as f64).collect();
        let total: f64 = raw.iter().sum();
        let meta_rate = if d > 0.0 { (8.0 / t).sqrt() / (grad_bound * d) } else { 0.0 };
        Ok(Self { domain, horizon, experts, meta_weights: raw.iter().map(|w| w / total).collect(), meta_rate })
    }

    /// Explicit construction, mostly for tests and custom grids.
    pub fn from_parts(domain: BoxDomain, experts: Vec<AderExpert>, meta_weights: Vec<f64>, meta_rate: f64) -> Result<Self> {
        check_dim(experts.len(), meta_weights.len())?;
        if experts.is_empty() {
            return Err(OccoError::Input("ADER needs at least one expert".into()));
        }
        for e in &experts {
            check_dim(domain.dim(), e.iterate.len())?;
            if !domain.contains(&e.iterate, 0.0) || !(e.step_size > 0.0) {
                return Err(OccoError::Input(format!("invalid expert {e:?}")));
            }
        }
        if meta_weights.iter().any(|w| !(*w >= 0.0)) || (meta_weights.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(OccoError::Input(format!("meta weights {meta_weights:?} are not a distribution")));
        }
        Ok(Self { domain, horizon: 0, experts, meta_weights, meta_rate })
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn experts(&self) -> &[AderExpert] {
        &self.experts
    }

    pub fn meta_weights(&self) -> &[f64] {
        &self.meta_weights
    }

    pub fn meta_rate(&self) -> f64 {
        self.meta_rate
    }

    /// Meta-weighted average of the expert iterates.
    pub fn predict(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.domain.dim()];
        for (e, w) in self.experts.iter().zip(&self.meta_weights) {
            for (o, v) in out.iter_mut().zip(&e.iterate) {
                *o += w * v;
            }
        }
        // rounding can push a convex combination a hair outside the box
        self.domain.clamp_in_place(&mut out);
        out
    }

    /// One round given the loss gradient oracle.
    ///
    /// The meta layer sees the surrogate `⟨g, xᵢ⟩` with `g` taken at the combined
    /// prediction; every expert then steps from its own iterate along the gradient
    /// there.
    pub fn update(&mut self, grad_at: impl Fn(&[f64]) -> Vec<f64>) -> Result<()> {
        let combined = self.predict();
        let g = grad_at(&combined);
        check_dim(self.domain.dim(), g.len())?;
        let losses: Vec<f64> = self.experts.iter().map(|e| dot(&g, &e.iterate) - dot(&g, &combined)).collect();
        let shift = losses.iter().cloned().fold(f64::INFINITY, f64::min);
        let factors: Vec<f64> = losses.iter().map(|l| (-self.meta_rate * (l - shift)).exp()).collect();
        if factors.iter().any(|f| *f != 1.0) {
            let unnorm: Vec<f64> = self.meta_weights.iter().zip(&factors).map(|(w, f)| w * f).collect();
            let total: f64 = unnorm.iter().sum();
            self.meta_weights = unnorm.iter().map(|w| w / total).collect();
        }

        for e in &mut self.experts {
            let ge = grad_at(&e.iterate);
            check_dim(self.domain.dim(), ge.len())?;
            let step: Vec<f64> = e.iterate.iter().zip(&ge).map(|(x, gi)| x - e.step_size * gi).collect();
            e.iterate = project_box(&step, &self.domain)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> BoxDomain {
        BoxDomain::interval(-1.0, 1.0).unwrap()
    }

    fn single(iterate: f64, step: f64) -> AderState {
        AderState::from_parts(unit(), vec![AderExpert { step_size: step, iterate: vec![iterate] }], vec![1.0], 0.1).unwrap()
    }

    #[test]
    fn construction_examples() {
        let s = AderState::new(unit(), 4.0, 1).unwrap();
        assert_eq!(s.experts().len(), 2);
        assert!((s.meta_weights()[0] - 0.75).abs() < 1e-15);
        assert!((s.meta_weights()[1] - 0.25).abs() < 1e-15);
        for t in [1, 2, 7, 64, 1000, 1 << 20] {
            let s = AderState::new(unit(), 4.0, t).unwrap();
            assert!((s.meta_weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(s.experts().iter().all(|e| e.iterate == vec![0.0]));
            assert!(s.experts().windows(2).all(|p| (p[1].step_size / p[0].step_size - 2.0).abs() < 1e-12));
        }
        assert!(AderState::new(unit(), 4.0, 0).is_err());
    }

    #[test]
    fn predict_examples() {
        assert_eq!(single(0.4, 0.1).predict(), vec![0.4]);
        let two = |a: f64, b: f64, w: Vec<f64>| {
            AderState::from_parts(
                unit(),
                vec![AderExpert { step_size: 0.1, iterate: vec![a] }, AderExpert { step_size: 0.2, iterate: vec![b] }],
                w,
                0.1,
            )
            .unwrap()
        };
        assert_eq!(two(-1.0, 1.0, vec![0.5, 0.5]).predict(), vec![0.0]);
        assert!((two(0.2, 0.6, vec![0.25, 0.75]).predict()[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn update_examples() {
        let mut s = AderState::new(unit(), 4.0, 100).unwrap();
        let before = s.clone();
        s.update(|_| vec![0.0]).unwrap();
        assert_eq!(s, before);

        let mut s = single(0.0, 0.5);
        s.update(|_| vec![1.0]).unwrap();
        assert_eq!(s.experts()[0].iterate, vec![-0.5]);

        let mut s = single(0.9, 0.5);
        s.update(|_| vec![3.0]).unwrap();
        assert!((s.experts()[0].iterate[0] + 0.6).abs() < 1e-15);
    }

    fn run(t: usize, target: impl Fn(usize) -> f64) -> f64 {
        let mut s = AderState::new(unit(), 2.6, t).unwrap();
        let mut regret = 0.0;
        for r in 0..t {
            let c = target(r);
            let x = s.predict()[0];
            regret += (x - c).powi(2);
            s.update(|p| vec![2.0 * (p[0] - c)]).unwrap();
        }
        regret
    }

    #[test]
    fn static_regret_is_sublinear() {
        let t = 10_000;
        let regret = run(t, |_| 0.3);
        assert!(regret <= 5.0 * (t as f64).sqrt(), "regret {regret}");
    }

    #[test]
    fn dynamic_regret_adapts_to_switches() {
        let t = 10_000;
        let stationary = run(t, |_| 0.3) / t as f64;
        let switching = run(t, |r| if (r * 6 / t) % 2 == 0 { 0.6 } else { -0.4 }) / t as f64;
        assert!(switching < 10.0 * stationary.max(1e-3), "{switching} vs {stationary}");
    }
}
