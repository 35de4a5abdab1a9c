//! The per-round decide/observe loop, the doubling trick and the D-DGap trace.

use crate::ader::AderState;
use crate::aggregator::AggregatorState;
use crate::error::{check_dim, OccoError, Result};
use crate::geometry::BoxDomain;
use crate::integration::{Decision, IntegrationConfig, IntegrationState, Residuals, SolverFlag, SolverPolicy};
use crate::optoppm::{OptOppmConfig, OptOppmDecision, OptOppmState};
use crate::payoff::{loss_vector, Payoff, SharedPayoff};
use crate::vi::ProblemConstants;

/// Per-round diagnostics; fields an algorithm does not have stay `None`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RoundDiagnostics {
    pub epoch: usize,
    pub w: Option<f64>,
    pub omega: Option<f64>,
    pub xi: Option<Vec<f64>>,
    pub eta: Option<f64>,
    pub gamma: Option<f64>,
    pub theta: Option<f64>,
    pub vartheta: Option<f64>,
    pub zeta: Option<f64>,
    pub solver_iters: Option<usize>,
    pub solver_flag: Option<SolverFlag>,
    pub integration: Option<Residuals>,
    pub aggregator: Option<f64>,
    pub nu: Option<(f64, f64)>,
    /// Largest `|f_t − h_t|` over the probe grid `{x̂, x̄, x̃_{t+1}} × {ŷ, ȳ, ỹ_{t+1}}`.
    pub probe_gap: Option<f64>,
    /// `f_t`'s D-DGap terms `(f(x,v) − wᵀA^{:,1}, wᵀA e₁ − e₁ᵀAω, A^{1,:}ω − f(u,y))`
    /// need the comparator; the decision is kept for that.
    pub decision: Option<Decision>,
}

/// An online saddle-point player with a strict two-phase round.
pub trait OnlinePlayer {
    fn name(&self) -> &'static str;
    /// Commit `(x_t, y_t)` given this round's predictors.
    fn decide(&mut self, bank: &[SharedPayoff]) -> Result<(Vec<f64>, Vec<f64>)>;
    /// Learn from the revealed payoff of the round just decided.
    fn observe(&mut self, f: SharedPayoff) -> Result<RoundDiagnostics>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuntimeConfig {
    /// Horizon of the first epoch; later epochs double it.
    pub t0: usize,
    pub epsilon: f64,
    pub tol: f64,
    pub damping: f64,
    pub policy: SolverPolicy,
    pub constants: ProblemConstants,
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        Self {
            t0: 64,
            epsilon: 1.0,
            tol: 1e-12,
            damping: 0.5,
            policy: SolverPolicy::FixedPoint,
            constants: ProblemConstants::experiment(),
        }
    }
}

/// Doubling schedule: epoch `m` has horizon `T₀·2^m` and starts after the earlier ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Epoch {
    pub index: usize,
    pub horizon: usize,
    pub used: usize,
}

impl Epoch {
    fn first(t0: usize) -> Self {
        Self { index: 0, horizon: t0, used: 0 }
    }

    fn exhausted(&self) -> bool {
        self.used >= self.horizon
    }

    fn next(&self) -> Self {
        Self { index: self.index + 1, horizon: 2 * self.horizon, used: 0 }
    }
}

/// Epoch containing round `t` (1-based) under horizon `t0` doubling.
pub fn epoch_of(t0: usize, t: usize) -> Epoch {
    let mut e = Epoch::first(t0);
    let mut start = 1;
    while t >= start + e.horizon {
        start += e.horizon;
        e = e.next();
    }
    e.used = t - start;
    e
}

fn validate_config(cfg: &RuntimeConfig, d: usize) -> Result<()> {
    if cfg.t0 < 3 || cfg.t0 < d {
        return Err(OccoError::Input(format!("t0 = {} must be at least 3 and at least d = {d}", cfg.t0)));
    }
    Ok(())
}

struct PendingModular {
    bank: Vec<SharedPayoff>,
    h: SharedPayoff,
    decision: Decision,
    x: Vec<f64>,
    y: Vec<f64>,
}

/// Adaptive module, integration module and aggregator wired together.
pub struct ModularAlgorithm {
    cfg: RuntimeConfig,
    x_domain: BoxDomain,
    y_domain: BoxDomain,
    d: usize,
    epoch: Epoch,
    ader_x: AderState,
    ader_y: AderState,
    integ: IntegrationState,
    agg: AggregatorState,
    pending: Option<PendingModular>,
}

impl ModularAlgorithm {
    pub fn new(cfg: RuntimeConfig, x_domain: BoxDomain, y_domain: BoxDomain, d: usize) -> Result<Self> {
        validate_config(&cfg, d)?;
        let epoch = Epoch::first(cfg.t0);
        let (ader_x, ader_y, integ, agg) = Self::fresh(&cfg, &x_domain, &y_domain, d, epoch.horizon)?;
        Ok(Self { cfg, x_domain, y_domain, d, epoch, ader_x, ader_y, integ, agg, pending: None })
    }

    fn fresh(
        cfg: &RuntimeConfig,
        xd: &BoxDomain,
        yd: &BoxDomain,
        d: usize,
        t: usize,
    ) -> Result<(AderState, AderState, IntegrationState, AggregatorState)> {
        let ic = IntegrationConfig {
            epsilon: cfg.epsilon,
            tol: cfg.tol,
            damping: cfg.damping,
            policy: cfg.policy,
            constants: cfg.constants,
            l_b_phi: xd.diameter(),
            l_b_psi: yd.diameter(),
            ..IntegrationConfig::experiment(t)
        };
        Ok((
            AderState::new(xd.clone(), cfg.constants.g_x, t)?,
            AderState::new(yd.clone(), cfg.constants.g_y, t)?,
            IntegrationState::new(ic, xd.clone(), yd.clone())?,
            AggregatorState::new(d, t, cfg.epsilon)?,
        ))
    }

    pub fn epoch(&self) -> Epoch {
        self.epoch
    }

    pub fn integration(&self) -> &IntegrationState {
        &self.integ
    }

    pub fn aggregator(&self) -> &AggregatorState {
        &self.agg
    }

    pub fn ader(&self) -> (&AderState, &AderState) {
        (&self.ader_x, &self.ader_y)
    }

    /// Start the next epoch with twice the horizon and every sub-state reset.
    pub fn double(&mut self) -> Result<()> {
        let next = self.epoch.next();
        let (ax, ay, integ, agg) = Self::fresh(&self.cfg, &self.x_domain, &self.y_domain, self.d, next.horizon)?;
        log::info!("epoch {} starts with horizon {}; all module states reset", next.index, next.horizon);
        self.epoch = next;
        self.ader_x = ax;
        self.ader_y = ay;
        self.integ = integ;
        self.agg = agg;
        Ok(())
    }
}

impl OnlinePlayer for ModularAlgorithm {
    fn name(&self) -> &'static str {
        "modular"
    }

    fn decide(&mut self, bank: &[SharedPayoff]) -> Result<(Vec<f64>, Vec<f64>)> {
        if self.pending.is_some() {
            return Err(OccoError::Protocol("decide called twice without observe".into()));
        }
        check_dim(self.d, bank.len())?;
        if self.epoch.exhausted() {
            self.double()?;
        }
        let h = self.agg.aggregate(bank)?;
        let x_bar = self.ader_x.predict();
        let y_bar = self.ader_y.predict();
        let decision = self.integ.joint_decision(h.clone(), &x_bar, &y_bar)?;
        let (x, y) = (decision.x(), decision.y());
        self.pending = Some(PendingModular { bank: bank.to_vec(), h, decision, x: x.clone(), y: y.clone() });
        Ok((x, y))
    }

    fn observe(&mut self, f: SharedPayoff) -> Result<RoundDiagnostics> {
        let p = self
            .pending
            .take()
            .ok_or_else(|| OccoError::Protocol("observe called before decide".into()))?;
        let rates = self.integ.rates();
        let zeta = self.agg.rate();
        let xi = self.agg.weights().to_vec();
        let d = &p.decision;
        let res = self.integ.observe(f.as_ref(), p.h.as_ref(), d)?;
        let (xn, yn) = (self.integ.x_tilde().to_vec(), self.integ.y_tilde().to_vec());
        let px: [&[f64]; 3] = [&d.x_hat, &d.x_bar, &xn];
        let py: [&[f64]; 3] = [&d.y_hat, &d.y_bar, &yn];
        let loss = loss_vector(f.as_ref(), &p.bank, px, py)?;
        let probe_gap = loss_vector(f.as_ref(), &[p.h.clone()], px, py)?[0];
        let agg_delta = self.agg.update(&loss)?;
        let (x, y) = (&p.x, &p.y);
        self.ader_x.update(|q| f.grad_x(q, y))?;
        self.ader_y.update(|q| f.grad_y_neg(x, q))?;
        self.epoch.used += 1;
        Ok(RoundDiagnostics {
            epoch: self.epoch.index,
            w: Some(d.w),
            omega: Some(d.omega),
            xi: Some(xi),
            eta: Some(rates.eta),
            gamma: Some(rates.gamma),
            theta: Some(rates.theta),
            vartheta: Some(rates.vartheta),
            zeta: Some(zeta),
            solver_iters: Some(d.iterations),
            solver_flag: Some(d.flag),
            integration: Some(res),
            aggregator: Some(agg_delta),
            nu: None,
            probe_gap: Some(probe_gap),
            decision: Some(p.decision),
        })
    }
}

/// The adaptive module alone: `x_t = x̄_t`, `y_t = ȳ_t`.
pub struct AderPair {
    cfg: RuntimeConfig,
    x_domain: BoxDomain,
    y_domain: BoxDomain,
    epoch: Epoch,
    ader_x: AderState,
    ader_y: AderState,
    pending: Option<(Vec<f64>, Vec<f64>)>,
}

impl AderPair {
    pub fn new(cfg: RuntimeConfig, x_domain: BoxDomain, y_domain: BoxDomain) -> Result<Self> {
        validate_config(&cfg, 1)?;
        let epoch = Epoch::first(cfg.t0);
        let ader_x = AderState::new(x_domain.clone(), cfg.constants.g_x, epoch.horizon)?;
        let ader_y = AderState::new(y_domain.clone(), cfg.constants.g_y, epoch.horizon)?;
        Ok(Self { cfg, x_domain, y_domain, epoch, ader_x, ader_y, pending: None })
    }

    pub fn epoch(&self) -> Epoch {
        self.epoch
    }
}

impl OnlinePlayer for AderPair {
    fn name(&self) -> &'static str {
        "ader-pair"
    }

    fn decide(&mut self, _bank: &[SharedPayoff]) -> Result<(Vec<f64>, Vec<f64>)> {
        if self.pending.is_some() {
            return Err(OccoError::Protocol("decide called twice without observe".into()));
        }
        if self.epoch.exhausted() {
            self.epoch = self.epoch.next();
            self.ader_x = AderState::new(self.x_domain.clone(), self.cfg.constants.g_x, self.epoch.horizon)?;
            self.ader_y = AderState::new(self.y_domain.clone(), self.cfg.constants.g_y, self.epoch.horizon)?;
        }
        let (x, y) = (self.ader_x.predict(), self.ader_y.predict());
        self.pending = Some((x.clone(), y.clone()));
        Ok((x, y))
    }

    fn observe(&mut self, f: SharedPayoff) -> Result<RoundDiagnostics> {
        let (x, y) = self
            .pending
            .take()
            .ok_or_else(|| OccoError::Protocol("observe called before decide".into()))?;
        self.ader_x.update(|q| f.grad_x(q, &y))?;
        self.ader_y.update(|q| f.grad_y_neg(&x, q))?;
        self.epoch.used += 1;
        Ok(RoundDiagnostics { epoch: self.epoch.index, ..RoundDiagnostics::default() })
    }
}

/// The optimistic proximal point baseline driven by the first predictor of the bank.
pub struct OptOppm {
    cfg: RuntimeConfig,
    x_domain: BoxDomain,
    y_domain: BoxDomain,
    epoch: Epoch,
    state: OptOppmState,
    pending: Option<(SharedPayoff, OptOppmDecision)>,
}

impl OptOppm {
    pub fn new(cfg: RuntimeConfig, x_domain: BoxDomain, y_domain: BoxDomain) -> Result<Self> {
        validate_config(&cfg, 1)?;
        let epoch = Epoch::first(cfg.t0);
        let state = Self::fresh(&cfg, &x_domain, &y_domain, epoch.horizon)?;
        Ok(Self { cfg, x_domain, y_domain, epoch, state, pending: None })
    }

    fn fresh(cfg: &RuntimeConfig, xd: &BoxDomain, yd: &BoxDomain, t: usize) -> Result<OptOppmState> {
        let oc = OptOppmConfig {
            epsilon: cfg.epsilon,
            l_b_phi: xd.diameter(),
            l_b_psi: yd.diameter(),
            lambda: xd.diameter() * t as f64,
            mu: yd.diameter() * t as f64,
            constants: cfg.constants,
            tol: cfg.tol,
            damping: cfg.damping,
        };
        OptOppmState::new(oc, xd.clone(), yd.clone())
    }

    pub fn state(&self) -> &OptOppmState {
        &self.state
    }
}

impl OnlinePlayer for OptOppm {
    fn name(&self) -> &'static str {
        "optoppm"
    }

    fn decide(&mut self, bank: &[SharedPayoff]) -> Result<(Vec<f64>, Vec<f64>)> {
        if self.pending.is_some() {
            return Err(OccoError::Protocol("decide called twice without observe".into()));
        }
        let h = bank
            .first()
            .cloned()
            .ok_or_else(|| OccoError::Input("the baseline needs at least one predictor".into()))?;
        if self.epoch.exhausted() {
            self.epoch = self.epoch.next();
            self.state = Self::fresh(&self.cfg, &self.x_domain, &self.y_domain, self.epoch.horizon)?;
        }
        let d = self.state.decide(h.clone())?;
        let out = (d.x.clone(), d.y.clone());
        self.pending = Some((h, d));
        Ok(out)
    }

    fn observe(&mut self, f: SharedPayoff) -> Result<RoundDiagnostics> {
        let (h, d) = self
            .pending
            .take()
            .ok_or_else(|| OccoError::Protocol("observe called before decide".into()))?;
        let (eta, gamma) = (self.state.eta(), self.state.gamma());
        let nu = self.state.update(f.as_ref(), h.as_ref(), &d)?;
        self.epoch.used += 1;
        Ok(RoundDiagnostics {
            epoch: self.epoch.index,
            eta: Some(eta),
            gamma: Some(gamma),
            solver_iters: Some(d.iterations),
            solver_flag: Some(d.flag),
            nu: Some(nu),
            ..RoundDiagnostics::default()
        })
    }
}

/// One round of the D-DGap trace.
#[derive(Debug, Clone, PartialEq)]
pub struct GapRecord {
    pub t: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub gap: f64,
    pub cum_gap: f64,
    pub avg_gap: f64,
    pub diag: RoundDiagnostics,
}

/// Running D-DGap record; cumulative and averaged values are prefix sums in round order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GapTrace {
    /// Retained records; callers may drop old ones, round numbering continues.
    pub records: Vec<GapRecord>,
    rounds: usize,
    cum_gap: f64,
}

impl GapTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    /// Rounds pushed so far, including dropped records.
    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&GapRecord> {
        self.records.last()
    }

    /// Append the next round with gap `f(x, v) − f(u, y)`.
    #[allow(clippy::too_many_arguments)]
    pub fn push(
        &mut self,
        f: &dyn Payoff,
        x: Vec<f64>,
        y: Vec<f64>,
        u: Vec<f64>,
        v: Vec<f64>,
        diag: RoundDiagnostics,
    ) -> &GapRecord {
        let gap = f.eval(&x, &v) - f.eval(&u, &y);
        self.rounds += 1;
        self.cum_gap += gap;
        let (t, cum_gap) = (self.rounds, self.cum_gap);
        self.records.push(GapRecord { t, x, y, u, v, gap, cum_gap, avg_gap: cum_gap / t as f64, diag });
        self.records.last().expect("just pushed")
    }

    pub fn avg_series(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.avg_gap).collect()
    }
}

/// A played pair or a comparator pair.
pub type StrategyPair = (Vec<f64>, Vec<f64>);

/// Instantaneous, cumulative and time-averaged D-DGap series.
pub fn ddgap(
    payoffs: &[SharedPayoff],
    plays: &[StrategyPair],
    comparators: &[StrategyPair],
    xd: &BoxDomain,
    yd: &BoxDomain,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    check_dim(payoffs.len(), plays.len())?;
    check_dim(payoffs.len(), comparators.len())?;
    let mut inst = Vec::with_capacity(payoffs.len());
    let mut cum = Vec::with_capacity(payoffs.len());
    let mut avg = Vec::with_capacity(payoffs.len());
    let mut total = 0.0;
    for (i, ((f, (x, y)), (u, v))) in payoffs.iter().zip(plays).zip(comparators).enumerate() {
        if !xd.contains(u, 1e-12) || !yd.contains(v, 1e-12) {
            return Err(OccoError::Input(format!("comparator ({u:?}, {v:?}) at round {} is infeasible", i + 1)));
        }
        let g = f.eval(x, v) - f.eval(u, y);
        total += g;
        inst.push(g);
        cum.push(total);
        avg.push(total / (i + 1) as f64);
    }
    Ok((inst, cum, avg))
}

/// The three D-DGap terms of the prediction-error decomposition of one round.
pub fn gap_decomposition(f: &dyn Payoff, d: &Decision, u: &[f64], v: &[f64]) -> [f64; 3] {
    let (x, y) = (d.x(), d.y());
    let a = crate::integration::build_matrices(f, &d.x_hat, &d.y_hat, &d.x_bar, &d.y_bar);
    let (w, om) = ([d.w, 1.0 - d.w], [d.omega, 1.0 - d.omega]);
    let col1 = w[0] * a[0][0] + w[1] * a[1][0];
    let row1 = a[0][0] * om[0] + a[0][1] * om[1];
    [f.eval(&x, v) - col1, col1 - row1, row1 - f.eval(u, &y)]
}
