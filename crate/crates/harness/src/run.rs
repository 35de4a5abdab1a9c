//! Run configuration and the simulation loop.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use occo::geometry::BoxDomain;
use occo::payoff::{delayed_predictor_bank, validate_delays, QuadraticSaddle, SharedPayoff};
use occo::runtime::{AderPair, GapRecord, GapTrace, ModularAlgorithm, OnlinePlayer, OptOppm, RuntimeConfig};

use crate::comparator::{comparator, Level};
use crate::env::{Case, Environment};
use crate::error::{HarnessError, Result};

pub const CSV_HEADER: &str =
    "t,x,y,u,v,gap,cum_gap,avg_gap,w,omega,xi_1,xi_2,xi_3,xi_4,eta,gamma,theta,vartheta,zeta,solver_iters,solver_flag";

/// Columns reserved for aggregator weights.
pub const MAX_PREDICTORS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algo {
    Modular,
    AderPair,
    OptOppm,
}

impl Algo {
    pub const ALL: [Algo; 3] = [Algo::Modular, Algo::AderPair, Algo::OptOppm];
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algo::Modular => "modular",
            Algo::AderPair => "ader-pair",
            Algo::OptOppm => "optoppm",
        })
    }
}

impl FromStr for Algo {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "modular" => Ok(Algo::Modular),
            "ader-pair" => Ok(Algo::AderPair),
            "optoppm" => Ok(Algo::OptOppm),
            other => Err(HarnessError::Config(format!("unknown algorithm {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub case: Case,
    pub level: Level,
    pub rounds: usize,
    pub seed: u64,
    pub algo: Algo,
    pub delays: Vec<usize>,
    pub out: Option<PathBuf>,
    pub epsilon: f64,
    pub tol: f64,
    pub damping: f64,
    pub t0: usize,
    /// Keep every round in memory; when false only the last record survives.
    pub retain_trace: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            case: Case::I,
            level: Level::III,
            rounds: 10_000,
            seed: 0,
            algo: Algo::Modular,
            delays: vec![1, 3, 7, 8],
            out: None,
            epsilon: 1.0,
            tol: 1e-12,
            damping: 0.5,
            t0: 64,
            retain_trace: true,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.rounds == 0 {
            return bad("rounds must be at least 1".into());
        }
        validate_delays(&self.delays).map_err(|e| HarnessError::Config(e.to_string()))?;
        if self.delays.len() > MAX_PREDICTORS {
            return bad(format!("at most {MAX_PREDICTORS} predictor delays fit the trace schema"));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon {} must be positive", self.epsilon));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return bad(format!("tol {} must be positive", self.tol));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return bad(format!("damping {} must lie in (0, 1]", self.damping));
        }
        if self.t0 < 3 || self.t0 < self.delays.len() {
            return bad(format!("t0 {} must be at least 3 and at least the number of predictors", self.t0));
        }
        Ok(())
    }

    pub fn runtime(&self) -> RuntimeConfig {
        RuntimeConfig { t0: self.t0, epsilon: self.epsilon, tol: self.tol, damping: self.damping, ..RuntimeConfig::default() }
    }

    /// `{algo}_case{case}_level{level}_seed{seed}.csv`.
    pub fn file_stem(&self) -> String {
        format!("{}_case{}_level{}_seed{}", self.algo, self.case, self.level, self.seed)
    }
}

pub fn unit_interval() -> BoxDomain {
    BoxDomain::interval(-1.0, 1.0).expect("valid interval")
}

pub fn make_player(cfg: &RunConfig) -> Result<Box<dyn OnlinePlayer>> {
    let (xd, yd) = (unit_interval(), unit_interval());
    let rc = cfg.runtime();
    Ok(match cfg.algo {
        Algo::Modular => Box::new(ModularAlgorithm::new(rc, xd, yd, cfg.delays.len())?),
        Algo::AderPair => Box::new(AderPair::new(rc, xd, yd)?),
        Algo::OptOppm => Box::new(OptOppm::new(rc, xd, yd)?),
    })
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub config: RunConfig,
    pub trace: GapTrace,
    /// Saddle centers `(x*_t, y*_t)`.
    pub centers: Vec<(f64, f64)>,
    /// Instantaneous gaps under levels i, ii and iii against the same plays.
    pub level_gaps: [Vec<f64>; 3],
    pub final_avg_gap: f64,
}

/// Run the round loop without touching the file system.
pub fn simulate(cfg: &RunConfig) -> Result<RunOutput> {
    simulate_with(cfg, |_| Ok(()))
}

/// Run the round loop, handing each finished record to `sink`.
pub fn simulate_with(cfg: &RunConfig, mut sink: impl FnMut(&GapRecord) -> Result<()>) -> Result<RunOutput> {
    cfg.validate()?;
    let mut env = Environment::new(cfg.case, cfg.seed);
    let mut player = make_player(cfg)?;
    let mut history: Vec<SharedPayoff> = Vec::with_capacity(cfg.rounds);
    let mut trace = GapTrace::new();
    let mut centers = Vec::new();
    let mut level_gaps: [Vec<f64>; 3] = Default::default();
    let (lo, hi) = (-1.0, 1.0);
    for t in 1..=cfg.rounds {
        let bank = delayed_predictor_bank(&history, &cfg.delays, t)?;
        let (x, y) = player.decide(&bank)?;
        if !(x[0] >= lo && x[0] <= hi && y[0] >= lo && y[0] <= hi) {
            return Err(HarnessError::Invariant(format!("round {t}: strategy ({}, {}) is infeasible", x[0], y[0])));
        }
        let (xs, ys) = env.saddle_center(t, Some((x[0], y[0])))?;
        let f = QuadraticSaddle::new(xs, ys);
        let shared: SharedPayoff = Arc::new(f);
        let diag = player.observe(shared.clone())?;
        if cfg.retain_trace {
            for (slot, level) in level_gaps.iter_mut().zip(Level::ALL) {
                let (u, v) = comparator(level, &f, x[0], y[0], xs, ys, t, lo, hi);
                slot.push(f.value(x[0], v) - f.value(u, y[0]));
            }
            centers.push((xs, ys));
        }
        let (u, v) = comparator(cfg.level, &f, x[0], y[0], xs, ys, t, lo, hi);
        trace.push(&f, x, y, vec![u], vec![v], diag);
        sink(trace.last().expect("record pushed"))?;
        if !cfg.retain_trace && trace.len() > 1 {
            trace.records.drain(..trace.len() - 1);
        }
        history.push(shared);
    }
    let final_avg_gap = trace.last().map_or(0.0, |r| r.avg_gap);
    Ok(RunOutput { config: cfg.clone(), trace, centers, level_gaps, final_avg_gap })
}

fn opt<T: fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

/// One CSV line (no newline) in the trace schema.
pub fn csv_row(r: &GapRecord) -> String {
    let d = &r.diag;
    let mut fields = vec![
        r.t.to_string(),
        r.x[0].to_string(),
        r.y[0].to_string(),
        r.u[0].to_string(),
        r.v[0].to_string(),
        r.gap.to_string(),
        r.cum_gap.to_string(),
        r.avg_gap.to_string(),
        opt(d.w),
        opt(d.omega),
    ];
    for k in 0..MAX_PREDICTORS {
        fields.push(opt(d.xi.as_ref().and_then(|xi| xi.get(k))));
    }
    fields.extend([
        opt(d.eta),
        opt(d.gamma),
        opt(d.theta),
        opt(d.vartheta),
        opt(d.zeta),
        opt(d.solver_iters),
        opt(d.solver_flag),
    ]);
    fields.join(",")
}

pub fn write_trace_csv(trace: &GapTrace, mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in &trace.records {
        writeln!(w, "{}", csv_row(r))?;
    }
    w.flush()
}

/// Simulate and, when `cfg.out` is set, stream the trace CSV to that path.
pub fn run_experiment(cfg: &RunConfig) -> Result<RunOutput> {
    let Some(path) = cfg.out.clone() else {
        return simulate(cfg);
    };
    cfg.validate()?;
    let file = File::create(&path).map_err(|e| HarnessError::io(&path, e))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{CSV_HEADER}").map_err(|e| HarnessError::io(&path, e))?;
    let out = simulate_with(cfg, |r| writeln!(w, "{}", csv_row(r)).map_err(|e| HarnessError::io(&path, e)))?;
    w.flush().map_err(|e| HarnessError::io(&path, e))?;
    Ok(out)
}
