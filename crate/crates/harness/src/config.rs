//! Flat `key=value` configuration files and multi-run sweeps.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::comparator::Level;
use crate::env::Case;
use crate::error::{HarnessError, Result};
use crate::plot::emit_plotdata;
use crate::run::{run_experiment, Algo, RunConfig, RunOutput};

/// A grid of runs: every combination of the listed cases, levels, algorithms and seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub base: RunConfig,
    pub cases: Vec<Case>,
    pub levels: Vec<Level>,
    pub algos: Vec<Algo>,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
}

fn list<T: FromStr<Err = HarnessError>>(v: &str) -> Result<Vec<T>> {
    v.split(',').filter(|s| !s.trim().is_empty()).map(|s| s.trim().parse()).collect()
}

fn number<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| HarnessError::Config(format!("{key}: cannot parse {v:?}")))
}

pub fn parse_delays(v: &str) -> Result<Vec<usize>> {
    v.split(',').map(|s| number("delays", s)).collect()
}

/// Parse `key=value` lines; `#` starts a comment. Keys mirror the `run` flags, and
/// `case`, `level`, `algo` and `seed` accept comma-separated lists.
pub fn parse_config(text: &str) -> Result<SweepConfig> {
    let mut kv = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| HarnessError::Config(format!("line {}: expected key=value, got {raw:?}", i + 1)))?;
        if kv.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
            return Err(HarnessError::Config(format!("line {}: duplicate key {:?}", i + 1, k.trim())));
        }
    }
    let mut sc = SweepConfig {
        base: RunConfig::default(),
        cases: vec![Case::I],
        levels: vec![Level::III],
        algos: vec![Algo::Modular],
        seeds: vec![0],
        out_dir: PathBuf::from("."),
    };
    for (k, v) in &kv {
        match k.as_str() {
            "case" => sc.cases = list(v)?,
            "level" => sc.levels = list(v)?,
            "algo" => sc.algos = list(v)?,
            "seed" => sc.seeds = v.split(',').map(|s| number("seed", s)).collect::<Result<_>>()?,
            "rounds" => sc.base.rounds = number(k, v)?,
            "delays" => sc.base.delays = parse_delays(v)?,
            "epsilon" => sc.base.epsilon = number(k, v)?,
            "tol" => sc.base.tol = number(k, v)?,
            "damping" => sc.base.damping = number(k, v)?,
            "t0" => sc.base.t0 = number(k, v)?,
            "out" => sc.out_dir = PathBuf::from(v),
            other => return Err(HarnessError::Config(format!("unknown key {other:?}"))),
        }
    }
    if sc.cases.is_empty() || sc.levels.is_empty() || sc.algos.is_empty() || sc.seeds.is_empty() {
        return Err(HarnessError::Config("case, level, algo and seed lists must be nonempty".into()));
    }
    sc.base.validate()?;
    Ok(sc)
}

pub fn load_config(path: &Path) -> Result<SweepConfig> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_config(&text)
}

impl SweepConfig {
    pub fn runs(&self) -> Vec<RunConfig> {
        let mut out = Vec::new();
        for &case in &self.cases {
            for &level in &self.levels {
                for &seed in &self.seeds {
                    for &algo in &self.algos {
                        let mut c = RunConfig { case, level, seed, algo, ..self.base.clone() };
                        c.out = Some(self.out_dir.join(format!("{}.csv", c.file_stem())));
                        out.push(c);
                    }
                }
            }
        }
        out
    }
}

/// Execute every run of the sweep in parallel, then write per-group plot data and
/// `summary.csv` into the output directory.
pub fn sweep(sc: &SweepConfig) -> Result<Vec<RunOutput>> {
    fs::create_dir_all(&sc.out_dir).map_err(|e| HarnessError::io(&sc.out_dir, e))?;
    let runs = sc.runs();
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(runs.len().max(1));
    let mut results: Vec<Option<Result<RunOutput>>> = (0..runs.len()).map(|_| None).collect();
    std::thread::scope(|s| {
        let chunks: Vec<_> = results.chunks_mut(runs.len().div_ceil(workers)).zip(runs.chunks(runs.len().div_ceil(workers))).collect();
        for (slots, cfgs) in chunks {
            s.spawn(move || {
                for (slot, cfg) in slots.iter_mut().zip(cfgs) {
                    *slot = Some(run_experiment(cfg));
                }
            });
        }
    });
    let outputs: Vec<RunOutput> = results.into_iter().map(|r| r.expect("every run executed")).collect::<Result<_>>()?;

    let mut groups: BTreeMap<String, Vec<&RunOutput>> = BTreeMap::new();
    for o in &outputs {
        let c = &o.config;
        groups.entry(format!("plot_case{}_level{}_seed{}", c.case, c.level, c.seed)).or_default().push(o);
    }
    for (name, members) in &groups {
        let series: Vec<(String, _)> = members.iter().map(|o| (o.config.algo.to_string(), &o.trace)).collect();
        emit_plotdata(&series, &sc.out_dir.join(format!("{name}.csv")))?;
    }
    let path = sc.out_dir.join("summary.csv");
    let mut buf = Vec::new();
    writeln!(buf, "case,level,seed,algo,rounds,final_avg_gap").expect("write to memory");
    for o in &outputs {
        let c = &o.config;
        writeln!(buf, "{},{},{},{},{},{}", c.case, c.level, c.seed, c.algo, c.rounds, o.final_avg_gap).expect("write to memory");
    }
    fs::write(&path, buf).map_err(|e| HarnessError::io(&path, e))?;
    Ok(outputs)
}
