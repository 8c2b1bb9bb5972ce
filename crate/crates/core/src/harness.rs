//! Multi-seed experiments, grid search and aggregation.
//!
//! Every (agent, grid point, seed) triple is one independent run with its
//! own environment and agent. Run seeds come from [`run_seed`] so a run's
//! streams depend only on its own coordinates. Aggregation reads the
//! cumulative regret exactly as persisted to CSV and sums traces in seed
//! order, so the aggregate is reproducible from the files on disk and does
//! not depend on the order seeds are listed in.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{AgentKind, ExperimentConfig, GridPoint};
use crate::protocol::run_protocol_with;
use crate::rng::run_seed;
use crate::trace::{format_sig12, RegretTrace};
use crate::{Error, Result};

pub const CURVES_HEADER: &str = "round,mean_cum_regret,std_cum_regret";

/// Identifies one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RunKey {
    pub agent: AgentKind,
    pub point: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub key: RunKey,
    pub run_seed: u64,
    pub trace: RegretTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub index: usize,
    pub params: BTreeMap<String, f64>,
    pub mean_final_regret: f64,
    pub std_final_regret: f64,
    #[serde(skip)]
    pub mean_curve: Vec<f64>,
    #[serde(skip)]
    pub std_curve: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curves {
    pub mean_cum_regret: Vec<f64>,
    pub std_cum_regret: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentResult {
    pub agent: AgentKind,
    pub points: Vec<PointSummary>,
    /// Index of the point with the smallest mean final regret.
    pub selected: usize,
    /// Curves of the selected point.
    pub curves: Curves,
}

impl AgentResult {
    pub fn selected_point(&self) -> &PointSummary {
        &self.points[self.selected]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateResult {
    pub config: ExperimentConfig,
    pub total_rounds: usize,
    pub agents: Vec<AgentResult>,
}

impl AggregateResult {
    pub fn agent(&self, kind: AgentKind) -> Option<&AgentResult> {
        self.agents.iter().find(|a| a.agent == kind)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub aggregate: AggregateResult,
    pub runs: Vec<RunOutput>,
}

fn jobs(cfg: &ExperimentConfig) -> Vec<(AgentKind, GridPoint, u64)> {
    let mut out = Vec::new();
    for agent in cfg.agents() {
        for point in cfg.grid(agent) {
            for &seed in &cfg.seeds {
                out.push((agent, point.clone(), seed));
            }
        }
    }
    out
}

fn check_trace(trace: &RegretTrace, rounds: usize) -> Result<()> {
    if trace.len() != rounds {
        return Err(Error::Numerical(format!(
            "trace has {} rounds, expected {rounds}",
            trace.len()
        )));
    }
    let mut prev = 0.0;
    for r in trace.records() {
        if !r.cum_regret.is_finite() || r.cum_regret < prev || r.instant_regret < 0.0 {
            return Err(Error::Numerical(format!(
                "cumulative regret not monotone at round {}",
                r.round
            )));
        }
        prev = r.cum_regret;
    }
    Ok(())
}

fn execute(cfg: &ExperimentConfig, agent: AgentKind, point: &GridPoint, seed: u64) -> Result<RunOutput> {
    let key = RunKey {
        agent,
        point: point.index,
        seed,
    };
    let wrap = |e: Error| Error::Run {
        agent: agent.as_str().to_string(),
        point: point.index,
        seed,
        source: Box::new(e),
    };
    let env = cfg.build_env().map_err(wrap)?;
    let mut learner = cfg.build_agent(agent, point, env.as_ref()).map_err(wrap)?;
    let rs = run_seed(cfg.base_seed, point.index as u64, seed);
    let rounds = cfg.rounds;
    let trace = run_protocol_with(env.as_ref(), learner.as_mut(), rounds, rs, |r| {
        if r.round % 100 == 0 {
            log::info!(
                "{} point {} seed {}: round {}/{} cum_regret {}",
                agent.as_str(),
                point.index,
                seed,
                r.round,
                rounds,
                format_sig12(r.cum_regret)
            );
        }
    })
    .map_err(wrap)?;
    check_trace(&trace, rounds).map_err(wrap)?;
    Ok(RunOutput {
        key,
        run_seed: rs,
        trace,
    })
}

#[cfg(feature = "parallel")]
fn execute_all(cfg: &ExperimentConfig, jobs: &[(AgentKind, GridPoint, u64)]) -> Vec<Result<RunOutput>> {
    use rayon::prelude::*;
    if cfg.workers <= 1 {
        return jobs.iter().map(|(a, p, s)| execute(cfg, *a, p, *s)).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build() {
        Ok(pool) => pool.install(|| jobs.par_iter().map(|(a, p, s)| execute(cfg, *a, p, *s)).collect()),
        Err(_) => jobs.iter().map(|(a, p, s)| execute(cfg, *a, p, *s)).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
fn execute_all(cfg: &ExperimentConfig, jobs: &[(AgentKind, GridPoint, u64)]) -> Vec<Result<RunOutput>> {
    jobs.iter().map(|(a, p, s)| execute(cfg, *a, p, *s)).collect()
}

/// Runs every (agent, grid point, seed) and aggregates.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let jobs = jobs(cfg);
    let mut runs = Vec::with_capacity(jobs.len());
    for r in execute_all(cfg, &jobs) {
        runs.push(r?);
    }
    let executed: usize = runs.iter().map(|r| r.trace.len()).sum();
    if executed != jobs.len() * cfg.rounds {
        return Err(Error::Numerical(format!(
            "executed {executed} rounds, expected {}",
            jobs.len() * cfg.rounds
        )));
    }
    let aggregate = aggregate(cfg, &runs)?;
    Ok(ExperimentOutput { aggregate, runs })
}

/// Grid search over every hyperparameter list in `cfg`; identical to
/// [`run_experiment`], which already treats scalars as one-point grids.
pub fn grid_search(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    run_experiment(cfg)
}

/// Per-round mean and sample standard deviation (`n - 1`; zero when `n = 1`).
pub fn mean_std(curves: &[&[f64]]) -> (Vec<f64>, Vec<f64>) {
    let Some(first) = curves.first() else {
        return (Vec::new(), Vec::new());
    };
    let n = curves.len() as f64;
    let len = first.len();
    let mut mean = vec![0.0; len];
    let mut std = vec![0.0; len];
    for t in 0..len {
        let m = curves.iter().map(|c| c[t]).sum::<f64>() / n;
        mean[t] = m;
        if curves.len() > 1 {
            let ss: f64 = curves.iter().map(|c| (c[t] - m).powi(2)).sum();
            std[t] = (ss / (n - 1.0)).sqrt();
        }
    }
    (mean, std)
}

/// Pure aggregation of a set of traces.
pub fn aggregate(cfg: &ExperimentConfig, runs: &[RunOutput]) -> Result<AggregateResult> {
    let mut by_key: BTreeMap<(AgentKind, usize), BTreeMap<u64, Vec<f64>>> = BTreeMap::new();
    for r in runs {
        by_key
            .entry((r.key.agent, r.key.point))
            .or_default()
            .insert(r.key.seed, r.trace.persisted_cumulative());
    }
    let mut agents = Vec::new();
    let mut total_rounds = 0;
    for agent in cfg.agents() {
        let mut points = Vec::new();
        for point in cfg.grid(agent) {
            let traces = by_key.get(&(agent, point.index)).ok_or_else(|| {
                Error::Config(format!("no traces for {} point {}", agent.as_str(), point.index))
            })?;
            let curves: Vec<&[f64]> = traces.values().map(Vec::as_slice).collect();
            total_rounds += curves.iter().map(|c| c.len()).sum::<usize>();
            let (mean, std) = mean_std(&curves);
            points.push(PointSummary {
                index: point.index,
                params: point.params,
                mean_final_regret: mean.last().copied().unwrap_or(0.0),
                std_final_regret: std.last().copied().unwrap_or(0.0),
                mean_curve: mean,
                std_curve: std,
            });
        }
        let selected = select(&points);
        let curves = Curves {
            mean_cum_regret: points[selected].mean_curve.clone(),
            std_cum_regret: points[selected].std_curve.clone(),
        };
        agents.push(AgentResult {
            agent,
            points,
            selected,
            curves,
        });
    }
    Ok(AggregateResult {
        config: cfg.clone(),
        total_rounds,
        agents,
    })
}

/// Smallest mean final regret; the earliest grid point wins ties.
fn select(points: &[PointSummary]) -> usize {
    let mut best = 0;
    for (i, p) in points.iter().enumerate().skip(1) {
        if p.mean_final_regret < points[best].mean_final_regret {
            best = i;
        }
    }
    best
}

pub fn curves_csv(curves: &Curves) -> String {
    let mut out = String::from(CURVES_HEADER);
    out.push('\n');
    for (t, (m, s)) in curves.mean_cum_regret.iter().zip(&curves.std_cum_regret).enumerate() {
        let _ = writeln!(out, "{},{},{}", t + 1, format_sig12(*m), format_sig12(*s));
    }
    out
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes via a temporary sibling and a rename.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, contents).map_err(io_err(&tmp))?;
    std::fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn run_csv_path(dir: &Path, key: &RunKey) -> PathBuf {
    dir.join(key.agent.as_str())
        .join("runs")
        .join(format!("p{}_s{}.csv", key.point, key.seed))
}

/// Writes `summary.json`, `<agent>/curves.csv` and `<agent>/runs/p<point>_s<seed>.csv`.
pub fn persist(output: &ExperimentOutput, dir: &Path) -> Result<()> {
    for run in &output.runs {
        write_atomic(&run_csv_path(dir, &run.key), &run.trace.to_csv())?;
    }
    for agent in &output.aggregate.agents {
        write_atomic(
            &dir.join(agent.agent.as_str()).join("curves.csv"),
            &curves_csv(&agent.curves),
        )?;
    }
    write_atomic(&dir.join("summary.json"), &output.aggregate.to_json())
}

/// Re-aggregates from the run CSVs under `dir`.
pub fn aggregate_from_dir(cfg: &ExperimentConfig, dir: &Path) -> Result<AggregateResult> {
    let mut runs = Vec::new();
    for agent in cfg.agents() {
        for point in cfg.grid(agent) {
            for &seed in &cfg.seeds {
                let key = RunKey {
                    agent,
                    point: point.index,
                    seed,
                };
                let path = run_csv_path(dir, &key);
                let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
                runs.push(RunOutput {
                    key,
                    run_seed: run_seed(cfg.base_seed, point.index as u64, seed),
                    trace: RegretTrace::from_csv(&text)?,
                });
            }
        }
    }
    aggregate(cfg, &runs)
}
