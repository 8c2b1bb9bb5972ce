//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every export returns a JSON string. The `*_json` functions hold the logic
//! and are plain Rust so they can be tested natively.

use hindsight_core::config::{EnvKind, OneOrMany};
use hindsight_core::protocol::{Instruction, Response};
use hindsight_core::{run_experiment, AgentKind, ExperimentConfig, LowRankTeacher};
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Teacher probabilities `P(x | y)` as an `x_size × y_size` grid.
pub fn teacher_heatmap_json(seed: u64, x_size: usize, y_size: usize, d: usize, tau: f64) -> Result<String, String> {
    let t = LowRankTeacher::build(seed, x_size, y_size, d, tau).map_err(|e| e.to_string())?;
    let table: Vec<Vec<f64>> = (0..x_size)
        .map(|x| (0..y_size).map(|y| t.teacher_prob(Instruction(x), Response(y))).collect())
        .collect();
    let optimal: Vec<usize> = (0..x_size).map(|x| t.optimal_response(Instruction(x)).0).collect();
    let report = t.normalization_report();
    Ok(json!({
        "x_size": x_size,
        "y_size": y_size,
        "table": table,
        "optimal": optimal,
        "column_sum_max_dev": report.fg_column_sum_dev,
    })
    .to_string())
}

fn curves(cfg: &ExperimentConfig) -> Result<serde_json::Value, String> {
    let out = run_experiment(cfg).map_err(|e| e.to_string())?;
    let agents: Vec<_> = out
        .aggregate
        .agents
        .iter()
        .map(|a| {
            json!({
                "agent": a.agent.as_str(),
                "params": a.selected_point().params,
                "mean": a.curves.mean_cum_regret,
                "std": a.curves.std_cum_regret,
            })
        })
        .collect();
    Ok(json!({ "rounds": cfg.rounds, "seeds": cfg.seeds, "agents": agents }))
}

/// Mean and std cumulative regret of the four agents on one low-rank teacher.
#[allow(clippy::too_many_arguments)]
pub fn regret_curves_json(
    seed: u64,
    x_size: usize,
    y_size: usize,
    d: usize,
    tau: f64,
    rounds: usize,
    n_seeds: u64,
    lambda: f64,
    k: f64,
    epsilon: f64,
) -> Result<String, String> {
    let mut cfg = ExperimentConfig {
        env: EnvKind::Lowrank,
        agent: OneOrMany::Many(vec![AgentKind::Random, AgentKind::Greedy, AgentKind::EpsGreedy, AgentKind::Loril]),
        rounds,
        seeds: (1..=n_seeds.max(1)).collect(),
        base_seed: seed,
        ..ExperimentConfig::default()
    };
    cfg.lowrank.seed = seed;
    cfg.lowrank.x_size = x_size;
    cfg.lowrank.y_size = y_size;
    cfg.lowrank.d = d;
    cfg.lowrank.tau = tau;
    cfg.loril.lambda = OneOrMany::One(lambda);
    cfg.loril.k = OneOrMany::One(k);
    cfg.loril.steps_per_fit = 20;
    cfg.eps_greedy.epsilon = OneOrMany::One(epsilon);
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(curves(&cfg)?.to_string())
}

/// Random play on the hard world `W_i` next to the line `sqrt(K T) / 2 · t / T`.
pub fn lower_bound_json(i: usize, k: usize, t_ref: usize, n_seeds: u64) -> Result<String, String> {
    let mut cfg = ExperimentConfig {
        env: EnvKind::Lowerbound,
        agent: OneOrMany::One(AgentKind::Random),
        rounds: t_ref,
        seeds: (1..=n_seeds.max(1)).collect(),
        ..ExperimentConfig::default()
    };
    cfg.world.i = i;
    cfg.world.k = k;
    cfg.world.t_ref = t_ref;
    cfg.validate().map_err(|e| e.to_string())?;
    let mut value = curves(&cfg)?;
    let slope = (k as f64 / t_ref as f64).sqrt() / 2.0;
    value["analytic"] = json!((1..=t_ref).map(|t| slope * t as f64).collect::<Vec<_>>());
    Ok(value.to_string())
}

#[wasm_bindgen]
pub fn teacher_heatmap(seed: u32, x_size: usize, y_size: usize, d: usize, tau: f64) -> Result<String, JsValue> {
    teacher_heatmap_json(seed as u64, x_size, y_size, d, tau).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn regret_curves(
    seed: u32,
    x_size: usize,
    y_size: usize,
    d: usize,
    tau: f64,
    rounds: usize,
    n_seeds: u32,
    lambda: f64,
    k: f64,
    epsilon: f64,
) -> Result<String, JsValue> {
    regret_curves_json(seed as u64, x_size, y_size, d, tau, rounds, n_seeds as u64, lambda, k, epsilon)
        .map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn lower_bound(i: usize, k: usize, t_ref: usize, n_seeds: u32) -> Result<String, JsValue> {
    lower_bound_json(i, k, t_ref, n_seeds as u64).map_err(|e| JsValue::from_str(&e))
}
