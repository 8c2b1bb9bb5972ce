use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hindsight_core::config::{AgentKind, EnvKind, OneOrMany};
use hindsight_core::harness::{self, write_atomic};
use hindsight_core::protocol::{Context, Instruction, Response};
use hindsight_core::{reference, Environment, Error, ExperimentConfig, LambdaSchedule, LowRankTeacher, LowerBoundWorld};
use serde_json::{json, Value};

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

/// Simulate learning from hindsight instruction.
#[derive(Parser)]
#[command(name = "hindsight", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration (every agent must have a single grid point).
    Run(Opts),
    /// Grid search over every listed hyperparameter value.
    Sweep(Opts),
    /// Build the environment and report its normalization invariants.
    Validate(Opts),
    /// Emit brute-force reference values computed by a separate naive path.
    Oracle(Opts),
}

#[derive(Args, Clone, Default)]
struct Opts {
    /// TOML or JSON config; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (run/sweep) or file (validate/oracle).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed: sets both the teacher seed and the run base seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_parser = parse_env)]
    env: Option<EnvKind>,
    /// Comma-separated list of random, greedy, eps_greedy, loril.
    #[arg(long, value_delimiter = ',', value_parser = parse_agent)]
    agent: Option<Vec<AgentKind>>,
    #[arg(long)]
    rounds: Option<usize>,
    /// Comma-separated run seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    x_size: Option<usize>,
    #[arg(long)]
    y_size: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    world_i: Option<usize>,
    #[arg(long)]
    world_k: Option<usize>,
    #[arg(long)]
    world_t_ref: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    lambda: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    k: Option<Vec<f64>>,
    #[arg(long)]
    steps_per_fit: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    epsilon: Option<Vec<f64>>,
    #[arg(long, value_parser = parse_schedule)]
    lambda_schedule: Option<LambdaSchedule>,
    #[arg(long)]
    scratch_fit: Option<bool>,
    #[arg(long)]
    learning_rate: Option<f64>,
}

fn parse_env(s: &str) -> Result<EnvKind, String> {
    match s {
        "lowrank" => Ok(EnvKind::Lowrank),
        "lowerbound" => Ok(EnvKind::Lowerbound),
        _ => Err(format!("unknown env '{s}' (expected lowrank or lowerbound)")),
    }
}

fn parse_agent(s: &str) -> Result<AgentKind, String> {
    AgentKind::parse(s).map_err(|e| e.to_string())
}

fn parse_schedule(s: &str) -> Result<LambdaSchedule, String> {
    match s {
        "constant" => Ok(LambdaSchedule::Constant),
        "inverse_t" => Ok(LambdaSchedule::InverseT),
        _ => Err(format!("unknown lambda schedule '{s}' (expected constant or inverse_t)")),
    }
}

fn many<T>(v: Vec<T>) -> OneOrMany<T> {
    if v.len() == 1 {
        OneOrMany::One(v.into_iter().next().unwrap())
    } else {
        OneOrMany::Many(v)
    }
}

impl Opts {
    fn load(&self) -> hindsight_core::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.lowrank.seed = s;
            cfg.base_seed = s;
        }
        if let Some(v) = self.workers {
            cfg.workers = v;
        }
        if let Some(v) = self.env {
            cfg.env = v;
        }
        if let Some(v) = &self.agent {
            cfg.agent = many(v.clone());
        }
        if let Some(v) = self.rounds {
            cfg.rounds = v;
        }
        if let Some(v) = &self.seeds {
            cfg.seeds = v.clone();
        }
        if let Some(v) = self.x_size {
            cfg.lowrank.x_size = v;
        }
        if let Some(v) = self.y_size {
            cfg.lowrank.y_size = v;
        }
        if let Some(v) = self.d {
            cfg.lowrank.d = v;
        }
        if let Some(v) = self.tau {
            cfg.lowrank.tau = v;
        }
        if let Some(v) = self.world_i {
            cfg.world.i = v;
        }
        if let Some(v) = self.world_k {
            cfg.world.k = v;
        }
        if let Some(v) = self.world_t_ref {
            cfg.world.t_ref = v;
        }
        if let Some(v) = &self.lambda {
            cfg.loril.lambda = many(v.clone());
        }
        if let Some(v) = &self.k {
            cfg.loril.k = many(v.clone());
        }
        if let Some(v) = self.steps_per_fit {
            cfg.loril.steps_per_fit = v;
        }
        if let Some(v) = &self.epsilon {
            cfg.eps_greedy.epsilon = many(v.clone());
        }
        if let Some(v) = self.lambda_schedule {
            cfg.loril.lambda_schedule = v;
        }
        if let Some(v) = self.scratch_fit {
            cfg.loril.scratch_fit = v;
        }
        if let Some(v) = self.learning_rate {
            cfg.adam.learning_rate = v;
        }
        if let Some(out) = &self.out {
            cfg.out = Some(out.display().to_string());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn experiment(opts: &Opts, single: bool) -> hindsight_core::Result<Value> {
    let cfg = opts.load()?;
    if single {
        for agent in cfg.agents() {
            let n = cfg.grid(agent).len();
            if n != 1 {
                return Err(Error::Config(format!(
                    "run expects one grid point per agent but {} has {n}; use sweep",
                    agent.as_str()
                )));
            }
        }
    }
    let dir = PathBuf::from(cfg.out.clone().unwrap_or_else(|| "results".into()));
    let output = harness::grid_search(&cfg)?;
    log::info!("writing {} traces to {}", output.runs.len(), dir.display());
    harness::persist(&output, &dir)?;
    let selected: Vec<Value> = output
        .aggregate
        .agents
        .iter()
        .map(|a| {
            let p = a.selected_point();
            json!({
                "agent": a.agent.as_str(),
                "point": p.index,
                "params": p.params,
                "mean_final_regret": p.mean_final_regret,
                "std_final_regret": p.std_final_regret,
            })
        })
        .collect();
    Ok(json!({
        "status": "ok",
        "out": dir.display().to_string(),
        "total_rounds": output.aggregate.total_rounds,
        "selected": selected,
    }))
}

fn max_column_dev(env: &dyn Environment) -> f64 {
    let s = Context(0);
    let mut dev: f64 = 0.0;
    for y in 0..env.y_size() {
        let total: f64 = (0..env.x_size()).map(|x| env.prob(Instruction(x), Response(y), s)).sum();
        dev = dev.max((total - 1.0).abs());
    }
    dev
}

fn validate(opts: &Opts) -> hindsight_core::Result<Value> {
    let cfg = opts.load()?;
    let env = cfg.build_env()?;
    let column_dev = max_column_dev(env.as_ref());
    let emb = env.embeddings();
    let mut emb_dev: f64 = 0.0;
    for y in 0..emb.y_size() {
        let total: f64 = emb.get(Response(y), Context(0)).iter().sum();
        emb_dev = emb_dev.max((total - 1.0).abs());
    }
    let mut report = json!({
        "env": match cfg.env { EnvKind::Lowrank => "lowrank", EnvKind::Lowerbound => "lowerbound" },
        "x_size": env.x_size(),
        "y_size": env.y_size(),
        "d": emb.d(),
        "column_sum_max_dev": column_dev,
        "embedding_sum_max_dev": emb_dev,
    });
    if cfg.env == EnvKind::Lowrank {
        let l = &cfg.lowrank;
        let teacher = LowRankTeacher::build(l.seed, l.x_size, l.y_size, l.d, l.tau)?;
        let r = teacher.normalization_report();
        report["seed"] = json!(l.seed);
        report["tau"] = json!(l.tau);
        report["normalization"] = serde_json::to_value(r).map_err(|e| Error::Parse(e.to_string()))?;
    }
    let ok = column_dev <= 1e-9 && emb_dev <= 1e-9;
    report["ok"] = json!(ok);
    if !ok {
        emit(opts.out.as_deref(), &report)?;
        return Err(Error::Numerical(format!("column sums deviate from 1 by {column_dev:e}")));
    }
    Ok(report)
}

fn oracle(opts: &Opts) -> hindsight_core::Result<Value> {
    let cfg = opts.load()?;
    match cfg.env {
        EnvKind::Lowrank => {
            let l = &cfg.lowrank;
            let table = reference::teacher_table(l.seed, l.x_size, l.y_size, l.d, l.tau);
            let optimal: Vec<usize> = table.iter().map(|row| reference::first_argmax(row)).collect();
            Ok(json!({
                "env": "lowrank",
                "seed": l.seed,
                "x_size": l.x_size,
                "y_size": l.y_size,
                "d": l.d,
                "tau": l.tau,
                "table": table,
                "optimal_response": optimal,
                "uniform_regret_per_round": reference::uniform_play_regret_per_round(&table),
            }))
        }
        EnvKind::Lowerbound => {
            let w = &cfg.world;
            // fail on the same inputs the environment rejects
            LowerBoundWorld::build(w.i, w.k, w.t_ref)?;
            let table = reference::lower_bound_table(w.i, w.k, w.t_ref);
            let per_round = reference::uniform_play_regret_per_round(&table);
            Ok(json!({
                "env": "lowerbound",
                "i": w.i,
                "k": w.k,
                "t_ref": w.t_ref,
                "table": table,
                "argmax": reference::argmax_sets(&table),
                "uniform_regret_per_round": per_round,
                "uniform_regret_at_t_ref": per_round * w.t_ref as f64,
            }))
        }
    }
}

fn emit(out: Option<&Path>, value: &Value) -> hindsight_core::Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))? + "\n";
    match out {
        Some(path) => write_atomic(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Config(_) => "config",
        Error::Numerical(_) => "numerical",
        Error::Parse(_) => "parse",
        Error::Io { .. } => "io",
        Error::Run { source, .. } => error_kind(source),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(o) => experiment(o, true).map(|v| (v, None)),
        Command::Sweep(o) => experiment(o, false).map(|v| (v, None)),
        Command::Validate(o) => validate(o).map(|v| (v, o.out.clone())),
        Command::Oracle(o) => oracle(o).map(|v| (v, o.out.clone())),
    };
    let result = result.and_then(|(v, out)| emit(out.as_deref(), &v));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = json!({ "error": error_kind(&e), "message": e.to_string() });
            eprintln!("{line}");
            ExitCode::from(if e.is_numerical() { EXIT_NUMERICAL } else { EXIT_CONFIG })
        }
    }
}
