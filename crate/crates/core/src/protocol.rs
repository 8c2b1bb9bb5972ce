//! Domain types and the interaction loop shared by every environment and agent.
//!
//! Each round the world presents a context and an instruction, the agent
//! answers with a response, and the teacher labels that response with a
//! hindsight instruction drawn from `P(X | y, s)`. The hidden reward
//! `P(x | y, s)` is visible only to the evaluator.

use serde::{Deserialize, Serialize};

use crate::rng::{RunRng, Stream};
use crate::trace::{RegretTrace, RoundRecord};
use crate::{Error, Result};

/// Index of an instruction in `X`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Instruction(pub usize);

/// Index of a response in `Y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Response(pub usize);

/// Index of a context in `S`. Both built-in environments use the singleton `Context(0)`.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct Context(pub usize);

/// Known response embeddings `g*(y, s)`, one `d`-vector per (context, response).
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseEmbeddings {
    d: usize,
    y_size: usize,
    s_size: usize,
    data: Vec<f64>,
}

impl ResponseEmbeddings {
    /// `data` is laid out as `[s][y][i]`.
    pub fn new(d: usize, y_size: usize, s_size: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), d * y_size * s_size, "embedding table shape");
        Self {
            d,
            y_size,
            s_size,
            data,
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn y_size(&self) -> usize {
        self.y_size
    }

    pub fn s_size(&self) -> usize {
        self.s_size
    }

    pub fn get(&self, y: Response, s: Context) -> &[f64] {
        let start = (s.0 * self.y_size + y.0) * self.d;
        &self.data[start..start + self.d]
    }
}

/// A teacher world. Agents never see `prob`; only the harness reads it.
pub trait Environment {
    fn x_size(&self) -> usize;
    fn y_size(&self) -> usize;
    fn s_size(&self) -> usize {
        1
    }

    /// `P(x | y, s)`.
    fn prob(&self, x: Instruction, y: Response, s: Context) -> f64;

    /// `max_y P(x | y, s)`.
    fn best_prob(&self, x: Instruction, s: Context) -> f64 {
        (0..self.y_size())
            .map(|y| self.prob(x, Response(y), s))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Draws `(s_t, x_t)`: the singleton context and a uniform instruction.
    fn present(&self, rng: &mut Stream) -> (Context, Instruction) {
        (Context(0), Instruction(rng.index(self.x_size())))
    }

    /// Draws `x' ~ P(X | y, s)` by inverse CDF over instruction index.
    fn sample_hindsight(&self, y: Response, s: Context, rng: &mut Stream) -> Instruction {
        let u = rng.uniform();
        inverse_cdf((0..self.x_size()).map(|x| self.prob(Instruction(x), y, s)), u)
    }

    fn embeddings(&self) -> ResponseEmbeddings;
}

/// First index whose running sum exceeds `u`. Falls back to the last index
/// with positive mass when rounding leaves the total just below `u`.
pub(crate) fn inverse_cdf(probs: impl Iterator<Item = f64>, u: f64) -> Instruction {
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (x, p) in probs.enumerate() {
        acc += p;
        if p > 0.0 {
            last_positive = x;
        }
        if u < acc {
            return Instruction(x);
        }
    }
    Instruction(last_positive)
}

/// A learner interacting through the hindsight protocol.
pub trait Agent {
    fn name(&self) -> &'static str;
    fn x_size(&self) -> usize;
    fn y_size(&self) -> usize;

    /// Chooses `y_t`. Deterministic given internal state and `rng`.
    fn act(&mut self, x: Instruction, s: Context, rng: &mut Stream) -> Response;

    /// Receives the hindsight label for the response just played.
    fn observe(&mut self, s: Context, y: Response, hindsight: Instruction) -> Result<()>;
}

fn check_indices(env: &dyn Environment, x: Instruction, s: Context, y: Response) -> Result<()> {
    if x.0 >= env.x_size() || y.0 >= env.y_size() || s.0 >= env.s_size() {
        return Err(Error::Config(format!(
            "index out of range: x={} (|X|={}), y={} (|Y|={}), s={} (|S|={})",
            x.0,
            env.x_size(),
            y.0,
            env.y_size(),
            s.0,
            env.s_size()
        )));
    }
    Ok(())
}

/// `max_y P(x | y, s) - P(x | y_played, s)`.
pub fn instant_regret(env: &dyn Environment, x: Instruction, s: Context, y: Response) -> Result<f64> {
    check_indices(env, x, s, y)?;
    Ok(env.best_prob(x, s) - env.prob(x, y, s))
}

/// Runs the protocol for `rounds` rounds.
pub fn run_protocol(
    env: &dyn Environment,
    agent: &mut dyn Agent,
    rounds: usize,
    seed: u64,
) -> Result<RegretTrace> {
    run_protocol_with(env, agent, rounds, seed, |_| {})
}

/// As [`run_protocol`], calling `on_round` after each completed round.
pub fn run_protocol_with(
    env: &dyn Environment,
    agent: &mut dyn Agent,
    rounds: usize,
    seed: u64,
    mut on_round: impl FnMut(&RoundRecord),
) -> Result<RegretTrace> {
    if rounds == 0 {
        return Err(Error::Config("horizon must be at least one round".into()));
    }
    if env.x_size() != agent.x_size() || env.y_size() != agent.y_size() {
        return Err(Error::Config(format!(
            "agent {} is built for |X|={}, |Y|={} but the environment has |X|={}, |Y|={}",
            agent.name(),
            agent.x_size(),
            agent.y_size(),
            env.x_size(),
            env.y_size()
        )));
    }

    let mut rng = RunRng::new(seed);
    let mut records = Vec::with_capacity(rounds);
    let mut cum = 0.0;
    for round in 1..=rounds {
        let (context, instruction) = env.present(&mut rng.env);
        let response = agent.act(instruction, context, &mut rng.agent);
        check_indices(env, instruction, context, response)?;

        let reward = env.prob(instruction, response, context);
        let regret = env.best_prob(instruction, context) - reward;
        if !(0.0..=1.0).contains(&reward) || !(regret >= 0.0) {
            return Err(Error::Numerical(format!(
                "round {round}: reward {reward} / regret {regret} out of range"
            )));
        }
        let hindsight = env.sample_hindsight(response, context, &mut rng.env);
        agent.observe(context, response, hindsight)?;

        cum += regret;
        let record = RoundRecord {
            round,
            context,
            instruction,
            response,
            hindsight,
            hidden_reward: reward,
            instant_regret: regret,
            cum_regret: cum,
        };
        on_round(&record);
        records.push(record);
    }
    Ok(RegretTrace::new(records))
}
