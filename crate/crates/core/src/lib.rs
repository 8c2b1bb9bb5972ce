//! Interactive learning from hindsight instruction.
//!
//! An agent answers instructions with responses; a teacher describes each
//! response after the fact with an instruction drawn from `P(X | y, s)`.
//! The agent never sees a reward. Regret is measured against the hidden
//! teacher probabilities.
//!
//! The crate provides:
//! - [`protocol`]: domain types, the [`Environment`] and [`Agent`] traits and the run loop
//! - [`lowrank`]: synthetic low-rank teachers `P(x | y) = f*(x) · g*(y)`
//! - [`lowerbound`]: the two-instruction hard worlds `W_i`
//! - [`features`]: the softmax feature class and its Adam maximum-likelihood fit
//! - [`loril`]: the optimistic elliptic-bonus agent
//! - [`baseline`]: Random, Greedy and ε-Greedy
//! - [`harness`]: multi-seed experiments, grid search and aggregation

pub mod baseline;
pub mod config;
pub mod features;
pub mod harness;
pub mod linalg;
pub mod loril;
pub mod lowerbound;
pub mod lowrank;
pub mod protocol;
pub mod reference;
pub mod rng;
pub mod trace;

pub use baseline::{EpsGreedyAgent, GreedyAgent, RandomAgent};
pub use config::{AgentKind, EnvKind, ExperimentConfig};
pub use features::{AdamConfig, FeatureParams, History};
pub use harness::{run_experiment, AggregateResult};
pub use loril::{LambdaSchedule, LorilAgent, LorilConfig};
pub use lowerbound::LowerBoundWorld;
pub use lowrank::LowRankTeacher;
pub use protocol::{
    instant_regret, run_protocol, Agent, Context, Environment, Instruction, Response,
    ResponseEmbeddings,
};
pub use trace::{RegretTrace, RoundRecord};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical invariant violated: {0}")]
    Numerical(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("run {agent} point {point} seed {seed} failed: {source}")]
    Run {
        agent: String,
        point: usize,
        seed: u64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// True for failures caused by numerical invariants rather than inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Numerical(_) => true,
            Error::Run { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
