//! Random, Greedy and ε-Greedy agents.
//!
//! Greedy and ε-Greedy learn exactly like LORIL (same estimator, same refit
//! schedule) and differ only in how they pick a response.

use crate::features::{AdamConfig, Estimator};
use crate::protocol::{Agent, Context, Instruction, Response, ResponseEmbeddings};
use crate::rng::Stream;
use crate::{Error, Result};

/// Uniform over `[0, y_size)`.
pub fn random_act(y_size: usize, rng: &mut Stream) -> Response {
    Response(rng.index(y_size))
}

/// Plays uniformly at random and never reads the instruction.
#[derive(Debug, Clone)]
pub struct RandomAgent {
    x_size: usize,
    y_size: usize,
}

impl RandomAgent {
    pub fn new(x_size: usize, y_size: usize) -> Result<Self> {
        if y_size == 0 {
            return Err(Error::Config("random agent needs at least one response".into()));
        }
        Ok(Self { x_size, y_size })
    }
}

impl Agent for RandomAgent {
    fn name(&self) -> &'static str {
        "random"
    }

    fn x_size(&self) -> usize {
        self.x_size
    }

    fn y_size(&self) -> usize {
        self.y_size
    }

    fn act(&mut self, _x: Instruction, _s: Context, rng: &mut Stream) -> Response {
        random_act(self.y_size, rng)
    }

    fn observe(&mut self, _s: Context, _y: Response, _hindsight: Instruction) -> Result<()> {
        Ok(())
    }
}

/// Exploits the current estimate only.
#[derive(Debug, Clone)]
pub struct GreedyAgent {
    estimator: Estimator,
}

impl GreedyAgent {
    pub fn new(x_size: usize, embeddings: ResponseEmbeddings, adam: AdamConfig) -> Result<Self> {
        Ok(Self {
            estimator: Estimator::new(x_size, embeddings, adam, false)?,
        })
    }

    pub fn estimator(&self) -> &Estimator {
        &self.estimator
    }

    pub fn estimator_mut(&mut self) -> &mut Estimator {
        &mut self.estimator
    }

    pub fn greedy_act(&self, x: Instruction, s: Context) -> Response {
        self.estimator.greedy(x, s)
    }
}

impl Agent for GreedyAgent {
    fn name(&self) -> &'static str {
        "greedy"
    }

    fn x_size(&self) -> usize {
        self.estimator.x_size()
    }

    fn y_size(&self) -> usize {
        self.estimator.y_size()
    }

    fn act(&mut self, x: Instruction, s: Context, _rng: &mut Stream) -> Response {
        self.greedy_act(x, s)
    }

    fn observe(&mut self, s: Context, y: Response, hindsight: Instruction) -> Result<()> {
        self.estimator.observe(s, y, hindsight)
    }
}

/// With probability ε a uniform response, otherwise the greedy one.
#[derive(Debug, Clone)]
pub struct EpsGreedyAgent {
    estimator: Estimator,
    epsilon: f64,
}

impl EpsGreedyAgent {
    pub fn new(
        x_size: usize,
        embeddings: ResponseEmbeddings,
        adam: AdamConfig,
        epsilon: f64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::Config(format!("epsilon must lie in [0, 1], got {epsilon}")));
        }
        Ok(Self {
            estimator: Estimator::new(x_size, embeddings, adam, false)?,
            epsilon,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn estimator(&self) -> &Estimator {
        &self.estimator
    }

    pub fn estimator_mut(&mut self) -> &mut Estimator {
        &mut self.estimator
    }

    /// One uniform decides whether to explore; exploring draws a second.
    pub fn eps_greedy_act(&self, x: Instruction, s: Context, rng: &mut Stream) -> Response {
        if rng.bernoulli(self.epsilon) {
            random_act(self.estimator.y_size(), rng)
        } else {
            self.estimator.greedy(x, s)
        }
    }
}

impl Agent for EpsGreedyAgent {
    fn name(&self) -> &'static str {
        "eps_greedy"
    }

    fn x_size(&self) -> usize {
        self.estimator.x_size()
    }

    fn y_size(&self) -> usize {
        self.estimator.y_size()
    }

    fn act(&mut self, x: Instruction, s: Context, rng: &mut Stream) -> Response {
        self.eps_greedy_act(x, s, rng)
    }

    fn observe(&mut self, s: Context, y: Response, hindsight: Instruction) -> Result<()> {
        self.estimator.observe(s, y, hindsight)
    }
}
