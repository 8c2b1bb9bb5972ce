//! Experiment configuration (TOML or JSON).
//!
//! ```toml
//! env = "lowrank"                  # or "lowerbound"
//! agent = ["random", "greedy", "eps_greedy", "loril"]
//! rounds = 2000
//! seeds = [1, 2, 3]
//!
//! [lowrank]
//! seed = 1
//! x_size = 200
//! y_size = 10
//! d = 5
//! tau = 0.75
//!
//! [loril]
//! lambda = [0.05, 0.1, 1.0]
//! k = [0.1, 1.0, 10.0]
//! ```
//!
//! Hyperparameters accept a single value or a list; lists form a grid.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baseline::{EpsGreedyAgent, GreedyAgent, RandomAgent};
use crate::features::AdamConfig;
use crate::loril::{LambdaSchedule, LorilAgent, LorilConfig};
use crate::lowerbound::LowerBoundWorld;
use crate::lowrank::LowRankTeacher;
use crate::protocol::{Agent, Environment};
use crate::{Error, Result};

/// A scalar or a list of scalars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn values(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

impl<T> From<Vec<T>> for OneOrMany<T> {
    fn from(v: Vec<T>) -> Self {
        OneOrMany::Many(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    Lowrank,
    Lowerbound,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Random,
    Greedy,
    EpsGreedy,
    Loril,
}

impl AgentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AgentKind::Random => "random",
            AgentKind::Greedy => "greedy",
            AgentKind::EpsGreedy => "eps_greedy",
            AgentKind::Loril => "loril",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(AgentKind::Random),
            "greedy" => Ok(AgentKind::Greedy),
            "eps_greedy" => Ok(AgentKind::EpsGreedy),
            "loril" => Ok(AgentKind::Loril),
            other => Err(Error::Config(format!("unknown agent {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LowRankSpec {
    pub seed: u64,
    pub x_size: usize,
    pub y_size: usize,
    pub d: usize,
    pub tau: f64,
}

impl Default for LowRankSpec {
    fn default() -> Self {
        Self {
            seed: 1,
            x_size: 200,
            y_size: 10,
            d: 5,
            tau: 0.75,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldSpec {
    pub i: usize,
    pub k: usize,
    pub t_ref: usize,
}

impl Default for WorldSpec {
    fn default() -> Self {
        Self {
            i: 0,
            k: 16,
            t_ref: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LorilSection {
    pub lambda: OneOrMany<f64>,
    pub k: OneOrMany<f64>,
    /// Adam steps per refit, used by every learning agent.
    pub steps_per_fit: usize,
    pub lambda_schedule: LambdaSchedule,
    pub scratch_fit: bool,
}

impl Default for LorilSection {
    fn default() -> Self {
        Self {
            lambda: vec![0.05, 0.1, 1.0].into(),
            k: vec![0.1, 1.0, 10.0].into(),
            steps_per_fit: 50,
            lambda_schedule: LambdaSchedule::Constant,
            scratch_fit: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpsGreedySection {
    pub epsilon: OneOrMany<f64>,
}

impl Default for EpsGreedySection {
    fn default() -> Self {
        Self {
            epsilon: vec![0.05, 0.1, 0.2, 0.3].into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamSection {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_hat: f64,
}

impl Default for AdamSection {
    fn default() -> Self {
        let a = AdamConfig::default();
        Self {
            learning_rate: a.learning_rate,
            beta1: a.beta1,
            beta2: a.beta2,
            eps_hat: a.eps_hat,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvKind,
    pub agent: OneOrMany<AgentKind>,
    pub rounds: usize,
    pub seeds: Vec<u64>,
    pub base_seed: u64,
    pub workers: usize,
    pub out: Option<String>,
    pub lowrank: LowRankSpec,
    pub world: WorldSpec,
    pub loril: LorilSection,
    pub eps_greedy: EpsGreedySection,
    pub adam: AdamSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            env: EnvKind::Lowrank,
            agent: OneOrMany::One(AgentKind::Loril),
            rounds: 1000,
            seeds: vec![1, 2, 3],
            base_seed: 0,
            workers: 1,
            out: None,
            lowrank: LowRankSpec::default(),
            world: WorldSpec::default(),
            loril: LorilSection::default(),
            eps_greedy: EpsGreedySection::default(),
            adam: AdamSection::default(),
        }
    }
}

/// One hyperparameter setting of one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub index: usize,
    pub params: BTreeMap<String, f64>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("invalid TOML config: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid JSON config: {e}")))
    }

    /// Reads a `.json` file as JSON and anything else as TOML.
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::Config(format!("config not found: {}", path.display())));
        }
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if is_json {
            Self::from_json(&text)
        } else {
            Self::from_toml(&text)
        }
    }

    pub fn agents(&self) -> Vec<AgentKind> {
        self.agent.values()
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.adam.learning_rate,
            beta1: self.adam.beta1,
            beta2: self.adam.beta2,
            eps_hat: self.adam.eps_hat,
            steps_per_fit: self.loril.steps_per_fit,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::Config("rounds must be positive".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seed list must not be empty".into()));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(Error::Config("seed list contains duplicates".into()));
        }
        if self.agents().is_empty() {
            return Err(Error::Config("no agent selected".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        self.adam().validate()?;
        for agent in self.agents() {
            if self.grid(agent).is_empty() {
                return Err(Error::Config(format!("empty grid for {}", agent.as_str())));
            }
        }
        self.build_env().map(|_| ())
    }

    /// Cartesian grid for `agent`, in lexicographic order of the listed
    /// values (`lambda` before `k` for LORIL).
    pub fn grid(&self, agent: AgentKind) -> Vec<GridPoint> {
        let combos: Vec<BTreeMap<String, f64>> = match agent {
            AgentKind::Random | AgentKind::Greedy => vec![BTreeMap::new()],
            AgentKind::EpsGreedy => self
                .eps_greedy
                .epsilon
                .values()
                .into_iter()
                .map(|e| BTreeMap::from([("epsilon".to_string(), e)]))
                .collect(),
            AgentKind::Loril => {
                let mut out = Vec::new();
                for lambda in self.loril.lambda.values() {
                    for k in self.loril.k.values() {
                        out.push(BTreeMap::from([
                            ("lambda".to_string(), lambda),
                            ("k".to_string(), k),
                        ]));
                    }
                }
                out
            }
        };
        combos
            .into_iter()
            .enumerate()
            .map(|(index, params)| GridPoint { index, params })
            .collect()
    }

    pub fn build_env(&self) -> Result<Box<dyn Environment + Send + Sync>> {
        Ok(match self.env {
            EnvKind::Lowrank => {
                let s = &self.lowrank;
                Box::new(LowRankTeacher::build(s.seed, s.x_size, s.y_size, s.d, s.tau)?)
            }
            EnvKind::Lowerbound => {
                let w = &self.world;
                Box::new(LowerBoundWorld::build(w.i, w.k, w.t_ref)?)
            }
        })
    }

    pub fn build_agent(
        &self,
        agent: AgentKind,
        point: &GridPoint,
        env: &dyn Environment,
    ) -> Result<Box<dyn Agent + Send>> {
        let param = |name: &str| {
            point
                .params
                .get(name)
                .copied()
                .ok_or_else(|| Error::Config(format!("grid point lacks {name}")))
        };
        let x_size = env.x_size();
        Ok(match agent {
            AgentKind::Random => Box::new(RandomAgent::new(x_size, env.y_size())?),
            AgentKind::Greedy => Box::new(GreedyAgent::new(x_size, env.embeddings(), self.adam())?),
            AgentKind::EpsGreedy => Box::new(EpsGreedyAgent::new(
                x_size,
                env.embeddings(),
                self.adam(),
                param("epsilon")?,
            )?),
            AgentKind::Loril => Box::new(LorilAgent::new(
                x_size,
                env.embeddings(),
                LorilConfig {
                    lambda: param("lambda")?,
                    k: param("k")?,
                    adam: self.adam(),
                    lambda_schedule: self.loril.lambda_schedule,
                    scratch_fit: self.loril.scratch_fit,
                },
            )?),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_scalar_and_list_values() {
        let cfg = ExperimentConfig::from_toml(
            r#"
            env = "lowrank"
            agent = "loril"
            rounds = 10
            seeds = [3]
            [loril]
            lambda = 0.1
            k = [1.0, 10.0]
            "#,
        )
        .unwrap();
        assert_eq!(cfg.agents(), vec![AgentKind::Loril]);
        let grid = cfg.grid(AgentKind::Loril);
        assert_eq!(grid.len(), 2);
        assert_eq!(grid[1].params["k"], 10.0);
        assert_eq!(grid[1].params["lambda"], 0.1);
        cfg.validate().unwrap();
    }

    #[test]
    fn default_grids_match_table() {
        let cfg = ExperimentConfig::default();
        assert_eq!(cfg.grid(AgentKind::Loril).len(), 9);
        assert_eq!(cfg.grid(AgentKind::EpsGreedy).len(), 4);
        assert_eq!(cfg.grid(AgentKind::Greedy).len(), 1);
        assert_eq!(cfg.adam().learning_rate, 0.001);
    }

    #[test]
    fn json_and_world_keys() {
        let cfg = ExperimentConfig::from_json(
            r#"{"env":"lowerbound","agent":["random"],"rounds":5,"seeds":[1,2],
                "world":{"i":2,"k":16,"t_ref":10000}}"#,
        )
        .unwrap();
        cfg.validate().unwrap();
        let env = cfg.build_env().unwrap();
        assert_eq!(env.y_size(), 16);
    }

    #[test]
    fn invalid_configs() {
        let bad = |f: &dyn Fn(&mut ExperimentConfig)| {
            let mut c = ExperimentConfig::default();
            f(&mut c);
            c.validate().is_err()
        };
        assert!(bad(&|c| c.rounds = 0));
        assert!(bad(&|c| c.seeds.clear()));
        assert!(bad(&|c| c.seeds = vec![1, 1]));
        assert!(bad(&|c| c.loril.k = OneOrMany::Many(vec![])));
        assert!(bad(&|c| c.lowrank.tau = 0.0));
        assert!(bad(&|c| {
            c.env = EnvKind::Lowerbound;
            c.world.t_ref = 4;
        }));
        assert!(ExperimentConfig::from_toml("rounds = \"x\"").is_err());
        assert!(ExperimentConfig::from_toml("unknown_key = 1").is_err());
        assert!(ExperimentConfig::load(Path::new("/definitely/missing.toml"))
            .unwrap_err()
            .to_string()
            .contains("config not found"));
    }
}
