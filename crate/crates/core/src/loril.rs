//! LORIL: optimism with an elliptic bonus over known response embeddings.
//!
//! Each round the agent plays
//!
//! ```text
//! argmax_y  f_hat(x) · g*(y, s) + k ‖g*(y, s)‖_{Σ^{-1}}
//! ```
//!
//! where `Σ = λ I + Σ_l g*(y_l, s_l) g*(y_l, s_l)^T` over past plays. The
//! inverse is maintained by Sherman–Morrison updates and rebuilt directly if
//! it drifts.

use serde::{Deserialize, Serialize};

use crate::features::{AdamConfig, Estimator, FeatureParams, History};
use crate::linalg::{elliptic_norm, sherman_morrison_update, Mat};
use crate::protocol::{Agent, Context, Instruction, Response, ResponseEmbeddings};
use crate::rng::Stream;
use crate::{Error, Result};

/// Rebuild threshold for `‖Σ Σ^{-1} - I‖_max`.
const DRIFT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaSchedule {
    /// `λ_t = λ`.
    #[default]
    Constant,
    /// `λ_t = 1 / t`; the configured `λ` is ignored.
    InverseT,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorilConfig {
    pub lambda: f64,
    pub k: f64,
    pub adam: AdamConfig,
    pub lambda_schedule: LambdaSchedule,
    pub scratch_fit: bool,
}

impl Default for LorilConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            k: 1.0,
            adam: AdamConfig::default(),
            lambda_schedule: LambdaSchedule::Constant,
            scratch_fit: false,
        }
    }
}

impl LorilConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(self.k >= 0.0 && self.k.is_finite()) {
            return Err(Error::Config(format!("bonus scale k must be non-negative, got {}", self.k)));
        }
        self.adam.validate()
    }
}

/// Full agent state.
#[derive(Debug, Clone)]
pub struct LorilAgent {
    cfg: LorilConfig,
    estimator: Estimator,
    /// `Σ_l g g^T` without the regularizer.
    gram: Mat,
    sigma: Mat,
    sigma_inv: Mat,
    /// Index of the upcoming round, starting at 1.
    round: usize,
    rebuilds: usize,
}

impl LorilAgent {
    pub fn new(x_size: usize, embeddings: ResponseEmbeddings, cfg: LorilConfig) -> Result<Self> {
        cfg.validate()?;
        let d = embeddings.d();
        let estimator = Estimator::new(x_size, embeddings, cfg.adam, cfg.scratch_fit)?;
        let lambda = match cfg.lambda_schedule {
            LambdaSchedule::Constant => cfg.lambda,
            LambdaSchedule::InverseT => 1.0,
        };
        Ok(Self {
            cfg,
            estimator,
            gram: Mat::zeros(d),
            sigma: Mat::scaled_identity(d, lambda),
            sigma_inv: Mat::scaled_identity(d, 1.0 / lambda),
            round: 1,
            rebuilds: 0,
        })
    }

    pub fn config(&self) -> &LorilConfig {
        &self.cfg
    }

    pub fn params(&self) -> &FeatureParams {
        self.estimator.params()
    }

    pub fn history(&self) -> &History {
        self.estimator.history()
    }

    pub fn estimator(&self) -> &Estimator {
        &self.estimator
    }

    /// Overrides the feature estimate; covariance and history are untouched.
    pub fn set_params(&mut self, params: FeatureParams) -> Result<()> {
        self.estimator.set_params(params)
    }

    pub fn sigma(&self) -> &Mat {
        &self.sigma
    }

    pub fn sigma_inv(&self) -> &Mat {
        &self.sigma_inv
    }

    pub fn round(&self) -> usize {
        self.round
    }

    /// How many times the maintained inverse was rebuilt from scratch.
    pub fn rebuilds(&self) -> usize {
        self.rebuilds
    }

    /// Regularizer in effect for the upcoming round.
    pub fn lambda_t(&self) -> f64 {
        match self.cfg.lambda_schedule {
            LambdaSchedule::Constant => self.cfg.lambda,
            LambdaSchedule::InverseT => 1.0 / self.round as f64,
        }
    }

    /// `k ‖g*(y, s)‖_{Σ^{-1}}`.
    pub fn bonus(&self, y: Response, s: Context) -> f64 {
        let g = self.estimator.embeddings().get(y, s);
        self.cfg.k * self.sigma_inv.quad_form(g).max(0.0).sqrt()
    }

    /// As [`bonus`](Self::bonus), surfacing a non-finite norm as an error.
    pub fn checked_bonus(&self, y: Response, s: Context) -> Result<f64> {
        let g = self.estimator.embeddings().get(y, s);
        Ok(self.cfg.k * elliptic_norm(g, &self.sigma_inv)?)
    }

    /// Optimistic score of every response.
    pub fn scores(&self, x: Instruction, s: Context) -> Vec<f64> {
        (0..self.estimator.y_size())
            .map(|y| self.estimator.value(x, Response(y), s) + self.bonus(Response(y), s))
            .collect()
    }

    /// The optimistic choice; lowest index on ties. Does not change state.
    pub fn choose(&self, x: Instruction, s: Context) -> Response {
        let scores = self.scores(x, s);
        let mut best = 0;
        for (y, &v) in scores.iter().enumerate().skip(1) {
            if v > scores[best] {
                best = y;
            }
        }
        debug_assert!(scores.iter().all(|&v| scores[best] >= v || v.is_nan()));
        Response(best)
    }

    fn rebuild_inverse(&mut self) -> Result<()> {
        self.sigma_inv = self
            .sigma
            .inverse()
            .ok_or_else(|| Error::Numerical("empirical covariance became singular".into()))?;
        self.sigma_inv.symmetrize();
        self.rebuilds += 1;
        Ok(())
    }

    fn update_covariance(&mut self, g: &[f64]) -> Result<()> {
        self.gram.add_outer(g, 1.0);
        match self.cfg.lambda_schedule {
            LambdaSchedule::Constant => {
                self.sigma.add_outer(g, 1.0);
                self.sigma.symmetrize();
                sherman_morrison_update(&mut self.sigma_inv, g);
                self.sigma_inv.symmetrize();
                let drift = self.sigma.matmul(&self.sigma_inv).max_abs_diff(&Mat::identity(self.sigma.n()));
                if !(drift <= DRIFT_TOLERANCE) {
                    self.rebuild_inverse()?;
                }
            }
            LambdaSchedule::InverseT => {
                let mut sigma = self.gram.clone();
                sigma.add_diagonal(self.lambda_t());
                self.sigma = sigma;
                self.rebuild_inverse()?;
            }
        }
        if !self.sigma_inv.is_finite() {
            return Err(Error::Numerical("inverse covariance is not finite".into()));
        }
        Ok(())
    }

    /// Records `(x', y, s)`, updates the covariance, refits the features.
    pub fn record(&mut self, s: Context, y: Response, hindsight: Instruction) -> Result<()> {
        self.estimator.observe(s, y, hindsight)?;
        self.round += 1;
        let g = self.estimator.embeddings().get(y, s).to_vec();
        self.update_covariance(&g)
    }
}

impl Agent for LorilAgent {
    fn name(&self) -> &'static str {
        "loril"
    }

    fn x_size(&self) -> usize {
        self.estimator.x_size()
    }

    fn y_size(&self) -> usize {
        self.estimator.y_size()
    }

    fn act(&mut self, x: Instruction, s: Context, _rng: &mut Stream) -> Response {
        self.choose(x, s)
    }

    fn observe(&mut self, s: Context, y: Response, hindsight: Instruction) -> Result<()> {
        self.record(s, y, hindsight)
    }
}
