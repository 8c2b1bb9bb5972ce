//! The learnable feature class and its maximum-likelihood fit.
//!
//! Features are a per-coordinate softmax over instructions,
//! `f(x)_i = exp(theta[x][i]) / sum_x' exp(theta[x'][i])`, so for any
//! column-stochastic embedding `g`, `f(·) · g` is a distribution over `X`.
//! The fit maximizes `sum_l ln max(f(x'_l) · g*(y_l, s_l), 1e-12)` with Adam.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::linalg::dot;
use crate::protocol::{Context, Instruction, Response, ResponseEmbeddings};
use crate::{Error, Result};

/// Lower clamp inside the log-likelihood.
pub const LOG_FLOOR: f64 = 1e-12;

/// Parameter table `theta`, row-major |X|×d.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureParams {
    x_size: usize,
    d: usize,
    theta: Vec<f64>,
}

impl FeatureParams {
    /// All-zero parameters, i.e. uniform features.
    pub fn zeros(x_size: usize, d: usize) -> Self {
        Self {
            x_size,
            d,
            theta: vec![0.0; x_size * d],
        }
    }

    pub fn from_theta(x_size: usize, d: usize, theta: Vec<f64>) -> Result<Self> {
        if theta.len() != x_size * d {
            return Err(Error::Config(format!(
                "theta has {} entries, expected {x_size}x{d}",
                theta.len()
            )));
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("theta has non-finite entries".into()));
        }
        Ok(Self { x_size, d, theta })
    }

    pub fn x_size(&self) -> usize {
        self.x_size
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// All feature vectors at once.
    pub fn features(&self) -> FeatureTable {
        let (n, d) = (self.x_size, self.d);
        let mut values = vec![0.0; n * d];
        for i in 0..d {
            let max = (0..n).map(|x| self.theta[x * d + i]).fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for x in 0..n {
                let e = (self.theta[x * d + i] - max).exp();
                values[x * d + i] = e;
                total += e;
            }
            for x in 0..n {
                values[x * d + i] /= total;
            }
        }
        FeatureTable { d, values }
    }

    /// `f(x)`.
    pub fn f_of(&self, x: Instruction) -> Vec<f64> {
        self.features().row(x).to_vec()
    }
}

/// Evaluated features `f(x)` for every instruction.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    d: usize,
    values: Vec<f64>,
}

impl FeatureTable {
    pub fn row(&self, x: Instruction) -> &[f64] {
        &self.values[x.0 * self.d..(x.0 + 1) * self.d]
    }
}

/// One hindsight observation `(x', y, s)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Observation {
    pub hindsight: Instruction,
    pub response: Response,
    pub context: Context,
}

/// Append-only interaction history.
///
/// Besides the ordered records it keeps multiplicities of distinct
/// observations; the objective depends only on those.
#[derive(Debug, Clone, Default)]
pub struct History {
    records: Vec<Observation>,
    distinct: Vec<(Observation, f64)>,
    index: HashMap<Observation, usize>,
}

impl History {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, hindsight: Instruction, response: Response, context: Context) {
        let obs = Observation {
            hindsight,
            response,
            context,
        };
        self.records.push(obs);
        match self.index.get(&obs) {
            Some(&k) => self.distinct[k].1 += 1.0,
            None => {
                self.index.insert(obs, self.distinct.len());
                self.distinct.push((obs, 1.0));
            }
        }
    }

    pub fn records(&self) -> &[Observation] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Distinct observations with their counts, in first-seen order.
    pub fn distinct(&self) -> &[(Observation, f64)] {
        &self.distinct
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_hat: f64,
    pub steps_per_fit: usize,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps_hat: 1e-8,
            steps_per_fit: 50,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.steps_per_fit == 0 {
            return Err(Error::Config("steps_per_fit must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("Adam betas must lie in [0, 1)".into()));
        }
        if !(self.eps_hat > 0.0) {
            return Err(Error::Config("Adam epsilon must be positive".into()));
        }
        Ok(())
    }
}

fn check_shapes(p: &FeatureParams, g: &ResponseEmbeddings) -> Result<()> {
    if p.d != g.d() {
        return Err(Error::Config(format!(
            "feature dimension {} does not match embedding dimension {}",
            p.d,
            g.d()
        )));
    }
    Ok(())
}

/// `sum_l ln max(f(x'_l) · g*(y_l, s_l), 1e-12)`; zero for an empty history.
pub fn log_likelihood(p: &FeatureParams, h: &History, g: &ResponseEmbeddings) -> f64 {
    if h.is_empty() {
        return 0.0;
    }
    let table = p.features();
    h.distinct()
        .iter()
        .map(|(o, n)| n * dot(table.row(o.hindsight), g.get(o.response, o.context)).max(LOG_FLOOR).ln())
        .sum()
}

/// Objective and its gradient with respect to `theta` (row-major |X|×d).
///
/// With `w_li = g_i f(x'_l)_i / p_l`, the derivative of `ln p_l` is
/// `w_li (1[x = x'_l] - f(x)_i)`. Clamped terms contribute nothing.
pub fn objective_and_gradient(
    p: &FeatureParams,
    h: &History,
    g: &ResponseEmbeddings,
) -> (f64, Vec<f64>) {
    let d = p.d;
    let table = p.features();
    let mut grad = vec![0.0; p.theta.len()];
    let mut column_weight = vec![0.0; d];
    let mut ll = 0.0;
    for (o, n) in h.distinct() {
        let f = table.row(o.hindsight);
        let gy = g.get(o.response, o.context);
        let prob = dot(f, gy);
        if prob <= LOG_FLOOR {
            ll += n * LOG_FLOOR.ln();
            continue;
        }
        ll += n * prob.ln();
        let row = &mut grad[o.hindsight.0 * d..(o.hindsight.0 + 1) * d];
        for i in 0..d {
            let w = n * gy[i] * f[i] / prob;
            row[i] += w;
            column_weight[i] += w;
        }
    }
    for x in 0..p.x_size {
        let f = table.row(Instruction(x));
        for i in 0..d {
            grad[x * d + i] -= f[i] * column_weight[i];
        }
    }
    (ll, grad)
}

pub fn grad_log_likelihood(p: &FeatureParams, h: &History, g: &ResponseEmbeddings) -> Vec<f64> {
    objective_and_gradient(p, h, g).1
}

/// Runs `steps_per_fit` Adam ascent steps from `p`.
///
/// A step that makes the objective non-finite is reverted and the learning
/// rate halved for the rest of the fit. If the final objective ends up below
/// the starting one (beyond 1e-6), the starting parameters are returned.
pub fn mle_fit(
    p: &FeatureParams,
    h: &History,
    g: &ResponseEmbeddings,
    cfg: &AdamConfig,
) -> Result<FeatureParams> {
    cfg.validate()?;
    check_shapes(p, g)?;
    if h.is_empty() {
        return Err(Error::Config("cannot fit on an empty history".into()));
    }

    let (start_ll, mut grad) = objective_and_gradient(p, h, g);
    let mut current = p.clone();
    let mut ll = start_ll;
    let mut lr = cfg.learning_rate;
    let mut m = vec![0.0; grad.len()];
    let mut v = vec![0.0; grad.len()];
    let (mut b1_pow, mut b2_pow) = (1.0, 1.0);

    for _ in 0..cfg.steps_per_fit {
        b1_pow *= cfg.beta1;
        b2_pow *= cfg.beta2;
        let mut next = current.clone();
        for k in 0..grad.len() {
            m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * grad[k];
            v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * grad[k] * grad[k];
            let m_hat = m[k] / (1.0 - b1_pow);
            let v_hat = v[k] / (1.0 - b2_pow);
            next.theta[k] += lr * m_hat / (v_hat.sqrt() + cfg.eps_hat);
        }
        let (next_ll, next_grad) = objective_and_gradient(&next, h, g);
        if !next_ll.is_finite() || next.theta.iter().any(|t| !t.is_finite()) {
            lr *= 0.5;
            continue;
        }
        current = next;
        ll = next_ll;
        grad = next_grad;
    }

    if ll < start_ll - 1e-6 {
        Ok(p.clone())
    } else {
        Ok(current)
    }
}

/// Feature estimate refit after every observation: the learning half
/// shared by LORIL and the greedy baselines.
#[derive(Debug, Clone)]
pub struct Estimator {
    params: FeatureParams,
    features: FeatureTable,
    history: History,
    embeddings: ResponseEmbeddings,
    adam: AdamConfig,
    scratch_fit: bool,
}

impl Estimator {
    /// Starts from `theta = 0`. With `scratch_fit` every refit restarts
    /// from zero instead of the previous estimate.
    pub fn new(
        x_size: usize,
        embeddings: ResponseEmbeddings,
        adam: AdamConfig,
        scratch_fit: bool,
    ) -> Result<Self> {
        adam.validate()?;
        if x_size == 0 || embeddings.y_size() == 0 || embeddings.d() == 0 {
            return Err(Error::Config("estimator needs non-empty X, Y and d".into()));
        }
        let params = FeatureParams::zeros(x_size, embeddings.d());
        Ok(Self {
            features: params.features(),
            params,
            history: History::new(),
            embeddings,
            adam,
            scratch_fit,
        })
    }

    pub fn params(&self) -> &FeatureParams {
        &self.params
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    pub fn embeddings(&self) -> &ResponseEmbeddings {
        &self.embeddings
    }

    pub fn x_size(&self) -> usize {
        self.params.x_size
    }

    pub fn y_size(&self) -> usize {
        self.embeddings.y_size()
    }

    /// Replaces the current estimate.
    pub fn set_params(&mut self, params: FeatureParams) -> Result<()> {
        if params.x_size != self.params.x_size || params.d != self.params.d {
            return Err(Error::Config("replacement parameters have the wrong shape".into()));
        }
        self.features = params.features();
        self.params = params;
        Ok(())
    }

    /// `f_hat(x) · g*(y, s)`.
    pub fn value(&self, x: Instruction, y: Response, s: Context) -> f64 {
        dot(self.features.row(x), self.embeddings.get(y, s))
    }

    /// `argmax_y f_hat(x) · g*(y, s)`, lowest index on ties.
    pub fn greedy(&self, x: Instruction, s: Context) -> Response {
        let mut best = Response(0);
        let mut best_value = self.value(x, best, s);
        for y in 1..self.y_size() {
            let v = self.value(x, Response(y), s);
            if v > best_value {
                best = Response(y);
                best_value = v;
            }
        }
        best
    }

    /// Appends the observation and refits on the full history.
    pub fn observe(&mut self, s: Context, y: Response, hindsight: Instruction) -> Result<()> {
        if hindsight.0 >= self.x_size() || y.0 >= self.y_size() || s.0 >= self.embeddings.s_size() {
            return Err(Error::Config("observation index out of range".into()));
        }
        self.history.push(hindsight, y, s);
        let start = if self.scratch_fit {
            FeatureParams::zeros(self.params.x_size, self.params.d)
        } else {
            self.params.clone()
        };
        let fitted = mle_fit(&start, &self.history, &self.embeddings, &self.adam)?;
        self.set_params(fitted)
    }
}
