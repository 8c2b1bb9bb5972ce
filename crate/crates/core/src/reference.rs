//! Naive reference computations.
//!
//! These are deliberately written without touching the optimized code paths
//! (no shared helpers, no cached tables, no incremental updates) so they can
//! serve as independent oracles for tests and for the `oracle` CLI command.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// `P[x][y]` of a low-rank teacher, re-derived from the seeded normal stream:
/// ChaCha8 stream 0, 53-bit uniforms, `z = sqrt(-2 ln(1 - u1)) cos(2π u2)`,
/// entries `exp(z) / tau`, `F` then `G` in row-major order.
pub fn teacher_table(seed: u64, x_size: usize, y_size: usize, d: usize, tau: f64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    let mut uniform = || (rng.next_u64() >> 11) as f64 / 9_007_199_254_740_992.0;
    let mut normal = || {
        let u1 = uniform();
        let u2 = uniform();
        (-2.0 * (1.0 - u1).ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    };
    let mut f = vec![vec![0.0; d]; x_size];
    for row in f.iter_mut() {
        for v in row.iter_mut() {
            *v = normal().exp() / tau;
        }
    }
    let mut g = vec![vec![0.0; y_size]; d];
    for row in g.iter_mut() {
        for v in row.iter_mut() {
            *v = normal().exp() / tau;
        }
    }
    for i in 0..d {
        let mut s = 0.0;
        for row in &f {
            s += row[i];
        }
        for row in f.iter_mut() {
            row[i] /= s;
        }
    }
    for y in 0..y_size {
        let mut s = 0.0;
        for row in &g {
            s += row[y];
        }
        for row in g.iter_mut() {
            row[y] /= s;
        }
    }
    let mut p = vec![vec![0.0; y_size]; x_size];
    for x in 0..x_size {
        for y in 0..y_size {
            for i in 0..d {
                p[x][y] += f[x][i] * g[i][y];
            }
        }
    }
    p
}

/// Softmax features straight from the definition (no max subtraction).
pub fn softmax_features(theta: &[f64], x_size: usize, d: usize) -> Vec<Vec<f64>> {
    let mut f = vec![vec![0.0; d]; x_size];
    for i in 0..d {
        let z: f64 = (0..x_size).map(|x| theta[x * d + i].exp()).sum();
        for x in 0..x_size {
            f[x][i] = theta[x * d + i].exp() / z;
        }
    }
    f
}

/// `Σ_l ln max(f(x'_l) · g_l, 1e-12)` summed record by record.
/// `records` holds `(x', g*(y_l, s_l))`.
pub fn log_likelihood(theta: &[f64], x_size: usize, d: usize, records: &[(usize, Vec<f64>)]) -> f64 {
    let f = softmax_features(theta, x_size, d);
    let mut total = 0.0;
    for (x, g) in records {
        let mut p = 0.0;
        for i in 0..d {
            p += f[*x][i] * g[i];
        }
        total += p.max(1e-12).ln();
    }
    total
}

/// Central finite differences of `objective` at `theta`.
pub fn finite_difference_gradient(theta: &[f64], step: f64, objective: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut grad = vec![0.0; theta.len()];
    let mut probe = theta.to_vec();
    for k in 0..theta.len() {
        probe[k] = theta[k] + step;
        let up = objective(&probe);
        probe[k] = theta[k] - step;
        let down = objective(&probe);
        probe[k] = theta[k];
        grad[k] = (up - down) / (2.0 * step);
    }
    grad
}

/// `P_{W_i}(X | y_j)` as a 2×K table (row 0 = A, row 1 = B), literally
/// `1/2 + sqrt(K/T) 1(j = i) (1 - 2 1(X = B))`.
pub fn lower_bound_table(i: usize, k: usize, t_ref: usize) -> [Vec<f64>; 2] {
    let eps = (k as f64 / t_ref as f64).sqrt();
    let row = |is_b: f64| {
        (0..k)
            .map(|j| 0.5 + eps * if j == i { 1.0 } else { 0.0 } * (1.0 - 2.0 * is_b))
            .collect::<Vec<_>>()
    };
    [row(0.0), row(1.0)]
}

/// All maximizers of each row.
pub fn argmax_sets(table: &[Vec<f64>]) -> Vec<Vec<usize>> {
    table
        .iter()
        .map(|row| {
            let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (0..row.len()).filter(|&j| row[j] == best).collect()
        })
        .collect()
}

/// Expected per-round regret of uniform play against uniform instructions,
/// by exhaustive enumeration over the (x, y) table.
pub fn uniform_play_regret_per_round(table: &[Vec<f64>]) -> f64 {
    let nx = table.len() as f64;
    let mut total = 0.0;
    for row in table {
        let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let ny = row.len() as f64;
        for p in row {
            total += (best - p) / (nx * ny);
        }
    }
    total
}

/// `(λ I + g g^T)^{-1} = I / λ - g g^T / (λ (λ + ‖g‖²))`.
pub fn rank_one_inverse(lambda: f64, g: &[f64]) -> Vec<Vec<f64>> {
    let gg: f64 = g.iter().map(|v| v * v).sum();
    let d = g.len();
    let mut out = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..d {
            out[i][j] = if i == j { 1.0 / lambda } else { 0.0 } - g[i] * g[j] / (lambda * (lambda + gg));
        }
    }
    out
}

/// Bonus `k ‖g‖_{Σ^{-1}}` after `m` plays of the same embedding, from
/// `g^T (λ I + m g g^T)^{-1} g = ‖g‖² / (λ + m ‖g‖²)`.
pub fn repeated_bonus(k: f64, lambda: f64, g: &[f64], m: usize) -> f64 {
    let gg: f64 = g.iter().map(|v| v * v).sum();
    k * (gg / (lambda + m as f64 * gg)).sqrt()
}

/// `sqrt(2 T d log(1 + T L² / λ))`.
pub fn gram_sum_bound(t: usize, d: usize, l: f64, lambda: f64) -> f64 {
    let t = t as f64;
    (2.0 * t * d as f64 * (1.0 + t * l * l / lambda).ln()).sqrt()
}

/// First index of the largest score.
pub fn first_argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for j in 0..scores.len() {
        if scores[j] > scores[best] {
            best = j;
        }
    }
    best
}
