//! Hard two-instruction worlds `W_i`.
//!
//! Instructions are `A` (index 0) and `B` (index 1), presented uniformly.
//! With gap `eps = sqrt(K / T_ref)`:
//!
//! ```text
//! P(A | y_j) = 1/2 + eps * 1(j = i)
//! P(B | y_j) = 1/2 - eps * 1(j = i)
//! ```

use serde::{Deserialize, Serialize};

use crate::protocol::{Context, Environment, Instruction, Response, ResponseEmbeddings};
use crate::rng::Stream;
use crate::{Error, Result};

pub const A: Instruction = Instruction(0);
pub const B: Instruction = Instruction(1);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundWorld {
    special: usize,
    k: usize,
    t_ref: usize,
    epsilon: f64,
}

impl LowerBoundWorld {
    pub fn build(i: usize, k: usize, t_ref: usize) -> Result<Self> {
        if k == 0 || t_ref == 0 {
            return Err(Error::Config(format!(
                "world needs K >= 1 and T_ref >= 1 (K={k}, T_ref={t_ref})"
            )));
        }
        if i >= k {
            return Err(Error::Config(format!("special response {i} out of range for K={k}")));
        }
        let epsilon = (k as f64 / t_ref as f64).sqrt();
        if epsilon > 0.5 {
            return Err(Error::Config(format!(
                "gap sqrt(K/T_ref) = {epsilon} exceeds 1/2; probabilities would leave [0, 1]"
            )));
        }
        Ok(Self {
            special: i,
            k,
            t_ref,
            epsilon,
        })
    }

    pub fn special(&self) -> Response {
        Response(self.special)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn t_ref(&self) -> usize {
        self.t_ref
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn world_prob(&self, x: Instruction, y: Response) -> f64 {
        debug_assert!(x.0 < 2 && y.0 < self.k);
        if y.0 != self.special {
            0.5
        } else if x == A {
            0.5 + self.epsilon
        } else {
            0.5 - self.epsilon
        }
    }
}

impl Environment for LowerBoundWorld {
    fn x_size(&self) -> usize {
        2
    }

    fn y_size(&self) -> usize {
        self.k
    }

    fn prob(&self, x: Instruction, y: Response, _s: Context) -> f64 {
        self.world_prob(x, y)
    }

    fn best_prob(&self, x: Instruction, _s: Context) -> f64 {
        if x == A || self.k == 1 {
            self.world_prob(x, self.special())
        } else {
            0.5
        }
    }

    fn sample_hindsight(&self, y: Response, _s: Context, rng: &mut Stream) -> Instruction {
        if rng.uniform() < self.world_prob(A, y) {
            A
        } else {
            B
        }
    }

    /// One-hot embeddings (`d = K`): the factorization `f*(x)_y = P(x | y)`
    /// with `g*(y) = e_y`, so the embedding reveals nothing about which
    /// response is special.
    fn embeddings(&self) -> ResponseEmbeddings {
        let mut data = vec![0.0; self.k * self.k];
        for y in 0..self.k {
            data[y * self.k + y] = 1.0;
        }
        ResponseEmbeddings::new(self.k, self.k, 1, data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn gap_examples() {
        let w = LowerBoundWorld::build(0, 4, 100).unwrap();
        assert!(close(w.epsilon(), 0.2));
        assert!(close(w.world_prob(A, Response(0)), 0.7));
        assert!(close(w.world_prob(B, Response(0)), 0.3));
        assert_eq!(w.world_prob(A, Response(1)), 0.5);
        assert_eq!(w.world_prob(B, Response(1)), 0.5);

        let w = LowerBoundWorld::build(0, 1, 4).unwrap();
        assert_eq!(w.epsilon(), 0.5);
        assert_eq!(w.world_prob(A, Response(0)), 1.0);
        assert_eq!(w.world_prob(B, Response(0)), 0.0);
    }

    #[test]
    fn rejects_invalid_worlds() {
        assert!(LowerBoundWorld::build(0, 5, 4).is_err());
        assert!(LowerBoundWorld::build(4, 4, 100).is_err());
        assert!(LowerBoundWorld::build(0, 0, 100).is_err());
        assert!(LowerBoundWorld::build(0, 4, 0).is_err());
    }

    #[test]
    fn conditionals_sum_to_one_exactly() {
        for (i, k, t) in [(0, 4, 100), (2, 16, 10_000), (0, 1, 4), (6, 7, 29)] {
            let w = LowerBoundWorld::build(i, k, t).unwrap();
            for y in 0..k {
                assert_eq!(w.world_prob(A, Response(y)) + w.world_prob(B, Response(y)), 1.0);
            }
        }
    }

    #[test]
    fn single_response_world_best_for_b() {
        let w = LowerBoundWorld::build(0, 1, 16).unwrap();
        assert_eq!(w.best_prob(B, Context(0)), 0.25);
        assert_eq!(w.best_prob(A, Context(0)), 0.75);
    }
}
