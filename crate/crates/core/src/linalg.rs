//! Small dense linear algebra for the d×d covariance maintained by LORIL.

use crate::{Error, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Square row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    n: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn scaled_identity(n: usize, s: f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = s;
        }
        m
    }

    pub fn identity(n: usize) -> Self {
        Self::scaled_identity(n, 1.0)
    }

    /// Builds from row-major entries; `data.len()` must be a perfect square.
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * n, "expected {n}x{n} entries");
        Self { n, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.n);
        (0..self.n).map(|i| dot(self.row(i), v)).collect()
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = Mat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    /// `v^T M v`.
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        dot(v, &self.mul_vec(v))
    }

    /// `M += scale * v v^T`.
    pub fn add_outer(&mut self, v: &[f64], scale: f64) {
        let n = self.n;
        for i in 0..n {
            let vi = scale * v[i];
            for j in 0..n {
                self.data[i * n + j] += vi * v[j];
            }
        }
    }

    pub fn add_diagonal(&mut self, s: f64) {
        for i in 0..self.n {
            self.data[i * self.n + i] += s;
        }
    }

    /// Replaces `M` by `(M + M^T) / 2`.
    pub fn symmetrize(&mut self) {
        let n = self.n;
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (self.data[i * n + j] + self.data[j * n + i]);
                self.data[i * n + j] = avg;
                self.data[j * n + i] = avg;
            }
        }
    }

    pub fn max_abs_diff(&self, other: &Mat) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Gauss–Jordan inverse with partial pivoting. `None` if singular.
    pub fn inverse(&self) -> Option<Mat> {
        let n = self.n;
        let mut a = self.data.clone();
        let mut inv = Mat::identity(n).data;
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&r, &s| a[r * n + col].abs().total_cmp(&a[s * n + col].abs()))?;
            let p = a[pivot * n + col];
            if p.abs() < 1e-300 || !p.is_finite() {
                return None;
            }
            if pivot != col {
                for j in 0..n {
                    a.swap(pivot * n + j, col * n + j);
                    inv.swap(pivot * n + j, col * n + j);
                }
            }
            let scale = 1.0 / p;
            for j in 0..n {
                a[col * n + j] *= scale;
                inv[col * n + j] *= scale;
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a[r * n + col];
                if f == 0.0 {
                    continue;
                }
                for j in 0..n {
                    a[r * n + j] -= f * a[col * n + j];
                    inv[r * n + j] -= f * inv[col * n + j];
                }
            }
        }
        Some(Mat { n, data: inv })
    }
}

/// `‖v‖_M = sqrt(v^T M v)` for symmetric positive-definite `M`.
pub fn elliptic_norm(v: &[f64], m: &Mat) -> Result<f64> {
    if v.len() != m.n() {
        return Err(Error::Config(format!(
            "vector of length {} against {}x{} matrix",
            v.len(),
            m.n(),
            m.n()
        )));
    }
    let q = m.quad_form(v);
    // Rounding can push an exact zero slightly negative.
    let q = if q < 0.0 && q > -1e-14 { 0.0 } else { q };
    let norm = q.sqrt();
    if norm.is_finite() {
        Ok(norm)
    } else {
        Err(Error::Numerical(format!("elliptic norm is not finite (v^T M v = {q})")))
    }
}

/// Rank-one update of a maintained inverse:
/// `(A + v v^T)^{-1} = A^{-1} - A^{-1} v v^T A^{-1} / (1 + v^T A^{-1} v)`.
///
/// `inv` must hold `A^{-1}` for symmetric `A`.
pub fn sherman_morrison_update(inv: &mut Mat, v: &[f64]) {
    let u = inv.mul_vec(v);
    let denom = 1.0 + dot(v, &u);
    inv.add_outer(&u, -1.0 / denom);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn elliptic_norm_examples() {
        assert_close(elliptic_norm(&[3.0, 4.0], &Mat::identity(2)).unwrap(), 5.0, 1e-15);
        let m = Mat::from_row_major(2, vec![2.0, 0.0, 0.0, 1.0]);
        assert_close(elliptic_norm(&[1.0, 0.0], &m).unwrap(), 2f64.sqrt(), 1e-15);
        assert_eq!(elliptic_norm(&[0.0, 0.0], &m).unwrap(), 0.0);
    }

    #[test]
    fn elliptic_norm_rejects_non_finite_and_bad_shape() {
        let m = Mat::from_row_major(1, vec![f64::INFINITY]);
        assert!(matches!(elliptic_norm(&[1.0], &m), Err(Error::Numerical(_))));
        assert!(matches!(elliptic_norm(&[1.0, 2.0], &m), Err(Error::Config(_))));
    }

    #[test]
    fn inverse_of_small_matrix() {
        let m = Mat::from_row_major(3, vec![4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let inv = m.inverse().unwrap();
        assert!(m.matmul(&inv).max_abs_diff(&Mat::identity(3)) < 1e-14);
        assert!(Mat::zeros(2).inverse().is_none());
    }

    #[test]
    fn inverse_needs_pivoting() {
        let m = Mat::from_row_major(2, vec![0.0, 1.0, 1.0, 0.0]);
        assert_eq!(m.inverse().unwrap(), m);
    }

    #[test]
    fn sherman_morrison_single_update_closed_form() {
        let lambda = 0.1;
        let g = [0.2, 0.5, 0.3];
        let mut inv = Mat::scaled_identity(3, 1.0 / lambda);
        sherman_morrison_update(&mut inv, &g);
        let gg = dot(&g, &g);
        for i in 0..3 {
            for j in 0..3 {
                let id = if i == j { 1.0 / lambda } else { 0.0 };
                let expected = id - g[i] * g[j] / (lambda * (lambda + gg));
                assert_close(inv.get(i, j), expected, 1e-10);
            }
        }
    }

    #[test]
    fn zero_vector_update_is_a_no_op() {
        let mut inv = Mat::scaled_identity(2, 2.0);
        sherman_morrison_update(&mut inv, &[0.0, 0.0]);
        assert_eq!(inv, Mat::scaled_identity(2, 2.0));
    }
}
