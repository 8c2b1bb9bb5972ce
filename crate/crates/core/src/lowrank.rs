//! Synthetic low-rank teacher: `P(x | y) = f*(x) · g*(y)` with `F` (|X|×d)
//! and `G` (d×|Y|) drawn from exponentiated Gaussians.

use serde::{Deserialize, Serialize};

use crate::protocol::{inverse_cdf, Context, Environment, Instruction, Response, ResponseEmbeddings};
use crate::rng::Stream;
use crate::{Error, Result};

/// A low-rank teacher. `F` is normalized over instructions per latent
/// coordinate and `G` over coordinates per response, which makes every
/// column of `FG` a distribution over instructions.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRankTeacher {
    x_size: usize,
    y_size: usize,
    d: usize,
    tau: f64,
    seed: u64,
    /// Row-major |X|×d.
    f: Vec<f64>,
    /// Row-major d×|Y|.
    g: Vec<f64>,
    // Derived tables.
    g_cols: Vec<f64>,
    p_cols: Vec<f64>,
    best: Vec<f64>,
}

/// JSON document for experiment provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TeacherDocument {
    pub x_size: usize,
    pub y_size: usize,
    pub d: usize,
    pub tau: f64,
    pub seed: u64,
    #[serde(rename = "F")]
    pub f: Vec<f64>,
    #[serde(rename = "G")]
    pub g: Vec<f64>,
}

/// Largest deviations from the normalization identities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormalizationReport {
    pub f_column_sum_dev: f64,
    pub g_column_sum_dev: f64,
    pub fg_column_sum_dev: f64,
    pub min_entry: f64,
    pub max_prob: f64,
}

impl NormalizationReport {
    pub fn within(&self, tol: f64) -> bool {
        self.f_column_sum_dev <= tol
            && self.g_column_sum_dev <= tol
            && self.fg_column_sum_dev <= tol
            && self.min_entry > 0.0
            && self.max_prob <= 1.0 + tol
    }
}

fn check_dims(x_size: usize, y_size: usize, d: usize, tau: f64) -> Result<()> {
    if x_size == 0 || y_size == 0 || d == 0 {
        return Err(Error::Config(format!(
            "teacher dimensions must be positive (|X|={x_size}, |Y|={y_size}, d={d})"
        )));
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::Config(format!("temperature must be positive, got {tau}")));
    }
    Ok(())
}

impl LowRankTeacher {
    /// Draws `F` then `G` in row-major order from one seeded normal stream,
    /// maps each draw to `exp(z) / tau`, and normalizes.
    pub fn build(seed: u64, x_size: usize, y_size: usize, d: usize, tau: f64) -> Result<Self> {
        check_dims(x_size, y_size, d, tau)?;
        let mut rng = Stream::new(seed, 0);
        let mut f: Vec<f64> = (0..x_size * d).map(|_| rng.normal().exp() / tau).collect();
        let mut g: Vec<f64> = (0..d * y_size).map(|_| rng.normal().exp() / tau).collect();

        for i in 0..d {
            let total: f64 = (0..x_size).map(|x| f[x * d + i]).sum();
            for x in 0..x_size {
                f[x * d + i] /= total;
            }
        }
        for y in 0..y_size {
            let total: f64 = (0..d).map(|i| g[i * y_size + y]).sum();
            for i in 0..d {
                g[i * y_size + y] /= total;
            }
        }
        Self::from_parts(seed, x_size, y_size, d, tau, f, g)
    }

    fn from_parts(
        seed: u64,
        x_size: usize,
        y_size: usize,
        d: usize,
        tau: f64,
        f: Vec<f64>,
        g: Vec<f64>,
    ) -> Result<Self> {
        check_dims(x_size, y_size, d, tau)?;
        if f.len() != x_size * d || g.len() != d * y_size {
            return Err(Error::Config("teacher matrix shapes do not match dimensions".into()));
        }
        if f.iter().chain(&g).any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Config("teacher entries must be finite and non-negative".into()));
        }
        let mut g_cols = vec![0.0; y_size * d];
        for i in 0..d {
            for y in 0..y_size {
                g_cols[y * d + i] = g[i * y_size + y];
            }
        }
        let mut p_cols = vec![0.0; y_size * x_size];
        let mut best = vec![f64::NEG_INFINITY; x_size];
        for y in 0..y_size {
            let gy = &g_cols[y * d..(y + 1) * d];
            for x in 0..x_size {
                let p = crate::linalg::dot(&f[x * d..(x + 1) * d], gy);
                p_cols[y * x_size + x] = p;
                best[x] = best[x].max(p);
            }
        }
        Ok(Self {
            x_size,
            y_size,
            d,
            tau,
            seed,
            f,
            g,
            g_cols,
            p_cols,
            best,
        })
    }

    pub fn x_size(&self) -> usize {
        self.x_size
    }

    pub fn y_size(&self) -> usize {
        self.y_size
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Row-major |X|×d.
    pub fn f_matrix(&self) -> &[f64] {
        &self.f
    }

    /// Row-major d×|Y|.
    pub fn g_matrix(&self) -> &[f64] {
        &self.g
    }

    /// `f*(x)`, row `x` of `F`.
    pub fn f_star(&self, x: Instruction) -> &[f64] {
        &self.f[x.0 * self.d..(x.0 + 1) * self.d]
    }

    /// `g*(y)`, column `y` of `G`.
    pub fn g_star(&self, y: Response) -> &[f64] {
        &self.g_cols[y.0 * self.d..(y.0 + 1) * self.d]
    }

    /// `f*(x) · g*(y)`.
    pub fn teacher_prob(&self, x: Instruction, y: Response) -> f64 {
        crate::linalg::dot(self.f_star(x), self.g_star(y))
    }

    /// The column `P(· | y)`.
    pub fn column(&self, y: Response) -> &[f64] {
        &self.p_cols[y.0 * self.x_size..(y.0 + 1) * self.x_size]
    }

    pub fn sample_hindsight(&self, y: Response, rng: &mut Stream) -> Instruction {
        inverse_cdf(self.column(y).iter().copied(), rng.uniform())
    }

    /// `argmax_y f*(x) · g*(y)`, lowest index on ties.
    pub fn optimal_response(&self, x: Instruction) -> Response {
        let mut best = 0;
        for y in 1..self.y_size {
            if self.p_cols[y * self.x_size + x.0] > self.p_cols[best * self.x_size + x.0] {
                best = y;
            }
        }
        Response(best)
    }

    pub fn normalization_report(&self) -> NormalizationReport {
        let (x_size, y_size, d) = (self.x_size, self.y_size, self.d);
        let f_dev = (0..d)
            .map(|i| ((0..x_size).map(|x| self.f[x * d + i]).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max);
        let g_dev = (0..y_size)
            .map(|y| (self.g_star(Response(y)).iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max);
        let fg_dev = (0..y_size)
            .map(|y| (self.column(Response(y)).iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max);
        let min_entry = self.f.iter().chain(&self.g).copied().fold(f64::INFINITY, f64::min);
        let max_prob = self.p_cols.iter().copied().fold(0.0, f64::max);
        NormalizationReport {
            f_column_sum_dev: f_dev,
            g_column_sum_dev: g_dev,
            fg_column_sum_dev: fg_dev,
            min_entry,
            max_prob,
        }
    }

    pub fn to_document(&self) -> TeacherDocument {
        TeacherDocument {
            x_size: self.x_size,
            y_size: self.y_size,
            d: self.d,
            tau: self.tau,
            seed: self.seed,
            f: self.f.clone(),
            g: self.g.clone(),
        }
    }

    pub fn from_document(doc: TeacherDocument) -> Result<Self> {
        Self::from_parts(doc.seed, doc.x_size, doc.y_size, doc.d, doc.tau, doc.f, doc.g)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_document()).expect("teacher serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: TeacherDocument =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_document(doc)
    }
}

impl Environment for LowRankTeacher {
    fn x_size(&self) -> usize {
        self.x_size
    }

    fn y_size(&self) -> usize {
        self.y_size
    }

    fn prob(&self, x: Instruction, y: Response, _s: Context) -> f64 {
        self.teacher_prob(x, y)
    }

    fn best_prob(&self, x: Instruction, _s: Context) -> f64 {
        self.best[x.0]
    }

    fn sample_hindsight(&self, y: Response, _s: Context, rng: &mut Stream) -> Instruction {
        LowRankTeacher::sample_hindsight(self, y, rng)
    }

    fn embeddings(&self) -> ResponseEmbeddings {
        ResponseEmbeddings::new(self.d, self.y_size, 1, self.g_cols.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_configuration() {
        assert!(LowRankTeacher::build(1, 0, 3, 2, 1.0).is_err());
        assert!(LowRankTeacher::build(1, 3, 0, 2, 1.0).is_err());
        assert!(LowRankTeacher::build(1, 3, 3, 0, 1.0).is_err());
        assert!(LowRankTeacher::build(1, 3, 3, 2, 0.0).is_err());
        assert!(LowRankTeacher::build(1, 3, 3, 2, -1.0).is_err());
        assert!(LowRankTeacher::build(1, 3, 3, 2, f64::NAN).is_err());
    }

    #[test]
    fn experiment_scale_teacher_is_normalized() {
        let t = LowRankTeacher::build(1, 2000, 10, 10, 0.75).unwrap();
        let r = t.normalization_report();
        assert!(r.within(1e-9), "{r:?}");
    }

    #[test]
    fn single_instruction_is_a_point_mass() {
        let t = LowRankTeacher::build(5, 1, 4, 3, 0.75).unwrap();
        assert!(t.f_matrix().iter().all(|&v| v == 1.0));
        for y in 0..4 {
            assert!((t.teacher_prob(Instruction(0), Response(y)) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn one_dimensional_embeddings_are_unit() {
        let t = LowRankTeacher::build(2, 5, 6, 1, 0.75).unwrap();
        for y in 0..6 {
            assert_eq!(t.g_star(Response(y)), &[1.0]);
        }
    }

    #[test]
    fn aligned_point_masses_give_probability_one() {
        // f*(0) = e_0 and g*(0) = e_0.
        let f = vec![1.0, 0.0, 0.0, 1.0];
        let g = vec![1.0, 0.3, 0.0, 0.7];
        let t = LowRankTeacher::from_parts(0, 2, 2, 2, 1.0, f, g).unwrap();
        assert_eq!(t.teacher_prob(Instruction(0), Response(0)), 1.0);
        let mut rng = Stream::new(0, 0);
        for _ in 0..100 {
            assert_eq!(t.sample_hindsight(Response(0), &mut rng), Instruction(0));
        }
    }

    #[test]
    fn sampling_is_deterministic_for_fixed_state() {
        let t = LowRankTeacher::build(3, 30, 4, 3, 0.75).unwrap();
        let a = Stream::new(8, 0);
        let draw = |mut s: Stream| t.sample_hindsight(Response(2), &mut s);
        assert_eq!(draw(a.clone()), draw(a));
    }

    #[test]
    fn json_round_trip() {
        let t = LowRankTeacher::build(4, 6, 3, 2, 0.75).unwrap();
        let back = LowRankTeacher::from_json(&t.to_json()).unwrap();
        assert_eq!(back, t);
        let v: serde_json::Value = serde_json::from_str(&t.to_json()).unwrap();
        for key in ["x_size", "y_size", "d", "tau", "seed", "F", "G"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
    }

    #[test]
    fn optimal_response_prefers_lowest_index_on_ties() {
        let t = LowRankTeacher::build(2, 5, 6, 1, 0.75).unwrap();
        for x in 0..5 {
            assert_eq!(t.optimal_response(Instruction(x)), Response(0));
        }
    }
}
