//! Boosted logistic regression with linear weak learners.
//!
//! The ensemble score is `F(x) = sum_m gamma_m * (w_m . [x; 1])` on
//! standardized features, and the model probability is
//! `p(y = 1 | x) = exp(F) / (exp(F) + exp(-F)) = 1 / (1 + exp(-2F))`.
//! Each round fits a ridge least-squares learner to the per-sample gradient
//! of the Bernoulli log-likelihood with respect to `F`, then picks its
//! weight `gamma` by a bounded line search that maximizes the likelihood.

mod io;
mod solver;
mod train;

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{FeatureVector, LabeledDataset};

pub use io::{read_model, write_model};
pub use solver::{fit_weak_learner, RidgeSolver};
pub use train::{line_search_gamma, train, TrainConfig, TrainOutcome, LINE_SEARCH_TOL};

/// Probability clamp used inside the log-likelihood.
pub const PROB_EPS: f64 = 1e-12;

/// Linear scorer over `[x; 1]`; the last weight is the bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakLearner {
    pub w: Vec<f64>,
}

impl WeakLearner {
    pub fn zeros(feature_dim: usize) -> Self {
        Self {
            w: vec![0.0; feature_dim + 1],
        }
    }

    pub fn bias(&self) -> f64 {
        *self.w.last().expect("learner has a bias entry")
    }

    pub fn weights(&self) -> &[f64] {
        &self.w[..self.w.len() - 1]
    }

    pub fn score(&self, x: ArrayView1<'_, f64>) -> f64 {
        self.weights().iter().zip(x.iter()).map(|(w, v)| w * v).sum::<f64>() + self.bias()
    }
}

/// Per-dimension affine map `(x - mean) / scale` fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    /// Column means and population standard deviations; constant columns
    /// get scale 1.
    pub fn fit(x: &Array2<f64>) -> Self {
        let n = x.nrows().max(1) as f64;
        let mut mean = Vec::with_capacity(x.ncols());
        let mut scale = Vec::with_capacity(x.ncols());
        for col in x.columns() {
            let m = col.sum() / n;
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
            let sd = var.sqrt();
            mean.push(m);
            scale.push(if sd > 1e-12 * (1.0 + m.abs()) { sd } else { 1.0 });
        }
        Self { mean, scale }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut out = x.clone();
        for mut row in out.rows_mut() {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.scale) {
                *v = (*v - m) / s;
            }
        }
        out
    }

    fn apply_row(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Round {
    pub gamma: f64,
    pub learner: WeakLearner,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedModel {
    pub rounds: Vec<Round>,
    pub feature_dim: usize,
    pub standardizer: Standardizer,
    pub ridge: f64,
    pub preprocessing_fingerprint: String,
}

impl BoostedModel {
    /// Zero model on raw (unstandardized) features.
    pub fn empty(feature_dim: usize) -> Self {
        Self {
            rounds: Vec::new(),
            feature_dim,
            standardizer: Standardizer::identity(feature_dim),
            ridge: 0.0,
            preprocessing_fingerprint: String::new(),
        }
    }

    pub fn with_fingerprint(mut self, fingerprint: impl Into<String>) -> Self {
        self.preprocessing_fingerprint = fingerprint.into();
        self
    }

    pub fn push_round(&mut self, gamma: f64, learner: WeakLearner) -> Result<()> {
        if learner.w.len() != self.feature_dim + 1 {
            return Err(Error::DimensionMismatch {
                expected: self.feature_dim + 1,
                got: learner.w.len(),
            });
        }
        if !gamma.is_finite() || learner.w.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite round".into()));
        }
        self.rounds.push(Round { gamma, learner });
        Ok(())
    }

    /// Model keeping only the first `m` rounds.
    pub fn truncated(&self, m: usize) -> Self {
        let mut out = self.clone();
        out.rounds.truncate(m);
        out
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.feature_dim {
            return Err(Error::DimensionMismatch {
                expected: self.feature_dim,
                got,
            });
        }
        Ok(())
    }

    fn score_standardized(&self, z: ArrayView1<'_, f64>) -> f64 {
        self.rounds.iter().map(|r| r.gamma * r.learner.score(z)).sum()
    }

    pub fn decision_value(&self, x: &FeatureVector) -> Result<f64> {
        self.decision_value_raw(&x.values)
    }

    pub fn decision_value_raw(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x.len())?;
        let z = self.standardizer.apply_row(x);
        Ok(self.score_standardized(ArrayView1::from(&z[..])))
    }

    /// Decision value of every row of `x`.
    pub fn decision_values(&self, x: &Array2<f64>) -> Result<Vec<f64>> {
        if x.nrows() == 0 {
            return Ok(Vec::new());
        }
        self.check_dim(x.ncols())?;
        let z = self.standardizer.apply(x);
        Ok(z.rows().into_iter().map(|row| self.score_standardized(row)).collect())
    }

    pub fn posterior(&self, x: &FeatureVector) -> Result<f64> {
        Ok(posterior_from_score(self.decision_value(x)?))
    }

    pub fn log_likelihood(&self, data: &LabeledDataset) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let scores = self.decision_values(&data.x)?;
        Ok(log_likelihood_from_scores(&scores, &data.y))
    }
}

/// `1 / (1 + exp(-2F))` without overflow for large `|F|`.
pub fn posterior_from_score(f: f64) -> f64 {
    if f >= 0.0 {
        1.0 / (1.0 + (-2.0 * f).exp())
    } else {
        let e = (2.0 * f).exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + exp(t))`, stable for both signs.
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// `sum_i y_i ln p_i + (1 - y_i) ln(1 - p_i)` with `p_i` clamped to
/// `[PROB_EPS, 1 - PROB_EPS]`.
pub fn log_likelihood_from_scores(scores: &[f64], y: &[u8]) -> f64 {
    let lo = PROB_EPS.ln();
    let hi = (-PROB_EPS).ln_1p();
    scores
        .iter()
        .zip(y)
        .map(|(&f, &label)| {
            // ln p = -softplus(-2F), ln(1 - p) = -softplus(2F)
            let t = if label == 1 { -2.0 * f } else { 2.0 * f };
            (-softplus(t)).clamp(lo, hi)
        })
        .sum()
}

/// `dL/dF_i = 2 (y_i - p_i)`.
pub fn log_likelihood_gradient(scores: &[f64], y: &[u8]) -> Vec<f64> {
    scores
        .iter()
        .zip(y)
        .map(|(&f, &label)| 2.0 * (f64::from(label) - posterior_from_score(f)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn one_round_model() -> BoostedModel {
        let mut m = BoostedModel::empty(3);
        m.push_round(2.0, WeakLearner { w: vec![1.0, 0.0, 0.0, 0.0] }).unwrap();
        m
    }

    fn fv(values: Vec<f64>) -> FeatureVector {
        FeatureVector { values, label: None }
    }

    #[test]
    fn decision_value_examples() {
        let empty = BoostedModel::empty(3);
        assert_eq!(empty.decision_value(&fv(vec![1.0, -2.0, 3.0])).unwrap(), 0.0);
        assert_eq!(one_round_model().decision_value(&fv(vec![3.0, 0.0, 0.0])).unwrap(), 6.0);
        assert!(matches!(
            empty.decision_value(&fv(vec![1.0])),
            Err(Error::DimensionMismatch { expected: 3, got: 1 })
        ));
    }

    #[test]
    fn scores_are_additive_over_rounds() {
        let mut m = one_round_model();
        m.push_round(-0.5, WeakLearner { w: vec![0.2, 1.0, -3.0, 0.7] }).unwrap();
        let x = fv(vec![0.3, -1.1, 2.0]);
        let head = m.truncated(1).decision_value(&x).unwrap();
        let last = &m.rounds[1];
        let expected = head + last.gamma * last.learner.score(ArrayView1::from(&x.values[..]));
        assert!((m.decision_value(&x).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn posterior_examples() {
        assert_eq!(posterior_from_score(0.0), 0.5);
        assert!((posterior_from_score(3f64.ln() / 2.0) - 0.75).abs() < 1e-15);
        assert_eq!(posterior_from_score(1e6), 1.0);
        assert_eq!(posterior_from_score(-1e6), 0.0);
        assert!(posterior_from_score(1e6).is_finite());
    }

    #[test]
    fn log_likelihood_examples() {
        let data = LabeledDataset {
            x: array![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            y: vec![1, 0, 1],
            candidate_ids: vec!["a".into(), "b".into(), "a".into()],
        };
        let ll = BoostedModel::empty(3).log_likelihood(&data).unwrap();
        assert!((ll - 3.0 * 0.5f64.ln()).abs() < 1e-12);

        let sure = log_likelihood_from_scores(&[1e6], &[1]);
        assert!(sure < 0.0 && sure > -1e-11);
        let wrong = log_likelihood_from_scores(&[1e6], &[0]);
        assert!((wrong - PROB_EPS.ln()).abs() < 1e-9);

        let empty = LabeledDataset {
            x: Array2::zeros((0, 3)),
            y: vec![],
            candidate_ids: vec![],
        };
        assert!(matches!(BoostedModel::empty(3).log_likelihood(&empty), Err(Error::EmptyDataset)));
    }

    #[test]
    fn log_likelihood_matches_bernoulli_sum() {
        // Per-sample oracle on 5 random points.
        let mut rng = crate::seed::rng(5);
        use rand::Rng;
        let scores: Vec<f64> = (0..5).map(|_| rng.random_range(-3.0..3.0)).collect();
        let y: Vec<u8> = (0..5).map(|_| rng.random_range(0..2u8)).collect();
        let oracle: f64 = scores
            .iter()
            .zip(&y)
            .map(|(&f, &yi)| {
                let p = f.exp() / (f.exp() + (-f).exp());
                if yi == 1 {
                    p.ln()
                } else {
                    (1.0 - p).ln()
                }
            })
            .sum();
        assert!((log_likelihood_from_scores(&scores, &y) - oracle).abs() < 1e-12);
    }

    #[test]
    fn standardizer_handles_constant_columns() {
        let x = array![[1.0, 5.0], [3.0, 5.0]];
        let s = Standardizer::fit(&x);
        assert_eq!(s.mean, vec![2.0, 5.0]);
        assert_eq!(s.scale, vec![1.0, 1.0]);
        let z = s.apply(&x);
        assert_eq!(z, array![[-1.0, 0.0], [1.0, 0.0]]);
    }

    #[test]
    fn push_round_validates() {
        let mut m = BoostedModel::empty(2);
        assert!(m.push_round(1.0, WeakLearner { w: vec![1.0] }).is_err());
        assert!(m.push_round(f64::NAN, WeakLearner::zeros(2)).is_err());
        assert!(m.push_round(1.0, WeakLearner::zeros(2)).is_ok());
    }

    proptest! {
        #[test]
        fn posterior_is_symmetric(f in -50.0f64..50.0) {
            prop_assert!((posterior_from_score(f) + posterior_from_score(-f) - 1.0).abs() < 1e-12);
        }

        #[test]
        fn gradient_matches_finite_differences(seed in any::<u64>()) {
            use rand::Rng;
            let mut rng = crate::seed::rng(seed);
            let scores: Vec<f64> = (0..6).map(|_| rng.random_range(-2.0..2.0)).collect();
            let y: Vec<u8> = (0..6).map(|_| rng.random_range(0..2u8)).collect();
            let g = log_likelihood_gradient(&scores, &y);
            let h = 1e-5;
            for i in 0..6 {
                let mut up = scores.clone();
                let mut down = scores.clone();
                up[i] += h;
                down[i] -= h;
                let fd = (log_likelihood_from_scores(&up, &y) - log_likelihood_from_scores(&down, &y)) / (2.0 * h);
                prop_assert!((fd - g[i]).abs() <= 1e-6 * g[i].abs().max(fd.abs()), "{} vs {}", fd, g[i]);
            }
        }
    }
}
