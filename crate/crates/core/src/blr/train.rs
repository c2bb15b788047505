use serde::{Deserialize, Serialize};

use super::{log_likelihood_from_scores, log_likelihood_gradient, BoostedModel, RidgeSolver, Standardizer};
use crate::error::{Error, Result};
use crate::signal::LabeledDataset;

/// Absolute tolerance of the golden-section search on `gamma`.
pub const LINE_SEARCH_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub rounds: usize,
    pub ridge: f64,
    pub gamma_max: f64,
    pub standardize: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            rounds: 10,
            ridge: 1.0,
            gamma_max: 4.0,
            standardize: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: BoostedModel,
    /// Training log-likelihood before the first round and after each round.
    pub log_likelihood: Vec<f64>,
}

/// Maximizes the log-likelihood of `f_prev + gamma * f_new` over
/// `gamma in [0, gamma_max]`.
///
/// The objective is concave in `gamma`, so golden-section search finds the
/// interval optimum; the endpoints are compared as well and ties go to the
/// smaller `gamma`, which makes a flat objective return 0.
pub fn line_search_gamma(y: &[u8], f_prev: &[f64], f_new: &[f64], gamma_max: f64) -> f64 {
    assert_eq!(y.len(), f_prev.len());
    assert_eq!(y.len(), f_new.len());
    if !(gamma_max > 0.0) {
        return 0.0;
    }
    let mut buf = vec![0.0; y.len()];
    let mut objective = |gamma: f64| {
        for ((b, p), n) in buf.iter_mut().zip(f_prev).zip(f_new) {
            *b = p + gamma * n;
        }
        log_likelihood_from_scores(&buf, y)
    };

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0, gamma_max);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = objective(c);
    let mut fd = objective(d);
    while b - a > LINE_SEARCH_TOL {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = objective(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = objective(d);
        }
    }
    let interior = 0.5 * (a + b);

    let mut best = (0.0, objective(0.0));
    for gamma in [interior, gamma_max] {
        let value = objective(gamma);
        if value > best.1 {
            best = (gamma, value);
        }
    }
    best.0
}

/// Functional-gradient boosting of linear learners.
///
/// Round `m` regresses the per-sample gradient `2 (y_i - p_i)` at
/// `F_{m-1}` onto `[x; 1]` with ridge penalty, then scales the learner by
/// the likelihood-maximizing `gamma`. Because `gamma = 0` is always
/// admissible, the training likelihood never decreases.
pub fn train(data: &LabeledDataset, config: &TrainConfig) -> Result<TrainOutcome> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if data.x.nrows() != data.y.len() {
        return Err(Error::DimensionMismatch {
            expected: data.x.nrows(),
            got: data.y.len(),
        });
    }
    let positives = data.y.iter().filter(|&&y| y == 1).count();
    if positives == 0 || positives == data.len() {
        return Err(Error::SingleClass);
    }
    if !(config.gamma_max.is_finite() && config.gamma_max >= 0.0) {
        return Err(Error::Config(format!("gamma_max must be finite and non-negative, got {}", config.gamma_max)));
    }

    let k = data.feature_dim();
    let standardizer = if config.standardize {
        Standardizer::fit(&data.x)
    } else {
        Standardizer::identity(k)
    };
    let z = standardizer.apply(&data.x);
    let solver = RidgeSolver::new(&z)?;

    let mut model = BoostedModel {
        rounds: Vec::with_capacity(config.rounds),
        feature_dim: k,
        standardizer,
        ridge: config.ridge,
        preprocessing_fingerprint: String::new(),
    };
    let mut scores = vec![0.0; data.len()];
    let mut log_likelihood = vec![log_likelihood_from_scores(&scores, &data.y)];

    for _ in 0..config.rounds {
        let gradient = log_likelihood_gradient(&scores, &data.y);
        let learner = solver.solve(&gradient, config.ridge)?;
        let weak: Vec<f64> = z.rows().into_iter().map(|row| learner.score(row)).collect();
        let gamma = line_search_gamma(&data.y, &scores, &weak, config.gamma_max);
        for (s, w) in scores.iter_mut().zip(&weak) {
            *s += gamma * w;
        }
        model.push_round(gamma, learner)?;
        log_likelihood.push(log_likelihood_from_scores(&scores, &data.y));
    }
    Ok(TrainOutcome { model, log_likelihood })
}
