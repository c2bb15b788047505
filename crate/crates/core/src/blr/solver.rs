//! Ridge least squares with an unpenalized intercept.
//!
//! Centering removes the intercept from the penalized problem: with
//! `Xc = X - mean(X)` and `rc = r - mean(r)`, the weights are
//! `w = V diag(s / (s^2 + lambda)) U^T rc` from the thin SVD `Xc = U S V^T`
//! and the bias is `mean(r) - w . mean(X)`. For `lambda = 0` singular values
//! below the rank tolerance are dropped, which yields the minimum-norm
//! solution when the system is underdetermined.
//!
//! The SVD depends only on `X`, so a boosting run factors once and solves
//! every round against new residuals.

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;

use super::WeakLearner;
use crate::error::{Error, Result};

const SVD_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone)]
pub struct RidgeSolver {
    col_mean: DVector<f64>,
    u: DMatrix<f64>,
    singular: DVector<f64>,
    v_t: DMatrix<f64>,
    rank_tol: f64,
}

impl RidgeSolver {
    pub fn new(x: &Array2<f64>) -> Result<Self> {
        let (n, k) = x.dim();
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite feature value".into()));
        }
        let col_mean = DVector::from_iterator(k, x.columns().into_iter().map(|c| c.sum() / n as f64));
        let centered = DMatrix::from_fn(n, k, |i, j| x[[i, j]] - col_mean[j]);
        let svd = centered
            .try_svd(true, true, f64::EPSILON, SVD_MAX_ITER)
            .ok_or_else(|| Error::Numerical("SVD did not converge".into()))?;
        let u = svd.u.ok_or_else(|| Error::Numerical("SVD returned no U".into()))?;
        let v_t = svd.v_t.ok_or_else(|| Error::Numerical("SVD returned no V^T".into()))?;
        let singular = svd.singular_values;
        let s_max = singular.iter().fold(0.0f64, |m, &s| m.max(s));
        let rank_tol = s_max * n.max(k) as f64 * f64::EPSILON;
        Ok(Self {
            col_mean,
            u,
            singular,
            v_t,
            rank_tol,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.u.nrows()
    }

    pub fn solve(&self, residuals: &[f64], ridge: f64) -> Result<WeakLearner> {
        if residuals.len() != self.n_rows() {
            return Err(Error::DimensionMismatch {
                expected: self.n_rows(),
                got: residuals.len(),
            });
        }
        if !(ridge >= 0.0 && ridge.is_finite()) {
            return Err(Error::Config(format!("ridge must be a finite non-negative number, got {ridge}")));
        }
        if residuals.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite residual".into()));
        }
        let n = residuals.len() as f64;
        let r_mean = residuals.iter().sum::<f64>() / n;
        let rc = DVector::from_iterator(residuals.len(), residuals.iter().map(|r| r - r_mean));

        let mut coeff = self.u.tr_mul(&rc);
        for (c, &s) in coeff.iter_mut().zip(self.singular.iter()) {
            *c *= if ridge > 0.0 {
                s / (s * s + ridge)
            } else if s > self.rank_tol {
                1.0 / s
            } else {
                0.0
            };
        }
        let w = self.v_t.tr_mul(&coeff);
        let bias = r_mean - w.dot(&self.col_mean);

        let mut out: Vec<f64> = w.iter().copied().collect();
        out.push(bias);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("least-squares solution is not finite".into()));
        }
        Ok(WeakLearner { w: out })
    }
}

/// `argmin_w sum_i (r_i - w . [x_i; 1])^2 + ridge * |w|^2`, bias unpenalized.
pub fn fit_weak_learner(x: &Array2<f64>, residuals: &[f64], ridge: f64) -> Result<WeakLearner> {
    if x.nrows() != residuals.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: residuals.len(),
        });
    }
    RidgeSolver::new(x)?.solve(residuals, ridge)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::Rng;

    /// Dense normal equations on `[X 1]` solved by Gaussian elimination with
    /// partial pivoting; independent of the SVD path.
    fn normal_equations(x: &Array2<f64>, r: &[f64], ridge: f64) -> Vec<f64> {
        let (n, k) = x.dim();
        let d = k + 1;
        let aug = |i: usize, j: usize| if j < k { x[[i, j]] } else { 1.0 };
        let mut a = vec![vec![0.0; d + 1]; d];
        for p in 0..d {
            for q in 0..d {
                a[p][q] = (0..n).map(|i| aug(i, p) * aug(i, q)).sum();
            }
            if p < k {
                a[p][p] += ridge;
            }
            a[p][d] = (0..n).map(|i| aug(i, p) * r[i]).sum();
        }
        for col in 0..d {
            let piv = (col..d).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
            a.swap(col, piv);
            for row in col + 1..d {
                let f = a[row][col] / a[col][col];
                for c in col..=d {
                    a[row][c] -= f * a[col][c];
                }
            }
        }
        let mut sol = vec![0.0; d];
        for row in (0..d).rev() {
            let s: f64 = (row + 1..d).map(|c| a[row][c] * sol[c]).sum();
            sol[row] = (a[row][d] - s) / a[row][row];
        }
        sol
    }

    fn random_system(seed: u64, n: usize, k: usize) -> (Array2<f64>, Vec<f64>) {
        let mut rng = crate::seed::rng(seed);
        let x = Array2::from_shape_fn((n, k), |_| rng.random_range(-1.0..1.0));
        let r = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        (x, r)
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        let den: f64 = b.iter().map(|q| q * q).sum::<f64>().sqrt().max(1e-300);
        num / den
    }

    #[test]
    fn zero_residuals_give_zero_learner() {
        let (x, _) = random_system(1, 6, 3);
        let w = fit_weak_learner(&x, &[0.0; 6], 0.5).unwrap();
        assert!(w.w.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn matches_normal_equations_on_full_rank_3x2() {
        let x = array![[1.0, 2.0], [0.5, -1.0], [3.0, 0.25]];
        let r = [1.0, -0.5, 2.0];
        let got = fit_weak_learner(&x, &r, 0.0).unwrap();
        let want = normal_equations(&x, &r, 0.0);
        assert!(rel_err(&got.w, &want) < 1e-10, "{:?} vs {want:?}", got.w);
    }

    #[test]
    fn matches_normal_equations_with_ridge() {
        for seed in 0..5 {
            let (x, r) = random_system(seed, 12, 4);
            let got = fit_weak_learner(&x, &r, 0.7).unwrap();
            let want = normal_equations(&x, &r, 0.7);
            assert!(rel_err(&got.w, &want) < 1e-10);
        }
    }

    #[test]
    fn huge_ridge_shrinks_weights_to_zero() {
        let (x, r) = random_system(2, 10, 4);
        let w = fit_weak_learner(&x, &r, 1e12).unwrap();
        assert!(w.weights().iter().all(|v| v.abs() < 1e-9));
        let mean = r.iter().sum::<f64>() / r.len() as f64;
        assert!((w.bias() - mean).abs() < 1e-9);
    }

    #[test]
    fn underdetermined_gives_minimum_norm_interpolant() {
        let (x, r) = random_system(3, 4, 9);
        let w = fit_weak_learner(&x, &r, 0.0).unwrap();
        // Interpolates the data.
        for i in 0..4 {
            let pred = w.score(x.row(i));
            assert!((pred - r[i]).abs() < 1e-10);
        }
        // Weights live in the row space of the centered design.
        let n = x.nrows() as f64;
        let means: Vec<f64> = x.columns().into_iter().map(|c| c.sum() / n).collect();
        let xc = DMatrix::from_fn(4, 9, |i, j| x[[i, j]] - means[j]);
        let wv = DVector::from_column_slice(w.weights());
        let projected = xc.transpose() * xc.clone().pseudo_inverse(1e-12).unwrap().transpose() * &wv;
        assert!((projected - wv).norm() < 1e-9);
    }

    #[test]
    fn rank_deficient_tall_system() {
        // Duplicate column: weight is split evenly under the minimum norm.
        let x = array![[1.0, 1.0], [2.0, 2.0], [3.0, 3.0], [5.0, 5.0]];
        let r = [2.0, 4.0, 6.0, 10.0];
        let w = fit_weak_learner(&x, &r, 0.0).unwrap();
        assert!((w.w[0] - 1.0).abs() < 1e-10 && (w.w[1] - 1.0).abs() < 1e-10);
        assert!(w.bias().abs() < 1e-10);
    }

    #[test]
    fn errors_are_explicit() {
        let (x, _) = random_system(4, 5, 2);
        assert!(matches!(fit_weak_learner(&x, &[1.0; 4], 0.0), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(fit_weak_learner(&x, &[f64::NAN; 5], 0.0), Err(Error::Numerical(_))));
        let mut bad = x.clone();
        bad[[0, 0]] = f64::INFINITY;
        assert!(matches!(fit_weak_learner(&bad, &[1.0; 5], 0.0), Err(Error::Numerical(_))));
        assert!(matches!(fit_weak_learner(&x, &[1.0; 5], -1.0), Err(Error::Config(_))));
    }
}
